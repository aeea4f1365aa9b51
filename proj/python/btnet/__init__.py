"""Branch-trunk network toolkit.

Cross-resolution recognition with resolution-specific branch subnetworks
feeding a shared trunk. The compiled extension carries the implementation;
this package re-exports its surface.
"""

try:
    from ._btnet import *  # noqa: F401,F403  (installed layout)
    from ._btnet import __version__  # noqa: F401
except ImportError:  # development layout: extension on sys.path next to the build
    from _btnet import *  # noqa: F401,F403
    from _btnet import __version__  # noqa: F401
