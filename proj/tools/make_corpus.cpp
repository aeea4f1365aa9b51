// Regenerates data/corpus: grayscale textures with roughly 1/f^1.5 spectra,
// used by the resampling error-curve tests and the bundled reproduction runs.
// Output is deterministic for a given seed.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "btnet/image.hpp"
#include "btnet/rng.hpp"

int main(int argc, char** argv) {
  const int count = 24;
  const int size = 112;
  const std::string dir = argc > 1 ? argv[1] : "data/corpus";
  const std::uint64_t seed = 1234;

  for (int i = 0; i < count; ++i) {
    btnet::Rng rng(btnet::Rng::substream_seed(seed, "corpus") + static_cast<std::uint64_t>(i));
    struct Wave {
      double fx, fy, amp, phase;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 48; ++k) {
      double fx = 0, fy = 0;
      while (fx == 0 && fy == 0) {
        fx = static_cast<double>(rng.uniform_int(-28, 28));
        fy = static_cast<double>(rng.uniform_int(-28, 28));
      }
      const double f = std::sqrt(fx * fx + fy * fy);
      waves.push_back({fx, fy, 1.0 / std::pow(f, 1.5), rng.uniform() * 2.0 * M_PI});
    }

    btnet::Image img = btnet::Image::create(1, size, size);
    double lo = 1e30, hi = -1e30;
    std::vector<double> raw(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double v = 0;
        for (const Wave& w : waves)
          v += w.amp * std::cos(2.0 * M_PI * (w.fx * x + w.fy * y) / size + w.phase);
        raw[static_cast<std::size_t>(y) * size + x] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    const double span = hi > lo ? hi - lo : 1.0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        img.at(0, y, x) =
            static_cast<float>(0.02 + 0.96 * (raw[static_cast<std::size_t>(y) * size + x] - lo) / span);

    char name[64];
    std::snprintf(name, sizeof(name), "%s/texture_%02d.pgm", dir.c_str(), i);
    btnet::write_netpbm(name, img);
    std::printf("wrote %s\n", name);
  }
  return 0;
}
