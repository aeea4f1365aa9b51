#pragma once

// Bilinear / nearest resampling (half-pixel centers, edge clamp) and the
// interpolation-error upper-bound estimator built on the discrete mixed
// fourth difference.

#include <string>
#include <vector>

#include "btnet/image.hpp"

namespace btnet {

Image resize_bilinear(const Image& img, int out_h, int out_w);
Image resize_nearest(const Image& img, int out_h, int out_w);

// Valid-region correlation of the grayscale image with
//   [[1,-2,1],[-2,4,-2],[1,-2,1]]
// (RGB collapses to channel mean first). Output is (H-2) x (W-2) row-major.
std::vector<double> mixed_fourth_difference(const Image& img, int& out_h, int& out_w);

enum class BoundAggregate { mean, max };

// Interpolation-error bound |d4|/64 aggregated over the valid region.
double error_upper_bound(const Image& img, BoundAggregate agg = BoundAggregate::mean);

struct ErrorCurve {
  std::vector<int> resolutions;
  std::vector<double> mean_bound;
  int n_images = 0;
};

// For each resolution r, downsamples every image to r x r and averages the
// error bound computed on the low-resolution grid.
ErrorCurve error_curve(const std::vector<Image>& images, const std::vector<int>& resolutions,
                       int canonical, BoundAggregate agg = BoundAggregate::mean);

void write_error_curve_csv(const std::string& path, const ErrorCurve& curve);

}  // namespace btnet
