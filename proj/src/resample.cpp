#include "btnet/resample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace btnet {

namespace {

struct AxisSample {
  int lo, hi;
  float frac;
};

// half-pixel centers: src = (dst + 0.5) * in/out - 0.5, edge clamped
AxisSample axis_sample(int dst, int in_size, int out_size) {
  const double src = (dst + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
  int lo = static_cast<int>(std::floor(src));
  float frac = static_cast<float>(src - lo);
  int hi = std::min(lo + 1, in_size - 1);
  lo = std::max(lo, 0);
  if (hi < lo) hi = lo;
  return {lo, hi, frac};
}

}  // namespace

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: output dims must be >= 1");
  Image out = Image::create(img.channels, out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const AxisSample ys = axis_sample(oy, img.height, out_h);
    for (int ox = 0; ox < out_w; ++ox) {
      const AxisSample xs = axis_sample(ox, img.width, out_w);
      for (int c = 0; c < img.channels; ++c) {
        const float top = img.at(c, ys.lo, xs.lo) * (1.0f - xs.frac) + img.at(c, ys.lo, xs.hi) * xs.frac;
        const float bot = img.at(c, ys.hi, xs.lo) * (1.0f - xs.frac) + img.at(c, ys.hi, xs.hi) * xs.frac;
        out.at(c, oy, ox) = std::clamp(top * (1.0f - ys.frac) + bot * ys.frac, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Image resize_nearest(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: output dims must be >= 1");
  Image out = Image::create(img.channels, out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) * static_cast<double>(img.height) / out_h - 0.5;
    const int iy = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, img.height - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) * static_cast<double>(img.width) / out_w - 0.5;
      const int ix = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) out.at(c, oy, ox) = img.at(c, iy, ix);
    }
  }
  return out;
}

std::vector<double> mixed_fourth_difference(const Image& img, int& out_h, int& out_w) {
  if (img.height < 3 || img.width < 3)
    throw std::invalid_argument("mixed_fourth_difference needs at least a 3x3 image");
  const Image g = to_gray(img);
  out_h = g.height - 2;
  out_w = g.width - 2;
  static const double kKernel[3][3] = {{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}};
  std::vector<double> field(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) acc += kKernel[dy][dx] * g.at(0, y + dy, x + dx);
      field[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  return field;
}

double error_upper_bound(const Image& img, BoundAggregate agg) {
  int h = 0, w = 0;
  const std::vector<double> field = mixed_fourth_difference(img, h, w);
  double acc = 0;
  for (double v : field) {
    const double b = std::fabs(v) / 64.0;
    if (agg == BoundAggregate::mean)
      acc += b;
    else
      acc = std::max(acc, b);
  }
  if (agg == BoundAggregate::mean) acc /= static_cast<double>(field.size());
  return acc;
}

ErrorCurve error_curve(const std::vector<Image>& images, const std::vector<int>& resolutions,
                       int canonical, BoundAggregate agg) {
  if (images.empty()) throw std::invalid_argument("error_curve needs at least one image");
  for (std::size_t i = 1; i < resolutions.size(); ++i)
    if (resolutions[i] <= resolutions[i - 1])
      throw std::invalid_argument("error_curve resolutions must be strictly ascending");
  for (int r : resolutions) {
    if (r < 3) throw std::invalid_argument("error_curve resolution below 3");
    if (r >= canonical) throw std::invalid_argument("error_curve resolutions must be below canonical");
  }
  for (const Image& img : images)
    if (img.height != canonical || img.width != canonical)
      throw std::invalid_argument("error_curve expects images at the canonical size");

  ErrorCurve curve;
  curve.resolutions = resolutions;
  curve.n_images = static_cast<int>(images.size());
  for (int r : resolutions) {
    double acc = 0;
    for (const Image& img : images) acc += error_upper_bound(resize_bilinear(img, r, r), agg);
    curve.mean_bound.push_back(acc / static_cast<double>(images.size()));
  }
  return curve;
}

void write_error_curve_csv(const std::string& path, const ErrorCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "resolution,mean_bound,n_images\n";
  for (std::size_t i = 0; i < curve.resolutions.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.9g,%d\n", curve.resolutions[i], curve.mean_bound[i],
                  curve.n_images);
    out << line;
  }
}

}  // namespace btnet
