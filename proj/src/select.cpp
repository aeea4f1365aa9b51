#include "btnet/select.hpp"

#include <cmath>
#include <stdexcept>

#include "btnet/resample.hpp"

namespace btnet {

Indicator indicator_from_string(const std::string& s) {
  if (s == "min") return Indicator::min;
  if (s == "max") return Indicator::max;
  if (s == "avg") return Indicator::avg;
  throw std::invalid_argument("unknown indicator: " + s);
}

Allocation allocation_from_string(const std::string& s) {
  if (s == "floor") return Allocation::floor;
  if (s == "near") return Allocation::near;
  if (s == "ceil") return Allocation::ceil;
  throw std::invalid_argument("unknown allocation: " + s);
}

std::string to_string(Indicator mode) {
  switch (mode) {
    case Indicator::min:
      return "min";
    case Indicator::max:
      return "max";
    case Indicator::avg:
      return "avg";
  }
  throw std::invalid_argument("unknown indicator");
}

std::string to_string(Allocation mode) {
  switch (mode) {
    case Allocation::floor:
      return "floor";
    case Allocation::near:
      return "near";
    case Allocation::ceil:
      return "ceil";
  }
  throw std::invalid_argument("unknown allocation");
}

void SelectionPolicy::validate() const {
  if (branch_set.empty()) throw std::invalid_argument("branch set must be non-empty");
  for (std::size_t i = 0; i < branch_set.size(); ++i) {
    if (branch_set[i] < 1) throw std::invalid_argument("branch resolutions must be positive");
    if (i > 0 && branch_set[i] <= branch_set[i - 1])
      throw std::invalid_argument("branch set must be strictly ascending");
  }
}

double resolution_indicator(int h, int w, Indicator mode) {
  if (h < 1 || w < 1) throw std::invalid_argument("image sides must be positive");
  switch (mode) {
    case Indicator::min:
      return static_cast<double>(std::min(h, w));
    case Indicator::max:
      return static_cast<double>(std::max(h, w));
    case Indicator::avg:
      return (static_cast<double>(h) + static_cast<double>(w)) / 2.0;
  }
  throw std::invalid_argument("unknown indicator");
}

int allocate(double indicator, const SelectionPolicy& policy) {
  policy.validate();
  const std::vector<int>& set = policy.branch_set;
  switch (policy.allocation) {
    case Allocation::floor: {
      int chosen = set.front();
      for (int b : set)
        if (b <= indicator) chosen = b;
      return chosen;
    }
    case Allocation::ceil: {
      for (int b : set)
        if (b >= indicator) return b;
      return set.back();
    }
    case Allocation::near: {
      int chosen = set.front();
      double best = std::fabs(set.front() - indicator);
      for (int b : set) {
        const double d = std::fabs(b - indicator);
        if (d < best || (d == best && b > chosen)) {
          best = d;
          chosen = b;
        }
      }
      return chosen;
    }
  }
  throw std::invalid_argument("unknown allocation");
}

int select_branch(int h, int w, const SelectionPolicy& policy) {
  return allocate(resolution_indicator(h, w, policy.indicator), policy);
}

Image prepare_input(const Image& img, int branch_r) {
  if (branch_r < 1) throw std::invalid_argument("branch resolution must be positive");
  if (img.height == branch_r && img.width == branch_r) return img;
  return resize_bilinear(img, branch_r, branch_r);
}

}  // namespace btnet
