#pragma once

#include <string>
#include <vector>

#include "btnet/image.hpp"

namespace btnet {

enum class Indicator { min, max, avg };
enum class Allocation { floor, near, ceil };

Indicator indicator_from_string(const std::string& s);
Allocation allocation_from_string(const std::string& s);
std::string to_string(Indicator mode);
std::string to_string(Allocation mode);

struct SelectionPolicy {
  Indicator indicator = Indicator::max;
  Allocation allocation = Allocation::ceil;  // the best-performing pairing
  std::vector<int> branch_set;               // strictly ascending

  void validate() const;
};

// the (W,H) statistic that stands in for the native resolution
double resolution_indicator(int h, int w, Indicator mode);

// nearest supported branch under the allocation rule; out-of-range indicators
// fall back to the closest end of the set, near-ties go to the larger branch
int allocate(double indicator, const SelectionPolicy& policy);

int select_branch(int h, int w, const SelectionPolicy& policy);

// anisotropic bilinear resize to the square branch input
Image prepare_input(const Image& img, int branch_r);

}  // namespace btnet
