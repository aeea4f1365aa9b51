// Published accuracy table used by the gain-reproduction tooling: six
// resolution settings, five models, accuracies in percent. Gains recompute
// from the accuracy cells alone; tolerances absorb the two-decimal rounding
// of the source, which the near-zero 112&28 denominator amplifies.
#pragma once

#include <string>

namespace btnet {

struct PublishedSetting {
  const char* name;
  bool cross;   // cross-resolution column (denominator: multi-resolution model)
  double hr;    // fixed high-resolution model accuracy
  double base;  // gain denominator partner accuracy
};

inline constexpr PublishedSetting kPublishedSettings[6] = {
    {"112&7", true, 57.75, 65.85},  {"112&14", true, 81.02, 87.47},
    {"112&28", true, 95.90, 96.05}, {"7&7", false, 60.70, 62.57},
    {"14&14", false, 73.88, 78.00}, {"28&28", false, 93.58, 94.68},
};

struct PublishedRow {
  const char* model;
  double acc[6];
  double gain[6];
};

inline constexpr PublishedRow kPublishedRows[5] = {
    {"mm", {50.58, 49.90, 50.03, 62.57, 78.00, 94.68}, {-0.89, -4.82, -305.80, 1.00, 1.00, 1.00}},
    {"mr", {65.85, 87.47, 96.05, 61.02, 80.32, 95.12}, {1.00, 1.00, 1.00, 0.17, 1.56, 1.40}},
    {"mr_v2", {65.68, 87.13, 95.70, 60.82, 80.22, 95.63}, {0.98, 0.95, -1.33, 0.06, 1.54, 1.86}},
    {"mr_v3", {68.80, 88.13, 96.62, 61.62, 80.55, 94.78}, {1.36, 1.10, 4.80, 0.49, 1.62, 1.09}},
    {"bt", {86.10, 94.08, 96.65, 77.78, 90.90, 96.27}, {3.50, 2.02, 5.00, 9.13, 4.13, 2.45}},
};

inline double published_gain_tolerance(const std::string& setting) {
  return setting == "112&28" ? 0.5 : 0.01;
}

}  // namespace btnet
