#pragma once

#include <map>
#include <string>
#include <vector>

#include "btnet/model.hpp"

namespace btnet {

// Container layout, all integers little-endian:
//   "BTNT" | u16 format version | u32 metadata length | metadata JSON (UTF-8)
//   | raw IEEE-754 f32 payload, row-major, in metadata array order.
// Metadata holds only ints and strings; float-valued state travels as arrays.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct CheckpointData {
  std::string kind;  // "trunk", "btnet", "branch"
  ModelSpec spec;
  std::map<std::string, long long> ints;
  std::map<std::string, std::string> strings;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointData& d);
CheckpointData read_checkpoint(const std::string& path);

CheckpointData checkpoint_from_trunk(const TrunkModel& m);
CheckpointData checkpoint_from_btnet(const BTNetModel& m);
// branch parameters plus the resolution-r BN bank of the trunk suffix
CheckpointData checkpoint_from_branch(const BTNetModel& m, int r);

TrunkModel trunk_from_checkpoint(const CheckpointData& d);
BTNetModel btnet_from_checkpoint(const CheckpointData& d);
// overwrites the arrays named in a branch delta; everything else stays put
void apply_branch_delta(BTNetModel& m, const CheckpointData& d);

}  // namespace btnet
