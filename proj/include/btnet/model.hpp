#pragma once

// Trunk / branch architecture: a small residual encoder whose stride schedule
// exposes one tap point per resolution, branch stacks that reproduce each tap
// shape from a same-sized input without downsampling, and per-resolution BN
// banks (the only state duplicated across resolutions). Includes parameter
// and FLOP accounting for every resolution path.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "btnet/tensor.hpp"

namespace btnet {

struct StageSpec {
  int channels = 0;
  int blocks = 0;
  int stride = 2;  // applied by the first block of the stage
};

struct ModelSpec {
  int canonical_size = 32;  // S
  int stem_channels = 16;
  int stem_kernel = 3;
  int stem_stride = 1;
  std::vector<StageSpec> stages;
  int embedding_dim = 64;

  static ModelSpec desk();   // S=32, stages 32/64/128, 64-d embedding
  static ModelSpec paper();  // S=112 preset mirroring the full-scale layout

  void validate() const;
  // tap resolutions, descending: S (post-stem), then one per stage
  std::vector<int> tap_resolutions() const;
  // resolution -> channel count at that tap
  std::map<int, int> tap_channels() const;
};

// One BN layer holding per-resolution parameter sets. Key = resolution tag;
// the canonical-size key is the bank trained with the trunk.
struct BNBank {
  int channels = 0;
  std::map<int, BNParams<float>> banks;

  static BNBank init(int channels, int resolution);
  BNParams<float>& at(int resolution);
  const BNParams<float>& at(int resolution) const;
  void add_bank_copy(int new_resolution, int from_resolution);
};

struct ResBlock {
  int in_ch = 0, out_ch = 0, stride = 1;
  TensorF conv1, conv2;  // 3x3, bias-free (BN follows)
  bool has_proj = false;
  TensorF proj;  // 1x1 shortcut projection when shape changes
  BNBank bn1, bn2, bnp;
};

struct TrunkModel {
  ModelSpec spec;
  TensorF stem_w;
  BNBank stem_bn;
  std::vector<std::vector<ResBlock>> stages;
  TensorF embed_w, embed_b;  // C_last -> C_emb
  TensorF kappa;             // margin-head weights (num_ids x C_emb); undefined until trained
};

struct BranchNet {
  int resolution = 0;
  TensorF stem_w;
  BNBank stem_bn;
  std::vector<ResBlock> units;  // one stride-1 unit per covered stage
};

struct BTNetModel {
  TrunkModel trunk;
  std::map<int, BranchNet> branches;
};

TrunkModel build_trunk(const ModelSpec& spec, std::uint64_t seed);

// init_from copies the trunk prefix weights (stride changes keep conv shapes);
// pass nullptr for a fresh He-normal branch.
BranchNet build_branch(const ModelSpec& spec, int r, std::uint64_t seed,
                       const TrunkModel* init_from);

// Deep-copies the trunk, builds one branch per tap resolution, and clones the
// canonical BN bank into a resolution-r bank for every BN layer on the T_r
// suffix. Verifies branch output shapes against the tap shapes.
BTNetModel assemble_btnet(const TrunkModel& trunk, std::uint64_t seed);

TrunkModel clone_trunk(const TrunkModel& m);
BranchNet clone_branch(const BranchNet& b);
BTNetModel clone_btnet(const BTNetModel& m);

// Full trunk pass at the canonical size: stem, stages, pooling, embedding,
// l2_normalize. bank_r picks the BN parameter set (canonical S for the plain
// trunk path).
TensorF trunk_forward(TrunkModel& m, const TensorF& x, int bank_r, BNMode mode);

// Intermediate activation at tap r for canonical-size input; inference-mode
// BN with the canonical bank, no gradient recording (distillation target).
TensorF trunk_tap(TrunkModel& m, const TensorF& x, int r);

// Runs the trunk from the tap-r activation to the embedding with bank_r.
TensorF trunk_suffix(TrunkModel& m, const TensorF& tap_act, int r, int bank_r, BNMode mode);

TensorF branch_forward(BranchNet& b, const TensorF& x, BNMode mode);

// T_r(B_r(x)): branch then trunk suffix, resolution-r BN bank throughout.
TensorF btnet_forward(BTNetModel& m, const TensorF& x, int r, BNMode mode);

// Stored-array enumeration in a fixed order; the basis for checkpointing,
// parameter counting, and optimizer walks.
struct ArrayRef {
  std::string name;
  TensorF* tensor = nullptr;         // conv / linear / gamma / beta
  std::vector<float>* raw = nullptr; // running stats
  std::vector<int> shape;
  std::size_t size() const;
  float* data();
  const float* data() const;
};

void visit_arrays(TrunkModel& m, const std::function<void(ArrayRef)>& fn);
void visit_arrays(BranchNet& b, const std::function<void(ArrayRef)>& fn);
void visit_arrays(BTNetModel& m, const std::function<void(ArrayRef)>& fn);

// true for BN state arrays; stores their bank resolution tag
bool is_bn_array(const std::string& name, int* resolution);

enum class CountMode { full_finetune, branch_plus_bn };

// full_finetune counts every trunk backbone value (convs, embedding, the
// canonical BN bank; the classifier is excluded). branch_plus_bn(r) counts
// the branch's stored values plus the resolution-r BN bank of the T_r suffix.
long long count_params(const BTNetModel& m, CountMode mode, int r = 0);

struct FlopReport {
  std::vector<std::pair<std::string, long long>> items;
  long long total = 0;
};

// Multiply-add convention, per single image:
//   conv 2*K^2*Cin*Cout*Ho*Wo, linear 2*in*out, BN 2/elem, ReLU 1/elem,
//   residual add 1/elem, global pool HW+1 per channel, l2_normalize 3*C.
FlopReport count_flops(const BTNetModel& m, int r);

}  // namespace btnet
