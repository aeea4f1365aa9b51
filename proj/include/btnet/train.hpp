#pragma once

// Trunk and branch training: SGD with momentum, quadratic lr decay with
// linear warmup, per-image resolution augmentation for the multi-resolution
// baselines, and the cumulative branch regimes (scratch, pretraining,
// frozen classifier, frozen trunk, distillation).

#include <cstdint>
#include <string>
#include <vector>

#include "btnet/checkpoint.hpp"
#include "btnet/data.hpp"
#include "btnet/losses.hpp"
#include "btnet/model.hpp"

namespace btnet {

enum class ResolutionScheme { none, equal_set, weighted_set, uniform_interval };

ResolutionScheme resolution_scheme_from_string(const std::string& s);
std::string to_string(ResolutionScheme s);

// {S, S/2, S/4, ...}, descending, `levels` entries
std::vector<int> halving_set(int canonical_size, int levels);

struct TrainConfig {
  int epochs = 15;
  int batch_size = 64;
  double base_lr = 0.1;
  int warmup_epochs = 1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  bool horizontal_flip = true;
  ResolutionScheme scheme = ResolutionScheme::none;
  std::vector<int> candidate_set;  // descending; the set schemes draw from it
  std::vector<double> weights;     // weighted_set probabilities, aligned
  int canonical_size = 32;
  ModelSpec model = ModelSpec::desk();  // must agree with canonical_size
  MarginKind loss_kind = MarginKind::curricular;
  EmaPlacement ema_placement = EmaPlacement::scale_batch;
  std::string log_path;  // per-step CSV when non-empty

  void validate() const;

  static TrainConfig desk_trunk();   // 15 epochs, batch 64, lr 0.1, warmup 1
  static TrainConfig desk_branch();  // 6 epochs, batch 64, lr 0.01, no warmup
  static TrainConfig paper_trunk();   // 25 epochs, batch 128, lr 0.2, warmup 2
  static TrainConfig paper_branch();  // 10 epochs, batch 128, lr 0.02, no warmup
};

// linear 0 -> base over the warmup, then base * (1 - progress)^2 down to 0
double lr_at(long long step, long long total_steps, long long warmup_steps, double base_lr);

int sample_resolution(const TrainConfig& cfg, Rng& rng);

// Cumulative training regimes; validate() admits exactly the five ladder rows.
struct Regime {
  bool from_scratch = false;
  bool init_from_trunk = false;
  bool freeze_classifier = false;
  bool freeze_trunk = false;
  bool distill = false;

  void validate() const;
  std::string name() const;

  static Regime scratch();
  static Regime pretraining();
  static Regime bct();          // pretraining + frozen classifier
  static Regime fix_trunk();    // bct + frozen trunk
  static Regime full();         // fix_trunk + branch distillation
};

// Canonical-path training at S with optional multi-resolution augmentation
// (each image down-sampled to its drawn r, then back up to S). The classifier
// head trains jointly and rides in the checkpoint.
CheckpointData train_trunk(const TrainConfig& cfg, const Dataset& data);

// As train_trunk with every image forced through resolution r.
CheckpointData train_mm(const TrainConfig& cfg, const Dataset& data, int r);

// Branch-path training at resolution r starting from a trunk checkpoint.
// Frozen-trunk regimes return a branch delta (branch + resolution-r BN bank);
// regimes that move the trunk return the full model.
CheckpointData train_branch(const CheckpointData& trunk_ckpt, int r, const Regime& regime,
                            const TrainConfig& cfg, const Dataset& data);

}  // namespace btnet
