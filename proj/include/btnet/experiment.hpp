#pragma once

// Experiment harness: balanced verification pairs over a held-out split,
// batched embedding extraction along the trunk and branch paths, and the
// cumulative-regime ladder with its compatibility metrics.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btnet/data.hpp"
#include "btnet/eval.hpp"
#include "btnet/model.hpp"
#include "btnet/train.hpp"

namespace btnet {

// every within-identity pair plus an equal number of sampled impostor pairs,
// deterministically shuffled so the verification folds stay balanced
struct PairSet {
  std::vector<std::pair<int, int>> idx;
  std::vector<bool> same;
};
PairSet balanced_pairs(const Dataset& d, std::uint64_t seed);

// canonical-path embeddings at S; images pass through via_r first when lower
std::vector<Embedding> embed_trunk_all(TrunkModel& m, const Dataset& d, int via_r,
                                       int batch = 64);

// branch-path embeddings: images resized to r, branch then trunk suffix;
// via_r > 0 inserts a down-sample to the probe's native size first
std::vector<Embedding> embed_branch_all(BTNetModel& m, const Dataset& d, int r, int batch = 64,
                                        int via_r = 0);

// pair scores with side a embedding the first index and side b the second
std::vector<std::pair<double, bool>> score_pairs(const std::vector<Embedding>& a,
                                                 const std::vector<Embedding>& b,
                                                 const PairSet& ps);

void split_scores(const std::vector<std::pair<double, bool>>& scored,
                  std::vector<double>* genuine, std::vector<double>* impostor);

// verification accuracy with side a at r_a and side b at r_b, one trunk model
double trunk_pair_accuracy(TrunkModel& m, const Dataset& d, const PairSet& ps, int r_a, int r_b);

struct LadderRow {
  std::string regime;
  double acc_cross = 0.0;  // gallery through the deployed trunk at S, probe at r
  double acc_same = 0.0;   // both sides through the regime's model at r
  long long stored_params = 0;
};

struct LadderResult {
  std::vector<LadderRow> rows;  // scratch, pretraining, bct, fix_trunk, distill
  CheckpointData trunk_ckpt;    // the deployed trunk every regime starts from
  double distill_cross_auc = 0.0;  // cross-model ROC-AUC of the distill row
  bool kappa_intact = false;       // frozen classifier bits survived training
};

struct LadderOptions {
  TrainConfig trunk_cfg = TrainConfig::desk_trunk();
  TrainConfig branch_cfg = TrainConfig::desk_branch();
  int branch_r = 8;
  std::uint64_t pair_seed = 7;
  std::uint64_t scratch_seed = 9001;  // fresh geometry for the scratch row
  std::string artifact_dir;           // when set, checkpoints are written here
  bool verbose = false;               // progress lines on stderr
};

LadderResult run_table3_ladder(const Dataset& train, const Dataset& eval_pairs,
                               const LadderOptions& opt);

}  // namespace btnet
