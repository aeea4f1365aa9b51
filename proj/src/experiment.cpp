#include "btnet/experiment.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <stdexcept>

#include "btnet/checkpoint.hpp"
#include "btnet/resample.hpp"
#include "btnet/rng.hpp"

namespace btnet {

namespace {

void log_line(bool verbose, const std::string& msg) {
  if (verbose) std::cerr << "[ladder] " << msg << std::endl;
}

void maybe_write(const std::string& dir, const std::string& name, const CheckpointData& ck) {
  if (!dir.empty()) write_checkpoint(dir + "/" + name, ck);
}

// trunk-only parameter count (canonical bank, classifier excluded)
long long trunk_param_count(const TrunkModel& m) {
  BTNetModel w;
  w.trunk = clone_trunk(m);
  return count_params(w, CountMode::full_finetune, 0);
}

bool same_bits(const TensorF& a, const TensorF& b) {
  if (!a.defined() || !b.defined()) return false;
  const auto& va = a.values();
  const auto& vb = b.values();
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i] != vb[i]) return false;
  }
  return true;
}

}  // namespace

PairSet balanced_pairs(const Dataset& d, std::uint64_t seed) {
  const int n = static_cast<int>(d.samples.size());
  if (n < 2) throw std::invalid_argument("balanced_pairs: need at least two samples");
  std::vector<std::vector<int>> by_id(d.num_identities);
  for (int i = 0; i < n; ++i) by_id[d.samples[i].identity].push_back(i);

  std::vector<std::pair<int, int>> genuine;
  for (const auto& members : by_id) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        genuine.push_back({members[a], members[b]});
      }
    }
  }
  if (genuine.empty())
    throw std::invalid_argument("balanced_pairs: no identity has two samples");

  long long cross = 0;
  for (std::size_t a = 0; a < by_id.size(); ++a) {
    for (std::size_t b = a + 1; b < by_id.size(); ++b) {
      cross += static_cast<long long>(by_id[a].size()) * static_cast<long long>(by_id[b].size());
    }
  }
  if (cross < static_cast<long long>(genuine.size()))
    throw std::invalid_argument("balanced_pairs: not enough cross-identity pairs to balance");

  // rejection-sample distinct cross-identity pairs until the counts match
  Rng rng(Rng::substream_seed(seed, "impostor"));
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> impostor;
  while (impostor.size() < genuine.size()) {
    int i = static_cast<int>(rng.uniform_int(0, n - 1));
    int j = static_cast<int>(rng.uniform_int(0, n - 1));
    if (d.samples[i].identity == d.samples[j].identity) continue;
    std::pair<int, int> key{std::min(i, j), std::max(i, j)};
    if (!seen.insert(key).second) continue;
    impostor.push_back({i, j});
  }

  PairSet ps;
  ps.idx.reserve(genuine.size() * 2);
  ps.same.reserve(genuine.size() * 2);
  for (const auto& p : genuine) {
    ps.idx.push_back(p);
    ps.same.push_back(true);
  }
  for (const auto& p : impostor) {
    ps.idx.push_back(p);
    ps.same.push_back(false);
  }
  // shuffle so every accuracy fold sees both labels
  Rng sh(Rng::substream_seed(seed, "shuffle"));
  for (int k = static_cast<int>(ps.idx.size()) - 1; k > 0; --k) {
    int j = static_cast<int>(sh.uniform_int(0, k));
    std::swap(ps.idx[k], ps.idx[j]);
    bool t = ps.same[k];
    ps.same[k] = ps.same[j];
    ps.same[j] = t;
  }
  return ps;
}

std::vector<Embedding> embed_trunk_all(TrunkModel& m, const Dataset& d, int via_r, int batch) {
  const int S = m.spec.canonical_size;
  if (d.size != S)
    throw std::invalid_argument("embed_trunk_all: dataset size does not match the model");
  if (via_r < 1 || via_r > S)
    throw std::invalid_argument("embed_trunk_all: via_r out of range");
  if (batch < 1) throw std::invalid_argument("embed_trunk_all: batch must be positive");

  NoGradGuard ng;
  const std::size_t n = d.samples.size();
  std::vector<Embedding> out(n);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
    std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch));
    std::vector<Image> owned;
    owned.reserve(stop - start);
    std::vector<const Image*> ptrs;
    ptrs.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      if (via_r == S) {
        ptrs.push_back(&d.samples[i].image);
      } else {
        Image low = resize_bilinear(d.samples[i].image, via_r, via_r);
        owned.push_back(resize_bilinear(low, S, S));
        ptrs.push_back(&owned.back());
      }
    }
    TensorF x = batch_to_tensor(ptrs);
    TensorF emb = trunk_forward(m, x, S, BNMode::infer);
    const auto& v = emb.values();
    const int dim = m.spec.embedding_dim;
    for (std::size_t i = start; i < stop; ++i) {
      const std::size_t row = i - start;
      out[i].assign(v.begin() + row * dim, v.begin() + (row + 1) * dim);
    }
  }
  return out;
}

std::vector<Embedding> embed_branch_all(BTNetModel& m, const Dataset& d, int r, int batch,
                                        int via_r) {
  const int S = m.trunk.spec.canonical_size;
  if (d.size != S)
    throw std::invalid_argument("embed_branch_all: dataset size does not match the model");
  if (m.branches.find(r) == m.branches.end())
    throw std::invalid_argument("embed_branch_all: no branch for resolution " + std::to_string(r));
  if (batch < 1) throw std::invalid_argument("embed_branch_all: batch must be positive");
  if (via_r < 0 || via_r > S)
    throw std::invalid_argument("embed_branch_all: via_r out of range");

  NoGradGuard ng;
  const std::size_t n = d.samples.size();
  std::vector<Embedding> out(n);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
    std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch));
    std::vector<Image> owned;
    owned.reserve(2 * (stop - start));  // up to two resizes per sample
    std::vector<const Image*> ptrs;
    ptrs.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      const Image* src = &d.samples[i].image;
      if (via_r > 0 && via_r != S) {
        owned.push_back(resize_bilinear(*src, via_r, via_r));
        src = &owned.back();
      }
      if (src->height == r && src->width == r) {
        ptrs.push_back(src);
      } else {
        owned.push_back(resize_bilinear(*src, r, r));
        ptrs.push_back(&owned.back());
      }
    }
    TensorF x = batch_to_tensor(ptrs);
    TensorF emb = btnet_forward(m, x, r, BNMode::infer);
    const auto& v = emb.values();
    const int dim = m.trunk.spec.embedding_dim;
    for (std::size_t i = start; i < stop; ++i) {
      const std::size_t row = i - start;
      out[i].assign(v.begin() + row * dim, v.begin() + (row + 1) * dim);
    }
  }
  return out;
}

std::vector<std::pair<double, bool>> score_pairs(const std::vector<Embedding>& a,
                                                 const std::vector<Embedding>& b,
                                                 const PairSet& ps) {
  if (ps.idx.size() != ps.same.size())
    throw std::invalid_argument("score_pairs: pair set index/label mismatch");
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(ps.idx.size());
  for (std::size_t k = 0; k < ps.idx.size(); ++k) {
    const int i = ps.idx[k].first;
    const int j = ps.idx[k].second;
    if (i < 0 || j < 0 || i >= static_cast<int>(a.size()) || j >= static_cast<int>(b.size()))
      throw std::invalid_argument("score_pairs: pair index out of range");
    scored.push_back({cosine(a[i], b[j]), ps.same[k]});
  }
  return scored;
}

void split_scores(const std::vector<std::pair<double, bool>>& scored,
                  std::vector<double>* genuine, std::vector<double>* impostor) {
  genuine->clear();
  impostor->clear();
  for (const auto& s : scored) {
    (s.second ? genuine : impostor)->push_back(s.first);
  }
}

double trunk_pair_accuracy(TrunkModel& m, const Dataset& d, const PairSet& ps, int r_a, int r_b) {
  std::vector<Embedding> ea = embed_trunk_all(m, d, r_a);
  std::vector<Embedding> eb = (r_b == r_a) ? ea : embed_trunk_all(m, d, r_b);
  return verification_accuracy_scores(score_pairs(ea, eb, ps), 10);
}

LadderResult run_table3_ladder(const Dataset& train, const Dataset& eval_pairs,
                               const LadderOptions& opt) {
  const int S = opt.trunk_cfg.canonical_size;
  const int r = opt.branch_r;
  LadderResult res;

  log_line(opt.verbose, "training the deployed trunk");
  res.trunk_ckpt = train_trunk(opt.trunk_cfg, train);
  maybe_write(opt.artifact_dir, "trunk.ckpt", res.trunk_ckpt);
  TrunkModel trunk = trunk_from_checkpoint(res.trunk_ckpt);

  PairSet ps = balanced_pairs(eval_pairs, opt.pair_seed);
  std::vector<Embedding> gallery = embed_trunk_all(trunk, eval_pairs, S);

  auto eval_row = [&](const std::string& name, const std::vector<Embedding>& probe,
                      long long params) {
    LadderRow row;
    row.regime = name;
    row.acc_cross = verification_accuracy_scores(score_pairs(gallery, probe, ps), 10);
    row.acc_same = verification_accuracy_scores(score_pairs(probe, probe, ps), 10);
    row.stored_params = params;
    log_line(opt.verbose, name + ": cross " + std::to_string(row.acc_cross) + ", same " +
                              std::to_string(row.acc_same));
    return row;
  };

  {
    // a fresh trunk trained on r-sized views, no shared history with the gallery
    TrainConfig sc = opt.trunk_cfg;
    sc.seed = opt.scratch_seed;
    log_line(opt.verbose, "training scratch");
    CheckpointData ck = train_branch(res.trunk_ckpt, r, Regime::scratch(), sc, train);
    maybe_write(opt.artifact_dir, "scratch.ckpt", ck);
    TrunkModel m = trunk_from_checkpoint(ck);
    std::vector<Embedding> probe = embed_trunk_all(m, eval_pairs, r);
    res.rows.push_back(eval_row("scratch", probe, trunk_param_count(m)));
  }

  const Regime regimes[] = {Regime::pretraining(), Regime::bct(), Regime::fix_trunk(),
                            Regime::full()};
  for (const Regime& regime : regimes) {
    log_line(opt.verbose, "training " + regime.name());
    CheckpointData ck = train_branch(res.trunk_ckpt, r, regime, opt.branch_cfg, train);
    maybe_write(opt.artifact_dir, regime.name() + ".ckpt", ck);

    BTNetModel model;
    if (regime.freeze_trunk) {
      model = assemble_btnet(trunk, Rng::substream_seed(opt.branch_cfg.seed, "assemble"));
      apply_branch_delta(model, ck);
    } else {
      model = btnet_from_checkpoint(ck);
    }

    std::vector<Embedding> probe = embed_branch_all(model, eval_pairs, r);
    long long params = regime.freeze_trunk ? count_params(model, CountMode::branch_plus_bn, r)
                                           : trunk_param_count(model.trunk);
    res.rows.push_back(eval_row(regime.name(), probe, params));

    if (regime.distill) {
      std::vector<std::pair<double, bool>> scored = score_pairs(gallery, probe, ps);
      std::vector<double> genuine, impostor;
      split_scores(scored, &genuine, &impostor);
      res.distill_cross_auc = roc_auc(genuine, impostor);
      bool delta_clean = ck.find("trunk.kappa") == nullptr;
      res.kappa_intact = delta_clean && same_bits(model.trunk.kappa, trunk.kappa);
    }
  }
  return res;
}

}  // namespace btnet
