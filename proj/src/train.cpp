#include "btnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <stdexcept>

#include "btnet/resample.hpp"

namespace btnet {

ResolutionScheme resolution_scheme_from_string(const std::string& s) {
  if (s == "none") return ResolutionScheme::none;
  if (s == "equal_set") return ResolutionScheme::equal_set;
  if (s == "weighted_set") return ResolutionScheme::weighted_set;
  if (s == "uniform_interval") return ResolutionScheme::uniform_interval;
  throw std::invalid_argument("unknown resolution scheme: " + s);
}

std::string to_string(ResolutionScheme s) {
  switch (s) {
    case ResolutionScheme::none: return "none";
    case ResolutionScheme::equal_set: return "equal_set";
    case ResolutionScheme::weighted_set: return "weighted_set";
    case ResolutionScheme::uniform_interval: return "uniform_interval";
  }
  throw std::invalid_argument("unknown resolution scheme");
}

std::vector<int> halving_set(int canonical_size, int levels) {
  if (levels < 1) throw std::invalid_argument("halving_set needs at least one level");
  std::vector<int> out;
  int r = canonical_size;
  for (int i = 0; i < levels; ++i) {
    if (r < 1 || (i + 1 < levels && r % 2 != 0))
      throw std::invalid_argument("canonical size does not halve cleanly");
    out.push_back(r);
    r /= 2;
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (base_lr <= 0.0) throw std::invalid_argument("base_lr must be positive");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw std::invalid_argument("warmup must fit inside the schedule");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  if (canonical_size < 4) throw std::invalid_argument("canonical size too small");
  model.validate();
  if (model.canonical_size != canonical_size)
    throw std::invalid_argument("model spec disagrees with canonical size");
  if (scheme == ResolutionScheme::equal_set || scheme == ResolutionScheme::weighted_set) {
    if (candidate_set.empty()) throw std::invalid_argument("set scheme needs a candidate set");
    for (std::size_t i = 0; i < candidate_set.size(); ++i) {
      if (candidate_set[i] < 1 || candidate_set[i] > canonical_size)
        throw std::invalid_argument("candidate resolution out of range");
      if (i > 0 && candidate_set[i] >= candidate_set[i - 1])
        throw std::invalid_argument("candidate set must be strictly descending");
    }
  }
  if (scheme == ResolutionScheme::weighted_set) {
    if (weights.size() != candidate_set.size())
      throw std::invalid_argument("weights must align with the candidate set");
    double sum = 0.0;
    for (double w : weights) {
      if (w <= 0.0) throw std::invalid_argument("weights must be positive");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("weights must sum to 1");
  }
}

TrainConfig TrainConfig::desk_trunk() {
  TrainConfig c;
  c.epochs = 15;
  c.batch_size = 64;
  c.base_lr = 0.1;
  c.warmup_epochs = 1;
  c.canonical_size = 32;
  c.model = ModelSpec::desk();
  c.candidate_set = halving_set(32, 4);
  c.weights = {0.3 / 0.9, 0.25 / 0.9, 0.2 / 0.9, 0.15 / 0.9};
  return c;
}

TrainConfig TrainConfig::desk_branch() {
  TrainConfig c = desk_trunk();
  c.epochs = 6;
  c.base_lr = 0.01;
  c.warmup_epochs = 0;
  return c;
}

TrainConfig TrainConfig::paper_trunk() {
  TrainConfig c;
  c.epochs = 25;
  c.batch_size = 128;
  c.base_lr = 0.2;
  c.warmup_epochs = 2;
  c.canonical_size = 112;
  c.model = ModelSpec::paper();
  c.candidate_set = halving_set(112, 5);
  c.weights = {0.3, 0.25, 0.2, 0.15, 0.1};
  return c;
}

TrainConfig TrainConfig::paper_branch() {
  TrainConfig c = paper_trunk();
  c.epochs = 10;
  c.base_lr = 0.02;
  c.warmup_epochs = 0;
  return c;
}

double lr_at(long long step, long long total_steps, long long warmup_steps, double base_lr) {
  if (total_steps < 1) throw std::invalid_argument("empty schedule");
  if (step < 0 || step >= total_steps) throw std::invalid_argument("step outside the schedule");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("warmup outside the schedule");
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / warmup_steps;
  if (total_steps - warmup_steps == 1) return base_lr;  // single decay step
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps - 1);
  const double d = 1.0 - progress;
  return base_lr * d * d;
}

int sample_resolution(const TrainConfig& cfg, Rng& rng) {
  switch (cfg.scheme) {
    case ResolutionScheme::none:
      return cfg.canonical_size;
    case ResolutionScheme::equal_set:
      return cfg.candidate_set[rng.uniform_int(0, static_cast<int>(cfg.candidate_set.size()) - 1)];
    case ResolutionScheme::weighted_set: {
      const double u = rng.uniform();
      double acc = 0.0;
      for (std::size_t i = 0; i < cfg.weights.size(); ++i) {
        acc += cfg.weights[i];
        if (u < acc) return cfg.candidate_set[i];
      }
      return cfg.candidate_set.back();  // u landed in rounding slack
    }
    case ResolutionScheme::uniform_interval:
      return rng.uniform_int(4, cfg.canonical_size);
  }
  throw std::invalid_argument("unknown resolution scheme");
}

void Regime::validate() const {
  if (from_scratch) {
    if (init_from_trunk || freeze_classifier || freeze_trunk || distill)
      throw std::invalid_argument("a scratch regime carries no other flags");
    return;
  }
  if (!init_from_trunk)
    throw std::invalid_argument("regime must either start from scratch or from the trunk");
  if (freeze_trunk && !freeze_classifier)
    throw std::invalid_argument("a frozen trunk requires the frozen classifier");
  if (distill && !freeze_trunk) throw std::invalid_argument("distillation requires a frozen trunk");
}

std::string Regime::name() const {
  validate();
  if (from_scratch) return "scratch";
  if (distill) return "distill";
  if (freeze_trunk) return "fix_trunk";
  if (freeze_classifier) return "bct";
  return "pretraining";
}

Regime Regime::scratch() {
  Regime r;
  r.from_scratch = true;
  return r;
}
Regime Regime::pretraining() {
  Regime r;
  r.init_from_trunk = true;
  return r;
}
Regime Regime::bct() {
  Regime r = pretraining();
  r.freeze_classifier = true;
  return r;
}
Regime Regime::fix_trunk() {
  Regime r = bct();
  r.freeze_trunk = true;
  return r;
}
Regime Regime::full() {
  Regime r = fix_trunk();
  r.distill = true;
  return r;
}

namespace {

// Momentum SGD over explicit tensor handles. Parameters that received no
// gradient this step (off-path or frozen) are left untouched entirely.
struct Sgd {
  float momentum = 0.0f;
  float weight_decay = 0.0f;
  std::vector<TensorF> params;
  std::vector<std::vector<float>> velocity;
  std::set<const void*> seen;

  void add(const TensorF& t) {
    if (!seen.insert(t.node().get()).second) return;
    params.push_back(t);
    velocity.emplace_back(t.numel(), 0.0f);
  }

  void step(float lr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      TensorF& p = params[i];
      if (!p.has_grad()) continue;
      const std::vector<float>& g = p.grad();
      std::vector<float>& w = p.mutable_values();
      std::vector<float>& v = velocity[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        v[k] = momentum * v[k] - lr * (g[k] + weight_decay * w[k]);
        w[k] += v[k];
      }
      p.zero_grad();
    }
  }
};

struct StepLog {
  std::ofstream out;

  explicit StepLog(const std::string& path) {
    if (path.empty()) return;
    out.open(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write training log " + path);
    out << "step,lr,loss_influence,loss_distill,loss_total\n" << std::setprecision(10);
  }

  void row(long long step, double lr, double infl, double dist, double total) {
    if (out.is_open())
      out << step << ',' << lr << ',' << infl << ',' << dist << ',' << total << '\n';
  }
};

std::vector<int> epoch_order(int n, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = rng.uniform_int(0, i);
    std::swap(order[i], order[j]);
  }
  return order;
}

void check_finite(double loss, long long step) {
  if (!std::isfinite(loss))
    throw std::runtime_error("training diverged at step " + std::to_string(step) +
                             " (loss = " + std::to_string(loss) + ")");
}

void check_dataset(const TrainConfig& cfg, const Dataset& data) {
  if (data.samples.empty()) throw std::invalid_argument("empty dataset");
  if (data.size != cfg.canonical_size)
    throw std::invalid_argument("dataset resolution disagrees with the canonical size");
  if (data.num_identities < 2) throw std::invalid_argument("need at least two identities");
  if (static_cast<int>(data.samples.size()) < cfg.batch_size)
    throw std::invalid_argument("dataset smaller than one batch");
}

// Canonical-path training: images at S, optionally routed through a lower
// resolution (down then back up). forced_r = 0 draws from the scheme.
CheckpointData run_canonical(const TrainConfig& cfg, const Dataset& data, int forced_r) {
  cfg.validate();
  check_dataset(cfg, data);
  const int S = cfg.canonical_size;
  if (forced_r != 0 && (forced_r < 1 || forced_r > S))
    throw std::invalid_argument("forced resolution out of range");

  TrunkModel m = build_trunk(cfg.model, Rng::substream_seed(cfg.seed, "init"));
  MarginHead head = make_margin_head(data.num_identities, cfg.model.embedding_dim, cfg.loss_kind,
                                     Rng::substream_seed(cfg.seed, "head"));
  head.placement = cfg.ema_placement;
  m.kappa = head.weights;  // shared handle; the checkpoint carries it

  Sgd opt;
  opt.momentum = static_cast<float>(cfg.momentum);
  opt.weight_decay = static_cast<float>(cfg.weight_decay);
  visit_arrays(m, [&](ArrayRef a) {
    if (!a.tensor) return;
    a.tensor->set_requires_grad(true);
    opt.add(*a.tensor);
  });

  const int steps_per_epoch = static_cast<int>(data.samples.size()) / cfg.batch_size;
  const long long total_steps = static_cast<long long>(steps_per_epoch) * cfg.epochs;
  const long long warmup_steps = static_cast<long long>(steps_per_epoch) * cfg.warmup_epochs;
  StepLog log(cfg.log_path);

  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng ep_rng = Rng::substream(cfg.seed, "epoch" + std::to_string(epoch));
    const std::vector<int> order = epoch_order(static_cast<int>(data.samples.size()), ep_rng);
    for (int b = 0; b < steps_per_epoch; ++b) {
      std::vector<Image> views;
      std::vector<int> labels;
      views.reserve(cfg.batch_size);
      for (int k = 0; k < cfg.batch_size; ++k) {
        const Sample& s = data.samples[order[b * cfg.batch_size + k]];
        Image view = s.image;
        if (cfg.horizontal_flip && ep_rng.bernoulli(0.5)) view = flip_horizontal(view);
        const int r = forced_r != 0 ? forced_r
                                    : (cfg.scheme == ResolutionScheme::none
                                           ? S
                                           : sample_resolution(cfg, ep_rng));
        if (r != S) view = resize_bilinear(resize_bilinear(view, r, r), S, S);
        views.push_back(std::move(view));
        labels.push_back(s.identity);
      }
      std::vector<const Image*> ptrs;
      for (const Image& v : views) ptrs.push_back(&v);
      TensorF x = batch_to_tensor(ptrs);

      TensorF emb = trunk_forward(m, x, S, BNMode::train);
      if (head.kind == MarginKind::curricular) {
        NoGradGuard ng;
        update_curricular(head, cos_logits(emb, head.weights), labels);
      }
      TensorF loss = margin_loss(emb, labels, head);
      const double lv = loss.values()[0];
      check_finite(lv, step);
      const double lr = lr_at(step, total_steps, warmup_steps, cfg.base_lr);
      log.row(step, lr, lv, 0.0, lv);
      backward(loss);
      opt.step(static_cast<float>(lr));
      ++step;
    }
  }

  CheckpointData out = checkpoint_from_trunk(m);
  out.ints["num_identities"] = data.num_identities;
  out.ints["seed"] = static_cast<long long>(cfg.seed);
  if (forced_r != 0) out.ints["resolution"] = forced_r;
  out.strings["loss_kind"] = to_string(cfg.loss_kind);
  out.strings["scheme"] = forced_r != 0 ? "fixed" : to_string(cfg.scheme);
  out.arrays.push_back({"state.curricular_t", {1}, {head.t}});
  return out;
}

}  // namespace

CheckpointData train_trunk(const TrainConfig& cfg, const Dataset& data) {
  return run_canonical(cfg, data, 0);
}

CheckpointData train_mm(const TrainConfig& cfg, const Dataset& data, int r) {
  if (cfg.scheme != ResolutionScheme::none)
    throw std::invalid_argument("fixed-resolution training ignores schemes; configure none");
  if (r < 1 || r > cfg.canonical_size) throw std::invalid_argument("resolution out of range");
  return run_canonical(cfg, data, r);
}

CheckpointData train_branch(const CheckpointData& trunk_ckpt, int r, const Regime& regime,
                            const TrainConfig& cfg, const Dataset& data) {
  regime.validate();
  cfg.validate();
  check_dataset(cfg, data);
  if (regime.from_scratch) return run_canonical(cfg, data, r);

  TrunkModel trunk = trunk_from_checkpoint(trunk_ckpt);
  if (!trunk.kappa.defined())
    throw std::invalid_argument("trunk checkpoint lacks the classifier");
  if (trunk.kappa.shape()[0] != data.num_identities)
    throw std::invalid_argument("classifier identity count disagrees with the dataset");
  const int S = cfg.canonical_size;
  if (trunk.spec.canonical_size != S)
    throw std::invalid_argument("trunk canonical size disagrees with the config");

  if (cfg.scheme != ResolutionScheme::none)
    throw std::invalid_argument("branch training is fixed-resolution; configure scheme none");
  BTNetModel m = assemble_btnet(trunk, Rng::substream_seed(cfg.seed, "assemble"));
  if (!m.branches.count(r)) throw std::invalid_argument("no branch at resolution " + std::to_string(r));

  MarginHead head;
  head.weights = m.trunk.kappa;
  head.kind = cfg.loss_kind;
  head.placement = cfg.ema_placement;
  if (const NamedArray* st = trunk_ckpt.find("state.curricular_t")) head.t = st->data.at(0);
  if (regime.freeze_classifier) freeze_head(head);

  Sgd opt;
  opt.momentum = static_cast<float>(cfg.momentum);
  opt.weight_decay = static_cast<float>(cfg.weight_decay);
  const std::string branch_prefix = "branch" + std::to_string(r) + ".";
  visit_arrays(m, [&](ArrayRef a) {
    if (!a.tensor) return;
    bool trainable;
    if (a.name.rfind("branch", 0) == 0) {
      trainable = a.name.rfind(branch_prefix, 0) == 0;
    } else if (a.name == "trunk.kappa") {
      trainable = false;  // handled through the head below
    } else if (regime.freeze_trunk) {
      int res = 0;
      trainable = is_bn_array(a.name, &res) && res == r;
    } else {
      trainable = true;
    }
    a.tensor->set_requires_grad(trainable);
    if (trainable) opt.add(*a.tensor);
  });
  if (!regime.freeze_classifier) {
    head.weights.set_requires_grad(true);
    opt.add(head.weights);
  }

  const int steps_per_epoch = static_cast<int>(data.samples.size()) / cfg.batch_size;
  const long long total_steps = static_cast<long long>(steps_per_epoch) * cfg.epochs;
  const long long warmup_steps = static_cast<long long>(steps_per_epoch) * cfg.warmup_epochs;
  StepLog log(cfg.log_path);
  BranchNet& branch = m.branches.at(r);

  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng ep_rng = Rng::substream(cfg.seed, "epoch" + std::to_string(epoch));
    const std::vector<int> order = epoch_order(static_cast<int>(data.samples.size()), ep_rng);
    for (int b = 0; b < steps_per_epoch; ++b) {
      std::vector<Image> hr_views, lr_views;
      std::vector<int> labels;
      for (int k = 0; k < cfg.batch_size; ++k) {
        const Sample& s = data.samples[order[b * cfg.batch_size + k]];
        Image view = s.image;
        if (cfg.horizontal_flip && ep_rng.bernoulli(0.5)) view = flip_horizontal(view);
        lr_views.push_back(resize_bilinear(view, r, r));
        if (regime.distill) hr_views.push_back(std::move(view));
        labels.push_back(s.identity);
      }
      std::vector<const Image*> lr_ptrs;
      for (const Image& v : lr_views) lr_ptrs.push_back(&v);
      TensorF x_r = batch_to_tensor(lr_ptrs);

      TensorF z_r = branch_forward(branch, x_r, BNMode::train);
      TensorF emb = trunk_suffix(m.trunk, z_r, r, r, BNMode::train);

      TensorF infl;
      if (regime.freeze_classifier) {
        infl = influence_loss(emb, labels, head);
      } else {
        if (head.kind == MarginKind::curricular) {
          NoGradGuard ng;
          update_curricular(head, cos_logits(emb, head.weights), labels);
        }
        infl = margin_loss(emb, labels, head);
      }

      TensorF total = infl;
      double dist_v = 0.0;
      if (regime.distill) {
        std::vector<const Image*> hr_ptrs;
        for (const Image& v : hr_views) hr_ptrs.push_back(&v);
        TensorF z_s = trunk_tap(trunk, batch_to_tensor(hr_ptrs), r);
        TensorF dist = branch_distill_loss(z_r, z_s);
        dist_v = dist.values()[0];
        total = total_loss(infl, dist, 0.5f);
      }

      const double total_v = total.values()[0];
      check_finite(total_v, step);
      const double lr = lr_at(step, total_steps, warmup_steps, cfg.base_lr);
      log.row(step, lr, infl.values()[0], dist_v, total_v);
      backward(total);
      opt.step(static_cast<float>(lr));
      ++step;
    }
  }

  CheckpointData out =
      regime.freeze_trunk ? checkpoint_from_branch(m, r) : checkpoint_from_btnet(m);
  out.ints["resolution"] = r;
  out.ints["seed"] = static_cast<long long>(cfg.seed);
  out.strings["regime"] = regime.name();
  if (!regime.freeze_trunk) out.arrays.push_back({"state.curricular_t", {1}, {head.t}});
  return out;
}

}  // namespace btnet
