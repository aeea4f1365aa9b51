// Acceptance harness: ten end-to-end checks, one pass/fail line each.
// Cheap numeric checks run first; the two training phases (regime ladder,
// baseline phenomenology) dominate the runtime and share one synthetic
// dataset. Exit status is nonzero when any criterion fails.
//
// Usage: acceptance [corpus_dir] [artifact_dir]

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "btnet/checkpoint.hpp"
#include "btnet/data.hpp"
#include "btnet/eval.hpp"
#include "btnet/experiment.hpp"
#include "btnet/image.hpp"
#include "btnet/losses.hpp"
#include "btnet/model.hpp"
#include "btnet/published.hpp"
#include "btnet/resample.hpp"
#include "btnet/rng.hpp"
#include "btnet/select.hpp"
#include "btnet/tensor.hpp"
#include "btnet/train.hpp"

namespace fs = std::filesystem;
using namespace btnet;

namespace {

struct Check {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << "\n"; }

std::string fmt(double v, int prec = 2) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// criterion 1: central finite differences in double

struct GradStats {
  double max_rel = 0.0;
  int instances = 0;
};

// build() must rebuild the loss from the leaves' current values on each call
template <typename F>
void fd_instance(GradStats& st, std::vector<TensorD>& leaves, F&& build) {
  for (auto& l : leaves) l.zero_grad();
  TensorD loss = build();
  backward(loss);
  const double eps = 1e-4;
  for (auto& leaf : leaves) {
    if (!leaf.has_grad()) throw std::runtime_error("finite differences: leaf missing gradient");
    const std::vector<double> g = leaf.grad();
    for (std::size_t i = 0; i < leaf.numel(); ++i) {
      const double orig = leaf.mutable_values()[i];
      leaf.mutable_values()[i] = orig + eps;
      const double up = build().item();
      leaf.mutable_values()[i] = orig - eps;
      const double dn = build().item();
      leaf.mutable_values()[i] = orig;
      const double num = (up - dn) / (2 * eps);
      const double rel =
          std::fabs(g[i] - num) / std::max({std::fabs(num), std::fabs(g[i]), 1e-2});
      st.max_rel = std::max(st.max_rel, rel);
    }
  }
  ++st.instances;
}

TensorD leaf_randn(Shape shape, Rng& rng, double stddev = 1.0) {
  TensorD t = TensorD::randn(std::move(shape), rng, stddev);
  t.set_requires_grad(true);
  return t;
}

// keeps piecewise ops away from their kinks during the central differences
void push_off(TensorD& t, double gap, std::vector<double> kinks) {
  for (auto& v : t.mutable_values())
    for (double k : kinks)
      if (std::fabs(v - k) < gap) v = k + (v >= k ? gap * 2 : -gap * 2);
}

// margin-head data far from the curricular easy/hard boundary, so the
// differences never flip a branch
bool branch_safe(const TensorD& cos, const std::vector<int>& labels, double m, double gap) {
  const int v = cos.shape()[0];
  const int n = cos.shape()[1];
  for (int i = 0; i < v; ++i) {
    const double cy = cos.values()[static_cast<std::size_t>(i) * n + labels[static_cast<std::size_t>(i)]];
    if (std::fabs(cy) > 0.95) return false;
    const double thresh = cy * std::cos(m) - std::sqrt(1 - cy * cy) * std::sin(m);
    for (int j = 0; j < n; ++j) {
      if (j == labels[static_cast<std::size_t>(i)]) continue;
      if (std::fabs(thresh - cos.values()[static_cast<std::size_t>(i) * n + j]) < gap)
        return false;
    }
  }
  return true;
}

Check criterion1_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradStats st;
  Rng rng(4001);

  for (int rep = 0; rep < 10; ++rep) {  // conv2d, both strides, bias on half
    if (rep % 2 == 0) {
      auto x = leaf_randn({2, 2, 5, 5}, rng);
      auto w = leaf_randn({3, 2, 3, 3}, rng);
      auto b = leaf_randn({3}, rng);
      std::vector<TensorD> leaves{x, w, b};
      fd_instance(st, leaves, [&] { return sum(conv2d(x, w, &b, 1, 1)); });
    } else {
      auto x = leaf_randn({2, 2, 6, 6}, rng);
      auto w = leaf_randn({3, 2, 3, 3}, rng);
      auto t = TensorD::randn({2, 3, 3, 3}, rng);
      std::vector<TensorD> leaves{x, w};
      fd_instance(st, leaves, [&] { return mse(conv2d(x, w, 2, 1), t); });
    }
  }

  for (int rep = 0; rep < 10; ++rep) {  // batchnorm, train mode
    auto x = leaf_randn({4, 2, 3, 3}, rng);
    auto bank = BNParams<double>::init(2);
    bank.gamma.set_requires_grad(true);
    bank.beta.set_requires_grad(true);
    for (auto& v : bank.gamma.mutable_values()) v = 1.0 + 0.3 * rng.normal();
    for (auto& v : bank.beta.mutable_values()) v = 0.2 * rng.normal();
    auto t = TensorD::randn({4, 2, 3, 3}, rng);
    std::vector<TensorD> leaves{x, bank.gamma, bank.beta};
    fd_instance(st, leaves, [&] { return mse(batchnorm(x, bank, BNMode::train), t); });
  }

  for (int rep = 0; rep < 10; ++rep) {  // linear
    auto x = leaf_randn({3, 4}, rng);
    auto w = leaf_randn({5, 4}, rng);
    auto b = leaf_randn({5}, rng);
    std::vector<TensorD> leaves{x, w, b};
    fd_instance(st, leaves, [&] { return sum(linear(x, w, &b)); });
  }

  for (int rep = 0; rep < 10; ++rep) {  // relu
    auto x = leaf_randn({4, 5}, rng);
    push_off(x, 1e-3, {0.0});
    std::vector<TensorD> leaves{x};
    fd_instance(st, leaves, [&] { return sum(relu(x)); });
  }

  for (int rep = 0; rep < 10; ++rep) {  // l2_normalize
    auto x = leaf_randn({2, 6}, rng);
    auto t = TensorD::randn({2, 6}, rng);
    std::vector<TensorD> leaves{x};
    fd_instance(st, leaves, [&] { return mse(l2_normalize(x), t); });
  }

  for (int rep = 0; rep < 10; ++rep) {  // mse, both sides
    auto a = leaf_randn({3, 4}, rng);
    auto b = leaf_randn({3, 4}, rng);
    std::vector<TensorD> leaves{a, b};
    fd_instance(st, leaves, [&] { return mse(a, b); });
  }

  for (int rep = 0; rep < 10; ++rep) {  // softmax cross-entropy
    auto x = leaf_randn({4, 6}, rng);
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.uniform() * 6) % 6);
    std::vector<TensorD> leaves{x};
    fd_instance(st, leaves, [&] { return softmax_cross_entropy(x, labels); });
  }

  // every margin formula, ten instances each, varying scale and the
  // curricular hardness parameter
  const MarginKind kinds[] = {MarginKind::normface, MarginKind::cosface, MarginKind::arcface,
                              MarginKind::curricular};
  const std::vector<int> labels{0, 3, 6, 2, 5};
  for (MarginKind kind : kinds) {
    int done = 0;
    for (std::uint64_t seed = 4100; done < 10; ++seed) {
      Rng mr(seed + static_cast<std::uint64_t>(kind) * 1000);
      TensorD x = TensorD::randn({5, 6}, mr);
      TensorD w = TensorD::randn({7, 6}, mr);
      {
        NoGradGuard g;
        if (!branch_safe(cos_logits(l2_normalize(x), w), labels, 0.5, 5e-3)) continue;
      }
      const double s = done % 2 == 0 ? 8.0 : 64.0;
      const double t = done % 3 == 0 ? 0.0 : 0.35;
      x.set_requires_grad(true);
      w.set_requires_grad(true);
      std::vector<TensorD> leaves{x, w};
      fd_instance(st, leaves,
                  [&] { return margin_loss(l2_normalize(x), labels, w, kind, s, 0.5, t); });
      ++done;
    }
  }

  {  // influence loss: gradients flow to the embedding, the head stays frozen
    TensorD w = TensorD::randn({5, 4}, rng);
    for (int rep = 0; rep < 10; ++rep) {
      auto x = leaf_randn({3, 4}, rng);
      std::vector<TensorD> leaves{x};
      fd_instance(st, leaves, [&] {
        return margin_loss(l2_normalize(x), {0, 2, 4}, w, MarginKind::curricular, 16.0, 0.5, 0.2);
      });
    }
  }

  for (int rep = 0; rep < 10; ++rep) {  // branch distillation
    auto zr = leaf_randn({2, 3, 3, 3}, rng);
    auto zs = TensorD::randn({2, 3, 3, 3}, rng);
    std::vector<TensorD> leaves{zr};
    fd_instance(st, leaves, [&] { return branch_distill_loss(zr, zs); });
  }

  {  // combined loss through both terms
    TensorD w = TensorD::randn({4, 5}, rng);
    for (int rep = 0; rep < 10; ++rep) {
      auto x = leaf_randn({2, 5}, rng);
      auto zr = leaf_randn({2, 2, 2, 2}, rng);
      auto zs = TensorD::randn({2, 2, 2, 2}, rng);
      std::vector<TensorD> leaves{x, zr};
      fd_instance(st, leaves, [&] {
        TensorD infl = margin_loss(l2_normalize(x), {1, 3}, w, MarginKind::arcface, 8.0, 0.5, 0.0);
        return total_loss(infl, branch_distill_loss(zr, zs));
      });
    }
  }

  std::ostringstream d;
  d << "max rel err " << std::scientific << std::setprecision(1) << st.max_rel << " over "
    << st.instances << " instances, " << fmt(seconds_since(t0), 1) << " s";
  return {st.max_rel <= 1e-4 && st.instances >= 140, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 2: gain cells recomputed from the published accuracies

Check criterion2_gains() {
  int bad = 0;
  double worst = 0.0;
  for (const PublishedRow& row : kPublishedRows) {
    for (int s = 0; s < 6; ++s) {
      const PublishedSetting& st = kPublishedSettings[s];
      std::optional<double> g = st.cross ? cross_res_gain(row.acc[s], st.hr, st.base)
                                         : same_res_gain(row.acc[s], st.hr, st.base);
      if (!g) return {false, "degenerate denominator in the published table"};
      const double diff = std::fabs(*g - row.gain[s]);
      if (diff > published_gain_tolerance(st.name)) ++bad;
      worst = std::max(worst, diff - published_gain_tolerance(st.name));
    }
  }
  std::ostringstream d;
  d << (30 - bad) << "/30 cells within tolerance (0.01; 0.5 for 112&28)";
  return {bad == 0, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 3: interpolation-error bound, corpus curve plus exact fixture

Check criterion3_curve(const std::string& corpus_dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(corpus_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(read_netpbm(p));
  if (images.size() < 20)
    return {false, "corpus has " + std::to_string(images.size()) + " images, needs >= 20"};

  ErrorCurve curve = error_curve(images, {7, 14, 28, 56}, 112, BoundAggregate::mean);
  bool decreasing = true;
  std::ostringstream vals;
  for (std::size_t i = 0; i < curve.mean_bound.size(); ++i) {
    if (i > 0 && curve.mean_bound[i] >= curve.mean_bound[i - 1]) decreasing = false;
    vals << (i ? " > " : "") << std::setprecision(3) << curve.mean_bound[i];
  }

  // f(x,y) = x^2 y^2 on the integer grid: the mixed fourth difference is the
  // constant 4, so the bound is exactly 4/64; the arithmetic stays exact
  Image fixture = Image::create(1, 7, 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x)
      fixture.at(0, y, x) = static_cast<float>(x * x) * static_cast<float>(y * y);
  int fh = 0, fw = 0;
  bool field_exact = true;
  for (double v : mixed_fourth_difference(fixture, fh, fw)) field_exact &= (v == 4.0);
  const double bound = error_upper_bound(fixture);
  const bool fixture_ok = field_exact && bound == 4.0 / 64.0;

  std::ostringstream d;
  d << images.size() << " images, bounds " << vals.str() << (decreasing ? "" : " NOT decreasing")
    << "; x^2y^2 fixture " << (fixture_ok ? "= 4/64 exactly" : "NOT exact");
  return {decreasing && fixture_ok, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 6: stored-parameter accounting against hand-derived counts

Check criterion6_params() {
  TrunkModel trunk = build_trunk(ModelSpec::desk(), 11);
  BTNetModel m = assemble_btnet(trunk, 12);
  const long long full = count_params(m, CountMode::full_finetune, 0);
  // hand enumeration of the desk architecture: conv kernels, affine pairs,
  // embedding head, per-resolution BN banks
  const long long expect_full = 701360;
  const std::map<int, long long> expect_branch = {
      {32, 4976}, {16, 19056}, {8, 75888}, {4, 304240}};
  bool ok = full == expect_full;
  std::ostringstream d;
  d << "full " << full;
  for (const auto& [r, want] : expect_branch) {
    const long long got = count_params(m, CountMode::branch_plus_bn, r);
    const bool cell = got == want && 2 * got <= full;
    ok = ok && cell;
    d << ", r" << r << " " << got << (cell ? "" : " MISMATCH");
  }
  d << "; every branch <= 50% of full";
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 7: FLOP accounting against the instrumented nested-loop oracle

long long loop_conv(int k, int cin, int cout, int ho, int wo) {
  long long n = 0;
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) n += 2;
  return n;
}

long long loop_elemwise(int c, int h, int w, int per_elem) {
  long long n = 0;
  for (int i = 0; i < c; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) n += per_elem;
  return n;
}

// independent walk of the resolution-r path, mirroring the layer naming
std::map<std::string, long long> oracle_flops(const ModelSpec& spec, int r) {
  std::map<std::string, long long> out;
  const std::string bp = "branch" + std::to_string(r);
  out[bp + ".stem.conv"] = loop_conv(spec.stem_kernel, 3, spec.stem_channels, r, r);
  out[bp + ".stem.bn"] = loop_elemwise(spec.stem_channels, r, r, 2);
  out[bp + ".stem.relu"] = loop_elemwise(spec.stem_channels, r, r, 1);

  int k = 0;
  int size = spec.canonical_size;
  while (size != r) {
    size /= 2;
    ++k;
  }
  auto block = [&](const std::string& prefix, int in_ch, int out_ch, int stride, int in_size,
                   bool proj) {
    const int so = in_size / stride;
    out[prefix + ".conv1"] = loop_conv(3, in_ch, out_ch, so, so);
    out[prefix + ".bn1"] = loop_elemwise(out_ch, so, so, 2);
    out[prefix + ".relu1"] = loop_elemwise(out_ch, so, so, 1);
    out[prefix + ".conv2"] = loop_conv(3, out_ch, out_ch, so, so);
    out[prefix + ".bn2"] = loop_elemwise(out_ch, so, so, 2);
    if (proj) {
      out[prefix + ".proj"] = loop_conv(1, in_ch, out_ch, so, so);
      out[prefix + ".bnp"] = loop_elemwise(out_ch, so, so, 2);
    }
    out[prefix + ".add"] = loop_elemwise(out_ch, so, so, 1);
    out[prefix + ".relu2"] = loop_elemwise(out_ch, so, so, 1);
    return so;
  };

  int in_ch = spec.stem_channels;
  for (int i = 0; i < k; ++i) {
    block(bp + ".u" + std::to_string(i), in_ch, spec.stages[static_cast<std::size_t>(i)].channels,
          1, r, true);
    in_ch = spec.stages[static_cast<std::size_t>(i)].channels;
  }
  int cur = r;
  for (std::size_t si = static_cast<std::size_t>(k); si < spec.stages.size(); ++si) {
    const StageSpec& st = spec.stages[si];
    for (int bi = 0; bi < st.blocks; ++bi) {
      const int stride = bi == 0 ? st.stride : 1;
      const bool proj = (in_ch != st.channels) || stride != 1;
      cur = block("trunk.s" + std::to_string(si) + ".b" + std::to_string(bi), in_ch, st.channels,
                  stride, cur, proj);
      in_ch = st.channels;
    }
  }
  long long gap = 0;
  for (int c = 0; c < in_ch; ++c) {
    for (int i = 0; i < cur * cur; ++i) gap += 1;  // accumulate
    gap += 1;                                      // divide
  }
  out["head.gap"] = gap;
  long long emb = 0;
  for (int o = 0; o < spec.embedding_dim; ++o)
    for (int i = 0; i < in_ch; ++i) emb += 2;
  out["head.embed"] = emb;
  out["head.l2norm"] = 3LL * spec.embedding_dim;
  return out;
}

Check criterion7_flops() {
  const ModelSpec spec = ModelSpec::desk();
  TrunkModel trunk = build_trunk(spec, 13);
  BTNetModel m = assemble_btnet(trunk, 14);
  bool ok = true;
  long long prev = 0;
  std::ostringstream d;
  d << "totals";
  for (int r : {4, 8, 16, 32}) {
    FlopReport rep = count_flops(m, r);
    auto oracle = oracle_flops(spec, r);
    bool layers_ok = rep.items.size() == oracle.size();
    long long total = 0;
    for (const auto& [name, flops] : rep.items) {
      auto it = oracle.find(name);
      layers_ok = layers_ok && it != oracle.end() && it->second == flops;
      total += flops;
    }
    const bool cell = layers_ok && total == rep.total && rep.total > prev;
    ok = ok && cell;
    d << " r" << r << "=" << rep.total << (cell ? "" : " MISMATCH");
    prev = rep.total;
  }
  d << ", per-layer exact, strictly ascending";
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 8: branch-selection truth table

Check criterion8_select() {
  const std::vector<int> branches = {7, 14, 28, 112};
  const std::pair<int, int> probes[4] = {{6, 5}, {24, 20}, {40, 40}, {150, 130}};
  const Indicator inds[3] = {Indicator::min, Indicator::max, Indicator::avg};
  const Allocation allocs[3] = {Allocation::floor, Allocation::near, Allocation::ceil};
  // expected[probe][indicator][allocation], derived by hand from the rules:
  // floor = largest branch <= indicator (else smallest), ceil = smallest
  // branch >= indicator (else largest), near = closest (ties go up)
  const int expected[4][3][3] = {
      {{7, 7, 7}, {7, 7, 7}, {7, 7, 7}},              // (6,5): below range
      {{14, 14, 28}, {14, 28, 28}, {14, 28, 28}},     // (24,20): min 20, max 24, avg 22
      {{28, 28, 112}, {28, 28, 112}, {28, 28, 112}},  // (40,40)
      {{112, 112, 112}, {112, 112, 112}, {112, 112, 112}},  // (150,130): above range
  };
  bool ok = true;
  int cells = 0;
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) {
        SelectionPolicy policy;
        policy.indicator = inds[i];
        policy.allocation = allocs[a];
        policy.branch_set = branches;
        const int got = select_branch(probes[p].first, probes[p].second, policy);
        ok = ok && got == expected[p][i][a];
        ++cells;
      }
  std::ostringstream d;
  d << cells << " strategy cells, includes (avg 22, ceil) -> 28 and above-range -> 112";
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// criterion 9: determinism and checkpoint round-trip

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Check criterion9_determinism(const std::string& artifact_dir) {
  const fs::path dir = fs::path(artifact_dir) / "determinism";
  fs::create_directories(dir);
  SynthConfig sc;
  sc.n_ids = 6;
  sc.per_id = 6;
  sc.seed = 5;
  sc.holdout_ids = 2;
  sc.gallery_ids = 1;
  sc.gallery_per_id = 2;
  sc.pairs_per_id = 3;
  DatasetManifest mf = synth_data((dir / "data").string(), sc);
  Dataset train = load_split(mf, "train");

  TrainConfig cfg = TrainConfig::desk_trunk();
  cfg.epochs = 2;
  cfg.batch_size = 16;

  const std::string pa = (dir / "a.ckpt").string();
  const std::string pb = (dir / "b.ckpt").string();
  const std::string pr = (dir / "rt.ckpt").string();
  write_checkpoint(pa, train_trunk(cfg, train));
  write_checkpoint(pb, train_trunk(cfg, train));
  const bool identical = file_bytes(pa) == file_bytes(pb);

  write_checkpoint(pr, read_checkpoint(pa));
  const bool round_trip = file_bytes(pa) == file_bytes(pr);

  std::ostringstream d;
  d << "same-seed checkpoints " << (identical ? "bit-identical" : "DIFFER")
    << ", write-read-write " << (round_trip ? "byte-identical" : "DIFFERS");
  return {identical && round_trip, d.str()};
}

// ---------------------------------------------------------------------------
// criteria 4 and 5: the regime ladder and the compatibility property

struct LadderChecks {
  Check c4, c5;
  CheckpointData trunk_ckpt;
};

LadderChecks criteria45_ladder(const Dataset& train, const Dataset& pairs,
                               const std::string& artifact_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  LadderOptions opt;
  opt.artifact_dir = (fs::path(artifact_dir) / "ladder").string();
  fs::create_directories(opt.artifact_dir);
  opt.verbose = true;
  LadderResult res = run_table3_ladder(train, pairs, opt);

  std::map<std::string, double> acc;
  for (const LadderRow& row : res.rows) acc[row.regime] = row.acc_cross;
  const double sc = acc.at("scratch"), pt = acc.at("pretraining"), bc = acc.at("bct"),
               ft = acc.at("fix_trunk"), di = acc.at("distill");
  const bool order = sc < pt && pt < bc && bc <= ft && ft < di;
  const bool gap = di - ft >= 2.0;

  LadderChecks out;
  std::ostringstream d4;
  d4 << "cross accuracy " << fmt(sc) << " < " << fmt(pt) << " < " << fmt(bc) << " <= " << fmt(ft)
     << " < " << fmt(di) << ", distill gap " << fmt(di - ft) << ", "
     << fmt(seconds_since(t0) / 60.0, 1) << " min";
  out.c4 = {order && gap, d4.str()};

  std::ostringstream d5;
  d5 << "cross-model auc " << fmt(res.distill_cross_auc, 3) << ", frozen classifier "
     << (res.kappa_intact ? "bit-unchanged" : "MODIFIED");
  out.c5 = {res.distill_cross_auc >= 0.8 && res.kappa_intact, d5.str()};
  out.trunk_ckpt = std::move(res.trunk_ckpt);
  return out;
}

// ---------------------------------------------------------------------------
// criterion 10: baseline phenomenology at desk scale

Check criterion10_baselines(const Dataset& train, const Dataset& pairs,
                            const CheckpointData& trunk_ckpt) {
  const auto t0 = std::chrono::steady_clock::now();
  PairSet ps = balanced_pairs(pairs, 7);

  TrunkModel hr = trunk_from_checkpoint(trunk_ckpt);
  const double hr_88 = trunk_pair_accuracy(hr, pairs, ps, 8, 8);

  progress("criterion 10: training the fixed low-resolution baseline");
  TrainConfig mm_cfg = TrainConfig::desk_trunk();
  TrunkModel mm = trunk_from_checkpoint(train_mm(mm_cfg, train, 8));
  const double mm_cross = trunk_pair_accuracy(mm, pairs, ps, 32, 8);

  progress("criterion 10: training the multi-resolution baseline");
  TrainConfig mr_cfg = TrainConfig::desk_trunk();
  mr_cfg.scheme = ResolutionScheme::equal_set;
  TrunkModel mr = trunk_from_checkpoint(train_trunk(mr_cfg, train));
  const double mr_88 = trunk_pair_accuracy(mr, pairs, ps, 8, 8);

  const bool mm_chance = std::fabs(mm_cross - 50.0) <= 5.0;
  const bool mr_beats_hr = mr_88 > hr_88;
  std::ostringstream d;
  d << "fixed-low 32&8 " << fmt(mm_cross) << " (within 5 of chance), multi-res 8&8 " << fmt(mr_88)
    << " > high-res 8&8 " << fmt(hr_88) << ", " << fmt(seconds_since(t0) / 60.0, 1) << " min";
  return {mm_chance && mr_beats_hr, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string corpus_dir = argc > 1 ? argv[1] : "data/corpus";
  const std::string artifact_dir = argc > 2 ? argv[2] : "acceptance_artifacts";
  std::map<int, Check> results;
  const char* labels[11] = {"",
                            "gradient integrity",
                            "gain reproduction",
                            "interpolation-error curve",
                            "regime ladder ordering",
                            "compatibility property",
                            "storage accounting",
                            "FLOP accounting",
                            "branch-selection table",
                            "determinism and serialization",
                            "baseline phenomenology"};

  auto run = [&](int id, auto&& fn) {
    progress("criterion " + std::to_string(id) + ": " + labels[id]);
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
  };

  run(1, criterion1_gradients);
  run(2, criterion2_gains);
  run(3, [&] { return criterion3_curve(corpus_dir); });
  run(6, criterion6_params);
  run(7, criterion7_flops);
  run(8, criterion8_select);
  run(9, [&] { return criterion9_determinism(artifact_dir); });

  try {
    progress("synthesizing the shared training dataset");
    fs::create_directories(artifact_dir);
    SynthConfig sc;
    DatasetManifest mf = synth_data((fs::path(artifact_dir) / "data").string(), sc);
    Dataset train = load_split(mf, "train");
    Dataset pairs = load_split(mf, "pairs");

    progress("criteria 4 and 5: " + std::string(labels[4]));
    LadderChecks lc = criteria45_ladder(train, pairs, artifact_dir);
    results[4] = lc.c4;
    results[5] = lc.c5;

    run(10, [&] { return criterion10_baselines(train, pairs, lc.trunk_ckpt); });
  } catch (const std::exception& e) {
    const std::string why = std::string("exception: ") + e.what();
    for (int id : {4, 5, 10})
      if (!results.count(id)) results[id] = {false, why};
  }

  int passed = 0;
  for (int id = 1; id <= 10; ++id) {
    const Check& c = results[id];
    passed += c.pass ? 1 : 0;
    std::cout << "criterion " << std::setw(2) << id << " " << (c.pass ? "PASS" : "FAIL") << "  "
              << labels[id] << ": " << c.detail << "\n";
  }
  std::cout << "acceptance: " << passed << "/10 criteria pass\n";
  return passed == 10 ? 0 : 1;
}
