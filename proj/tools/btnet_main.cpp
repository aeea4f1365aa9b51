// btnet command line: synthetic data, training, evaluation, branch
// selection, cost reports, feature dumps, and the reproduction pipelines.
// Every command accepts --config (key = value, # comments). Explicit flags
// override file values, unknown keys are rejected, and runs with outputs
// write their fully-resolved configuration beside them.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
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
#include "btnet/train.hpp"

namespace fs = std::filesystem;
using namespace btnet;

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

std::string join_reals(const std::vector<double>& v) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

// flag > config file > default already held in the target
class Merger {
 public:
  Merger(CLI::App* sub, const std::string& config_path)
      : sub_(sub),
        cr_(config_path.empty() ? std::map<std::string, std::string>{}
                                : parse_config_file(config_path)) {}

  void str(const char* flag, const char* key, const std::string& flag_val, std::string& target) {
    std::string v = cr_.get_string(key, target);
    target = sub_->count(flag) ? flag_val : v;
  }
  void integer(const char* flag, const char* key, int flag_val, int& target) {
    long long v = cr_.get_int(key, target);
    target = sub_->count(flag) ? flag_val : static_cast<int>(v);
  }
  void u64(const char* flag, const char* key, std::uint64_t flag_val, std::uint64_t& target) {
    long long v = cr_.get_int(key, static_cast<long long>(target));
    target = sub_->count(flag) ? flag_val : static_cast<std::uint64_t>(v);
  }
  void real(const char* flag, const char* key, double flag_val, double& target) {
    double v = cr_.get_real(key, target);
    target = sub_->count(flag) ? flag_val : v;
  }
  void boolean(const char* flag, const char* key, bool flag_val, bool& target,
               const char* neg_flag = nullptr) {
    bool v = cr_.get_bool(key, target);
    const bool given = sub_->count(flag) || (neg_flag && sub_->count(neg_flag));
    target = given ? flag_val : v;
  }
  void int_list(const char* flag, const char* key, const std::vector<int>& flag_val,
                std::vector<int>& target) {
    std::vector<int> v = cr_.get_int_list(key, target);
    target = sub_->count(flag) ? flag_val : v;
  }
  void real_list(const char* flag, const char* key, const std::vector<double>& flag_val,
                 std::vector<double>& target) {
    std::vector<double> v = cr_.get_real_list(key, target);
    target = sub_->count(flag) ? flag_val : v;
  }
  void finish() const { cr_.finish(); }

 private:
  CLI::App* sub_;
  ConfigReader cr_;
};

// the effective configuration, written beside a command's outputs so any run
// can be replayed with --config
class ResolvedConfig {
 public:
  void put(const std::string& key, const std::string& value) {
    if (!value.empty()) lines_ << key << " = " << value << "\n";
  }
  void put(const std::string& key, const char* value) { put(key, std::string(value)); }
  void put(const std::string& key, long long value) { lines_ << key << " = " << value << "\n"; }
  void put(const std::string& key, int value) { put(key, static_cast<long long>(value)); }
  void put(const std::string& key, std::uint64_t value) {
    lines_ << key << " = " << value << "\n";
  }
  void put(const std::string& key, double value) {
    lines_ << key << " = " << std::setprecision(17) << value << "\n";
  }
  void put(const std::string& key, bool value) { put(key, value ? "true" : "false"); }

  void write(const std::string& beside) const {
    fs::path p(beside);
    fs::path target =
        fs::is_directory(p) ? p / "resolved.cfg" : fs::path(beside + ".resolved.cfg");
    std::ofstream f(target);
    if (!f) throw std::runtime_error("cannot write " + target.string());
    f << "# resolved configuration\n" << lines_.str();
  }

 private:
  std::ostringstream lines_;
};

void ensure_parent(const std::string& path) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void require_value(const std::string& v, const char* what) {
  if (v.empty()) throw std::runtime_error(std::string("missing ") + what);
}

void require_positive(long long v, const char* what) {
  if (v <= 0) throw std::runtime_error(std::string("missing ") + what);
}

EmaPlacement placement_from_string(const std::string& s) {
  if (s == "scale_batch") return EmaPlacement::scale_batch;
  if (s == "scale_state") return EmaPlacement::scale_state;
  throw std::invalid_argument("unknown ema placement: " + s);
}

std::string to_string(EmaPlacement p) {
  return p == EmaPlacement::scale_batch ? "scale_batch" : "scale_state";
}

Regime regime_from_string(const std::string& s) {
  if (s == "scratch") return Regime::scratch();
  if (s == "pretraining") return Regime::pretraining();
  if (s == "bct") return Regime::bct();
  if (s == "fix_trunk") return Regime::fix_trunk();
  if (s == "distill" || s == "full") return Regime::full();
  throw std::invalid_argument("unknown regime: " + s);
}

// training flags shared by the train-* commands
struct TrainFlags {
  std::string preset = "desk";
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  int warmup = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool flip = true;
  std::string scheme;
  std::vector<int> candidates;
  std::vector<double> weights;
  std::string loss;
  std::string placement;
  std::string log;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--preset", f.preset, "desk or paper base configuration");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--batch-size", f.batch_size, "images per step");
  sub->add_option("--lr", f.lr, "base learning rate");
  sub->add_option("--warmup-epochs", f.warmup, "linear warmup epochs");
  sub->add_option("--momentum", f.momentum, "SGD momentum");
  sub->add_option("--weight-decay", f.weight_decay, "L2 coupling");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_flag("--flip,!--no-flip", f.flip, "horizontal flip augmentation");
  sub->add_option("--scheme", f.scheme,
                  "resolution sampling: none|equal_set|weighted_set|uniform_interval");
  sub->add_option("--candidates", f.candidates, "candidate resolutions, descending")
      ->delimiter(',');
  sub->add_option("--weights", f.weights, "weighted_set probabilities, aligned")->delimiter(',');
  sub->add_option("--loss", f.loss, "normface|cosface|arcface|curricular");
  sub->add_option("--ema-placement", f.placement, "scale_batch|scale_state");
  sub->add_option("--log", f.log, "per-step CSV path (default <out>.log.csv)");
}

TrainConfig resolve_train_config(Merger& m, const TrainFlags& f, bool branch_defaults,
                                 const std::string& out, ResolvedConfig& rc) {
  std::string preset = "desk";
  m.str("--preset", "preset", f.preset, preset);
  TrainConfig cfg;
  if (preset == "desk") {
    cfg = branch_defaults ? TrainConfig::desk_branch() : TrainConfig::desk_trunk();
  } else if (preset == "paper") {
    cfg = branch_defaults ? TrainConfig::paper_branch() : TrainConfig::paper_trunk();
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  m.integer("--epochs", "epochs", f.epochs, cfg.epochs);
  m.integer("--batch-size", "batch_size", f.batch_size, cfg.batch_size);
  m.real("--lr", "lr", f.lr, cfg.base_lr);
  m.integer("--warmup-epochs", "warmup_epochs", f.warmup, cfg.warmup_epochs);
  m.real("--momentum", "momentum", f.momentum, cfg.momentum);
  m.real("--weight-decay", "weight_decay", f.weight_decay, cfg.weight_decay);
  m.u64("--seed", "seed", f.seed, cfg.seed);
  m.boolean("--flip", "flip", f.flip, cfg.horizontal_flip, "--no-flip");
  std::string scheme = to_string(cfg.scheme);
  m.str("--scheme", "scheme", f.scheme, scheme);
  cfg.scheme = resolution_scheme_from_string(scheme);
  m.int_list("--candidates", "candidates", f.candidates, cfg.candidate_set);
  m.real_list("--weights", "weights", f.weights, cfg.weights);
  std::string loss = to_string(cfg.loss_kind);
  m.str("--loss", "loss", f.loss, loss);
  cfg.loss_kind = margin_kind_from_string(loss);
  std::string placement = to_string(cfg.ema_placement);
  m.str("--ema-placement", "ema_placement", f.placement, placement);
  cfg.ema_placement = placement_from_string(placement);
  cfg.log_path = out + ".log.csv";
  m.str("--log", "log", f.log, cfg.log_path);

  rc.put("preset", preset);
  rc.put("epochs", cfg.epochs);
  rc.put("batch_size", cfg.batch_size);
  rc.put("lr", cfg.base_lr);
  rc.put("warmup_epochs", cfg.warmup_epochs);
  rc.put("momentum", cfg.momentum);
  rc.put("weight_decay", cfg.weight_decay);
  rc.put("seed", cfg.seed);
  rc.put("flip", cfg.horizontal_flip);
  rc.put("scheme", to_string(cfg.scheme));
  rc.put("candidates", join_ints(cfg.candidate_set));
  rc.put("weights", join_reals(cfg.weights));
  rc.put("loss", to_string(cfg.loss_kind));
  rc.put("ema_placement", to_string(cfg.ema_placement));
  rc.put("log", cfg.log_path);
  return cfg;
}

Dataset load_dataset(const std::string& manifest, const std::string& split) {
  return load_split(read_manifest(manifest), split);
}

std::vector<Image> load_corpus(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::runtime_error("no NetPBM images in " + dir);
  std::vector<Image> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(read_netpbm(p));
  return images;
}

// checkpoint -> full model; a branch delta is applied onto its base trunk and
// pins only_branch to its resolution, the one path the combination defines
BTNetModel model_from_parts(const CheckpointData& ck, const std::string& trunk_path,
                            int* only_branch) {
  *only_branch = 0;
  if (ck.kind == "btnet") return btnet_from_checkpoint(ck);
  if (ck.kind == "trunk") {
    TrunkModel t = trunk_from_checkpoint(ck);
    return assemble_btnet(t, 0);
  }
  if (ck.kind == "branch") {
    if (trunk_path.empty())
      throw std::runtime_error("branch delta checkpoint needs --trunk for its base model");
    TrunkModel t = trunk_from_checkpoint(read_checkpoint(trunk_path));
    BTNetModel m = assemble_btnet(t, 0);
    apply_branch_delta(m, ck);
    auto it = ck.ints.find("resolution");
    if (it == ck.ints.end()) throw std::runtime_error("branch delta lacks its resolution");
    *only_branch = static_cast<int>(it->second);
    return m;
  }
  throw std::runtime_error("unknown checkpoint kind '" + ck.kind + "'");
}

SelectionPolicy policy_for(const std::string& indicator, const std::string& alloc,
                           const BTNetModel& m, int only_branch) {
  SelectionPolicy policy;
  policy.indicator = indicator_from_string(indicator);
  policy.allocation = allocation_from_string(alloc);
  if (only_branch > 0) {
    policy.branch_set = {only_branch};
  } else {
    for (const auto& [res, b] : m.branches) policy.branch_set.push_back(res);
  }
  return policy;
}

// per-channel min-max normalized activations tiled into one grayscale grid
Image tile_channels(const TensorF& act) {
  const auto& shape = act.shape();
  if (shape.size() != 4 || shape[0] != 1)
    throw std::runtime_error("feature dump expects one {1,C,H,W} activation");
  const int C = shape[1], h = shape[2], w = shape[3];
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(C))));
  const int rows = (C + cols - 1) / cols;
  Image grid = Image::create(1, rows * h + (rows - 1), cols * w + (cols - 1));
  std::fill(grid.values.begin(), grid.values.end(), 1.0f);
  const auto& v = act.values();
  for (int c = 0; c < C; ++c) {
    float lo = v[c * h * w], hi = lo;
    for (int i = 0; i < h * w; ++i) {
      lo = std::min(lo, v[c * h * w + i]);
      hi = std::max(hi, v[c * h * w + i]);
    }
    const float span = hi - lo;
    const int gy = (c / cols) * (h + 1), gx = (c % cols) * (w + 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float val = v[c * h * w + y * w + x];
        grid.at(0, gy + y, gx + x) = span > 0.0f ? (val - lo) / span : 0.5f;
      }
    }
  }
  return grid;
}

int run_table1_gains(const std::string& out_csv) {
  std::ostringstream csv;
  csv << "model,setting,accuracy,computed_gain,published_gain,diff,ok\n";
  std::cout << std::fixed << std::setprecision(2);
  std::cout << std::left << std::setw(8) << "model" << std::setw(9) << "setting" << std::right
            << std::setw(9) << "acc" << std::setw(11) << "computed" << std::setw(11)
            << "published" << std::setw(7) << "ok" << "\n";
  int bad = 0;
  for (const PublishedRow& row : kPublishedRows) {
    for (int s = 0; s < 6; ++s) {
      const PublishedSetting& st = kPublishedSettings[s];
      std::optional<double> g = st.cross ? cross_res_gain(row.acc[s], st.hr, st.base)
                                         : same_res_gain(row.acc[s], st.hr, st.base);
      if (!g) throw std::runtime_error("degenerate gain denominator in the published table");
      const double tol = published_gain_tolerance(st.name);
      const double diff = std::fabs(*g - row.gain[s]);
      const bool ok = diff <= tol;
      bad += ok ? 0 : 1;
      std::cout << std::left << std::setw(8) << row.model << std::setw(9) << st.name
                << std::right << std::setw(9) << row.acc[s] << std::setw(11) << *g
                << std::setw(11) << row.gain[s] << std::setw(7) << (ok ? "ok" : "FAIL") << "\n";
      csv << row.model << ',' << st.name << ',' << row.acc[s] << ',' << *g << ','
          << row.gain[s] << ',' << diff << ',' << (ok ? 1 : 0) << "\n";
    }
  }
  const int total = 5 * 6;
  std::cout << (total - bad) << "/" << total << " gain cells match the published table\n";
  if (!out_csv.empty()) {
    ensure_parent(out_csv);
    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("cannot write " + out_csv);
    f << csv.str();
  }
  return bad == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branch-trunk network toolkit"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---- synth-data ----
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic identity dataset");
  std::string sy_config, sy_out;
  SynthConfig scfg;
  synth->add_option("--config", sy_config, "key = value file; explicit flags override");
  synth->add_option("--out", sy_out, "output directory");
  synth->add_option("--ids", scfg.n_ids, "identity count");
  synth->add_option("--per-id", scfg.per_id, "images per identity");
  synth->add_option("--size", scfg.size, "image side length");
  synth->add_option("--seed", scfg.seed, "master seed");
  synth->add_option("--holdout", scfg.holdout_ids, "identities reserved for evaluation");
  synth->add_option("--gallery-ids", scfg.gallery_ids, "held-out identities with gallery shots");
  synth->add_option("--gallery-per-id", scfg.gallery_per_id, "gallery images per identity");
  synth->add_option("--pairs-per-id", scfg.pairs_per_id, "verification images per identity");
  synth->callback([&] {
    Merger m(synth, sy_config);
    std::string out;
    m.str("--out", "out", sy_out, out);
    SynthConfig cfg;
    m.integer("--ids", "ids", scfg.n_ids, cfg.n_ids);
    m.integer("--per-id", "per_id", scfg.per_id, cfg.per_id);
    m.integer("--size", "size", scfg.size, cfg.size);
    m.u64("--seed", "seed", scfg.seed, cfg.seed);
    m.integer("--holdout", "holdout", scfg.holdout_ids, cfg.holdout_ids);
    m.integer("--gallery-ids", "gallery_ids", scfg.gallery_ids, cfg.gallery_ids);
    m.integer("--gallery-per-id", "gallery_per_id", scfg.gallery_per_id, cfg.gallery_per_id);
    m.integer("--pairs-per-id", "pairs_per_id", scfg.pairs_per_id, cfg.pairs_per_id);
    m.finish();
    require_value(out, "--out");
    DatasetManifest manifest = synth_data(out, cfg);
    ResolvedConfig rc;
    rc.put("out", out);
    rc.put("ids", cfg.n_ids);
    rc.put("per_id", cfg.per_id);
    rc.put("size", cfg.size);
    rc.put("seed", cfg.seed);
    rc.put("holdout", cfg.holdout_ids);
    rc.put("gallery_ids", cfg.gallery_ids);
    rc.put("gallery_per_id", cfg.gallery_per_id);
    rc.put("pairs_per_id", cfg.pairs_per_id);
    rc.write(out);
    std::cout << "wrote " << (fs::path(out) / "manifest.tsv").string() << " ("
              << manifest.entries.size() << " images)\n";
  });

  // ---- analyze-error ----
  auto* analyze = app.add_subcommand("analyze-error", "interpolation-error bound over a corpus");
  std::string an_config, an_corpus, an_out, an_agg = "mean";
  std::vector<int> an_res = {7, 14, 28, 56};
  int an_canonical = 112;
  analyze->add_option("--config", an_config, "key = value file; explicit flags override");
  analyze->add_option("--corpus", an_corpus, "directory of NetPBM images");
  analyze->add_option("--out", an_out, "output CSV");
  analyze->add_option("--resolutions", an_res, "resolutions to probe")->delimiter(',');
  analyze->add_option("--canonical", an_canonical, "native resolution of the corpus");
  analyze->add_option("--agg", an_agg, "bound aggregate: mean|max");
  analyze->callback([&] {
    Merger m(analyze, an_config);
    std::string corpus, out, agg = "mean";
    std::vector<int> res = {7, 14, 28, 56};
    int canonical = 112;
    m.str("--corpus", "corpus", an_corpus, corpus);
    m.str("--out", "out", an_out, out);
    m.int_list("--resolutions", "resolutions", an_res, res);
    m.integer("--canonical", "canonical", an_canonical, canonical);
    m.str("--agg", "agg", an_agg, agg);
    m.finish();
    require_value(corpus, "--corpus");
    require_value(out, "--out");
    if (agg != "mean" && agg != "max") throw std::invalid_argument("unknown agg: " + agg);
    std::vector<Image> images = load_corpus(corpus);
    BoundAggregate ba = agg == "max" ? BoundAggregate::max : BoundAggregate::mean;
    ErrorCurve curve = error_curve(images, res, canonical, ba);
    ensure_parent(out);
    write_error_curve_csv(out, curve);
    ResolvedConfig rc;
    rc.put("corpus", corpus);
    rc.put("out", out);
    rc.put("resolutions", join_ints(res));
    rc.put("canonical", canonical);
    rc.put("agg", agg);
    rc.write(out);
    for (std::size_t i = 0; i < curve.resolutions.size(); ++i)
      std::cout << curve.resolutions[i] << " " << curve.mean_bound[i] << "\n";
    std::cout << "wrote " << out << " (" << curve.n_images << " images)\n";
  });

  // ---- train-trunk ----
  auto* ttrunk = app.add_subcommand("train-trunk", "train the canonical-path trunk");
  std::string tt_config, tt_data, tt_split = "train", tt_out;
  TrainFlags tt_flags;
  ttrunk->add_option("--config", tt_config, "key = value file; explicit flags override");
  ttrunk->add_option("--data", tt_data, "dataset manifest");
  ttrunk->add_option("--split", tt_split, "manifest split to train on");
  ttrunk->add_option("--out", tt_out, "checkpoint path");
  add_train_flags(ttrunk, tt_flags);
  ttrunk->callback([&] {
    Merger m(ttrunk, tt_config);
    std::string data, split = "train", out;
    m.str("--data", "data", tt_data, data);
    m.str("--split", "split", tt_split, split);
    m.str("--out", "out", tt_out, out);
    require_value(data, "--data");
    require_value(out, "--out");
    ResolvedConfig rc;
    rc.put("data", data);
    rc.put("split", split);
    rc.put("out", out);
    TrainConfig cfg = resolve_train_config(m, tt_flags, false, out, rc);
    m.finish();
    Dataset ds = load_dataset(data, split);
    ensure_parent(out);
    CheckpointData ck = train_trunk(cfg, ds);
    write_checkpoint(out, ck);
    rc.write(out);
    std::cout << "wrote " << out << "\n";
  });

  // ---- train-mm ----
  auto* tmm = app.add_subcommand("train-mm", "train a fixed-resolution baseline");
  std::string tm_config, tm_data, tm_split = "train", tm_out;
  int tm_r = 0;
  TrainFlags tm_flags;
  tmm->add_option("--config", tm_config, "key = value file; explicit flags override");
  tmm->add_option("--data", tm_data, "dataset manifest");
  tmm->add_option("--split", tm_split, "manifest split to train on");
  tmm->add_option("--out", tm_out, "checkpoint path");
  tmm->add_option("--resolution", tm_r, "fixed training resolution");
  add_train_flags(tmm, tm_flags);
  tmm->callback([&] {
    Merger m(tmm, tm_config);
    std::string data, split = "train", out;
    int r = 0;
    m.str("--data", "data", tm_data, data);
    m.str("--split", "split", tm_split, split);
    m.str("--out", "out", tm_out, out);
    m.integer("--resolution", "resolution", tm_r, r);
    require_value(data, "--data");
    require_value(out, "--out");
    require_positive(r, "--resolution");
    ResolvedConfig rc;
    rc.put("data", data);
    rc.put("split", split);
    rc.put("out", out);
    rc.put("resolution", r);
    TrainConfig cfg = resolve_train_config(m, tm_flags, false, out, rc);
    m.finish();
    Dataset ds = load_dataset(data, split);
    ensure_parent(out);
    CheckpointData ck = train_mm(cfg, ds, r);
    write_checkpoint(out, ck);
    rc.write(out);
    std::cout << "wrote " << out << "\n";
  });

  // ---- train-branch ----
  auto* tbr = app.add_subcommand("train-branch", "train a resolution branch from a trunk");
  std::string tb_config, tb_data, tb_split = "train", tb_out, tb_trunk, tb_regime;
  int tb_r = 0;
  TrainFlags tb_flags;
  tbr->add_option("--config", tb_config, "key = value file; explicit flags override");
  tbr->add_option("--data", tb_data, "dataset manifest");
  tbr->add_option("--split", tb_split, "manifest split to train on");
  tbr->add_option("--out", tb_out, "checkpoint path");
  tbr->add_option("--trunk", tb_trunk, "trunk checkpoint to start from");
  tbr->add_option("--resolution", tb_r, "branch resolution");
  tbr->add_option("--regime", tb_regime, "scratch|pretraining|bct|fix_trunk|distill");
  add_train_flags(tbr, tb_flags);
  tbr->callback([&] {
    Merger m(tbr, tb_config);
    std::string data, split = "train", out, trunk_path, regime_name;
    int r = 0;
    m.str("--data", "data", tb_data, data);
    m.str("--split", "split", tb_split, split);
    m.str("--out", "out", tb_out, out);
    m.str("--trunk", "trunk", tb_trunk, trunk_path);
    m.str("--regime", "regime", tb_regime, regime_name);
    m.integer("--resolution", "resolution", tb_r, r);
    require_value(data, "--data");
    require_value(out, "--out");
    require_value(trunk_path, "--trunk");
    require_value(regime_name, "--regime");
    require_positive(r, "--resolution");
    Regime regime = regime_from_string(regime_name);
    ResolvedConfig rc;
    rc.put("data", data);
    rc.put("split", split);
    rc.put("out", out);
    rc.put("trunk", trunk_path);
    rc.put("regime", regime.name());
    rc.put("resolution", r);
    TrainConfig cfg = resolve_train_config(m, tb_flags, !regime.from_scratch, out, rc);
    m.finish();
    Dataset ds = load_dataset(data, split);
    CheckpointData trunk_ck = read_checkpoint(trunk_path);
    ensure_parent(out);
    CheckpointData ck = train_branch(trunk_ck, r, regime, cfg, ds);
    write_checkpoint(out, ck);
    rc.write(out);
    std::cout << "wrote " << out << " (" << ck.kind << ")\n";
  });

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->require_subcommand(1);

  auto* verify = eval->add_subcommand("verify", "pairwise verification at a resolution pair");
  std::string ev_config, ev_model, ev_trunk, ev_data, ev_split = "pairs", ev_out,
                         ev_ind = "max", ev_alloc = "ceil";
  int ev_r1 = 0, ev_r2 = 0, ev_folds = 10, ev_batch = 64;
  std::uint64_t ev_pair_seed = 7;
  verify->add_option("--config", ev_config, "key = value file; explicit flags override");
  verify->add_option("--model", ev_model, "checkpoint");
  verify->add_option("--trunk", ev_trunk, "base trunk when --model is a branch delta");
  verify->add_option("--data", ev_data, "dataset manifest");
  verify->add_option("--split", ev_split, "split holding the pair images");
  verify->add_option("--r1", ev_r1, "first side resolution");
  verify->add_option("--r2", ev_r2, "second side resolution");
  verify->add_option("--folds", ev_folds, "accuracy folds");
  verify->add_option("--batch", ev_batch, "embedding batch size");
  verify->add_option("--pair-seed", ev_pair_seed, "impostor sampling seed");
  verify->add_option("--indicator", ev_ind, "branch selection indicator");
  verify->add_option("--alloc", ev_alloc, "branch selection allocation");
  verify->add_option("--out", ev_out, "optional CSV for the result row");
  verify->callback([&] {
    Merger m(verify, ev_config);
    std::string model, trunk_path, data, split = "pairs", out, ind = "max", alloc = "ceil";
    int r1 = 0, r2 = 0, folds = 10, batch = 64;
    std::uint64_t pair_seed = 7;
    m.str("--model", "model", ev_model, model);
    m.str("--trunk", "trunk", ev_trunk, trunk_path);
    m.str("--data", "data", ev_data, data);
    m.str("--split", "split", ev_split, split);
    m.str("--out", "out", ev_out, out);
    m.str("--indicator", "indicator", ev_ind, ind);
    m.str("--alloc", "alloc", ev_alloc, alloc);
    m.integer("--r1", "r1", ev_r1, r1);
    m.integer("--r2", "r2", ev_r2, r2);
    m.integer("--folds", "folds", ev_folds, folds);
    m.integer("--batch", "batch", ev_batch, batch);
    m.u64("--pair-seed", "pair_seed", ev_pair_seed, pair_seed);
    m.finish();
    require_value(model, "--model");
    require_value(data, "--data");
    require_positive(r1, "--r1");
    require_positive(r2, "--r2");
    CheckpointData ck = read_checkpoint(model);
    Dataset d = load_dataset(data, split);
    PairSet ps = balanced_pairs(d, pair_seed);
    std::vector<Embedding> ea, eb;
    if (ck.kind == "trunk") {
      // baseline path: up-sample the probe back to the canonical size
      TrunkModel tm = trunk_from_checkpoint(ck);
      ea = embed_trunk_all(tm, d, r1, batch);
      eb = r2 == r1 ? ea : embed_trunk_all(tm, d, r2, batch);
    } else {
      int only = 0;
      BTNetModel bm = model_from_parts(ck, trunk_path, &only);
      SelectionPolicy policy = policy_for(ind, alloc, bm, only);
      auto side = [&](int r) {
        const int chosen = select_branch(r, r, policy);
        return embed_branch_all(bm, d, chosen, batch, r == chosen ? 0 : r);
      };
      ea = side(r1);
      eb = r2 == r1 ? ea : side(r2);
    }
    double acc = verification_accuracy_scores(score_pairs(ea, eb, ps), folds);
    std::cout << std::fixed << std::setprecision(2) << "accuracy " << acc << " (" << r1 << "&"
              << r2 << ", " << ps.idx.size() << " pairs)\n";
    if (!out.empty()) {
      ensure_parent(out);
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot write " + out);
      f << "r1,r2,pairs,accuracy\n"
        << r1 << ',' << r2 << ',' << ps.idx.size() << ',' << acc << "\n";
      ResolvedConfig rc;
      rc.put("model", model);
      rc.put("trunk", trunk_path);
      rc.put("data", data);
      rc.put("split", split);
      rc.put("r1", r1);
      rc.put("r2", r2);
      rc.put("folds", folds);
      rc.put("batch", batch);
      rc.put("pair_seed", pair_seed);
      rc.put("indicator", ind);
      rc.put("alloc", alloc);
      rc.put("out", out);
      rc.write(out);
    }
  });

  auto* identify = eval->add_subcommand("identify", "open-set identification against a gallery");
  std::string id_config, id_model, id_trunk, id_data, id_out, id_ind = "max", id_alloc = "ceil";
  int id_probe_r = 0, id_rank = 20, id_batch = 64;
  std::vector<double> id_fpirs = {0.3, 0.2, 0.1};
  identify->add_option("--config", id_config, "key = value file; explicit flags override");
  identify->add_option("--model", id_model, "checkpoint");
  identify->add_option("--trunk", id_trunk, "base trunk when --model is a branch delta");
  identify->add_option("--data", id_data, "dataset manifest");
  identify->add_option("--probe-r", id_probe_r, "probe resolution");
  identify->add_option("--rank", id_rank, "identification rank");
  identify->add_option("--fpir", id_fpirs, "false-positive rates to report")->delimiter(',');
  identify->add_option("--batch", id_batch, "embedding batch size");
  identify->add_option("--indicator", id_ind, "branch selection indicator");
  identify->add_option("--alloc", id_alloc, "branch selection allocation");
  identify->add_option("--out", id_out, "optional CSV for the curve");
  identify->callback([&] {
    Merger m(identify, id_config);
    std::string model, trunk_path, data, out, ind = "max", alloc = "ceil";
    int probe_r = 0, rank = 20, batch = 64;
    std::vector<double> fpirs = {0.3, 0.2, 0.1};
    m.str("--model", "model", id_model, model);
    m.str("--trunk", "trunk", id_trunk, trunk_path);
    m.str("--data", "data", id_data, data);
    m.str("--out", "out", id_out, out);
    m.str("--indicator", "indicator", id_ind, ind);
    m.str("--alloc", "alloc", id_alloc, alloc);
    m.integer("--probe-r", "probe_r", id_probe_r, probe_r);
    m.integer("--rank", "rank", id_rank, rank);
    m.integer("--batch", "batch", id_batch, batch);
    m.real_list("--fpir", "fpir", id_fpirs, fpirs);
    m.finish();
    require_value(model, "--model");
    require_value(data, "--data");
    require_positive(probe_r, "--probe-r");
    CheckpointData ck = read_checkpoint(model);
    DatasetManifest manifest = read_manifest(data);
    Dataset gal = load_split(manifest, "gallery");
    Dataset probe = load_split(manifest, "probe");
    std::vector<Embedding> gal_emb, probe_emb;
    if (ck.kind == "trunk") {
      TrunkModel tm = trunk_from_checkpoint(ck);
      gal_emb = embed_trunk_all(tm, gal, gal.size, batch);
      probe_emb = embed_trunk_all(tm, probe, probe_r, batch);
    } else {
      int only = 0;
      BTNetModel bm = model_from_parts(ck, trunk_path, &only);
      SelectionPolicy policy = policy_for(ind, alloc, bm, only);
      auto embed_at = [&](const Dataset& d, int r) {
        const int chosen = select_branch(r, r, policy);
        return embed_branch_all(bm, d, chosen, batch, r == chosen ? 0 : r);
      };
      gal_emb = embed_at(gal, gal.size);
      probe_emb = embed_at(probe, probe_r);
    }

    // gallery templates aggregate members; probes stay single images.
    // identity labels line up across splits because both densify in
    // first-appearance order over the same ascending file layout.
    std::map<int, std::vector<Embedding>> by_id;
    for (std::size_t i = 0; i < gal.samples.size(); ++i)
      by_id[gal.samples[i].identity].push_back(gal_emb[i]);
    std::vector<Template> gallery;
    std::set<int> gallery_ids;
    for (auto& [gid, members] : by_id) {
      gallery.push_back(make_template(gid, members));
      gallery_ids.insert(gid);
    }
    std::vector<Template> mated, nonmated;
    for (std::size_t i = 0; i < probe.samples.size(); ++i) {
      Template t = make_template(probe.samples[i].identity, {probe_emb[i]});
      (gallery_ids.count(t.identity) ? mated : nonmated).push_back(t);
    }
    if (mated.empty() || nonmated.empty())
      throw std::runtime_error("identify needs both mated and non-mated probes");

    std::sort(fpirs.begin(), fpirs.end());
    std::vector<std::pair<double, double>> curve;
    for (double fp : fpirs)
      curve.push_back({fp, tpir_at_fpir(mated, nonmated, gallery, rank, fp)});
    const double auc = auc_tpir(curve);

    std::cout << std::fixed << std::setprecision(2);
    for (auto it = curve.rbegin(); it != curve.rend(); ++it)
      std::cout << "tpir" << rank << "@fpir=" << it->first << " " << 100.0 * it->second << "\n";
    std::cout << "auc " << auc << " (" << mated.size() << " mated, " << nonmated.size()
              << " non-mated)\n";
    if (!out.empty()) {
      ensure_parent(out);
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot write " + out);
      f << "fpir,tpir\n";
      for (const auto& [fp, tp] : curve) f << fp << ',' << tp << "\n";
      ResolvedConfig rc;
      rc.put("model", model);
      rc.put("trunk", trunk_path);
      rc.put("data", data);
      rc.put("probe_r", probe_r);
      rc.put("rank", rank);
      rc.put("fpir", join_reals(fpirs));
      rc.put("batch", batch);
      rc.put("indicator", ind);
      rc.put("alloc", alloc);
      rc.put("out", out);
      rc.write(out);
    }
  });

  // ---- select-branch ----
  auto* select = app.add_subcommand("select-branch", "pick the branch for a probe size");
  select->set_help_flag("--help", "print help");  // frees -h/--h for the probe height
  std::string sb_config, sb_ind = "max", sb_alloc = "ceil";
  int sb_w = 0, sb_h = 0;
  std::vector<int> sb_set = {7, 14, 28, 112};
  select->add_option("--config", sb_config, "key = value file; explicit flags override");
  select->add_option("--w", sb_w, "probe width");
  select->add_option("--h", sb_h, "probe height");
  select->add_option("--indicator", sb_ind, "min|max|avg");
  select->add_option("--alloc", sb_alloc, "floor|near|ceil");
  select->add_option("--branches", sb_set, "supported branch resolutions")->delimiter(',');
  select->callback([&] {
    Merger m(select, sb_config);
    std::string ind = "max", alloc = "ceil";
    int w = 0, h = 0;
    std::vector<int> branches = {7, 14, 28, 112};
    m.str("--indicator", "indicator", sb_ind, ind);
    m.str("--alloc", "alloc", sb_alloc, alloc);
    m.integer("--w", "w", sb_w, w);
    m.integer("--h", "h", sb_h, h);
    m.int_list("--branches", "branches", sb_set, branches);
    m.finish();
    require_positive(w, "--w");
    require_positive(h, "--h");
    SelectionPolicy policy;
    policy.indicator = indicator_from_string(ind);
    policy.allocation = allocation_from_string(alloc);
    policy.branch_set = branches;
    std::cout << select_branch(h, w, policy) << "\n";
  });

  // ---- report ----
  auto* report = app.add_subcommand("report", "parameter and FLOP accounting");
  report->require_subcommand(1);

  auto* rparams = report->add_subcommand("params", "per-resolution stored parameters");
  std::string rp_config, rp_model, rp_trunk, rp_out;
  rparams->add_option("--config", rp_config, "key = value file; explicit flags override");
  rparams->add_option("--model", rp_model, "checkpoint");
  rparams->add_option("--trunk", rp_trunk, "base trunk when --model is a branch delta");
  rparams->add_option("--out", rp_out, "optional CSV path");
  rparams->callback([&] {
    Merger m(rparams, rp_config);
    std::string model, trunk_path, out;
    m.str("--model", "model", rp_model, model);
    m.str("--trunk", "trunk", rp_trunk, trunk_path);
    m.str("--out", "out", rp_out, out);
    m.finish();
    require_value(model, "--model");
    int only = 0;
    BTNetModel bm = model_from_parts(read_checkpoint(model), trunk_path, &only);
    const long long full = count_params(bm, CountMode::full_finetune, 0);
    std::ostringstream csv;
    csv << "resolution,branch_plus_bn,full_finetune,fraction\n";
    std::cout << "resolution branch_plus_bn full_finetune fraction\n";
    for (const auto& [r, b] : bm.branches) {
      if (only > 0 && r != only) continue;
      const long long stored = count_params(bm, CountMode::branch_plus_bn, r);
      const double frac = static_cast<double>(stored) / static_cast<double>(full);
      csv << r << ',' << stored << ',' << full << ',' << frac << "\n";
      std::cout << std::setw(10) << r << " " << std::setw(14) << stored << " " << std::setw(13)
                << full << " " << std::fixed << std::setprecision(4) << frac << "\n";
      std::cout.unsetf(std::ios::fixed);
    }
    if (!out.empty()) {
      ensure_parent(out);
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot write " + out);
      f << csv.str();
      ResolvedConfig rc;
      rc.put("model", model);
      rc.put("trunk", trunk_path);
      rc.put("out", out);
      rc.write(out);
    }
  });

  auto* rflops = report->add_subcommand("flops", "per-resolution multiply-add counts");
  std::string rf_config, rf_model, rf_trunk, rf_out;
  bool rf_detail = false;
  rflops->add_option("--config", rf_config, "key = value file; explicit flags override");
  rflops->add_option("--model", rf_model, "checkpoint");
  rflops->add_option("--trunk", rf_trunk, "base trunk when --model is a branch delta");
  rflops->add_option("--out", rf_out, "optional CSV path");
  rflops->add_flag("--detail", rf_detail, "per-layer rows");
  rflops->callback([&] {
    Merger m(rflops, rf_config);
    std::string model, trunk_path, out;
    bool detail = false;
    m.str("--model", "model", rf_model, model);
    m.str("--trunk", "trunk", rf_trunk, trunk_path);
    m.str("--out", "out", rf_out, out);
    m.boolean("--detail", "detail", rf_detail, detail);
    m.finish();
    require_value(model, "--model");
    int only = 0;
    BTNetModel bm = model_from_parts(read_checkpoint(model), trunk_path, &only);
    std::ostringstream csv;
    csv << "resolution,layer,flops\n";
    std::cout << "resolution flops\n";
    for (const auto& [r, b] : bm.branches) {
      if (only > 0 && r != only) continue;
      FlopReport rep = count_flops(bm, r);
      csv << r << ",total," << rep.total << "\n";
      std::cout << std::setw(10) << r << " " << rep.total << "\n";
      for (const auto& [layer, flops] : rep.items) {
        csv << r << ',' << layer << ',' << flops << "\n";
        if (detail) std::cout << "  " << layer << " " << flops << "\n";
      }
    }
    if (!out.empty()) {
      ensure_parent(out);
      std::ofstream f(out);
      if (!f) throw std::runtime_error("cannot write " + out);
      f << csv.str();
      ResolvedConfig rc;
      rc.put("model", model);
      rc.put("trunk", trunk_path);
      rc.put("out", out);
      rc.put("detail", detail);
      rc.write(out);
    }
  });

  // ---- dump-features ----
  auto* dump = app.add_subcommand("dump-features", "write tap-point activation grids");
  std::string df_config, df_model, df_trunk, df_image, df_out;
  std::vector<int> df_res;
  dump->add_option("--config", df_config, "key = value file; explicit flags override");
  dump->add_option("--model", df_model, "checkpoint");
  dump->add_option("--trunk", df_trunk, "base trunk when --model is a branch delta");
  dump->add_option("--image", df_image, "input NetPBM image");
  dump->add_option("--out", df_out, "output directory");
  dump->add_option("--resolutions", df_res, "tap resolutions (default: all branches)")
      ->delimiter(',');
  dump->callback([&] {
    Merger m(dump, df_config);
    std::string model, trunk_path, image_path, out;
    std::vector<int> res;
    m.str("--model", "model", df_model, model);
    m.str("--trunk", "trunk", df_trunk, trunk_path);
    m.str("--image", "image", df_image, image_path);
    m.str("--out", "out", df_out, out);
    m.int_list("--resolutions", "resolutions", df_res, res);
    m.finish();
    require_value(model, "--model");
    require_value(image_path, "--image");
    require_value(out, "--out");
    CheckpointData ck = read_checkpoint(model);
    Image img = read_netpbm(image_path);
    fs::create_directories(out);
    NoGradGuard ng;
    auto dump_one = [&](int r, const TensorF& act) {
      Image grid = tile_channels(act);
      std::string path = (fs::path(out) / ("tap_r" + std::to_string(r) + ".pgm")).string();
      write_netpbm(path, grid);
      std::cout << "wrote " << path << "\n";
    };
    if (ck.kind == "trunk") {
      TrunkModel tm = trunk_from_checkpoint(ck);
      const int S = tm.spec.canonical_size;
      Image at_s = (img.height == S && img.width == S) ? img : resize_bilinear(img, S, S);
      std::vector<const Image*> one = {&at_s};
      TensorF x = batch_to_tensor(one);
      std::vector<int> taps = res;
      if (taps.empty())
        for (const auto& [r, c] : tm.spec.tap_channels()) taps.push_back(r);
      for (int r : taps) dump_one(r, trunk_tap(tm, x, r));
    } else {
      int only = 0;
      BTNetModel bm = model_from_parts(ck, trunk_path, &only);
      std::vector<int> taps = res;
      if (taps.empty()) {
        if (only > 0) {
          taps.push_back(only);
        } else {
          for (const auto& [r, b] : bm.branches) taps.push_back(r);
        }
      }
      for (int r : taps) {
        auto it = bm.branches.find(r);
        if (it == bm.branches.end())
          throw std::runtime_error("no branch for resolution " + std::to_string(r));
        Image low = prepare_input(img, r);
        std::vector<const Image*> one = {&low};
        dump_one(r, branch_forward(it->second, batch_to_tensor(one), BNMode::infer));
      }
    }
    ResolvedConfig rc;
    rc.put("model", model);
    rc.put("trunk", trunk_path);
    rc.put("image", image_path);
    rc.put("out", out);
    rc.put("resolutions", join_ints(res));
    rc.write(out);
  });

  // ---- reproduce ----
  auto* repro = app.add_subcommand("reproduce", "published-result pipelines");
  repro->require_subcommand(1);

  auto* t1 = repro->add_subcommand("table1-gains", "recompute the gain cells");
  std::string t1_config, t1_out;
  t1->add_option("--config", t1_config, "key = value file; explicit flags override");
  t1->add_option("--out", t1_out, "optional CSV path");
  t1->callback([&] {
    Merger m(t1, t1_config);
    std::string out;
    m.str("--out", "out", t1_out, out);
    m.finish();
    exit_code = run_table1_gains(out);
  });

  auto* fig1 = repro->add_subcommand("fig1-curve", "interpolation-error curve on the corpus");
  std::string f1_config, f1_corpus = "data/corpus", f1_out = "fig1_curve.csv";
  std::vector<int> f1_res = {7, 14, 28, 56};
  int f1_canonical = 112;
  fig1->add_option("--config", f1_config, "key = value file; explicit flags override");
  fig1->add_option("--corpus", f1_corpus, "corpus directory");
  fig1->add_option("--out", f1_out, "output CSV");
  fig1->add_option("--resolutions", f1_res, "resolutions to probe")->delimiter(',');
  fig1->add_option("--canonical", f1_canonical, "native corpus resolution");
  fig1->callback([&] {
    Merger m(fig1, f1_config);
    std::string corpus = "data/corpus", out = "fig1_curve.csv";
    std::vector<int> res = {7, 14, 28, 56};
    int canonical = 112;
    m.str("--corpus", "corpus", f1_corpus, corpus);
    m.str("--out", "out", f1_out, out);
    m.int_list("--resolutions", "resolutions", f1_res, res);
    m.integer("--canonical", "canonical", f1_canonical, canonical);
    m.finish();
    std::vector<Image> images = load_corpus(corpus);
    ErrorCurve curve = error_curve(images, res, canonical, BoundAggregate::mean);
    ensure_parent(out);
    write_error_curve_csv(out, curve);
    ResolvedConfig rc;
    rc.put("corpus", corpus);
    rc.put("out", out);
    rc.put("resolutions", join_ints(res));
    rc.put("canonical", canonical);
    rc.write(out);
    bool decreasing = true;
    for (std::size_t i = 0; i < curve.resolutions.size(); ++i) {
      std::cout << curve.resolutions[i] << " " << curve.mean_bound[i] << "\n";
      if (i > 0 && curve.mean_bound[i] >= curve.mean_bound[i - 1]) decreasing = false;
    }
    std::cout << "strictly decreasing with resolution: " << (decreasing ? "yes" : "NO") << "\n";
    if (!decreasing) exit_code = 1;
  });

  auto* t3 = repro->add_subcommand("table3-ladder", "train and score the regime ladder");
  std::string t3_config, t3_data, t3_out;
  int t3_r = 8;
  bool t3_quiet = false;
  t3->add_option("--config", t3_config, "key = value file; explicit flags override");
  t3->add_option("--data", t3_data, "dataset manifest (default: synthesize into --out)");
  t3->add_option("--out", t3_out, "artifact directory");
  t3->add_option("--branch-r", t3_r, "evaluated branch resolution");
  t3->add_flag("--quiet", t3_quiet, "suppress progress lines");
  t3->callback([&] {
    Merger m(t3, t3_config);
    std::string data, out;
    int branch_r = 8;
    bool quiet = false;
    m.str("--data", "data", t3_data, data);
    m.str("--out", "out", t3_out, out);
    m.integer("--branch-r", "branch_r", t3_r, branch_r);
    m.boolean("--quiet", "quiet", t3_quiet, quiet);
    m.finish();
    require_value(out, "--out");
    fs::create_directories(out);
    std::string manifest_path = data;
    if (manifest_path.empty()) {
      SynthConfig sc;
      DatasetManifest mf = synth_data((fs::path(out) / "data").string(), sc);
      manifest_path = (fs::path(out) / "data" / "manifest.tsv").string();
      std::cout << "synthesized " << mf.entries.size() << " images\n";
    }
    DatasetManifest mf = read_manifest(manifest_path);
    Dataset train = load_split(mf, "train");
    Dataset pairs = load_split(mf, "pairs");
    LadderOptions opt;
    opt.branch_r = branch_r;
    opt.artifact_dir = out;
    opt.verbose = !quiet;
    LadderResult res = run_table3_ladder(train, pairs, opt);
    std::ostringstream csv;
    csv << "regime,acc_cross,acc_same,stored_params\n";
    std::cout << std::fixed << std::setprecision(2);
    std::cout << std::left << std::setw(12) << "regime" << std::right << std::setw(10)
              << "cross" << std::setw(10) << "same" << std::setw(12) << "params\n";
    for (const LadderRow& row : res.rows) {
      csv << row.regime << ',' << row.acc_cross << ',' << row.acc_same << ','
          << row.stored_params << "\n";
      std::cout << std::left << std::setw(12) << row.regime << std::right << std::setw(10)
                << row.acc_cross << std::setw(10) << row.acc_same << std::setw(12)
                << row.stored_params << "\n";
    }
    std::cout << "distill cross-model auc " << res.distill_cross_auc << "\n";
    std::cout << "frozen classifier intact: " << (res.kappa_intact ? "yes" : "NO") << "\n";
    std::ofstream f((fs::path(out) / "results.csv").string());
    if (!f) throw std::runtime_error("cannot write results.csv");
    f << csv.str();
    ResolvedConfig rc;
    rc.put("data", manifest_path);
    rc.put("out", out);
    rc.put("branch_r", branch_r);
    rc.put("quiet", quiet);
    rc.write(out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
