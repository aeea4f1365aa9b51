#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "btnet/checkpoint.hpp"
#include "btnet/train.hpp"

using namespace btnet;

namespace {

std::string tmp_path(const std::string& stem) {
  return std::string("/tmp/btnet_train_") + stem;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// striped identities with distinct frequencies; separable but non-trivial
Image id_image(int id, int size, Rng& rng) {
  Image img = Image::create(3, size, size);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double v = 0.5 +
                   0.35 * std::sin(2.0 * M_PI * (id + 1) * x / size + c) *
                       std::cos(2.0 * M_PI * (id % 3 + 1) * y / size);
        v += rng.normal() * 0.03;
        img.at(c, y, x) = static_cast<float>(std::min(1.0, std::max(0.0, v)));
      }
  return img;
}

Dataset toy_dataset(int ids, int per_id, int size, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.size = size;
  d.num_identities = ids;
  for (int id = 0; id < ids; ++id)
    for (int s = 0; s < per_id; ++s) d.samples.push_back({id_image(id, size, rng), id});
  return d;
}

TrainConfig tiny_trunk_cfg() {
  TrainConfig cfg = TrainConfig::desk_trunk();
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.warmup_epochs = 0;
  cfg.seed = 21;
  return cfg;
}

TrainConfig tiny_branch_cfg() {
  TrainConfig cfg = TrainConfig::desk_branch();
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 22;
  return cfg;
}

std::map<std::string, std::vector<float>> snapshot(BTNetModel& m) {
  std::map<std::string, std::vector<float>> out;
  visit_arrays(m, [&](ArrayRef a) {
    out[a.name] = std::vector<float>(a.data(), a.data() + a.size());
  });
  return out;
}

}  // namespace

TEST_CASE("learning rate schedule endpoints and midpoint") {
  // 100 steps, 10 warmup: 0 at step 0, base at warmup end, 0 at the last step
  CHECK(lr_at(0, 100, 10, 0.4) == 0.0);
  CHECK(lr_at(5, 100, 10, 0.4) == doctest::Approx(0.2));
  CHECK(lr_at(10, 100, 10, 0.4) == doctest::Approx(0.4));
  CHECK(lr_at(99, 100, 10, 0.4) == 0.0);
  // exact midpoint of the decay span: (1 - 1/2)^2 = 1/4 of base
  CHECK(lr_at(60, 111, 10, 0.4) == doctest::Approx(0.4 * 0.25));
  // no warmup: base at step 0
  CHECK(lr_at(0, 50, 0, 0.1) == doctest::Approx(0.1));
  CHECK(lr_at(49, 50, 0, 0.1) == 0.0);
  // monotone decay after warmup
  for (int s = 10; s < 99; ++s) CHECK(lr_at(s, 100, 10, 0.4) > lr_at(s + 1, 100, 10, 0.4));
  CHECK_THROWS_AS(lr_at(100, 100, 10, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(-1, 100, 10, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(0, 100, 100, 0.4), std::invalid_argument);
}

TEST_CASE("halving sets") {
  CHECK(halving_set(32, 4) == std::vector<int>{32, 16, 8, 4});
  CHECK(halving_set(112, 5) == std::vector<int>{112, 56, 28, 14, 7});
  CHECK(halving_set(7, 1) == std::vector<int>{7});
  CHECK_THROWS_AS(halving_set(30, 3), std::invalid_argument);
}

TEST_CASE("resolution sampling distributions") {
  TrainConfig desk = TrainConfig::desk_trunk();
  Rng rng(99);

  desk.scheme = ResolutionScheme::none;
  for (int i = 0; i < 10; ++i) CHECK(sample_resolution(desk, rng) == 32);

  const int draws = 100000;
  desk.scheme = ResolutionScheme::equal_set;
  std::map<int, int> freq;
  for (int i = 0; i < draws; ++i) ++freq[sample_resolution(desk, rng)];
  CHECK(freq.size() == 4);
  for (int r : {32, 16, 8, 4})
    CHECK(std::abs(freq[r] / double(draws) - 0.25) < 0.01);

  // the five-candidate weighting puts 0.3 on the canonical size
  TrainConfig paper = TrainConfig::paper_trunk();
  paper.scheme = ResolutionScheme::weighted_set;
  freq.clear();
  for (int i = 0; i < draws; ++i) ++freq[sample_resolution(paper, rng)];
  CHECK(std::abs(freq[112] / double(draws) - 0.30) < 0.01);
  CHECK(std::abs(freq[56] / double(draws) - 0.25) < 0.01);
  CHECK(std::abs(freq[7] / double(draws) - 0.10) < 0.01);

  // desk weighting renormalizes the same shape over four candidates
  desk.scheme = ResolutionScheme::weighted_set;
  freq.clear();
  for (int i = 0; i < draws; ++i) ++freq[sample_resolution(desk, rng)];
  CHECK(std::abs(freq[32] / double(draws) - 0.3 / 0.9) < 0.01);

  desk.scheme = ResolutionScheme::uniform_interval;
  int lo = 1000, hi = 0;
  for (int i = 0; i < draws; ++i) {
    const int r = sample_resolution(desk, rng);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(lo == 4);
  CHECK(hi == 32);

  CHECK(resolution_scheme_from_string("weighted_set") == ResolutionScheme::weighted_set);
  CHECK(to_string(ResolutionScheme::uniform_interval) == "uniform_interval");
  CHECK_THROWS_AS(resolution_scheme_from_string("both"), std::invalid_argument);
}

TEST_CASE("training config validation") {
  TrainConfig cfg = TrainConfig::desk_trunk();
  CHECK_NOTHROW(cfg.validate());
  CHECK_NOTHROW(TrainConfig::desk_branch().validate());
  CHECK_NOTHROW(TrainConfig::paper_trunk().validate());
  CHECK_NOTHROW(TrainConfig::paper_branch().validate());

  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig::desk_trunk();
  cfg.warmup_epochs = cfg.epochs;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig::desk_trunk();
  cfg.scheme = ResolutionScheme::weighted_set;
  cfg.weights = {0.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // misaligned
  cfg.weights = {0.4, 0.3, 0.2, 0.2};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // sums past 1
  cfg = TrainConfig::desk_trunk();
  cfg.scheme = ResolutionScheme::equal_set;
  cfg.candidate_set = {4, 8, 16};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // ascending
  cfg = TrainConfig::desk_trunk();
  cfg.canonical_size = 64;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // disagrees with model
}

TEST_CASE("regime flags admit exactly the ladder rows") {
  CHECK(Regime::scratch().name() == "scratch");
  CHECK(Regime::pretraining().name() == "pretraining");
  CHECK(Regime::bct().name() == "bct");
  CHECK(Regime::fix_trunk().name() == "fix_trunk");
  CHECK(Regime::full().name() == "distill");

  Regime r;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);  // neither origin
  r = Regime::scratch();
  r.distill = true;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = Regime::pretraining();
  r.freeze_trunk = true;  // without the frozen classifier
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = Regime::bct();
  r.distill = true;  // without the frozen trunk
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("trunk training is deterministic and logs every step") {
  Dataset data = toy_dataset(4, 8, 32, 301);
  TrainConfig cfg = tiny_trunk_cfg();
  cfg.log_path = tmp_path("trunk.csv");

  CheckpointData c1 = train_trunk(cfg, data);
  const std::string log1 = slurp(cfg.log_path);
  CheckpointData c2 = train_trunk(cfg, data);

  const std::string p1 = tmp_path("trunk1.bin"), p2 = tmp_path("trunk2.bin");
  write_checkpoint(p1, c1);
  write_checkpoint(p2, c2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(cfg.log_path) == log1);

  // 32 images, batch 4, 1 epoch -> 8 logged steps after the header
  std::istringstream log(log1);
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,lr,loss_influence,loss_distill,loss_total");
  int rows = 0;
  double first_lr = -1.0;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    if (rows == 0) {
      std::istringstream ls(line);
      std::string step_s, lr_s;
      std::getline(ls, step_s, ',');
      std::getline(ls, lr_s, ',');
      CHECK(step_s == "0");
      first_lr = std::stod(lr_s);
    }
    ++rows;
  }
  CHECK(rows == 8);
  CHECK(first_lr == doctest::Approx(cfg.base_lr));  // no warmup

  CHECK(c1.kind == "trunk");
  CHECK(c1.find("trunk.kappa") != nullptr);
  const NamedArray* t = c1.find("state.curricular_t");
  REQUIRE(t != nullptr);
  CHECK(t->data.size() == 1);
  CHECK(t->data[0] >= 0.0f);
  CHECK(t->data[0] <= 1.0f);

  // a different seed moves the weights
  cfg.seed = 404;
  cfg.log_path.clear();
  CheckpointData c3 = train_trunk(cfg, data);
  const std::string p3 = tmp_path("trunk3.bin");
  write_checkpoint(p3, c3);
  CHECK(slurp(p1) != slurp(p3));
}

TEST_CASE("fixed-resolution training stamps the resolution") {
  Dataset data = toy_dataset(3, 8, 32, 302);
  TrainConfig cfg = tiny_trunk_cfg();
  CheckpointData c = train_mm(cfg, data, 8);
  CHECK(c.ints.at("resolution") == 8);
  CHECK(c.strings.at("scheme") == "fixed");

  cfg.scheme = ResolutionScheme::equal_set;
  CHECK_THROWS_AS(train_mm(cfg, data, 8), std::invalid_argument);
  cfg = tiny_trunk_cfg();
  CHECK_THROWS_AS(train_mm(cfg, data, 0), std::invalid_argument);
  CHECK_THROWS_AS(train_mm(cfg, data, 33), std::invalid_argument);
}

TEST_CASE("frozen-trunk branch training touches exactly the branch and its bank") {
  Dataset data = toy_dataset(4, 8, 32, 303);
  TrainConfig tcfg = tiny_trunk_cfg();
  CheckpointData trunk_ckpt = train_trunk(tcfg, data);

  TrainConfig bcfg = tiny_branch_cfg();
  CheckpointData delta = train_branch(trunk_ckpt, 8, Regime::fix_trunk(), bcfg, data);
  CHECK(delta.kind == "branch");
  CHECK(delta.ints.at("resolution") == 8);
  CHECK(delta.strings.at("regime") == "fix_trunk");

  for (const NamedArray& a : delta.arrays) {
    const bool branch8 = a.name.rfind("branch8.", 0) == 0;
    int res = 0;
    const bool bank8 = a.name.rfind("trunk.", 0) == 0 && is_bn_array(a.name, &res) && res == 8;
    CHECK((branch8 || bank8));
  }

  // replaying the delta onto a fresh assembly changes only the named arrays
  TrunkModel trunk = trunk_from_checkpoint(trunk_ckpt);
  BTNetModel base = assemble_btnet(trunk, Rng::substream_seed(bcfg.seed, "assemble"));
  auto before = snapshot(base);
  apply_branch_delta(base, delta);
  auto after = snapshot(base);
  std::set<std::string> delta_names;
  for (const NamedArray& a : delta.arrays) delta_names.insert(a.name);
  int moved = 0;
  for (const auto& [name, vals] : before) {
    const auto& now = after.at(name);
    if (delta_names.count(name)) {
      if (std::memcmp(vals.data(), now.data(), vals.size() * sizeof(float)) != 0) ++moved;
    } else {
      CHECK(std::memcmp(vals.data(), now.data(), vals.size() * sizeof(float)) == 0);
    }
  }
  CHECK(moved > 0);

  // determinism across repeat runs
  CheckpointData delta2 = train_branch(trunk_ckpt, 8, Regime::fix_trunk(), bcfg, data);
  const std::string p1 = tmp_path("delta1.bin"), p2 = tmp_path("delta2.bin");
  write_checkpoint(p1, delta);
  write_checkpoint(p2, delta2);
  CHECK(slurp(p1) == slurp(p2));

  CHECK_THROWS_AS(train_branch(trunk_ckpt, 9, Regime::fix_trunk(), bcfg, data),
                  std::invalid_argument);
}

TEST_CASE("classifier freezing separates the bct and pretraining regimes") {
  Dataset data = toy_dataset(4, 8, 32, 304);
  TrainConfig tcfg = tiny_trunk_cfg();
  CheckpointData trunk_ckpt = train_trunk(tcfg, data);
  const NamedArray* kappa_in = trunk_ckpt.find("trunk.kappa");
  REQUIRE(kappa_in != nullptr);

  TrainConfig bcfg = tiny_branch_cfg();
  CheckpointData bct = train_branch(trunk_ckpt, 8, Regime::bct(), bcfg, data);
  CHECK(bct.kind == "btnet");
  const NamedArray* kappa_bct = bct.find("trunk.kappa");
  REQUIRE(kappa_bct != nullptr);
  CHECK(std::memcmp(kappa_in->data.data(), kappa_bct->data.data(),
                    kappa_in->data.size() * sizeof(float)) == 0);

  CheckpointData pre = train_branch(trunk_ckpt, 8, Regime::pretraining(), bcfg, data);
  const NamedArray* kappa_pre = pre.find("trunk.kappa");
  REQUIRE(kappa_pre != nullptr);
  CHECK(std::memcmp(kappa_in->data.data(), kappa_pre->data.data(),
                    kappa_in->data.size() * sizeof(float)) != 0);

  // bct moves the on-path trunk suffix (stage 2 for the 8-branch) ...
  const NamedArray* s2_in = trunk_ckpt.find("trunk.s2.b0.conv1.weight");
  const NamedArray* s2_bct = bct.find("trunk.s2.b0.conv1.weight");
  REQUIRE(s2_in != nullptr);
  REQUIRE(s2_bct != nullptr);
  CHECK(std::memcmp(s2_in->data.data(), s2_bct->data.data(),
                    s2_in->data.size() * sizeof(float)) != 0);
  // ... while off-path layers receive no gradient and stay put
  const NamedArray* stem_in = trunk_ckpt.find("trunk.stem.conv.weight");
  const NamedArray* stem_bct = bct.find("trunk.stem.conv.weight");
  REQUIRE(stem_in != nullptr);
  REQUIRE(stem_bct != nullptr);
  CHECK(std::memcmp(stem_in->data.data(), stem_bct->data.data(),
                    stem_in->data.size() * sizeof(float)) == 0);
}

TEST_CASE("distillation regime logs a shrinking distill term") {
  Dataset data = toy_dataset(4, 8, 32, 305);
  TrainConfig tcfg = tiny_trunk_cfg();
  tcfg.epochs = 2;
  CheckpointData trunk_ckpt = train_trunk(tcfg, data);

  TrainConfig bcfg = tiny_branch_cfg();
  bcfg.epochs = 2;  // 16 steps
  bcfg.log_path = tmp_path("distill.csv");
  CheckpointData out = train_branch(trunk_ckpt, 8, Regime::full(), bcfg, data);
  CHECK(out.kind == "branch");

  std::istringstream log(slurp(bcfg.log_path));
  std::string line;
  std::getline(log, line);  // header
  std::vector<double> distill;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    for (int i = 0; i < 4; ++i) std::getline(ls, cell, ',');
    distill.push_back(std::stod(cell));
  }
  REQUIRE(distill.size() == 16);
  for (double v : distill) CHECK(v > 0.0);
  double head3 = (distill[0] + distill[1] + distill[2]) / 3.0;
  double tail3 = (distill[13] + distill[14] + distill[15]) / 3.0;
  CHECK(tail3 < head3);
}

TEST_CASE("poisoned input aborts loudly") {
  Dataset data = toy_dataset(2, 4, 32, 306);
  data.samples[0].image.at(0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig cfg = tiny_trunk_cfg();
  cfg.batch_size = 8;  // one batch holding every sample, poisoned pixel included
  CHECK_THROWS(train_trunk(cfg, data));
}

TEST_CASE("branch training rejects mismatched inputs") {
  Dataset data = toy_dataset(3, 8, 32, 307);
  TrainConfig tcfg = tiny_trunk_cfg();
  CheckpointData trunk_ckpt = train_trunk(tcfg, data);
  TrainConfig bcfg = tiny_branch_cfg();

  // classifier sized for 3 identities; a 4-identity dataset cannot reuse it
  Dataset other = toy_dataset(4, 8, 32, 308);
  CHECK_THROWS_AS(train_branch(trunk_ckpt, 8, Regime::bct(), bcfg, other),
                  std::invalid_argument);

  // checkpoints without a classifier cannot drive influence training
  TrunkModel bare = build_trunk(ModelSpec::desk(), 1);
  CheckpointData bare_ckpt = checkpoint_from_trunk(bare);
  CHECK_THROWS_AS(train_branch(bare_ckpt, 8, Regime::bct(), bcfg, data),
                  std::invalid_argument);

  bcfg.scheme = ResolutionScheme::equal_set;
  CHECK_THROWS_AS(train_branch(trunk_ckpt, 8, Regime::bct(), bcfg, data),
                  std::invalid_argument);
}
