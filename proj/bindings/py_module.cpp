// Python bindings for the branch-trunk toolkit: checkpoints, models with
// embedding extraction, branch selection, gain formulas, the interpolation
// bound, synthetic data, and the training entry points.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "btnet/checkpoint.hpp"
#include "btnet/data.hpp"
#include "btnet/eval.hpp"
#include "btnet/experiment.hpp"
#include "btnet/image.hpp"
#include "btnet/model.hpp"
#include "btnet/resample.hpp"
#include "btnet/select.hpp"
#include "btnet/train.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace btnet;

namespace {

Regime regime_from_name(const std::string& s) {
  if (s == "scratch") return Regime::scratch();
  if (s == "pretraining") return Regime::pretraining();
  if (s == "bct") return Regime::bct();
  if (s == "fix_trunk") return Regime::fix_trunk();
  if (s == "distill" || s == "full") return Regime::full();
  throw std::invalid_argument("unknown regime: " + s);
}

SelectionPolicy make_policy(const std::string& indicator, const std::string& alloc,
                            std::vector<int> branches) {
  SelectionPolicy p;
  p.indicator = indicator_from_string(indicator);
  p.allocation = allocation_from_string(alloc);
  p.branch_set = std::move(branches);
  return p;
}

TrainConfig make_train_config(const std::string& preset, bool branch_defaults,
                              std::optional<int> epochs, std::optional<int> batch_size,
                              std::optional<double> lr, std::optional<std::uint64_t> seed,
                              std::optional<std::string> scheme, std::optional<std::string> loss,
                              std::optional<int> warmup) {
  TrainConfig cfg;
  if (preset == "desk") {
    cfg = branch_defaults ? TrainConfig::desk_branch() : TrainConfig::desk_trunk();
  } else if (preset == "paper") {
    cfg = branch_defaults ? TrainConfig::paper_branch() : TrainConfig::paper_trunk();
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  if (epochs) cfg.epochs = *epochs;
  if (warmup) cfg.warmup_epochs = *warmup;
  if (batch_size) cfg.batch_size = *batch_size;
  if (lr) cfg.base_lr = *lr;
  if (seed) cfg.seed = *seed;
  if (scheme) cfg.scheme = resolution_scheme_from_string(*scheme);
  if (loss) cfg.loss_kind = margin_kind_from_string(*loss);
  return cfg;
}

void maybe_save(const CheckpointData& ck, const std::string& out) {
  if (out.empty()) return;
  fs::path parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_checkpoint(out, ck);
}

// a loaded model: either the bare canonical-path trunk or a full
// branch-trunk network, with a branch delta pinning its one resolution
struct PyModel {
  BTNetModel model;
  bool trunk_only = false;
  int only_branch = 0;

  static PyModel load(const std::string& path, const std::string& trunk_path) {
    CheckpointData ck = read_checkpoint(path);
    PyModel pm;
    if (ck.kind == "trunk") {
      pm.model = assemble_btnet(trunk_from_checkpoint(ck), 0);
      pm.trunk_only = true;
    } else if (ck.kind == "btnet") {
      pm.model = btnet_from_checkpoint(ck);
    } else if (ck.kind == "branch") {
      if (trunk_path.empty())
        throw std::invalid_argument("a branch delta checkpoint needs trunk=");
      pm.model = assemble_btnet(trunk_from_checkpoint(read_checkpoint(trunk_path)), 0);
      apply_branch_delta(pm.model, ck);
      auto it = ck.ints.find("resolution");
      if (it == ck.ints.end()) throw std::invalid_argument("branch delta lacks its resolution");
      pm.only_branch = static_cast<int>(it->second);
    } else {
      throw std::invalid_argument("unknown checkpoint kind '" + ck.kind + "'");
    }
    return pm;
  }

  std::vector<int> branches() const {
    std::vector<int> out;
    if (only_branch > 0) {
      out.push_back(only_branch);
    } else {
      for (const auto& [r, b] : model.branches) out.push_back(r);
    }
    return out;
  }

  int pick_branch(int r) const {
    SelectionPolicy pol = make_policy("max", "ceil", branches());
    return select_branch(r, r, pol);
  }

  std::vector<float> embed(const std::string& image_path, int r) {
    Image img = read_netpbm(image_path);
    NoGradGuard ng;
    const int S = model.trunk.spec.canonical_size;
    if (trunk_only) {
      Image work = img;
      if (r < S) work = resize_bilinear(resize_bilinear(work, r, r), S, S);
      else if (work.height != S || work.width != S) work = resize_bilinear(work, S, S);
      std::vector<const Image*> one{&work};
      return trunk_forward(model.trunk, batch_to_tensor(one), S, BNMode::infer).values();
    }
    const int chosen = pick_branch(r);
    Image native = prepare_input(img, r);
    Image low = prepare_input(native, chosen);
    std::vector<const Image*> one{&low};
    return btnet_forward(model, batch_to_tensor(one), chosen, BNMode::infer).values();
  }

  long long param_count(const std::string& mode, int r) const {
    if (mode == "full_finetune") return count_params(model, CountMode::full_finetune, 0);
    if (mode == "branch_plus_bn") return count_params(model, CountMode::branch_plus_bn, r);
    throw std::invalid_argument("mode must be full_finetune or branch_plus_bn");
  }

  long long flops(int r) const { return count_flops(model, r).total; }

  std::vector<std::pair<std::string, long long>> flop_items(int r) const {
    return count_flops(model, r).items;
  }
};

double verify_accuracy(PyModel& pm, const std::string& manifest, const std::string& split,
                       int r1, int r2, int folds, std::uint64_t pair_seed) {
  Dataset d = load_split(read_manifest(manifest), split);
  PairSet ps = balanced_pairs(d, pair_seed);
  auto side = [&](int r) {
    if (pm.trunk_only) return embed_trunk_all(pm.model.trunk, d, r);
    const int chosen = pm.pick_branch(r);
    return embed_branch_all(pm.model, d, chosen, 64, r == chosen ? 0 : r);
  };
  std::vector<Embedding> ea = side(r1);
  std::vector<Embedding> eb = r2 == r1 ? ea : side(r2);
  return verification_accuracy_scores(score_pairs(ea, eb, ps), folds);
}

}  // namespace

PYBIND11_MODULE(_btnet, m) {
  m.doc() = "branch-trunk network toolkit";
  m.attr("__version__") = "0.1.0";

  py::class_<CheckpointData>(m, "Checkpoint")
      .def_readonly("kind", &CheckpointData::kind)
      .def("save", [](const CheckpointData& ck, const std::string& path) { maybe_save(ck, path); },
           py::arg("path"))
      .def_static("load", [](const std::string& path) { return read_checkpoint(path); },
                  py::arg("path"));

  py::class_<PyModel>(m, "Model")
      .def_static("load", &PyModel::load, py::arg("path"), py::arg("trunk") = std::string(),
                  "Load a trunk, full, or branch-delta checkpoint (deltas need trunk=).")
      .def_property_readonly("branches", &PyModel::branches)
      .def_property_readonly("is_trunk", [](const PyModel& pm) { return pm.trunk_only; })
      .def("embed", &PyModel::embed, py::arg("image"), py::arg("r"),
           "Embedding of a NetPBM image presented at resolution r.")
      .def("param_count", &PyModel::param_count, py::arg("mode") = "branch_plus_bn",
           py::arg("r") = 0)
      .def("flops", &PyModel::flops, py::arg("r"))
      .def("flop_items", &PyModel::flop_items, py::arg("r"));

  m.def(
      "select_branch",
      [](int h, int w, const std::string& indicator, const std::string& alloc,
         std::vector<int> branches) {
        return select_branch(h, w, make_policy(indicator, alloc, std::move(branches)));
      },
      py::arg("h"), py::arg("w"), py::arg("indicator") = "max", py::arg("alloc") = "ceil",
      py::arg("branches") = std::vector<int>{7, 14, 28, 112});

  m.def(
      "cross_res_gain",
      [](double m_, double m_hr, double m_mr) -> std::optional<double> {
        return cross_res_gain(m_, m_hr, m_mr);
      },
      py::arg("m"), py::arg("m_hr"), py::arg("m_mr"));
  m.def(
      "same_res_gain",
      [](double m_, double m_hr, double m_r) -> std::optional<double> {
        return same_res_gain(m_, m_hr, m_r);
      },
      py::arg("m"), py::arg("m_hr"), py::arg("m_r"));

  m.def(
      "error_upper_bound",
      [](const std::string& path, const std::string& agg) {
        return error_upper_bound(read_netpbm(path),
                                 agg == "max" ? BoundAggregate::max : BoundAggregate::mean);
      },
      py::arg("image"), py::arg("agg") = "mean");

  m.def(
      "error_curve",
      [](const std::vector<std::string>& paths, const std::vector<int>& resolutions,
         int canonical, const std::string& agg) {
        std::vector<Image> images;
        images.reserve(paths.size());
        for (const auto& p : paths) images.push_back(read_netpbm(p));
        ErrorCurve c = error_curve(images, resolutions, canonical,
                                   agg == "max" ? BoundAggregate::max : BoundAggregate::mean);
        std::vector<std::pair<int, double>> out;
        for (std::size_t i = 0; i < c.resolutions.size(); ++i)
          out.push_back({c.resolutions[i], c.mean_bound[i]});
        return out;
      },
      py::arg("images"), py::arg("resolutions"), py::arg("canonical") = 112,
      py::arg("agg") = "mean");

  m.def(
      "synth_data",
      [](const std::string& out, int ids, int per_id, int size, std::uint64_t seed, int holdout,
         int gallery_ids, int gallery_per_id, int pairs_per_id) {
        SynthConfig cfg;
        cfg.n_ids = ids;
        cfg.per_id = per_id;
        cfg.size = size;
        cfg.seed = seed;
        cfg.holdout_ids = holdout;
        cfg.gallery_ids = gallery_ids;
        cfg.gallery_per_id = gallery_per_id;
        cfg.pairs_per_id = pairs_per_id;
        synth_data(out, cfg);
        return (fs::path(out) / "manifest.tsv").string();
      },
      py::arg("out"), py::arg("ids") = 64, py::arg("per_id") = 40, py::arg("size") = 32,
      py::arg("seed") = 1, py::arg("holdout") = 8, py::arg("gallery_ids") = 6,
      py::arg("gallery_per_id") = 5, py::arg("pairs_per_id") = 20,
      "Generate a synthetic identity dataset; returns the manifest path.");

  m.def(
      "train_trunk",
      [](const std::string& manifest, const std::string& out, const std::string& split,
         const std::string& preset, std::optional<int> epochs, std::optional<int> batch_size,
         std::optional<double> lr, std::optional<std::uint64_t> seed,
         std::optional<std::string> scheme, std::optional<std::string> loss,
         std::optional<int> warmup) {
        TrainConfig cfg =
            make_train_config(preset, false, epochs, batch_size, lr, seed, scheme, loss, warmup);
        CheckpointData ck = train_trunk(cfg, load_split(read_manifest(manifest), split));
        maybe_save(ck, out);
        return ck;
      },
      py::arg("manifest"), py::arg("out") = std::string(), py::arg("split") = "train",
      py::arg("preset") = "desk", py::arg("epochs") = std::nullopt,
      py::arg("batch_size") = std::nullopt, py::arg("lr") = std::nullopt,
      py::arg("seed") = std::nullopt, py::arg("scheme") = std::nullopt,
      py::arg("loss") = std::nullopt, py::arg("warmup") = std::nullopt);

  m.def(
      "train_mm",
      [](const std::string& manifest, int r, const std::string& out, const std::string& split,
         const std::string& preset, std::optional<int> epochs, std::optional<int> batch_size,
         std::optional<double> lr, std::optional<std::uint64_t> seed,
         std::optional<std::string> loss, std::optional<int> warmup) {
        TrainConfig cfg = make_train_config(preset, false, epochs, batch_size, lr, seed,
                                            std::nullopt, loss, warmup);
        CheckpointData ck = train_mm(cfg, load_split(read_manifest(manifest), split), r);
        maybe_save(ck, out);
        return ck;
      },
      py::arg("manifest"), py::arg("r"), py::arg("out") = std::string(),
      py::arg("split") = "train", py::arg("preset") = "desk", py::arg("epochs") = std::nullopt,
      py::arg("batch_size") = std::nullopt, py::arg("lr") = std::nullopt,
      py::arg("seed") = std::nullopt, py::arg("loss") = std::nullopt,
      py::arg("warmup") = std::nullopt);

  m.def(
      "train_branch",
      [](const std::string& manifest, const CheckpointData& trunk, int r,
         const std::string& regime, const std::string& out, const std::string& split,
         const std::string& preset, std::optional<int> epochs, std::optional<int> batch_size,
         std::optional<double> lr, std::optional<std::uint64_t> seed,
         std::optional<std::string> loss, std::optional<int> warmup) {
        Regime rg = regime_from_name(regime);
        TrainConfig cfg = make_train_config(preset, !rg.from_scratch, epochs, batch_size, lr,
                                            seed, std::nullopt, loss, warmup);
        CheckpointData ck =
            train_branch(trunk, r, rg, cfg, load_split(read_manifest(manifest), split));
        maybe_save(ck, out);
        return ck;
      },
      py::arg("manifest"), py::arg("trunk"), py::arg("r"), py::arg("regime"),
      py::arg("out") = std::string(), py::arg("split") = "train", py::arg("preset") = "desk",
      py::arg("epochs") = std::nullopt, py::arg("batch_size") = std::nullopt,
      py::arg("lr") = std::nullopt, py::arg("seed") = std::nullopt,
      py::arg("loss") = std::nullopt, py::arg("warmup") = std::nullopt);

  m.def("verify_accuracy", &verify_accuracy, py::arg("model"), py::arg("manifest"),
        py::arg("split") = "pairs", py::arg("r1") = 32, py::arg("r2") = 32,
        py::arg("folds") = 10, py::arg("pair_seed") = 7,
        "Balanced-pair verification accuracy in percent at a resolution pair.");
}
