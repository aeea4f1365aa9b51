#include "btnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "btnet/resample.hpp"
#include "btnet/rng.hpp"

namespace fs = std::filesystem;

namespace btnet {

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const ManifestEntry& e : m.entries) {
    if (e.path.find('\t') != std::string::npos || e.split.find('\t') != std::string::npos)
      throw std::invalid_argument("manifest fields must not contain tabs");
    out << e.path << '\t' << e.identity << '\t' << e.width << '\t' << e.height << '\t' << e.split
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 5)
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": expected 5 columns");
    ManifestEntry e;
    e.path = cols[0];
    try {
      e.identity = std::stoi(cols[1]);
      e.width = std::stoi(cols[2]);
      e.height = std::stoi(cols[3]);
    } catch (const std::exception&) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": bad integer");
    }
    e.split = cols[4];
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace {

// sum of a few low-frequency cosine waves, one field per channel
Image identity_base(Rng& rng, int size) {
  Image img = Image::create(3, size, size);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> field(static_cast<std::size_t>(size) * size, 0.0);
    for (int wave = 0; wave < 6; ++wave) {
      int fx = 0, fy = 0;
      while (fx == 0 && fy == 0) {
        fx = static_cast<int>(rng.uniform_int(-3, 3));
        fy = static_cast<int>(rng.uniform_int(-3, 3));
      }
      const double amp = 1.0 / (1.0 + std::hypot(fx, fy));
      const double phase = rng.uniform() * 2.0 * M_PI;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          field[static_cast<std::size_t>(y) * size + x] +=
              amp * std::cos(2.0 * M_PI * (fx * static_cast<double>(x) / size +
                                           fy * static_cast<double>(y) / size) +
                             phase);
    }
    double lo = field[0], hi = field[0];
    for (double v : field) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (int i = 0; i < size * size; ++i)
      img.values[static_cast<std::size_t>(c) * size * size + i] =
          static_cast<float>(0.15 + 0.7 * (field[static_cast<std::size_t>(i)] - lo) / span);
  }
  return img;
}

// subpixel translation with edge clamping
Image shift_image(const Image& src, double dy, double dx) {
  Image out = Image::create(src.channels, src.height, src.width);
  for (int c = 0; c < src.channels; ++c)
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const double sy = std::clamp(y + dy, 0.0, src.height - 1.0);
        const double sx = std::clamp(x + dx, 0.0, src.width - 1.0);
        const int y0 = static_cast<int>(std::floor(sy));
        const int x0 = static_cast<int>(std::floor(sx));
        const int y1 = std::min(y0 + 1, src.height - 1);
        const int x1 = std::min(x0 + 1, src.width - 1);
        const double fy = sy - y0;
        const double fx = sx - x0;
        auto at = [&](int yy, int xx) {
          return static_cast<double>(
              src.values[(static_cast<std::size_t>(c) * src.height + yy) * src.width + xx]);
        };
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
        out.values[(static_cast<std::size_t>(c) * src.height + y) * src.width + x] =
            static_cast<float>(v);
      }
  return out;
}

Image perturb(const Image& base, Rng& rng) {
  Image img = shift_image(base, rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0);
  const double contrast = 0.85 + 0.3 * rng.uniform();
  const double brightness = (rng.uniform() - 0.5) * 0.1;
  for (float& v : img.values) {
    double x = (static_cast<double>(v) - 0.5) * contrast + 0.5 + brightness;
    x += rng.normal() * 0.02;
    v = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return img;
}

}  // namespace

DatasetManifest synth_data(const std::string& out_dir, const SynthConfig& cfg) {
  if (cfg.n_ids < 2) throw std::invalid_argument("need at least 2 identities");
  if (cfg.per_id < 1 || cfg.size < 4) throw std::invalid_argument("bad synth dimensions");
  if (cfg.holdout_ids < 0 || cfg.holdout_ids >= cfg.n_ids)
    throw std::invalid_argument("holdout must leave training identities");
  if (cfg.gallery_ids > cfg.holdout_ids)
    throw std::invalid_argument("gallery identities exceed the holdout set");

  fs::create_directories(out_dir);

  DatasetManifest m;
  m.root = out_dir;
  const int train_ids = cfg.n_ids - cfg.holdout_ids;
  for (int id = 0; id < cfg.n_ids; ++id) {
    Rng id_rng(Rng::substream_seed(cfg.seed, "synth/id" + std::to_string(id)));
    Image base = identity_base(id_rng, cfg.size);
    char dirbuf[32];
    std::snprintf(dirbuf, sizeof(dirbuf), "id_%03d", id);
    fs::create_directories(fs::path(out_dir) / dirbuf);
    for (int s = 0; s < cfg.per_id; ++s) {
      Rng samp_rng(Rng::substream_seed(cfg.seed,
                                       "synth/id" + std::to_string(id) + "/s" + std::to_string(s)));
      Image img = perturb(base, samp_rng);
      char name[64];
      std::snprintf(name, sizeof(name), "id_%03d/img_%03d.ppm", id, s);
      write_netpbm((fs::path(out_dir) / name).string(), img);

      ManifestEntry e;
      e.path = name;
      e.identity = id;
      e.width = cfg.size;
      e.height = cfg.size;
      if (id < train_ids) {
        e.split = "train";
      } else {
        const int hold_rank = id - train_ids;  // 0-based within the holdout set
        if (s < cfg.pairs_per_id) {
          e.split = "pairs";
        } else if (hold_rank < cfg.gallery_ids && s < cfg.pairs_per_id + cfg.gallery_per_id) {
          e.split = "gallery";
        } else {
          e.split = "probe";
        }
      }
      m.entries.push_back(std::move(e));
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.tsv").string(), m);
  return m;
}

Dataset load_split(const DatasetManifest& m, const std::string& split) {
  Dataset d;
  std::map<int, int> dense;
  for (const ManifestEntry& e : m.entries) {
    if (e.split != split) continue;
    Image img = read_netpbm((fs::path(m.root) / e.path).string());
    if (img.width != e.width || img.height != e.height)
      throw std::runtime_error("manifest size mismatch for " + e.path);
    auto [it, fresh] = dense.emplace(e.identity, static_cast<int>(dense.size()));
    d.samples.push_back({std::move(img), it->second});
    if (d.size == 0) d.size = e.width;
  }
  if (d.samples.empty()) throw std::runtime_error("split has no entries: " + split);
  d.num_identities = static_cast<int>(dense.size());
  return d;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

long long ConfigReader::get_int(const std::string& key, long long fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "' is not an integer: " + it->second);
  }
}

double ConfigReader::get_real(const std::string& key, double fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "' is not a number: " + it->second);
  }
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config key '" + key + "' is not a boolean: " + it->second);
}

std::vector<int> ConfigReader::get_int_list(const std::string& key, std::vector<int> fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "' has a bad list element: " + tok);
    }
  }
  if (out.empty()) throw std::runtime_error("config key '" + key + "' is an empty list");
  return out;
}

std::vector<double> ConfigReader::get_real_list(const std::string& key,
                                                std::vector<double> fallback) {
  used_[key] = true;
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "' has a bad list element: " + tok);
    }
  }
  if (out.empty()) throw std::runtime_error("config key '" + key + "' is an empty list");
  return out;
}

void ConfigReader::finish() const {
  for (const auto& [key, value] : kv_)
    if (!used_.count(key)) throw std::runtime_error("unknown config key: " + key);
}

TensorF batch_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("empty batch");
  const Image& first = *images.front();
  const int c = first.channels, h = first.height, w = first.width;
  std::vector<float> data;
  data.reserve(images.size() * first.values.size());
  for (const Image* img : images) {
    if (img->channels != c || img->height != h || img->width != w)
      throw std::invalid_argument("batch images must share a shape");
    data.insert(data.end(), img->values.begin(), img->values.end());
  }
  return TensorF::from_data({static_cast<int>(images.size()), c, h, w}, std::move(data));
}

Image tensor_to_image(const TensorF& batch, int index) {
  if (batch.rank() != 4) throw std::invalid_argument("expected an NCHW tensor");
  const int n = batch.shape()[0], c = batch.shape()[1], h = batch.shape()[2], w = batch.shape()[3];
  if (index < 0 || index >= n) throw std::invalid_argument("batch index out of range");
  Image img = Image::create(c, h, w);
  const std::size_t plane = static_cast<std::size_t>(c) * h * w;
  std::copy_n(batch.values().begin() + static_cast<std::size_t>(index) * plane, plane,
              img.values.begin());
  return img;
}

Image flip_horizontal(const Image& img) {
  Image out = Image::create(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.values[(static_cast<std::size_t>(c) * img.height + y) * img.width + x] =
            img.values[(static_cast<std::size_t>(c) * img.height + y) * img.width +
                       (img.width - 1 - x)];
  return out;
}

}  // namespace btnet
