#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "btnet/image.hpp"
#include "btnet/tensor.hpp"

namespace btnet {

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int identity = 0;
  int width = 0;
  int height = 0;
  std::string split;  // train | gallery | probe | pairs
};

struct DatasetManifest {
  std::string root;  // directory the entry paths resolve against
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

struct SynthConfig {
  int n_ids = 64;
  int per_id = 40;
  int size = 32;
  std::uint64_t seed = 1;
  // identities reserved for evaluation; their images carry the eval splits
  int holdout_ids = 8;
  int gallery_ids = 6;      // of the holdout set; the rest probe as non-mated
  int gallery_per_id = 5;   // images per gallery identity enrolled as gallery
  int pairs_per_id = 20;    // holdout images feeding verification pairs
};

// smooth per-identity base fields with per-sample shift/contrast/noise;
// writes NetPBM files plus manifest.tsv and returns the manifest
DatasetManifest synth_data(const std::string& out_dir, const SynthConfig& cfg);

struct Sample {
  Image image;
  int identity = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_identities = 0;  // dense labels 0..n-1 within this split
  int size = 0;
};

// loads one split; identities are re-densified in first-appearance order
Dataset load_split(const DatasetManifest& m, const std::string& split);

// key = value lines, '#' comments; later keys override earlier ones
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// typed view over parsed keys that rejects unknown or left-over keys
class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key, long long fallback);
  double get_real(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);
  std::vector<double> get_real_list(const std::string& key, std::vector<double> fallback);

  // every key must have been consumed by a getter by the time this runs
  void finish() const;

 private:
  std::map<std::string, std::string> kv_;
  std::map<std::string, bool> used_;
};

// planar CHW float tensor for a batch of same-sized images
TensorF batch_to_tensor(const std::vector<const Image*>& images);
Image tensor_to_image(const TensorF& batch, int index);
Image flip_horizontal(const Image& img);

}  // namespace btnet
