#include "btnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace btnet {

namespace {

using ordered_json = nlohmann::ordered_json;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::string& buf, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(buf[pos]) |
                                    (static_cast<unsigned char>(buf[pos + 1]) << 8));
}

std::uint32_t get_u32(const std::string& buf, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  return v;
}

ordered_json spec_to_json(const ModelSpec& spec) {
  ordered_json j;
  j["canonical_size"] = spec.canonical_size;
  j["stem_channels"] = spec.stem_channels;
  j["stem_kernel"] = spec.stem_kernel;
  j["stem_stride"] = spec.stem_stride;
  ordered_json stages = ordered_json::array();
  for (const StageSpec& st : spec.stages) {
    ordered_json s;
    s["channels"] = st.channels;
    s["blocks"] = st.blocks;
    s["stride"] = st.stride;
    stages.push_back(s);
  }
  j["stages"] = stages;
  j["embedding_dim"] = spec.embedding_dim;
  return j;
}

ModelSpec spec_from_json(const ordered_json& j) {
  ModelSpec spec;
  spec.canonical_size = j.at("canonical_size").get<int>();
  spec.stem_channels = j.at("stem_channels").get<int>();
  spec.stem_kernel = j.at("stem_kernel").get<int>();
  spec.stem_stride = j.at("stem_stride").get<int>();
  spec.stages.clear();
  for (const auto& s : j.at("stages")) {
    StageSpec st;
    st.channels = s.at("channels").get<int>();
    st.blocks = s.at("blocks").get<int>();
    st.stride = s.at("stride").get<int>();
    spec.stages.push_back(st);
  }
  spec.embedding_dim = j.at("embedding_dim").get<int>();
  spec.validate();
  return spec;
}

template <typename Model>
std::vector<NamedArray> collect_arrays(const Model& m) {
  std::vector<NamedArray> out;
  auto& mm = const_cast<Model&>(m);
  visit_arrays(mm, [&](ArrayRef ref) {
    NamedArray a;
    a.name = ref.name;
    a.shape = ref.shape;
    a.data.assign(ref.data(), ref.data() + ref.size());
    out.push_back(std::move(a));
  });
  return out;
}

// arrays under this prefix hold optimizer/loss state rather than model weights
bool is_state_array(const std::string& name) { return name.rfind("state.", 0) == 0; }

// overwrite model storage from the checkpoint; every model array must be
// present, and every non-state checkpoint array must land somewhere
template <typename Model>
void fill_arrays(Model& m, const CheckpointData& d) {
  std::map<std::string, const NamedArray*> by_name;
  std::size_t model_arrays = 0;
  for (const NamedArray& a : d.arrays) {
    if (!by_name.emplace(a.name, &a).second)
      throw std::runtime_error("checkpoint: duplicate array " + a.name);
    if (!is_state_array(a.name)) ++model_arrays;
  }
  std::size_t used = 0;
  visit_arrays(m, [&](ArrayRef ref) {
    auto it = by_name.find(ref.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing array " + ref.name);
    const NamedArray& a = *it->second;
    if (a.shape != ref.shape) throw std::runtime_error("checkpoint: shape mismatch for " + ref.name);
    std::memcpy(ref.data(), a.data.data(), a.data.size() * sizeof(float));
    ++used;
  });
  if (used != model_arrays)
    throw std::runtime_error("checkpoint: contains arrays the model does not");
}

}  // namespace

const NamedArray* CheckpointData::find(const std::string& name) const {
  for (const NamedArray& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void write_checkpoint(const std::string& path, const CheckpointData& d) {
  ordered_json meta;
  meta["kind"] = d.kind;
  meta["spec"] = spec_to_json(d.spec);
  ordered_json ints = ordered_json::object();
  for (const auto& [k, v] : d.ints) ints[k] = v;
  meta["ints"] = ints;
  ordered_json strings = ordered_json::object();
  for (const auto& [k, v] : d.strings) strings[k] = v;
  meta["strings"] = strings;
  ordered_json arrays = ordered_json::array();
  for (const NamedArray& a : d.arrays) {
    if (a.data.size() != shape_numel(a.shape))
      throw std::invalid_argument("checkpoint: array size mismatch for " + a.name);
    ordered_json e;
    e["name"] = a.name;
    e["shape"] = a.shape;
    e["dtype"] = "f32";
    arrays.push_back(e);
  }
  meta["arrays"] = arrays;
  const std::string meta_str = meta.dump();

  std::string buf;
  buf.reserve(10 + meta_str.size());
  buf += "BTNT";
  put_u16(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(meta_str.size()));
  buf += meta_str;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  for (const NamedArray& a : d.arrays) {
    std::string payload;
    payload.reserve(a.data.size() * 4);
    for (float f : a.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(payload, bits);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 10 || buf.compare(0, 4, "BTNT") != 0)
    throw std::runtime_error("not a checkpoint: " + path);
  const std::uint16_t version = get_u16(buf, 4);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t meta_len = get_u32(buf, 6);
  if (10 + static_cast<std::size_t>(meta_len) > buf.size())
    throw std::runtime_error("truncated checkpoint metadata: " + path);

  ordered_json meta;
  try {
    meta = ordered_json::parse(buf.substr(10, meta_len));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("bad checkpoint metadata: ") + e.what());
  }

  CheckpointData d;
  d.kind = meta.at("kind").get<std::string>();
  d.spec = spec_from_json(meta.at("spec"));
  for (const auto& [k, v] : meta.at("ints").items()) d.ints[k] = v.get<long long>();
  for (const auto& [k, v] : meta.at("strings").items()) d.strings[k] = v.get<std::string>();

  std::size_t pos = 10 + meta_len;
  for (const auto& e : meta.at("arrays")) {
    NamedArray a;
    a.name = e.at("name").get<std::string>();
    a.shape = e.at("shape").get<Shape>();
    if (e.at("dtype").get<std::string>() != "f32")
      throw std::runtime_error("unsupported dtype for " + a.name);
    const std::size_t n = shape_numel(a.shape);
    if (pos + n * 4 > buf.size()) throw std::runtime_error("truncated checkpoint payload: " + path);
    a.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(buf, pos + i * 4);
      std::memcpy(&a.data[i], &bits, 4);
    }
    pos += n * 4;
    d.arrays.push_back(std::move(a));
  }
  if (pos != buf.size()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return d;
}

CheckpointData checkpoint_from_trunk(const TrunkModel& m) {
  CheckpointData d;
  d.kind = "trunk";
  d.spec = m.spec;
  d.arrays = collect_arrays(m);
  return d;
}

CheckpointData checkpoint_from_btnet(const BTNetModel& m) {
  CheckpointData d;
  d.kind = "btnet";
  d.spec = m.trunk.spec;
  d.arrays = collect_arrays(m);
  return d;
}

CheckpointData checkpoint_from_branch(const BTNetModel& m, int r) {
  auto it = m.branches.find(r);
  if (it == m.branches.end())
    throw std::invalid_argument("no branch for resolution " + std::to_string(r));
  CheckpointData d;
  d.kind = "branch";
  d.spec = m.trunk.spec;
  d.ints["resolution"] = r;
  d.arrays = collect_arrays(it->second);
  auto& mm = const_cast<BTNetModel&>(m);
  visit_arrays(mm.trunk, [&](ArrayRef ref) {
    int bank = 0;
    if (!is_bn_array(ref.name, &bank) || bank != r) return;
    if (ref.name.rfind("trunk.stem.", 0) == 0) return;
    NamedArray a;
    a.name = ref.name;
    a.shape = ref.shape;
    a.data.assign(ref.data(), ref.data() + ref.size());
    d.arrays.push_back(std::move(a));
  });
  return d;
}

TrunkModel trunk_from_checkpoint(const CheckpointData& d) {
  if (d.kind != "trunk") throw std::invalid_argument("checkpoint kind is not trunk: " + d.kind);
  TrunkModel m = build_trunk(d.spec, 0);
  if (const NamedArray* k = d.find("trunk.kappa")) m.kappa = TensorF::zeros(k->shape);
  fill_arrays(m, d);
  return m;
}

BTNetModel btnet_from_checkpoint(const CheckpointData& d) {
  if (d.kind != "btnet") throw std::invalid_argument("checkpoint kind is not btnet: " + d.kind);
  TrunkModel trunk = build_trunk(d.spec, 0);
  if (const NamedArray* k = d.find("trunk.kappa")) trunk.kappa = TensorF::zeros(k->shape);
  BTNetModel m = assemble_btnet(trunk, 0);
  fill_arrays(m, d);
  return m;
}

void apply_branch_delta(BTNetModel& m, const CheckpointData& d) {
  if (d.kind != "branch") throw std::invalid_argument("checkpoint kind is not branch: " + d.kind);
  const int r = static_cast<int>(d.ints.at("resolution"));
  auto it = m.branches.find(r);
  if (it == m.branches.end())
    throw std::invalid_argument("model has no branch for resolution " + std::to_string(r));

  std::map<std::string, const NamedArray*> by_name;
  std::size_t model_arrays = 0;
  for (const NamedArray& a : d.arrays) {
    by_name[a.name] = &a;
    if (!is_state_array(a.name)) ++model_arrays;
  }
  std::size_t used = 0;
  auto apply = [&](ArrayRef ref) {
    auto hit = by_name.find(ref.name);
    if (hit == by_name.end()) return;
    if (hit->second->shape != ref.shape)
      throw std::runtime_error("branch delta shape mismatch for " + ref.name);
    std::memcpy(ref.data(), hit->second->data.data(), hit->second->data.size() * sizeof(float));
    ++used;
  };
  visit_arrays(it->second, apply);
  visit_arrays(m.trunk, apply);
  if (used != model_arrays)
    throw std::runtime_error("branch delta does not match the model layout");
}

}  // namespace btnet
