#include "btnet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "btnet/rng.hpp"

namespace btnet {

ModelSpec ModelSpec::desk() {
  ModelSpec s;
  s.canonical_size = 32;
  s.stem_channels = 16;
  s.stem_kernel = 3;
  s.stem_stride = 1;
  s.stages = {{32, 2, 2}, {64, 2, 2}, {128, 2, 2}};
  s.embedding_dim = 64;
  return s;
}

ModelSpec ModelSpec::paper() {
  ModelSpec s;
  s.canonical_size = 112;
  s.stem_channels = 64;
  s.stem_kernel = 3;
  s.stem_stride = 1;
  s.stages = {{256, 3, 2}, {512, 4, 2}, {1024, 6, 2}, {2048, 3, 2}};
  s.embedding_dim = 512;
  return s;
}

void ModelSpec::validate() const {
  if (canonical_size < 2 || stem_channels < 1 || embedding_dim < 1)
    throw std::invalid_argument("model spec: positive dims required");
  if (stem_kernel % 2 != 1 || stem_stride != 1)
    throw std::invalid_argument("model spec: stem must be odd-kernel, stride 1");
  if (stages.empty()) throw std::invalid_argument("model spec: at least one stage");
  int size = canonical_size;
  for (const StageSpec& st : stages) {
    if (st.channels < 1 || st.blocks < 1) throw std::invalid_argument("model spec: bad stage");
    if (st.stride != 2) throw std::invalid_argument("model spec: stages must downsample by 2");
    if (size % 2 != 0) throw std::invalid_argument("model spec: canonical size not divisible");
    size /= 2;
  }
  if (size < 1) throw std::invalid_argument("model spec: too many stages for canonical size");
}

std::vector<int> ModelSpec::tap_resolutions() const {
  std::vector<int> out{canonical_size};
  int size = canonical_size;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    size /= 2;
    out.push_back(size);
  }
  return out;
}

std::map<int, int> ModelSpec::tap_channels() const {
  std::map<int, int> out;
  out[canonical_size] = stem_channels;
  int size = canonical_size;
  for (const StageSpec& st : stages) {
    size /= 2;
    out[size] = st.channels;
  }
  return out;
}

BNBank BNBank::init(int channels, int resolution) {
  BNBank b;
  b.channels = channels;
  b.banks.emplace(resolution, BNParams<float>::init(channels, resolution));
  return b;
}

BNParams<float>& BNBank::at(int resolution) {
  auto it = banks.find(resolution);
  if (it == banks.end())
    throw std::invalid_argument("no BN bank for resolution " + std::to_string(resolution));
  return it->second;
}

const BNParams<float>& BNBank::at(int resolution) const {
  auto it = banks.find(resolution);
  if (it == banks.end())
    throw std::invalid_argument("no BN bank for resolution " + std::to_string(resolution));
  return it->second;
}

void BNBank::add_bank_copy(int new_resolution, int from_resolution) {
  BNParams<float> copy = at(from_resolution).clone();
  copy.resolution = new_resolution;
  banks.insert_or_assign(new_resolution, std::move(copy));
}

namespace {

TensorF he_conv(Rng& rng, int cout, int cin, int k) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(cin * k * k));
  return TensorF::randn({cout, cin, k, k}, rng, stddev);
}

ResBlock make_block(Rng& rng, int in_ch, int out_ch, int stride, int resolution) {
  ResBlock b;
  b.in_ch = in_ch;
  b.out_ch = out_ch;
  b.stride = stride;
  b.conv1 = he_conv(rng, out_ch, in_ch, 3);
  b.bn1 = BNBank::init(out_ch, resolution);
  b.conv2 = he_conv(rng, out_ch, out_ch, 3);
  b.bn2 = BNBank::init(out_ch, resolution);
  b.has_proj = (in_ch != out_ch) || (stride != 1);
  if (b.has_proj) {
    b.proj = he_conv(rng, out_ch, in_ch, 1);
    b.bnp = BNBank::init(out_ch, resolution);
  }
  return b;
}

TensorF block_forward(ResBlock& blk, const TensorF& x, int bank_r, BNMode mode) {
  TensorF y = conv2d(x, blk.conv1, blk.stride, 1);
  y = relu(batchnorm(y, blk.bn1.at(bank_r), mode));
  y = conv2d(y, blk.conv2, 1, 1);
  y = batchnorm(y, blk.bn2.at(bank_r), mode);
  TensorF shortcut = x;
  if (blk.has_proj) {
    shortcut = conv2d(x, blk.proj, blk.stride, 0);
    shortcut = batchnorm(shortcut, blk.bnp.at(bank_r), mode);
  }
  return relu(add(y, shortcut));
}

// stage index whose output is the tap for r; 0 means the tap sits after the
// stem and before any stage
int tap_stage_index(const ModelSpec& spec, int r) {
  int size = spec.canonical_size;
  for (std::size_t k = 0; k <= spec.stages.size(); ++k) {
    if (size == r) return static_cast<int>(k);
    size /= 2;
  }
  throw std::invalid_argument("unsupported tap resolution " + std::to_string(r));
}

TensorF head_forward(TrunkModel& m, const TensorF& x) {
  TensorF pooled = global_avg_pool(x);
  TensorF emb = linear(pooled, m.embed_w, &m.embed_b);
  return l2_normalize(emb);
}

BNParams<float> clone_bnparams(const BNParams<float>& p) { return p.clone(); }

BNBank clone_bank(const BNBank& b) {
  BNBank out;
  out.channels = b.channels;
  for (const auto& [r, params] : b.banks) out.banks.emplace(r, clone_bnparams(params));
  return out;
}

ResBlock clone_block(const ResBlock& b) {
  ResBlock out;
  out.in_ch = b.in_ch;
  out.out_ch = b.out_ch;
  out.stride = b.stride;
  out.conv1 = b.conv1.detach();
  out.conv2 = b.conv2.detach();
  out.bn1 = clone_bank(b.bn1);
  out.bn2 = clone_bank(b.bn2);
  out.has_proj = b.has_proj;
  if (b.has_proj) {
    out.proj = b.proj.detach();
    out.bnp = clone_bank(b.bnp);
  }
  return out;
}

}  // namespace

TrunkModel build_trunk(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  TrunkModel m;
  m.spec = spec;
  Rng rng = Rng::substream(seed, "init");
  const int S = spec.canonical_size;
  m.stem_w = he_conv(rng, spec.stem_channels, 3, spec.stem_kernel);
  m.stem_bn = BNBank::init(spec.stem_channels, S);
  int in_ch = spec.stem_channels;
  for (const StageSpec& st : spec.stages) {
    std::vector<ResBlock> blocks;
    for (int b = 0; b < st.blocks; ++b) {
      blocks.push_back(make_block(rng, in_ch, st.channels, b == 0 ? st.stride : 1, S));
      in_ch = st.channels;
    }
    m.stages.push_back(std::move(blocks));
  }
  const float estd = std::sqrt(2.0f / static_cast<float>(in_ch));
  m.embed_w = TensorF::randn({spec.embedding_dim, in_ch}, rng, estd);
  m.embed_b = TensorF::zeros({spec.embedding_dim});
  return m;
}

BranchNet build_branch(const ModelSpec& spec, int r, std::uint64_t seed,
                       const TrunkModel* init_from) {
  spec.validate();
  const int k = tap_stage_index(spec, r);
  BranchNet b;
  b.resolution = r;
  Rng rng = Rng::substream(seed, "init/branch" + std::to_string(r));
  b.stem_w = he_conv(rng, spec.stem_channels, 3, spec.stem_kernel);
  b.stem_bn = BNBank::init(spec.stem_channels, r);
  int in_ch = spec.stem_channels;
  for (int i = 0; i < k; ++i) {
    b.units.push_back(make_block(rng, in_ch, spec.stages[static_cast<std::size_t>(i)].channels, 1, r));
    in_ch = spec.stages[static_cast<std::size_t>(i)].channels;
  }
  if (init_from) {
    // copy the trunk prefix: stem plus the first block of each covered stage
    // (stride differences do not change the weight shapes)
    b.stem_w = init_from->stem_w.detach();
    b.stem_bn.at(r) = init_from->stem_bn.at(spec.canonical_size).clone();
    b.stem_bn.at(r).resolution = r;
    for (int i = 0; i < k; ++i) {
      const ResBlock& src = init_from->stages[static_cast<std::size_t>(i)][0];
      ResBlock& dst = b.units[static_cast<std::size_t>(i)];
      dst.conv1 = src.conv1.detach();
      dst.conv2 = src.conv2.detach();
      dst.bn1.at(r) = src.bn1.at(spec.canonical_size).clone();
      dst.bn1.at(r).resolution = r;
      dst.bn2.at(r) = src.bn2.at(spec.canonical_size).clone();
      dst.bn2.at(r).resolution = r;
      if (src.has_proj && dst.has_proj) {
        dst.proj = src.proj.detach();
        dst.bnp.at(r) = src.bnp.at(spec.canonical_size).clone();
        dst.bnp.at(r).resolution = r;
      }
    }
  }
  return b;
}

TrunkModel clone_trunk(const TrunkModel& m) {
  TrunkModel out;
  out.spec = m.spec;
  out.stem_w = m.stem_w.detach();
  out.stem_bn = clone_bank(m.stem_bn);
  for (const auto& stage : m.stages) {
    std::vector<ResBlock> blocks;
    for (const auto& b : stage) blocks.push_back(clone_block(b));
    out.stages.push_back(std::move(blocks));
  }
  out.embed_w = m.embed_w.detach();
  out.embed_b = m.embed_b.detach();
  if (m.kappa.defined()) out.kappa = m.kappa.detach();
  return out;
}

BranchNet clone_branch(const BranchNet& b) {
  BranchNet out;
  out.resolution = b.resolution;
  out.stem_w = b.stem_w.detach();
  out.stem_bn = clone_bank(b.stem_bn);
  for (const auto& u : b.units) out.units.push_back(clone_block(u));
  return out;
}

BTNetModel clone_btnet(const BTNetModel& m) {
  BTNetModel out;
  out.trunk = clone_trunk(m.trunk);
  for (const auto& [r, b] : m.branches) out.branches.emplace(r, clone_branch(b));
  return out;
}

BTNetModel assemble_btnet(const TrunkModel& trunk, std::uint64_t seed) {
  BTNetModel m;
  m.trunk = clone_trunk(trunk);
  const ModelSpec& spec = m.trunk.spec;
  const int S = spec.canonical_size;
  const auto taps = spec.tap_channels();
  for (int r : spec.tap_resolutions()) {
    m.branches.emplace(r, build_branch(spec, r, seed, &m.trunk));
    // the T_r suffix gets its own BN parameter set, seeded from the canonical bank
    if (r != S) {
      const int k = tap_stage_index(spec, r);
      for (std::size_t si = static_cast<std::size_t>(k); si < m.trunk.stages.size(); ++si)
        for (ResBlock& blk : m.trunk.stages[si]) {
          blk.bn1.add_bank_copy(r, S);
          blk.bn2.add_bank_copy(r, S);
          if (blk.has_proj) blk.bnp.add_bank_copy(r, S);
        }
    }
  }
  // assembly check: each branch reproduces its tap shape
  {
    NoGradGuard guard;
    for (auto& [r, branch] : m.branches) {
      TensorF probe = TensorF::zeros({2, 3, r, r});
      TensorF out = branch_forward(branch, probe, BNMode::infer);
      const Shape expect{2, taps.at(r), r, r};
      if (out.shape() != expect)
        throw std::runtime_error("branch " + std::to_string(r) + " output " +
                                 shape_str(out.shape()) + " does not match tap " +
                                 shape_str(expect));
    }
  }
  return m;
}

TensorF trunk_forward(TrunkModel& m, const TensorF& x, int bank_r, BNMode mode) {
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != m.spec.canonical_size ||
      x.dim(3) != m.spec.canonical_size)
    throw std::invalid_argument("trunk_forward expects N x 3 x S x S input");
  TensorF y = conv2d(x, m.stem_w, m.spec.stem_stride, m.spec.stem_kernel / 2);
  y = relu(batchnorm(y, m.stem_bn.at(bank_r), mode));
  return trunk_suffix(m, y, m.spec.canonical_size, bank_r, mode);
}

TensorF trunk_tap(TrunkModel& m, const TensorF& x, int r) {
  NoGradGuard guard;
  const int k = tap_stage_index(m.spec, r);
  if (x.rank() != 4 || x.dim(2) != m.spec.canonical_size)
    throw std::invalid_argument("trunk_tap expects canonical-size input");
  const int S = m.spec.canonical_size;
  TensorF y = conv2d(x, m.stem_w, m.spec.stem_stride, m.spec.stem_kernel / 2);
  y = relu(batchnorm(y, m.stem_bn.at(S), BNMode::infer));
  for (int si = 0; si < k; ++si)
    for (ResBlock& blk : m.stages[static_cast<std::size_t>(si)])
      y = block_forward(blk, y, S, BNMode::infer);
  return y;
}

TensorF trunk_suffix(TrunkModel& m, const TensorF& tap_act, int r, int bank_r, BNMode mode) {
  const int k = tap_stage_index(m.spec, r);
  const auto taps = m.spec.tap_channels();
  if (tap_act.rank() != 4 || tap_act.dim(1) != taps.at(r) || tap_act.dim(2) != r ||
      tap_act.dim(3) != r)
    throw std::invalid_argument("trunk_suffix: activation does not match tap " + std::to_string(r));
  TensorF y = tap_act;
  for (std::size_t si = static_cast<std::size_t>(k); si < m.stages.size(); ++si)
    for (ResBlock& blk : m.stages[si]) y = block_forward(blk, y, bank_r, mode);
  return head_forward(m, y);
}

TensorF branch_forward(BranchNet& b, const TensorF& x, BNMode mode) {
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != b.resolution || x.dim(3) != b.resolution)
    throw std::invalid_argument("branch_forward expects N x 3 x r x r input at r=" +
                                std::to_string(b.resolution));
  TensorF y = conv2d(x, b.stem_w, 1, 1);
  y = relu(batchnorm(y, b.stem_bn.at(b.resolution), mode));
  for (ResBlock& u : b.units) y = block_forward(u, y, b.resolution, mode);
  return y;
}

TensorF btnet_forward(BTNetModel& m, const TensorF& x, int r, BNMode mode) {
  auto it = m.branches.find(r);
  if (it == m.branches.end())
    throw std::invalid_argument("no branch for resolution " + std::to_string(r));
  TensorF tap = branch_forward(it->second, x, mode);
  return trunk_suffix(m.trunk, tap, r, r, mode);
}

std::size_t ArrayRef::size() const {
  return tensor ? tensor->numel() : raw->size();
}

float* ArrayRef::data() {
  return tensor ? tensor->mutable_values().data() : raw->data();
}

const float* ArrayRef::data() const {
  return tensor ? const_cast<TensorF*>(tensor)->mutable_values().data() : raw->data();
}

namespace {

struct VisitCtx {
  const std::function<void(ArrayRef)>* fn;
};

void emit_tensor(const VisitCtx& ctx, const std::string& name, TensorF& t) {
  ArrayRef ref;
  ref.name = name;
  ref.tensor = &t;
  ref.shape = t.shape();
  (*ctx.fn)(ref);
}

void emit_raw(const VisitCtx& ctx, const std::string& name, std::vector<float>& v) {
  ArrayRef ref;
  ref.name = name;
  ref.raw = &v;
  ref.shape = {static_cast<int>(v.size())};
  (*ctx.fn)(ref);
}

void visit_bank(const VisitCtx& ctx, const std::string& prefix, BNBank& bank) {
  for (auto& [r, p] : bank.banks) {
    const std::string base = prefix + ".r" + std::to_string(r);
    emit_tensor(ctx, base + ".gamma", p.gamma);
    emit_tensor(ctx, base + ".beta", p.beta);
    emit_raw(ctx, base + ".running_mean", p.running_mean);
    emit_raw(ctx, base + ".running_var", p.running_var);
  }
}

void visit_block(const VisitCtx& ctx, const std::string& prefix, ResBlock& b) {
  emit_tensor(ctx, prefix + ".conv1.weight", b.conv1);
  visit_bank(ctx, prefix + ".bn1", b.bn1);
  emit_tensor(ctx, prefix + ".conv2.weight", b.conv2);
  visit_bank(ctx, prefix + ".bn2", b.bn2);
  if (b.has_proj) {
    emit_tensor(ctx, prefix + ".proj.weight", b.proj);
    visit_bank(ctx, prefix + ".bnp", b.bnp);
  }
}

}  // namespace

void visit_arrays(TrunkModel& m, const std::function<void(ArrayRef)>& fn) {
  VisitCtx ctx{&fn};
  emit_tensor(ctx, "trunk.stem.conv.weight", m.stem_w);
  visit_bank(ctx, "trunk.stem.bn", m.stem_bn);
  for (std::size_t si = 0; si < m.stages.size(); ++si)
    for (std::size_t bi = 0; bi < m.stages[si].size(); ++bi)
      visit_block(ctx, "trunk.s" + std::to_string(si) + ".b" + std::to_string(bi),
                  m.stages[si][bi]);
  emit_tensor(ctx, "trunk.embed.weight", m.embed_w);
  emit_tensor(ctx, "trunk.embed.bias", m.embed_b);
  if (m.kappa.defined()) emit_tensor(ctx, "trunk.kappa", m.kappa);
}

void visit_arrays(BranchNet& b, const std::function<void(ArrayRef)>& fn) {
  VisitCtx ctx{&fn};
  const std::string base = "branch" + std::to_string(b.resolution);
  emit_tensor(ctx, base + ".stem.conv.weight", b.stem_w);
  visit_bank(ctx, base + ".stem.bn", b.stem_bn);
  for (std::size_t i = 0; i < b.units.size(); ++i)
    visit_block(ctx, base + ".u" + std::to_string(i), b.units[i]);
}

void visit_arrays(BTNetModel& m, const std::function<void(ArrayRef)>& fn) {
  visit_arrays(m.trunk, fn);
  for (auto& [r, b] : m.branches) visit_arrays(b, fn);
}

// name-based classification for counting; names are produced solely by the
// visitors above
bool is_bn_array(const std::string& name, int* resolution) {
  // looks for a dot-delimited token of the form r<digits>, the bank tag
  std::size_t start = 0;
  while (start < name.size()) {
    const std::size_t dot = name.find('.', start);
    const std::size_t end = dot == std::string::npos ? name.size() : dot;
    if (end - start >= 2 && name[start] == 'r') {
      bool digits = true;
      for (std::size_t i = start + 1; i < end; ++i)
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
          digits = false;
          break;
        }
      if (digits) {
        *resolution = std::stoi(name.substr(start + 1, end - start - 1));
        return true;
      }
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return false;
}

long long count_params(const BTNetModel& m, CountMode mode, int r) {
  auto& mm = const_cast<BTNetModel&>(m);
  const int S = m.trunk.spec.canonical_size;
  long long total = 0;
  if (mode == CountMode::full_finetune) {
    visit_arrays(mm.trunk, [&](ArrayRef ref) {
      if (ref.name == "trunk.kappa") return;
      int bank = 0;
      if (is_bn_array(ref.name, &bank) && bank != S) return;
      total += static_cast<long long>(ref.size());
    });
  } else {
    auto bit = mm.branches.find(r);
    if (bit == mm.branches.end())
      throw std::invalid_argument("no branch for resolution " + std::to_string(r));
    visit_arrays(bit->second, [&](ArrayRef ref) { total += static_cast<long long>(ref.size()); });
    visit_arrays(mm.trunk, [&](ArrayRef ref) {
      int bank = 0;
      if (is_bn_array(ref.name, &bank) && bank == r && r != S)
        total += static_cast<long long>(ref.size());
    });
    if (r == S) {
      // the S-resolution suffix reuses the canonical bank; count it as the
      // resolution's BN state (stem bank excluded: the branch replaces the stem)
      visit_arrays(mm.trunk, [&](ArrayRef ref) {
        int bank = 0;
        if (ref.name.rfind("trunk.stem.", 0) == 0) return;
        if (is_bn_array(ref.name, &bank) && bank == S)
          total += static_cast<long long>(ref.size());
      });
    }
  }
  return total;
}

namespace {

void add_item(FlopReport& rep, const std::string& name, long long flops) {
  rep.items.emplace_back(name, flops);
  rep.total += flops;
}

long long conv_flops(int k, int cin, int cout, int ho, int wo) {
  return 2LL * k * k * cin * cout * ho * wo;
}

void block_flops(FlopReport& rep, const std::string& prefix, const ResBlock& b, int in_size) {
  const int so = in_size / b.stride;
  const long long elems = static_cast<long long>(b.out_ch) * so * so;
  add_item(rep, prefix + ".conv1", conv_flops(3, b.in_ch, b.out_ch, so, so));
  add_item(rep, prefix + ".bn1", 2 * elems);
  add_item(rep, prefix + ".relu1", elems);
  add_item(rep, prefix + ".conv2", conv_flops(3, b.out_ch, b.out_ch, so, so));
  add_item(rep, prefix + ".bn2", 2 * elems);
  if (b.has_proj) {
    add_item(rep, prefix + ".proj", conv_flops(1, b.in_ch, b.out_ch, so, so));
    add_item(rep, prefix + ".bnp", 2 * elems);
  }
  add_item(rep, prefix + ".add", elems);
  add_item(rep, prefix + ".relu2", elems);
}

}  // namespace

FlopReport count_flops(const BTNetModel& m, int r) {
  auto it = m.branches.find(r);
  if (it == m.branches.end())
    throw std::invalid_argument("no branch for resolution " + std::to_string(r));
  const BranchNet& b = it->second;
  const ModelSpec& spec = m.trunk.spec;
  FlopReport rep;
  const std::string bp = "branch" + std::to_string(r);
  const long long stem_elems = static_cast<long long>(spec.stem_channels) * r * r;
  add_item(rep, bp + ".stem.conv", conv_flops(spec.stem_kernel, 3, spec.stem_channels, r, r));
  add_item(rep, bp + ".stem.bn", 2 * stem_elems);
  add_item(rep, bp + ".stem.relu", stem_elems);
  for (std::size_t i = 0; i < b.units.size(); ++i)
    block_flops(rep, bp + ".u" + std::to_string(i), b.units[i], r);

  const int k = tap_stage_index(spec, r);
  int size = r;
  for (std::size_t si = static_cast<std::size_t>(k); si < m.trunk.stages.size(); ++si)
    for (std::size_t bi = 0; bi < m.trunk.stages[si].size(); ++bi) {
      const ResBlock& blk = m.trunk.stages[si][bi];
      block_flops(rep, "trunk.s" + std::to_string(si) + ".b" + std::to_string(bi), blk, size);
      size /= blk.stride;
    }
  const int c_last = spec.stages.back().channels;
  add_item(rep, "head.gap",
           static_cast<long long>(c_last) * (static_cast<long long>(size) * size + 1));
  add_item(rep, "head.embed", 2LL * c_last * spec.embedding_dim);
  add_item(rep, "head.l2norm", 3LL * spec.embedding_dim);
  return rep;
}

}  // namespace btnet
