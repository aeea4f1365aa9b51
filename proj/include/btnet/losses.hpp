#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "btnet/rng.hpp"
#include "btnet/tensor.hpp"

namespace btnet {

enum class MarginKind { normface, cosface, arcface, curricular };

MarginKind margin_kind_from_string(const std::string& s);
std::string to_string(MarginKind kind);

// t <- alpha*r + (1-alpha)*t  versus  t <- (1-alpha)*r + alpha*t
enum class EmaPlacement { scale_batch, scale_state };

struct MarginHead {
  TensorF weights;  // num_identities x C_emb; rows are l2-normalized before use
  MarginKind kind = MarginKind::curricular;
  float scale = 64.0f;
  float margin = 0.5f;
  float t = 0.0f;  // curricular modulation state, kept in [0,1]
  float alpha = 0.99f;
  EmaPlacement placement = EmaPlacement::scale_batch;
  bool frozen = false;

  int num_identities() const { return weights.shape()[0]; }
  int emb_dim() const { return weights.shape()[1]; }
};

MarginHead make_margin_head(int num_identities, int emb_dim, MarginKind kind, std::uint64_t seed);
MarginHead clone_margin_head(const MarginHead& head);
void freeze_head(MarginHead& head);

// batch-mean target cosine folded into t; heads under a freeze keep their state
void update_curricular(MarginHead& head, const TensorF& cos, const std::vector<int>& labels);

namespace detail {

template <typename T>
void check_cos_inputs(const Tensor<T>& cos, const std::vector<int>& labels) {
  if (cos.rank() != 2) throw std::invalid_argument("cosine matrix must be rank 2");
  const int v = cos.shape()[0];
  const int n = cos.shape()[1];
  if (static_cast<int>(labels.size()) != v)
    throw std::invalid_argument("label count does not match batch size");
  for (int l : labels)
    if (l < 0 || l >= n) throw std::invalid_argument("label out of range");
}

}  // namespace detail

inline constexpr double kCosClamp = 1e-7;

// cosine similarities between unit embeddings and normalized class rows
template <typename T>
Tensor<T> cos_logits(const Tensor<T>& emb, const Tensor<T>& weights) {
  if (emb.rank() != 2 || weights.rank() != 2 || emb.shape()[1] != weights.shape()[1])
    throw std::invalid_argument("cos_logits: embedding/weight dim mismatch");
  const int v = emb.shape()[0];
  const int c = emb.shape()[1];
  const auto& ev = emb.values();
  for (int i = 0; i < v; ++i) {
    T ss = T(0);
    for (int j = 0; j < c; ++j) {
      const T x = ev[static_cast<std::size_t>(i) * c + j];
      ss += x * x;
    }
    if (std::fabs(static_cast<double>(ss) - 1.0) > 1e-2)
      throw std::invalid_argument("cos_logits: embeddings must be unit-norm");
  }
  Tensor<T> cosines = linear(emb, l2_normalize(weights));
  return clamp(cosines, T(-1.0 + kCosClamp), T(1.0 - kCosClamp));
}

// margin-adjusted logits; the branch structure follows the four published
// margin formulations, with the curricular hard/easy split decided by
// cos(theta_y + m) and treated as locally constant for the gradient
template <typename T>
Tensor<T> margin_logits(const Tensor<T>& cos, const std::vector<int>& labels, MarginKind kind, T s,
                        T m, T t) {
  detail::check_cos_inputs(cos, labels);
  if (s <= T(0)) throw std::invalid_argument("scale must be positive");
  if (m < T(0) || static_cast<double>(m) >= 1.5707963267948966)
    throw std::invalid_argument("margin must lie in [0, pi/2)");
  const int v = cos.shape()[0];
  const int n = cos.shape()[1];
  const auto& c = cos.values();
  std::vector<T> out(c.size());
  std::vector<T> dcoef(c.size());
  const T cm = std::cos(m);
  const T sm = std::sin(m);
  for (int i = 0; i < v; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const std::size_t row = static_cast<std::size_t>(i) * n;
    const T cy = c[row + static_cast<std::size_t>(y)];
    T tgt;
    T dtgt;
    T thresh = T(0);
    switch (kind) {
      case MarginKind::normface:
        tgt = s * cy;
        dtgt = s;
        break;
      case MarginKind::cosface:
        tgt = s * (cy - m);
        dtgt = s;
        break;
      case MarginKind::arcface:
      case MarginKind::curricular: {
        const T sy = std::sqrt(T(1) - cy * cy);
        thresh = cy * cm - sy * sm;  // cos(theta_y + m)
        tgt = s * thresh;
        dtgt = s * (cm + cy * sm / sy);
        break;
      }
      default:
        throw std::invalid_argument("unknown margin kind");
    }
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = row + static_cast<std::size_t>(j);
      if (j == y) {
        out[idx] = tgt;
        dcoef[idx] = dtgt;
      } else if (kind == MarginKind::curricular && thresh < c[idx]) {
        out[idx] = s * c[idx] * (t + c[idx]);
        dcoef[idx] = s * (t + T(2) * c[idx]);
      } else {
        out[idx] = s * c[idx];
        dcoef[idx] = s;
      }
    }
  }
  auto pc = cos.node();
  return detail::make_result<T>(cos.shape(), std::move(out), {pc},
                                [pc, dcoef = std::move(dcoef)](AutoNode<T>& node) {
                                  auto& g = pc->grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                    g[i] += node.grad[i] * dcoef[i];
                                });
}

// cross-entropy over margin logits; weight rows are normalized inside
template <typename T>
Tensor<T> margin_loss(const Tensor<T>& emb, const std::vector<int>& labels,
                      const Tensor<T>& weights, MarginKind kind, T s, T m, T t) {
  Tensor<T> cosines = cos_logits(emb, weights);
  Tensor<T> logits = margin_logits(cosines, labels, kind, s, m, t);
  return softmax_cross_entropy(logits, labels);
}

TensorF cos_logits(const TensorF& emb, const MarginHead& head);
TensorF margin_logits(const TensorF& cos, const std::vector<int>& labels, const MarginHead& head);
TensorF margin_loss(const TensorF& emb, const std::vector<int>& labels, const MarginHead& head);
// margin_loss against a frozen classifier; rejects trainable heads
TensorF influence_loss(const TensorF& emb, const std::vector<int>& labels, const MarginHead& head);

// mean over the batch of the per-sample mean squared gap to the frozen target
template <typename T>
Tensor<T> branch_distill_loss(const Tensor<T>& z_r, const Tensor<T>& z_s) {
  if (z_r.rank() != 4 || z_r.shape() != z_s.shape())
    throw std::invalid_argument("distill targets must share a rank-4 shape");
  return mse(z_r, z_s.detach());
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& influence, const Tensor<T>& distill,
                     T lambda_branch = T(0.5)) {
  if (influence.numel() != 1 || distill.numel() != 1)
    throw std::invalid_argument("total_loss combines scalars");
  if (!influence.all_finite() || !distill.all_finite())
    throw std::invalid_argument("loss terms must be finite");
  return add(influence, scale(distill, lambda_branch));
}

}  // namespace btnet
