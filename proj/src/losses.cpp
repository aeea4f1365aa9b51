#include "btnet/losses.hpp"

#include <algorithm>

namespace btnet {

MarginKind margin_kind_from_string(const std::string& s) {
  if (s == "normface") return MarginKind::normface;
  if (s == "cosface") return MarginKind::cosface;
  if (s == "arcface") return MarginKind::arcface;
  if (s == "curricular") return MarginKind::curricular;
  throw std::invalid_argument("unknown margin kind: " + s);
}

std::string to_string(MarginKind kind) {
  switch (kind) {
    case MarginKind::normface:
      return "normface";
    case MarginKind::cosface:
      return "cosface";
    case MarginKind::arcface:
      return "arcface";
    case MarginKind::curricular:
      return "curricular";
  }
  throw std::invalid_argument("unknown margin kind");
}

MarginHead make_margin_head(int num_identities, int emb_dim, MarginKind kind,
                            std::uint64_t seed) {
  if (num_identities < 2 || emb_dim < 1)
    throw std::invalid_argument("margin head needs >=2 identities and a positive dim");
  MarginHead head;
  Rng rng(Rng::substream_seed(seed, "margin-head"));
  head.weights = TensorF::randn({num_identities, emb_dim}, rng);
  head.weights.set_requires_grad(true);
  head.kind = kind;
  return head;
}

MarginHead clone_margin_head(const MarginHead& head) {
  MarginHead out = head;
  out.weights = head.weights.detach();
  out.weights.set_requires_grad(!head.frozen);
  return out;
}

void freeze_head(MarginHead& head) {
  head.frozen = true;
  head.weights = head.weights.detach();
}

void update_curricular(MarginHead& head, const TensorF& cos, const std::vector<int>& labels) {
  if (head.frozen) throw std::invalid_argument("frozen head state cannot change");
  detail::check_cos_inputs(cos, labels);
  const int n = cos.shape()[1];
  double mean = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    mean += cos.values()[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(labels[i])];
  mean /= static_cast<double>(labels.size());
  const float r = static_cast<float>(mean);
  const float a = head.alpha;
  head.t = head.placement == EmaPlacement::scale_batch ? a * r + (1.0f - a) * head.t
                                                       : (1.0f - a) * r + a * head.t;
  head.t = std::clamp(head.t, 0.0f, 1.0f);
}

TensorF cos_logits(const TensorF& emb, const MarginHead& head) {
  return cos_logits(emb, head.weights);
}

TensorF margin_logits(const TensorF& cos, const std::vector<int>& labels, const MarginHead& head) {
  return margin_logits(cos, labels, head.kind, head.scale, head.margin, head.t);
}

TensorF margin_loss(const TensorF& emb, const std::vector<int>& labels, const MarginHead& head) {
  return margin_loss(emb, labels, head.weights, head.kind, head.scale, head.margin, head.t);
}

TensorF influence_loss(const TensorF& emb, const std::vector<int>& labels,
                       const MarginHead& head) {
  if (!head.frozen) throw std::invalid_argument("influence loss needs a frozen classifier");
  return margin_loss(emb, labels, head);
}

}  // namespace btnet
