#include "btnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace btnet {

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("embedding dim mismatch");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return std::clamp(dot, -1.0, 1.0);
}

Embedding aggregate(const std::vector<Embedding>& members) {
  if (members.empty()) throw std::invalid_argument("template needs at least one member");
  const std::size_t dim = members.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const Embedding& m : members) {
    if (m.size() != dim) throw std::invalid_argument("member dim mismatch");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += m[i];
  }
  double ss = 0;
  for (double& v : mean) {
    v /= static_cast<double>(members.size());
    ss += v * v;
  }
  if (ss == 0.0) throw std::invalid_argument("aggregate of members is the zero vector");
  const double inv = 1.0 / std::sqrt(ss);
  Embedding out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(mean[i] * inv);
  return out;
}

Template make_template(int identity, std::vector<Embedding> members) {
  Template t;
  t.identity = identity;
  t.aggregated = aggregate(members);
  t.members = std::move(members);
  return t;
}

double verification_accuracy_scores(const std::vector<std::pair<double, bool>>& scored,
                                    int folds) {
  if (folds < 2) throw std::invalid_argument("verification needs at least 2 folds");
  const std::size_t n = scored.size();
  if (n < static_cast<std::size_t>(folds)) throw std::invalid_argument("a fold would be empty");

  auto fold_of = [&](std::size_t i) {
    return static_cast<int>(i * static_cast<std::size_t>(folds) / n);
  };

  double mean_acc = 0;
  for (int f = 0; f < folds; ++f) {
    // candidate thresholds at midpoints of adjacent training scores (plus
    // all-accept and all-reject extremes); accept when score >= t
    std::vector<double> train;
    for (std::size_t i = 0; i < n; ++i)
      if (fold_of(i) != f) train.push_back(scored[i].first);
    std::sort(train.begin(), train.end());
    train.erase(std::unique(train.begin(), train.end()), train.end());
    std::vector<double> cands{-1.0, 1.5};
    for (std::size_t i = 1; i < train.size(); ++i)
      cands.push_back((train[i - 1] + train[i]) / 2.0);
    std::sort(cands.begin(), cands.end());

    double best_thresh = -1.0;
    std::size_t best_correct = 0;
    for (double t : cands) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (fold_of(i) == f) continue;
        if ((scored[i].first >= t) == scored[i].second) ++correct;
      }
      if (correct > best_correct) {
        best_correct = correct;
        best_thresh = t;
      }
    }

    std::size_t held = 0, hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of(i) != f) continue;
      ++held;
      if ((scored[i].first >= best_thresh) == scored[i].second) ++hit;
    }
    mean_acc += static_cast<double>(hit) / static_cast<double>(held);
  }
  return 100.0 * mean_acc / folds;
}

double verification_accuracy(const std::vector<VerificationPair>& pairs, int folds) {
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(pairs.size());
  for (const VerificationPair& p : pairs) scored.emplace_back(cosine(p.a, p.b), p.same);
  return verification_accuracy_scores(scored, folds);
}

double tar_at_far(const std::vector<double>& genuine, const std::vector<double>& impostor,
                  double far) {
  if (genuine.empty() || impostor.empty())
    throw std::invalid_argument("both score sets must be non-empty");
  if (far <= 0.0 || far >= 1.0) throw std::invalid_argument("far must lie in (0,1)");

  std::vector<double> cands = genuine;
  cands.insert(cands.end(), impostor.begin(), impostor.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  std::vector<double> imp = impostor;
  std::sort(imp.begin(), imp.end());
  const double n_imp = static_cast<double>(imp.size());
  for (double t : cands) {
    const std::size_t accepted =
        imp.end() - std::lower_bound(imp.begin(), imp.end(), t);
    if (static_cast<double>(accepted) / n_imp <= far) {
      std::size_t hits = 0;
      for (double g : genuine)
        if (g >= t) ++hits;
      return static_cast<double>(hits) / static_cast<double>(genuine.size());
    }
  }
  return 0.0;  // no observed threshold keeps impostors below far
}

double roc_auc(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty())
    throw std::invalid_argument("both score sets must be non-empty");
  // rank-sum formulation over the pooled sorted scores
  std::vector<std::pair<double, int>> pool;  // (score, is_genuine)
  pool.reserve(genuine.size() + impostor.size());
  for (double g : genuine) pool.emplace_back(g, 1);
  for (double i : impostor) pool.emplace_back(i, 0);
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double wins = 0;
  std::size_t i = 0;
  std::size_t imp_below = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    std::size_t gen_here = 0, imp_here = 0;
    while (j < pool.size() && pool[j].first == pool[i].first) {
      if (pool[j].second) ++gen_here;
      else ++imp_here;
      ++j;
    }
    wins += static_cast<double>(gen_here) *
            (static_cast<double>(imp_below) + 0.5 * static_cast<double>(imp_here));
    imp_below += imp_here;
    i = j;
  }
  return wins / (static_cast<double>(genuine.size()) * static_cast<double>(impostor.size()));
}

namespace {

struct ProbeScore {
  double top = -2.0;
  bool hit_at_rank = false;
};

ProbeScore score_probe(const Template& probe, const std::vector<Template>& gallery, int rank) {
  std::vector<std::pair<double, int>> scores;  // (cosine, identity)
  scores.reserve(gallery.size());
  for (const Template& g : gallery)
    scores.emplace_back(cosine(probe.aggregated, g.aggregated), g.identity);
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  ProbeScore out;
  out.top = scores.front().first;
  const int upto = std::min<int>(rank, static_cast<int>(scores.size()));
  for (int k = 0; k < upto; ++k)
    if (scores[static_cast<std::size_t>(k)].second == probe.identity) {
      out.hit_at_rank = true;
      break;
    }
  return out;
}

}  // namespace

double tpir_at_fpir(const std::vector<Template>& mated, const std::vector<Template>& nonmated,
                    const std::vector<Template>& gallery, int rank, double fpir) {
  if (gallery.empty() || mated.empty()) throw std::invalid_argument("gallery and mated probes required");
  if (nonmated.empty()) throw std::invalid_argument("non-mated probe set must be non-empty");
  if (rank < 1) throw std::invalid_argument("rank must be positive");
  if (fpir <= 0.0 || fpir > 1.0) throw std::invalid_argument("fpir unreachable: must lie in (0,1]");
  std::set<int> ids;
  for (const Template& g : gallery)
    if (!ids.insert(g.identity).second)
      throw std::invalid_argument("gallery identities must be distinct");

  std::vector<double> nm_top;
  nm_top.reserve(nonmated.size());
  for (const Template& p : nonmated) nm_top.push_back(score_probe(p, gallery, rank).top);

  // smallest candidate threshold whose false-positive rate stays within fpir;
  // -1 bounds every cosine from below, so fpir=1 admits everything
  std::vector<double> cands{-1.0};
  cands.insert(cands.end(), nm_top.begin(), nm_top.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  std::sort(nm_top.begin(), nm_top.end());
  double thresh = 0;
  bool found = false;
  for (double t : cands) {
    const std::size_t accepted = nm_top.end() - std::lower_bound(nm_top.begin(), nm_top.end(), t);
    if (static_cast<double>(accepted) / static_cast<double>(nm_top.size()) <= fpir) {
      thresh = t;
      found = true;
      break;
    }
  }
  if (!found) throw std::invalid_argument("fpir unreachable with available non-mated probes");

  std::size_t hits = 0;
  for (const Template& p : mated) {
    const ProbeScore s = score_probe(p, gallery, rank);
    if (s.hit_at_rank && s.top >= thresh) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mated.size());
}

double auc_tpir(const std::vector<std::pair<double, double>>& curve) {
  if (curve.size() < 2) throw std::invalid_argument("auc needs at least 2 points");
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double dx = curve[i].first - curve[i - 1].first;
    if (dx <= 0) throw std::invalid_argument("fpir points must be strictly ascending");
    area += dx * (curve[i].second + curve[i - 1].second) / 2.0;
  }
  return area;
}

std::optional<double> cross_res_gain(double m, double m_hr, double m_mr) {
  const double denom = std::fabs(m_mr - m_hr);
  if (denom == 0.0) return std::nullopt;
  return (m - m_hr) / denom;
}

std::optional<double> same_res_gain(double m, double m_hr, double m_r) {
  return cross_res_gain(m, m_hr, m_r);
}

std::string format_gain(const std::optional<double>& gain) {
  if (!gain) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", *gain);
  return buf;
}

}  // namespace btnet
