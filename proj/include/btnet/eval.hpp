#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace btnet {

using Embedding = std::vector<float>;

// dot product of unit vectors, clipped against float drift
double cosine(const Embedding& a, const Embedding& b);

// arithmetic mean of the members, re-normalized
Embedding aggregate(const std::vector<Embedding>& members);

struct Template {
  int identity = -1;
  std::vector<Embedding> members;
  Embedding aggregated;
};

Template make_template(int identity, std::vector<Embedding> members);

struct VerificationPair {
  Embedding a;
  Embedding b;
  bool same = false;
};

// k-fold protocol: per fold the threshold maximizing accuracy on the other
// folds, scored on the held-out fold; returns a percentage
double verification_accuracy(const std::vector<VerificationPair>& pairs, int folds = 10);
double verification_accuracy_scores(const std::vector<std::pair<double, bool>>& scored,
                                    int folds = 10);

// conservative threshold: the smallest observed score whose impostor
// acceptance stays at or below far; TAR is the genuine fraction at or above it
double tar_at_far(const std::vector<double>& genuine, const std::vector<double>& impostor,
                  double far);

// Mann-Whitney statistic; ties count half
double roc_auc(const std::vector<double>& genuine, const std::vector<double>& impostor);

// open-set identification: acceptance threshold from non-mated top scores
// (conservative, achieved FPIR <= target), hit = correct identity in the top
// `rank` and top score clearing the threshold
double tpir_at_fpir(const std::vector<Template>& mated, const std::vector<Template>& nonmated,
                    const std::vector<Template>& gallery, int rank, double fpir);

// trapezoidal area under (fpir, tpir) points with strictly ascending fpir
double auc_tpir(const std::vector<std::pair<double, double>>& curve);

// (m - m_hr) / |m_mr - m_hr|; empty when the baselines coincide
std::optional<double> cross_res_gain(double m, double m_hr, double m_mr);
std::optional<double> same_res_gain(double m, double m_hr, double m_r);

std::string format_gain(const std::optional<double>& gain);

}  // namespace btnet
