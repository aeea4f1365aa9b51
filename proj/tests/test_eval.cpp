#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "btnet/eval.hpp"
#include "btnet/rng.hpp"

using namespace btnet;

namespace {

Embedding unit(std::vector<float> v) {
  double ss = 0;
  for (float x : v) ss += static_cast<double>(x) * x;
  const double inv = 1.0 / std::sqrt(ss);
  for (float& x : v) x = static_cast<float>(x * inv);
  return v;
}

Embedding random_unit(Rng& rng, int dim) {
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (float& x : v) x = static_cast<float>(rng.normal());
  return unit(std::move(v));
}

// brute-force open-set identification used as the oracle
double tpir_oracle(const std::vector<Template>& mated, const std::vector<Template>& nonmated,
                   const std::vector<Template>& gallery, int rank, double fpir) {
  auto top_and_hit = [&](const Template& p) {
    std::vector<std::pair<double, int>> s;
    for (const Template& g : gallery) s.emplace_back(cosine(p.aggregated, g.aggregated), g.identity);
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    bool hit = false;
    for (int k = 0; k < rank && k < static_cast<int>(s.size()); ++k)
      if (s[static_cast<std::size_t>(k)].second == p.identity) hit = true;
    return std::make_pair(s.front().first, hit);
  };
  std::vector<double> nm;
  for (const Template& p : nonmated) nm.push_back(top_and_hit(p).first);
  std::vector<double> cands{-1.0};
  cands.insert(cands.end(), nm.begin(), nm.end());
  std::sort(cands.begin(), cands.end());
  double thresh = 2.0;
  for (double t : cands) {
    std::size_t acc = 0;
    for (double v : nm)
      if (v >= t) ++acc;
    if (static_cast<double>(acc) / nm.size() <= fpir) {
      thresh = t;
      break;
    }
  }
  std::size_t hits = 0;
  for (const Template& p : mated) {
    auto [top, hit] = top_and_hit(p);
    if (hit && top >= thresh) ++hits;
  }
  return static_cast<double>(hits) / mated.size();
}

}  // namespace

TEST_CASE("cosine basics") {
  Embedding x = unit({1, 2, 3});
  CHECK(cosine(x, x) == doctest::Approx(1.0));
  CHECK(cosine(unit({1, 0}), unit({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine(unit({1, 0}), unit({-1, 0})) == doctest::Approx(-1.0));

  Rng rng(700);
  for (int rep = 0; rep < 5; ++rep) {
    Embedding a = random_unit(rng, 16);
    Embedding b = random_unit(rng, 16);
    double dot = 0;
    for (int i = 0; i < 16; ++i) dot += static_cast<double>(a[static_cast<std::size_t>(i)]) *
                                        static_cast<double>(b[static_cast<std::size_t>(i)]);
    CHECK(cosine(a, b) == doctest::Approx(dot).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cosine(unit({1, 0}), unit({1, 0, 0})), std::invalid_argument);
}

TEST_CASE("template aggregation") {
  Embedding a = unit({1, 0, 0, 0});
  Embedding b = unit({0, 1, 0, 0});

  CHECK(aggregate({a}) == a);
  CHECK(aggregate({a, a, a}) == a);

  Embedding bisector = aggregate({a, b});
  CHECK(bisector[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(bisector[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(bisector[2] == doctest::Approx(0.0));

  CHECK(aggregate({b, a}) == bisector);  // order invariant
  // duplicating the full member set leaves the mean direction unchanged
  CHECK(aggregate({a, b, a, b}) == bisector);

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({a, unit({-1, 0, 0, 0})}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({a, unit({1, 0, 0})}), std::invalid_argument);

  Template t = make_template(3, {a, b});
  CHECK(t.identity == 3);
  CHECK(t.members.size() == 2);
  CHECK(t.aggregated == bisector);
}

TEST_CASE("verification accuracy protocol") {
  // perfectly separated scores
  std::vector<std::pair<double, bool>> sep;
  Rng rng(710);
  for (int i = 0; i < 200; ++i) {
    sep.emplace_back(0.5 + 0.4 * rng.uniform(), true);
    sep.emplace_back(-0.5 + 0.4 * rng.uniform(), false);
  }
  CHECK(verification_accuracy_scores(sep) == doctest::Approx(100.0));

  // random labels against random scores sit near chance
  std::vector<std::pair<double, bool>> rnd;
  for (int i = 0; i < 6000; ++i)
    rnd.emplace_back(rng.uniform() * 2 - 1, rng.bernoulli(0.5));
  const double acc = verification_accuracy_scores(rnd);
  CHECK(acc > 47.0);
  CHECK(acc < 53.0);

  // anti-correlated scores flip to near-zero accuracy at held-out time only
  // if the threshold rule is shared; here it should stay near chance or above
  CHECK_THROWS_AS(verification_accuracy_scores({{0.5, true}}, 10), std::invalid_argument);
  CHECK_THROWS_AS(verification_accuracy_scores(sep, 1), std::invalid_argument);
}

TEST_CASE("verification accuracy is rotation invariant") {
  Rng rng(711);
  std::vector<VerificationPair> pairs, rotated;
  for (int i = 0; i < 300; ++i) {
    VerificationPair p;
    p.a = random_unit(rng, 8);
    p.b = random_unit(rng, 8);
    p.same = rng.bernoulli(0.5);
    pairs.push_back(p);
  }
  // random rotation in the (0,1) and (2,5) planes
  const double th1 = 0.7, th2 = -1.2;
  auto rotate = [&](Embedding e) {
    const double a0 = e[0] * std::cos(th1) - e[1] * std::sin(th1);
    const double a1 = e[0] * std::sin(th1) + e[1] * std::cos(th1);
    const double a2 = e[2] * std::cos(th2) - e[5] * std::sin(th2);
    const double a5 = e[2] * std::sin(th2) + e[5] * std::cos(th2);
    e[0] = static_cast<float>(a0);
    e[1] = static_cast<float>(a1);
    e[2] = static_cast<float>(a2);
    e[5] = static_cast<float>(a5);
    return e;
  };
  for (const VerificationPair& p : pairs)
    rotated.push_back({rotate(p.a), rotate(p.b), p.same});
  CHECK(verification_accuracy(rotated) ==
        doctest::Approx(verification_accuracy(pairs)).epsilon(1e-3));
}

TEST_CASE("tar at far") {
  // disjoint supports: full TAR at any achievable FAR
  std::vector<double> gen, imp;
  Rng rng(720);
  for (int i = 0; i < 400; ++i) {
    gen.push_back(0.6 + 0.3 * rng.uniform());
    imp.push_back(-0.6 + 0.3 * rng.uniform());
  }
  CHECK(tar_at_far(gen, imp, 0.01) == doctest::Approx(1.0));
  CHECK(tar_at_far(gen, imp, 0.5) == doctest::Approx(1.0));

  // identical distributions: TAR tracks FAR
  std::vector<double> g2, i2;
  for (int i = 0; i < 20000; ++i) {
    g2.push_back(rng.uniform());
    i2.push_back(rng.uniform());
  }
  CHECK(tar_at_far(g2, i2, 0.1) == doctest::Approx(0.1).epsilon(0.25));
  CHECK(tar_at_far(g2, i2, 0.4) == doctest::Approx(0.4).epsilon(0.1));

  // monotone in far
  double prev = 0;
  for (double far : {0.001, 0.01, 0.1, 0.3, 0.6}) {
    const double tar = tar_at_far(g2, i2, far);
    CHECK(tar >= prev);
    prev = tar;
  }

  // single impostor: conservative behavior
  CHECK(tar_at_far({0.6}, {0.5}, 0.5) == doctest::Approx(1.0));  // threshold 0.6 admits no impostor
  CHECK(tar_at_far({0.4}, {0.5}, 0.5) == doctest::Approx(0.0));  // no threshold clears the impostor

  CHECK_THROWS_AS(tar_at_far({}, imp, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(tar_at_far(gen, imp, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(tar_at_far(gen, imp, 1.0), std::invalid_argument);
}

TEST_CASE("roc auc") {
  CHECK(roc_auc({0.9, 0.8}, {0.1, 0.2}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.1, 0.2}, {0.8, 0.9}) == doctest::Approx(0.0));
  CHECK(roc_auc({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.5));

  Rng rng(730);
  std::vector<double> gen, imp;
  for (int i = 0; i < 500; ++i) {
    gen.push_back(rng.uniform());
    imp.push_back(rng.uniform());
  }
  CHECK(roc_auc(gen, imp) == doctest::Approx(0.5).epsilon(0.1));

  // exact agreement with the pairwise oracle, ties included
  std::vector<double> g3, i3;
  for (int i = 0; i < 60; ++i) {
    g3.push_back(std::round(rng.uniform() * 10) / 10.0);
    i3.push_back(std::round(rng.uniform() * 10) / 10.0);
  }
  double wins = 0;
  for (double g : g3)
    for (double i : i3) {
      if (g > i) wins += 1;
      else if (g == i) wins += 0.5;
    }
  CHECK(roc_auc(g3, i3) == doctest::Approx(wins / (g3.size() * i3.size())).epsilon(1e-12));

  CHECK_THROWS_AS(roc_auc({}, imp), std::invalid_argument);
}

TEST_CASE("open-set identification") {
  Rng rng(740);

  // gallery of one, mated probe identical to it
  Template g0 = make_template(0, {random_unit(rng, 8)});
  Template mated0 = make_template(0, {g0.aggregated});
  std::vector<Template> nonmated;
  for (int i = 0; i < 10; ++i) nonmated.push_back(make_template(100 + i, {random_unit(rng, 8)}));
  CHECK(tpir_at_fpir({mated0}, nonmated, {g0}, 1, 0.5) == doctest::Approx(1.0));

  // degenerate: rank covers the gallery and fpir=1 admits everything,
  // leaving the closed-set top-rank rate
  std::vector<Template> gallery, mated;
  for (int id = 0; id < 12; ++id) gallery.push_back(make_template(id, {random_unit(rng, 8)}));
  for (int id = 0; id < 12; ++id) {
    // half the probes are near their gallery mate, half are noise
    if (id % 2 == 0) {
      std::vector<float> m = gallery[static_cast<std::size_t>(id)].aggregated;
      m[0] += 0.05f;
      mated.push_back(make_template(id, {unit(m)}));
    } else {
      mated.push_back(make_template(id, {random_unit(rng, 8)}));
    }
  }
  const double closed = tpir_at_fpir(mated, nonmated, gallery, 12, 1.0);
  std::size_t expect = 0;
  for (const Template& p : mated) ++expect;  // rank = gallery size: every probe hits
  CHECK(closed == doctest::Approx(1.0));
  const double closed1 = tpir_at_fpir(mated, nonmated, gallery, 1, 1.0);
  CHECK(closed1 >= 0.5);  // the six near-duplicates rank first
  CHECK(closed1 <= 1.0);

  // random-embedding configuration against the brute-force oracle
  for (std::uint64_t seed : {750u, 751u, 752u}) {
    Rng r2(seed);
    std::vector<Template> gal, mat, non;
    for (int id = 0; id < 20; ++id) gal.push_back(make_template(id, {random_unit(r2, 8)}));
    for (int i = 0; i < 30; ++i) mat.push_back(make_template(i % 20, {random_unit(r2, 8)}));
    for (int i = 0; i < 25; ++i) non.push_back(make_template(500 + i, {random_unit(r2, 8)}));
    for (double fpir : {0.2, 0.5, 1.0}) {
      const double got = tpir_at_fpir(mat, non, gal, 5, fpir);
      CHECK(got == doctest::Approx(tpir_oracle(mat, non, gal, 5, fpir)).epsilon(1e-12));
    }
  }

  // wide-gallery sanity: random embeddings rarely clear rank-20 of 100
  Rng r3(760);
  std::vector<Template> gal100, mat100, non100;
  for (int id = 0; id < 100; ++id) gal100.push_back(make_template(id, {random_unit(r3, 8)}));
  for (int i = 0; i < 50; ++i) mat100.push_back(make_template(i, {random_unit(r3, 8)}));
  for (int i = 0; i < 50; ++i) non100.push_back(make_template(900 + i, {random_unit(r3, 8)}));
  const double tpir = tpir_at_fpir(mat100, non100, gal100, 20, 0.1);
  CHECK(tpir == doctest::Approx(tpir_oracle(mat100, non100, gal100, 20, 0.1)).epsilon(1e-12));
  CHECK(tpir <= 0.4);

  // monotone in fpir and in rank
  double prev = 0;
  for (double f : {0.1, 0.3, 0.6, 1.0}) {
    const double v = tpir_at_fpir(mat100, non100, gal100, 20, f);
    CHECK(v >= prev);
    prev = v;
  }
  prev = 0;
  for (int rank : {1, 5, 20, 100}) {
    const double v = tpir_at_fpir(mat100, non100, gal100, rank, 0.5);
    CHECK(v >= prev);
    prev = v;
  }

  std::vector<Template> dup{make_template(1, {random_unit(rng, 8)}),
                            make_template(1, {random_unit(rng, 8)})};
  CHECK_THROWS_AS(tpir_at_fpir(mated, nonmated, dup, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(tpir_at_fpir(mated, {}, gallery, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(tpir_at_fpir(mated, nonmated, gallery, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(tpir_at_fpir(mated, nonmated, gallery, 0, 0.5), std::invalid_argument);
}

TEST_CASE("auc over the tpir curve") {
  CHECK(auc_tpir({{0.0, 1.0}, {1.0, 1.0}}) == doctest::Approx(1.0));
  CHECK(auc_tpir({{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}}) == doctest::Approx(0.0));
  CHECK(auc_tpir({{0.0, 0.0}, {1.0, 1.0}}) == doctest::Approx(0.5));
  CHECK(auc_tpir({{0.2, 0.4}, {0.6, 0.8}}) == doctest::Approx(0.24));
  CHECK_THROWS_AS(auc_tpir({{0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(auc_tpir({{0.5, 1.0}, {0.2, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(auc_tpir({{0.5, 1.0}, {0.5, 0.9}}), std::invalid_argument);
}

TEST_CASE("gain formulas against published cells") {
  CHECK(*cross_res_gain(86.10, 57.75, 65.85) == doctest::Approx(3.50).epsilon(2e-3));
  CHECK(*cross_res_gain(50.03, 95.90, 96.05) == doctest::Approx(-305.80).epsilon(2e-3));
  CHECK(*same_res_gain(77.78, 60.70, 62.57) == doctest::Approx(9.13).epsilon(2e-3));
  CHECK(*same_res_gain(90.90, 73.88, 78.00) == doctest::Approx(4.13).epsilon(2e-3));

  CHECK(*cross_res_gain(57.75, 57.75, 65.85) == doctest::Approx(0.0));
  CHECK(*same_res_gain(62.57, 60.70, 62.57) == doctest::Approx(1.0));
  CHECK_FALSE(cross_res_gain(50.0, 60.0, 60.0).has_value());

  CHECK(format_gain(cross_res_gain(86.10, 57.75, 65.85)) == "+3.50");
  CHECK(format_gain(same_res_gain(50.03, 95.90, 95.75)) == "-305.80");
  CHECK(format_gain(std::nullopt) == "-");
}
