#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lago/evaluation.hpp"

using namespace lago;

TEST_CASE("balanced_accuracy") {
  const std::vector<int> y{0, 0, 1, 1, 1};
  CHECK(balanced_accuracy(y, y, 2) == 1.0);
  const std::vector<int> pred{0, 0, 1, 0, 0};
  CHECK(balanced_accuracy(pred, y, 2) == doctest::Approx((1.0 + 1.0 / 3.0) / 2.0));
  const std::vector<int> constant(4, 1), balanced{0, 0, 1, 1};
  CHECK(balanced_accuracy(constant, balanced, 2) == 0.5);

  // unrepresented classes are excluded
  CHECK(balanced_accuracy(y, y, 5) == 1.0);

  // relabeling classes consistently leaves the score unchanged
  std::vector<int> py, pp;
  for (int v : y) py.push_back(1 - v);
  for (int v : pred) pp.push_back(1 - v);
  CHECK(balanced_accuracy(pp, py, 2) == balanced_accuracy(pred, y, 2));

  CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{}, std::vector<int>{}, 2), Error);
}

TEST_CASE("gamma_sparsity") {
  const Matrix hard = GroupSpec{{{"a", {0, 2}}, {"b", {1}}, {"c", {3}}}}.one_hot(4);
  CHECK(gamma_sparsity(hard, 0.5) == doctest::Approx(1.0 / 3.0));
  const Matrix uniform = Matrix::Constant(4, 4, 0.25);
  CHECK(gamma_sparsity(uniform, 0.3) == 0.0);
  CHECK(gamma_sparsity(uniform, 0.2) == 1.0);

  Rng rng(1);
  const Matrix g = row_softmax(rng.normal_matrix(10, 5), 2.0);
  double previous = 1.0;
  for (double tau : {1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.6}) {
    const double s = gamma_sparsity(g, tau);
    CHECK(s <= previous);
    previous = s;
  }
  CHECK_THROWS_AS(gamma_sparsity(g, 0.0), Error);
}

TEST_CASE("grouped_pairs") {
  CHECK(grouped_pairs(Matrix::Identity(5, 5), kDefaultGammaTau).empty());
  Matrix g(3, 2);
  g << 1, 0, 1, 0, 0, 1;
  const auto pairs = grouped_pairs(g, 0.5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == AttributePair{0, 1});
}

TEST_CASE("anticorrelation_report") {
  // attribute 1 is the complement of attribute 0; attribute 2 is noise
  Rng rng(3);
  Matrix occ(40, 4);
  for (int r = 0; r < 40; ++r) {
    occ(r, 0) = rng.coin() ? 1.0 : 0.0;
    occ(r, 1) = 1.0 - occ(r, 0);
    occ(r, 2) = rng.coin() ? 1.0 : 0.0;
    occ(r, 3) = rng.coin() ? 1.0 : 0.0;
  }
  const auto rep = anticorrelation_report(occ, {{0, 1}});
  CHECK(*rep.anticorr_grouped_fraction == 1.0);
  REQUIRE(rep.ks.has_value());

  // baseline equals brute-force enumeration
  int negative = 0, defined = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      std::vector<double> x(occ.col(a).data(), occ.col(a).data() + 40);
      std::vector<double> ca(40), cb(40);
      for (int r = 0; r < 40; ++r) {
        ca[r] = occ(r, a);
        cb[r] = occ(r, b);
      }
      if (auto c = pearson(ca, cb)) {
        ++defined;
        negative += *c < 0.0;
      }
    }
  }
  CHECK(rep.anticorr_baseline_fraction == doctest::Approx(static_cast<double>(negative) / defined));

  const auto none = anticorrelation_report(occ, {});
  CHECK_FALSE(none.anticorr_grouped_fraction.has_value());
  CHECK_FALSE(none.ks.has_value());
  CHECK(none.anticorr_baseline_fraction == rep.anticorr_baseline_fraction);

  CHECK_THROWS_AS(anticorrelation_report(Matrix::Zero(1, 3), {}), Error);
}

TEST_CASE("random grouping matches the baseline on average") {
  Rng rng(4);
  const int A = 12, N = 60;
  Matrix occ(N, A);
  for (int r = 0; r < N; ++r) {
    const double shared = rng.normal();
    for (int m = 0; m < A; ++m) occ(r, m) = (m % 3 == 0 ? -shared : shared) + rng.normal();
  }
  double gap = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<AttributePair> pairs;
    for (int j = 0; j < 10; ++j) {
      int a = static_cast<int>(rng.index(A)), b = static_cast<int>(rng.index(A));
      if (a == b) continue;
      pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
    const auto rep = anticorrelation_report(occ, pairs);
    if (rep.anticorr_grouped_fraction) gap += *rep.anticorr_grouped_fraction - rep.anticorr_baseline_fraction;
  }
  CHECK(std::abs(gap / trials) < 0.05);
}

TEST_CASE("analyze_gamma json") {
  Matrix g(3, 2);
  g << 1, 0, 1, 0, 0, 1;
  Matrix occ(4, 3);
  occ << 1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 1;
  const auto rep = analyze_gamma(g, occ, 0.5);
  CHECK(rep.sparsity_fraction == 0.5);
  const std::string json = to_json(rep);
  CHECK(json.find("\"anticorr_grouped_fraction\"") != std::string::npos);
  CHECK(json.find("\"ks\"") != std::string::npos);
}

TEST_CASE("noise experiment") {
  SyntheticConfig cfg;
  cfg.rho = 0.1;
  cfg.sigma = 0.3;
  const auto bench = generate_synthetic(cfg, 2);
  NoiseData data{&bench.train, &bench.val, &bench.test, &bench.descriptions, &bench.groups};
  NoiseArm hard{"semantic-hard", {}, {}, {}};
  hard.train.lr_w = 1e-2;
  hard.train.epochs = 30;
  NoiseArm single = hard;
  single.name = "singletons";
  single.model.variant = Variant::singletons;
  const std::vector<double> ratios{0.0, 0.05, 0.5};
  const auto curve = noise_robustness_experiment({hard, single}, data, ratios, {0, 1}, 2);
  REQUIRE(curve.size() == 6);
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(curve[a * 3].relative_accuracy == 1.0);
    CHECK(curve[a * 3 + 2].relative_accuracy <= curve[a * 3 + 1].relative_accuracy);
  }
  CHECK(noise_curve_csv(curve).rfind("variant,ratio,mean_balanced_acc,relative_acc,seed_0,seed_1\n", 0) == 0);

  const auto serial = noise_robustness_experiment({hard, single}, data, ratios, {0, 1}, 1);
  CHECK(noise_curve_csv(serial) == noise_curve_csv(curve));

  CHECK_THROWS_AS(noise_robustness_experiment({hard}, data, {0.1}, {0}), Error);
}
