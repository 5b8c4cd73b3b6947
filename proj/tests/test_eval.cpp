// tests/test_eval.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "nifv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "testing_util.hpp"

namespace nifv {
namespace {

using nifv_test::Close;

// Exact box-constrained dual optimum by enumerating active-set patterns.
// Every pattern pins each coordinate to 0, to c, or leaves it free; the free
// block is recovered from the stationarity equations. The best feasible
// candidate over all 3^n patterns is the global optimum for nonsingular
// subproblems, which random inputs give almost surely.
double ExactDualMinimum(const Eigen::MatrixXd& x, const std::vector<int>& y,
                        double c) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      q(i, j) = y[i] * y[j] * (x.row(i).dot(x.row(j)) + 1.0);
    }
  }
  auto objective = [&](const Eigen::VectorXd& alpha) {
    return 0.5 * alpha.dot(q * alpha) - alpha.sum();
  };

  double best = objective(Eigen::VectorXd::Zero(n));
  std::vector<int> pattern(n, 0);
  const int total = static_cast<int>(std::pow(3.0, n));
  for (int code = 0; code < total; ++code) {
    int rest = code;
    for (int i = 0; i < n; ++i) {
      pattern[i] = rest % 3;
      rest /= 3;
    }
    std::vector<int> free_ix;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (pattern[i] == 1) alpha[i] = c;
      if (pattern[i] == 2) free_ix.push_back(i);
    }
    if (!free_ix.empty()) {
      const int f = static_cast<int>(free_ix.size());
      Eigen::MatrixXd qff(f, f);
      Eigen::VectorXd rhs(f);
      for (int a = 0; a < f; ++a) {
        rhs[a] = 1.0;
        for (int i = 0; i < n; ++i) {
          if (pattern[i] == 1) rhs[a] -= q(free_ix[a], i) * c;
        }
        for (int b = 0; b < f; ++b) qff(a, b) = q(free_ix[a], free_ix[b]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(qff);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd sol = lu.solve(rhs);
      bool feasible = true;
      for (int a = 0; a < f; ++a) {
        if (sol[a] < -1e-9 || sol[a] > c + 1e-9) feasible = false;
      }
      if (!feasible) continue;
      for (int a = 0; a < f; ++a) {
        alpha[free_ix[a]] = std::clamp(sol[a], 0.0, c);
      }
    }
    best = std::min(best, objective(alpha));
  }
  return best;
}

// Literal re-derivation of the 11-point rule with per-prefix recounting.
double ApByExhaustiveScan(const Eigen::VectorXd& scores,
                          const std::vector<int>& relevance) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  int positives = 0;
  for (int r : relevance) positives += r != 0 ? 1 : 0;
  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    double best = 0.0;
    for (int cut = 1; cut <= n; ++cut) {
      int hits = 0;
      for (int k = 0; k < cut; ++k) hits += relevance[order[k]] != 0 ? 1 : 0;
      const double recall = static_cast<double>(hits) / positives;
      if (recall + 1e-12 < t / 10.0) continue;
      best = std::max(best, static_cast<double>(hits) / cut);
    }
    sum += best;
  }
  return sum / 11.0;
}

Eigen::MatrixXd HardScores(const std::vector<int>& truth, int classes,
                           const std::vector<int>& flip_to) {
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(truth.size(), classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int cls = flip_to[i] >= 0 ? flip_to[i] : truth[i];
    scores(i, cls) = 1.0;
  }
  return scores;
}

TEST_CASE("separable classes train to perfect accuracy") {
  std::mt19937_64 rng(801);
  std::normal_distribution<double> unit(0.0, 0.3);
  const int per_class = 20;
  Eigen::MatrixXd x(2 * per_class, 2);
  std::vector<std::string> labels;
  for (int i = 0; i < per_class; ++i) {
    x(i, 0) = -2.0 + unit(rng);
    x(i, 1) = unit(rng);
    labels.push_back("left");
  }
  for (int i = 0; i < per_class; ++i) {
    x(per_class + i, 0) = 2.0 + unit(rng);
    x(per_class + i, 1) = unit(rng);
    labels.push_back("right");
  }
  SvmTrainInfo info;
  const LinearModel model = TrainLinearSvm(x, labels, 42, {}, &info);
  REQUIRE(model.Classes() == 2);
  CHECK(model.classes[0] == "left");

  const Eigen::MatrixXd scores = ScoreVectors(model, x);
  std::vector<int> truth(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    truth[i] = labels[i] == "left" ? 0 : 1;
  }
  CHECK(ArgmaxAccuracy(scores, truth) == 1.0);
  const SvmTrainOptions defaults;
  CHECK(std::find(defaults.c_grid.begin(), defaults.c_grid.end(),
                  info.chosen_c) != defaults.c_grid.end());
}

TEST_CASE("training twice with the same inputs yields the identical model") {
  std::mt19937_64 rng(802);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(30, 3);
  std::vector<std::string> labels;
  for (int i = 0; i < 30; ++i) {
    const int cls = i % 3;
    for (int j = 0; j < 3; ++j) x(i, j) = (j == cls ? 2.0 : 0.0) + unit(rng);
    labels.push_back("c" + std::to_string(cls));
  }
  const LinearModel a = TrainLinearSvm(x, labels, 7);
  const LinearModel b = TrainLinearSvm(x, labels, 7);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.bias - b.bias).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.classes == b.classes);
}

TEST_CASE("the dual solver matches an exhaustive active-set oracle") {
  std::mt19937_64 rng(803);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution pick(0.5);
  for (double c : {0.5, 2.0}) {
    for (int trial = 0; trial < 4; ++trial) {
      const int n = 6;
      Eigen::MatrixXd x(n, 2);
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i) {
        y[i] = pick(rng) ? 1 : -1;
        x(i, 0) = y[i] * 0.6 + unit(rng);
        x(i, 1) = unit(rng);
      }
      const BinarySvm fit = SolveBinarySvm(x, y, c, 99, 1e-6, 20000);
      REQUIRE(fit.converged);
      const double exact = ExactDualMinimum(x, y, c);
      CHECK(Close(-fit.dual_objective, exact, 1e-3, 1e-3));
      CHECK(Close(fit.primal_objective, -exact, 1e-3, 1e-3));
    }
  }
}

TEST_CASE("the dual objective never increases between epochs") {
  std::mt19937_64 rng(804);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution pick(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40;
    Eigen::MatrixXd x(n, 4);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = pick(rng) ? 1 : -1;
      for (int j = 0; j < 4; ++j) x(i, j) = 0.3 * y[i] + unit(rng);
    }
    const BinarySvm fit = SolveBinarySvm(x, y, 10.0, 1000 + trial, 1e-5, 200);
    REQUIRE(fit.dual_trace.size() >= 2);
    for (std::size_t e = 1; e < fit.dual_trace.size(); ++e) {
      CHECK(fit.dual_trace[e] <= fit.dual_trace[e - 1] + 1e-12);
    }
    CHECK(fit.primal_objective - fit.dual_objective >= -1e-12);
  }
}

TEST_CASE("solver input validation") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, -1.0;
  CHECK_THROWS_AS(SolveBinarySvm(x, {1, 0}, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(SolveBinarySvm(x, {1}, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(SolveBinarySvm(x, {1, -1}, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(SolveBinarySvm(x, {1, -1}, -2.0, 1), std::invalid_argument);

  std::vector<std::string> one_class = {"a", "a", "a"};
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(3, 2);
  CHECK_THROWS_AS(TrainLinearSvm(v, one_class, 1), std::invalid_argument);
}

TEST_CASE("perfect rankings score unit average precision") {
  Eigen::VectorXd scores(6);
  scores << 9, 8, 7, 3, 2, 1;
  CHECK(AveragePrecision11(scores, {1, 1, 1, 0, 0, 0}) == 1.0);

  Eigen::VectorXd ten(10);
  for (int i = 0; i < 10; ++i) ten[i] = 10 - i;
  std::vector<int> single(10, 0);
  single[0] = 1;
  CHECK(AveragePrecision11(ten, single) == 1.0);
}

TEST_CASE("average precision matches an exhaustive re-derivation") {
  std::mt19937_64 rng(805);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution rel(0.3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 40;
    Eigen::VectorXd scores(n);
    std::vector<int> relevance(n, 0);
    int positives = 0;
    for (int i = 0; i < n; ++i) {
      scores[i] = std::round(u(rng) * 8.0) / 8.0;
      relevance[i] = rel(rng) ? 1 : 0;
      positives += relevance[i];
    }
    if (positives == 0) relevance[0] = 1;
    const double got = AveragePrecision11(scores, relevance);
    const double want = ApByExhaustiveScan(scores, relevance);
    CHECK(Close(got, want, 1e-12, 1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("average precision ignores positive monotone rescaling") {
  std::mt19937_64 rng(806);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution rel(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 25;
    Eigen::VectorXd scores(n);
    std::vector<int> relevance(n, 0);
    for (int i = 0; i < n; ++i) {
      scores[i] = unit(rng);
      relevance[i] = rel(rng) ? 1 : 0;
    }
    relevance[3] = 1;
    Eigen::VectorXd warped(n);
    for (int i = 0; i < n; ++i) {
      warped[i] = 5.0 + 3.0 * std::atan(scores[i]);
    }
    CHECK(AveragePrecision11(scores, relevance) ==
          AveragePrecision11(warped, relevance));
  }
}

TEST_CASE("tied scores rank by index") {
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(4);
  const double ap = AveragePrecision11(scores, {1, 0, 1, 0});
  CHECK(Close(ap, 28.0 / 33.0, 1e-14, 1e-14));
}

TEST_CASE("average precision requires a relevant item") {
  Eigen::VectorXd scores(3);
  scores << 1, 2, 3;
  CHECK_THROWS_AS(AveragePrecision11(scores, {0, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(AveragePrecision11(scores, {0, 0}), std::invalid_argument);
}

// The max-over-cuts interpolation lifts a chance ranking a few points above
// prevalence, so the mean sits near 0.54 on balanced relevance; single draws
// stay below 0.60.
TEST_CASE("a chance ranking lands near prevalence") {
  double sum = 0.0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(807 + t);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 1000;
    Eigen::VectorXd scores(n);
    std::vector<int> relevance(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = u(rng);
      relevance[i] = i < n / 2 ? 1 : 0;
    }
    std::shuffle(relevance.begin(), relevance.end(), rng);
    const double ap = AveragePrecision11(scores, relevance);
    CHECK(ap >= 0.45);
    CHECK(ap <= 0.60);
    sum += ap;
  }
  CHECK(std::abs(sum / trials - 0.5) <= 0.05);
}

TEST_CASE("argmax accuracy breaks ties toward the smaller class") {
  Eigen::MatrixXd scores(2, 3);
  scores << 1.0, 1.0, 0.5, 0.2, 0.9, 0.9;
  CHECK(ArgmaxAccuracy(scores, {0, 1}) == 1.0);
  CHECK(ArgmaxAccuracy(scores, {1, 2}) == 0.0);
}

TEST_CASE("evaluation reports per-class values and their mean") {
  const std::vector<int> truth = {0, 0, 1, 1, 1, 2};
  const std::vector<int> flips = {-1, 1, -1, -1, 0, -1};
  const Eigen::MatrixXd scores = HardScores(truth, 3, flips);
  const std::vector<std::string> names = {"a", "b", "c"};

  const EvalReport acc = EvaluateScores(scores, truth, names, Metric::kAccuracy);
  CHECK(Close(acc.per_class[0], 0.5, 1e-15, 1e-15));
  CHECK(Close(acc.per_class[1], 2.0 / 3.0, 1e-15, 1e-15));
  CHECK(acc.per_class[2] == 1.0);
  CHECK(Close(acc.mean, acc.per_class.mean(), 1e-15, 1e-15));

  const EvalReport map = EvaluateScores(scores, truth, names, Metric::kMap11);
  for (int c = 0; c < 3; ++c) {
    CHECK(map.per_class[c] >= 0.0);
    CHECK(map.per_class[c] <= 1.0);
  }
  CHECK(Close(map.mean, map.per_class.mean(), 1e-15, 1e-15));

  const Eigen::MatrixXd perfect = HardScores(truth, 3,
                                             {-1, -1, -1, -1, -1, -1});
  const EvalReport ideal = EvaluateScores(perfect, truth, names,
                                          Metric::kMap11);
  CHECK(ideal.mean == 1.0);
}

TEST_CASE("identical systems compare as equivalent with zero delta") {
  const std::vector<int> truth = {0, 1, 0, 1, 0, 1, 0, 1};
  const Eigen::MatrixXd scores =
      HardScores(truth, 2, std::vector<int>(truth.size(), -1));
  const CompareResult r =
      BootstrapCompare(scores, scores, truth, 2, Metric::kAccuracy, 200, 5);
  CHECK(r.delta == 0.0);
  CHECK(r.lo == 0.0);
  CHECK(r.hi == 0.0);
  CHECK(r.equivalent);
}

TEST_CASE("comparison is deterministic for a fixed seed and thread count") {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 60;
  std::vector<int> truth(n);
  Eigen::MatrixXd a(n, 2);
  Eigen::MatrixXd b(n, 2);
  for (int i = 0; i < n; ++i) {
    truth[i] = i % 2;
    a(i, 0) = u(rng);
    a(i, 1) = u(rng);
    b(i, 0) = u(rng);
    b(i, 1) = u(rng);
  }
  const CompareResult r1 =
      BootstrapCompare(a, b, truth, 2, Metric::kMap11, 150, 11);
  const CompareResult r2 =
      BootstrapCompare(a, b, truth, 2, Metric::kMap11, 150, 11);
  CHECK(r1.delta == r2.delta);
  CHECK(r1.lo == r2.lo);
  CHECK(r1.hi == r2.hi);

  const CompareResult threaded =
      BootstrapCompare(a, b, truth, 2, Metric::kMap11, 150, 11, 4);
  CHECK(threaded.lo == r1.lo);
  CHECK(threaded.hi == r1.hi);
}

TEST_CASE("a twenty-point accuracy gap is flagged as significant") {
  std::mt19937_64 rng(809);
  const int n = 200;
  std::vector<int> truth(n);
  std::vector<int> flips_a(n, -1);
  std::vector<int> flips_b(n, -1);
  for (int i = 0; i < n; ++i) truth[i] = i % 2;
  for (int i = 0; i < n; i += 20) flips_a[i] = 1 - truth[i];
  for (int i = 0; i < n; i += 4) flips_b[i] = 1 - truth[i];
  const Eigen::MatrixXd a = HardScores(truth, 2, flips_a);
  const Eigen::MatrixXd b = HardScores(truth, 2, flips_b);
  const CompareResult r =
      BootstrapCompare(a, b, truth, 2, Metric::kAccuracy, 300, 17);
  CHECK(Close(r.delta, 0.20, 1e-12, 1e-12));
  CHECK(r.lo > 0.0);
  CHECK(!r.equivalent);
}

TEST_CASE("comparison rejects too few resamples and shape mismatches") {
  const std::vector<int> truth = {0, 1};
  const Eigen::MatrixXd s = HardScores(truth, 2, {-1, -1});
  CHECK_THROWS_AS(BootstrapCompare(s, s, truth, 2, Metric::kAccuracy, 99, 1),
                  std::invalid_argument);
  Eigen::MatrixXd other(3, 2);
  other.setZero();
  CHECK_THROWS_AS(
      BootstrapCompare(s, other, truth, 2, Metric::kAccuracy, 100, 1),
      std::invalid_argument);
}

TEST_CASE("metric names parse and reject unknowns") {
  CHECK(ParseMetric("map11") == Metric::kMap11);
  CHECK(ParseMetric("accuracy") == Metric::kAccuracy);
  CHECK_THROWS_AS(ParseMetric("f1"), std::invalid_argument);
}

}  // namespace
}  // namespace nifv
