// tests/test_latent_mog.cpp

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

#include "nifv/latent_mog.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <doctest.h>
#include <random>

#include "nifv/count_models.hpp"
#include "testing_util.hpp"

namespace {

using nifv_test::Close;
using nifv_test::RandomPositive;
using nifv_test::RandomSimplex;

constexpr double kLog2Pi = 1.8378770664093454836;

nifv::LatentMogModel RandomModel(std::mt19937_64* rng, int k, int d) {
  std::uniform_real_distribution<double> loc(-1.0, 1.0);
  nifv::LatentMogModel model;
  model.alpha = RandomPositive(*rng, k, 0.5, 3.0);
  model.m.resize(k, d);
  model.beta.resize(k, d);
  model.a.resize(k, d);
  model.b.resize(k, d);
  for (int c = 0; c < k; ++c) {
    model.m.row(c) = RandomPositive(*rng, d, 0.1, 1.0).transpose();
    for (int j = 0; j < d; ++j) model.m(c, j) *= loc(*rng) < 0 ? -1.0 : 1.0;
    model.beta.row(c) = RandomPositive(*rng, d, 0.4, 2.5).transpose();
    model.a.row(c) = RandomPositive(*rng, d, 0.8, 3.0).transpose();
    model.b.row(c) = RandomPositive(*rng, d, 0.4, 2.0).transpose();
  }
  return model;
}

// Statistics from explicit descriptors and responsibilities, so the
// second-order rows are always consistent with some data set.
nifv::SufficientStats StatsFromData(const Eigen::MatrixXd& resp,
                                    const Eigen::MatrixXd& rows) {
  return nifv::AccumulateStats(resp, rows);
}

Eigen::MatrixXd RandomRows(std::mt19937_64* rng, int n, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd rows(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) rows(i, j) = normal(*rng);
  }
  return rows;
}

Eigen::MatrixXd RandomResp(std::mt19937_64* rng, int n, int k) {
  Eigen::MatrixXd resp(n, k);
  for (int i = 0; i < n; ++i) {
    resp.row(i) = RandomSimplex(*rng, k, 2.0).transpose();
  }
  return resp;
}

double RespEntropy(const Eigen::MatrixXd& resp) {
  double entropy = 0.0;
  for (int i = 0; i < resp.rows(); ++i) {
    for (int c = 0; c < resp.cols(); ++c) {
      const double q = resp(i, c);
      if (q > 0.0) entropy -= q * std::log(q);
    }
  }
  return entropy;
}

// Bound assembled as expected joint log-density plus entropies, with
// third-party special functions and explicit per-descriptor loops.
double BoundByTermAssembly(const nifv::LatentMogModel& model,
                           const nifv::LatentMogPosterior& post,
                           const Eigen::MatrixXd& resp,
                           const Eigen::MatrixXd& rows) {
  using boost::math::digamma;
  using boost::math::lgamma;
  const int k = model.Components();
  const int d = model.Dim();
  const int n = static_cast<int>(rows.rows());

  Eigen::VectorXd mean_log_pi(k);
  const double psi_sum = digamma(post.alpha_star.sum());
  for (int c = 0; c < k; ++c) {
    mean_log_pi[c] = digamma(post.alpha_star[c]) - psi_sum;
  }
  Eigen::MatrixXd mean_lam(k, d), mean_log_lam(k, d);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      mean_lam(c, j) = post.a_star(c, j) / post.b_star(c, j);
      mean_log_lam(c, j) =
          digamma(post.a_star(c, j)) - std::log(post.b_star(c, j));
    }
  }

  // Expected log prior of the mixing weights.
  double total = lgamma(model.alpha.sum());
  for (int c = 0; c < k; ++c) {
    total -= lgamma(model.alpha[c]);
    total += (model.alpha[c] - 1.0) * mean_log_pi[c];
  }
  // Expected log prior of every mean-precision pair.
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const double a = model.a(c, j), b = model.b(c, j);
      const double beta = model.beta(c, j), mloc = model.m(c, j);
      const double shift = post.m_star(c, j) - mloc;
      total += 0.5 * (std::log(beta) - kLog2Pi) + 0.5 * mean_log_lam(c, j);
      total -= 0.5 * beta *
               (mean_lam(c, j) * shift * shift + 1.0 / post.beta_star(c, j));
      total += a * std::log(b) - lgamma(a) + (a - 1.0) * mean_log_lam(c, j) -
               b * mean_lam(c, j);
    }
  }
  // Expected assignment and emission terms, one descriptor at a time.
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      const double q = resp(i, c);
      if (q <= 0.0) continue;
      total += q * mean_log_pi[c];
      for (int j = 0; j < d; ++j) {
        const double diff = rows(i, j) - post.m_star(c, j);
        total += q * 0.5 * (mean_log_lam(c, j) - kLog2Pi);
        total -= q * 0.5 *
                 (mean_lam(c, j) * diff * diff + 1.0 / post.beta_star(c, j));
      }
    }
  }
  // Posterior entropies.
  double entropy = -lgamma(post.alpha_star.sum());
  const double hat = post.alpha_star.sum();
  entropy += (hat - k) * digamma(hat);
  for (int c = 0; c < k; ++c) {
    entropy += lgamma(post.alpha_star[c]);
    entropy -= (post.alpha_star[c] - 1.0) * digamma(post.alpha_star[c]);
  }
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const double as = post.a_star(c, j), bs = post.b_star(c, j);
      entropy += as - std::log(bs) + lgamma(as) + (1.0 - as) * digamma(as);
      entropy += 0.5 * (std::log(2.0 * M_PI / post.beta_star(c, j)) + 1.0) -
                 0.5 * mean_log_lam(c, j);
    }
  }
  return total + entropy + RespEntropy(resp);
}

std::vector<nifv::SufficientStats> SyntheticImageStats(std::mt19937_64* rng,
                                                       int images,
                                                       bool drop_last) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> extra(0, 10);
  const int k = 2, d = 2;
  const double centers[2][2] = {{-2.0, 0.0}, {3.0, 1.0}};
  std::vector<nifv::SufficientStats> stats(images);
  for (int i = 0; i < images; ++i) {
    stats[i].s0 = Eigen::VectorXd::Zero(k);
    stats[i].s1 = Eigen::MatrixXd::Zero(k, d);
    stats[i].s2 = Eigen::MatrixXd::Zero(k, d);
    for (int c = 0; c < k; ++c) {
      if (drop_last && c == k - 1) continue;
      // The component's mean drifts per image; descriptors scatter
      // around the drifted mean with unit variance.
      double shift[2];
      for (int j = 0; j < d; ++j) shift[j] = 0.5 * normal(*rng);
      const int count = 30 + extra(*rng);
      for (int s = 0; s < count; ++s) {
        for (int j = 0; j < d; ++j) {
          const double x = centers[c][j] + shift[j] + normal(*rng);
          stats[i].s1(c, j) += x;
          stats[i].s2(c, j) += x * x;
        }
        stats[i].s0[c] += 1.0;
      }
    }
  }
  return stats;
}

}  // namespace

TEST_CASE("posterior update on a single descriptor, worked by hand") {
  nifv::LatentMogModel model;
  model.alpha = Eigen::VectorXd::Ones(1);
  model.m = Eigen::MatrixXd::Zero(1, 1);
  model.beta = Eigen::MatrixXd::Ones(1, 1);
  model.a = Eigen::MatrixXd::Ones(1, 1);
  model.b = Eigen::MatrixXd::Ones(1, 1);

  nifv::SufficientStats stats;
  stats.s0 = Eigen::VectorXd::Ones(1);
  stats.s1 = Eigen::MatrixXd::Constant(1, 1, 2.0);
  stats.s2 = Eigen::MatrixXd::Constant(1, 1, 4.0);

  nifv::LatentMogPosterior post = nifv::PosteriorFromStats(model, stats);
  CHECK(post.alpha_star[0] == 2.0);
  CHECK(post.beta_star(0, 0) == 2.0);
  CHECK(post.m_star(0, 0) == 1.0);
  CHECK(post.a_star(0, 0) == 1.5);
  CHECK(post.b_star(0, 0) == 2.0);

  Eigen::VectorXd score = nifv::LatentMogFisherScore(model, post);
  REQUIRE(score.size() == 5);
  CHECK(std::abs(score[0]) <= 1e-15);        // mixing block
  CHECK(std::abs(score[1] - 0.75) <= 1e-15); // location block
  CHECK(std::abs(score[4] - 0.25) <= 1e-15); // rate block
}

TEST_CASE("repeated identical descriptors are discounted") {
  nifv::LatentMogModel model;
  model.alpha = Eigen::VectorXd::Ones(1);
  model.m = Eigen::MatrixXd::Zero(1, 1);
  model.beta = Eigen::MatrixXd::Ones(1, 1);
  model.a = Eigen::MatrixXd::Ones(1, 1);
  model.b = Eigen::MatrixXd::Ones(1, 1);

  auto location_score = [&](int n) {
    nifv::SufficientStats stats;
    stats.s0 = Eigen::VectorXd::Constant(1, static_cast<double>(n));
    stats.s1 = Eigen::MatrixXd::Constant(1, 1, static_cast<double>(n));
    stats.s2 = Eigen::MatrixXd::Constant(1, 1, static_cast<double>(n));
    nifv::LatentMogPosterior post = nifv::PosteriorFromStats(model, stats);
    return nifv::LatentMogFisherScore(model, post)[1];
  };

  // n copies of x = 1 contribute n(2+n)/(2+3n), not n times the single
  // contribution; an independent mixture would grow linearly.
  for (int n = 1; n <= 6; ++n) {
    const double expected = static_cast<double>(n) * (2.0 + n) / (2.0 + 3.0 * n);
    CHECK(Close(location_score(n), expected, 1e-12, 1e-12));
  }
  double prev_value = 0.0;
  double prev_inc = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 30; ++n) {
    const double value = location_score(n);
    const double inc = value - prev_value;
    CHECK(value > prev_value);
    CHECK(inc < prev_inc);
    prev_value = value;
    prev_inc = inc;
  }
}

TEST_CASE("scale and shape updates use only the zeroth-order row") {
  std::mt19937_64 rng(601);
  const int k = 3, d = 2;
  nifv::LatentMogModel model = RandomModel(&rng, k, d);

  Eigen::MatrixXd resp = RandomResp(&rng, 25, k);
  nifv::SufficientStats first = StatsFromData(resp, RandomRows(&rng, 25, d));
  nifv::SufficientStats second = first;
  second.s1 = StatsFromData(resp, RandomRows(&rng, 25, d)).s1;
  second.s2 = StatsFromData(resp, RandomRows(&rng, 25, d)).s2.array() + 1.0;

  nifv::LatentMogPosterior post1 = nifv::PosteriorFromStats(model, first);
  nifv::LatentMogPosterior post2 = nifv::PosteriorFromStats(model, second);
  CHECK((post1.beta_star - post2.beta_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((post1.a_star - post2.a_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((post1.m_star - post2.m_star).cwiseAbs().maxCoeff() > 0.0);
  CHECK((post1.b_star - post2.b_star).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("mixing block equals the compound count score at soft counts") {
  std::mt19937_64 rng(602);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 5, d = 3;
    nifv::LatentMogModel model = RandomModel(&rng, k, d);
    Eigen::MatrixXd rows = RandomRows(&rng, 20, d);
    Eigen::MatrixXd resp = RandomResp(&rng, 20, k);
    nifv::SufficientStats stats = StatsFromData(resp, rows);
    nifv::LatentMogPosterior post = nifv::PosteriorFromStats(model, stats);
    Eigen::VectorXd score = nifv::LatentMogFisherScore(model, post);

    nifv::PolyaModel polya;
    polya.alpha = model.alpha;
    Eigen::VectorXd count_score = nifv::PolyaFisherScore(polya, stats.s0);
    for (int c = 0; c < k; ++c) {
      CHECK(Close(score[c], count_score[c], 1e-12, 1e-12));
    }
  }
}

TEST_CASE("bound gradients match finite differences at fixed posterior") {
  std::mt19937_64 rng(603);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2, d = 2;
    nifv::LatentMogModel model = RandomModel(&rng, k, d);
    Eigen::MatrixXd rows = RandomRows(&rng, 15, d);
    Eigen::MatrixXd resp = RandomResp(&rng, 15, k);
    nifv::SufficientStats stats = StatsFromData(resp, rows);
    nifv::LatentMogPosterior post = nifv::PosteriorFromStats(model, stats);
    Eigen::VectorXd score = nifv::LatentMogFisherScore(model, post);

    const double h = 1e-5;
    auto bound_at = [&](const nifv::LatentMogModel& m) {
      return nifv::LatentMogBound(m, post, stats, 0.0);
    };
    for (int c = 0; c < k; ++c) {
      nifv::LatentMogModel up = model, dn = model;
      up.alpha[c] += h;
      dn.alpha[c] -= h;
      CHECK(Close(score[c], (bound_at(up) - bound_at(dn)) / (2 * h), 1e-6,
                  1e-8));
    }
    const int kd = k * d;
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < d; ++j) {
        const int idx = c * d + j;
        nifv::LatentMogModel up = model, dn = model;
        up.m(c, j) += h;
        dn.m(c, j) -= h;
        CHECK(Close(score[k + idx], (bound_at(up) - bound_at(dn)) / (2 * h),
                    1e-6, 1e-8));
        up = model; dn = model;
        up.beta(c, j) += h;
        dn.beta(c, j) -= h;
        CHECK(Close(score[k + kd + idx],
                    (bound_at(up) - bound_at(dn)) / (2 * h), 1e-6, 1e-8));
        up = model; dn = model;
        up.a(c, j) += h;
        dn.a(c, j) -= h;
        CHECK(Close(score[k + 2 * kd + idx],
                    (bound_at(up) - bound_at(dn)) / (2 * h), 1e-6, 1e-8));
        up = model; dn = model;
        up.b(c, j) += h;
        dn.b(c, j) -= h;
        CHECK(Close(score[k + 3 * kd + idx],
                    (bound_at(up) - bound_at(dn)) / (2 * h), 1e-6, 1e-8));
      }
    }
  }
}

TEST_CASE("bound matches term-by-term assembly") {
  std::mt19937_64 rng(604);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 3, d = 2;
    nifv::LatentMogModel model = RandomModel(&rng, k, d);
    Eigen::MatrixXd rows = RandomRows(&rng, 6, d);
    Eigen::MatrixXd resp = RandomResp(&rng, 6, k);
    nifv::SufficientStats stats = StatsFromData(resp, rows);
    nifv::LatentMogPosterior post = nifv::PosteriorFromStats(model, stats);
    // Detune the posterior so no term happens to sit at a stationary
    // point; the identity is algebraic and must hold anywhere.
    post.b_star.array() *= 1.17;
    post.beta_star.array() *= 0.83;
    post.alpha_star.array() += 0.31;

    const double direct =
        nifv::LatentMogBound(model, post, stats, RespEntropy(resp));
    const double assembled = BoundByTermAssembly(model, post, resp, rows);
    CHECK(Close(direct, assembled, 1e-9, 1e-9));
  }
}

TEST_CASE("alternating inference increases the bound every sweep") {
  std::mt19937_64 rng(605);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 3, d = 2;
    nifv::LatentMogModel model = RandomModel(&rng, k, d);
    Eigen::MatrixXd rows = RandomRows(&rng, 30, d);
    rows.col(0).array() += trial % 3 - 1;
    nifv::LatentMogPosterior post =
        nifv::InferLatentMog(model, rows, 1e-10, 60);
    REQUIRE(post.bound_trace.size() >= 2);
    for (std::size_t i = 1; i < post.bound_trace.size(); ++i) {
      const double prev = post.bound_trace[i - 1];
      CHECK(post.bound_trace[i] >=
            prev - 1e-9 * std::max(1.0, std::abs(prev)));
    }
  }
}

TEST_CASE("alternating inference converges and returns responsibilities") {
  std::mt19937_64 rng(606);
  nifv::LatentMogModel model = RandomModel(&rng, 2, 2);
  Eigen::MatrixXd rows = RandomRows(&rng, 40, 2);
  Eigen::MatrixXd resp;
  nifv::LatentMogPosterior post =
      nifv::InferLatentMog(model, rows, 1e-8, 200, &resp);
  CHECK(post.converged);
  REQUIRE(resp.rows() == 40);
  REQUIRE(resp.cols() == 2);
  for (int i = 0; i < resp.rows(); ++i) {
    CHECK(std::abs(resp.row(i).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("empty image leaves the posterior at the prior") {
  std::mt19937_64 rng(607);
  nifv::LatentMogModel model = RandomModel(&rng, 3, 2);
  Eigen::MatrixXd rows(0, 2);
  nifv::LatentMogPosterior post = nifv::InferLatentMog(model, rows);
  CHECK((post.alpha_star - model.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK((post.m_star - model.m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((post.b_star - model.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(post.bound) <= 1e-14);
  Eigen::VectorXd score = nifv::LatentMogFisherScore(model, post);
  CHECK(score.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("independent-mixture gradient matches finite differences") {
  std::mt19937_64 rng(608);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 3, d = 2;
    nifv::GaussianMixture gmm;
    gmm.weights = RandomSimplex(rng, k, 5.0);
    gmm.means = Eigen::MatrixXd(k, d);
    gmm.variances = Eigen::MatrixXd(k, d);
    for (int c = 0; c < k; ++c) {
      gmm.means.row(c) = RandomRows(&rng, 1, d);
      gmm.variances.row(c) = RandomPositive(rng, d, 0.5, 2.0).transpose();
    }
    Eigen::MatrixXd rows = RandomRows(&rng, 15, d);
    nifv::SufficientStats stats =
        nifv::AccumulateStats(nifv::Posteriors(gmm, rows), rows);
    Eigen::VectorXd score = nifv::MogFisherScore(gmm, stats);

    const double h = 1e-5;
    auto loglik = [&](const nifv::GaussianMixture& g) {
      return nifv::LogLikelihoodRows(g, rows).sum();
    };
    // Mixing weights through their log parameterization.
    for (int c = 0; c < k; ++c) {
      auto weights_at = [&](double delta) {
        Eigen::VectorXd logits = gmm.weights.array().log();
        logits[c] += delta;
        logits.array() -= logits.maxCoeff();
        Eigen::VectorXd w = logits.array().exp();
        return Eigen::VectorXd(w / w.sum());
      };
      nifv::GaussianMixture up = gmm, dn = gmm;
      up.weights = weights_at(h);
      dn.weights = weights_at(-h);
      CHECK(Close(score[c], (loglik(up) - loglik(dn)) / (2 * h), 1e-6, 1e-8));
    }
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < d; ++j) {
        const int idx = c * d + j;
        nifv::GaussianMixture up = gmm, dn = gmm;
        up.means(c, j) += h;
        dn.means(c, j) -= h;
        CHECK(Close(score[k + idx], (loglik(up) - loglik(dn)) / (2 * h),
                    1e-6, 1e-8));
        // Precision parameterization of the spread block.
        const double lam = 1.0 / gmm.variances(c, j);
        up = gmm; dn = gmm;
        up.variances(c, j) = 1.0 / (lam + h);
        dn.variances(c, j) = 1.0 / (lam - h);
        CHECK(Close(score[k + k * d + idx],
                    (loglik(up) - loglik(dn)) / (2 * h), 1e-6, 1e-8));
      }
    }
  }
}

TEST_CASE("prior initialization from per-image statistics") {
  std::mt19937_64 rng(609);
  std::vector<nifv::SufficientStats> stats =
      SyntheticImageStats(&rng, 40, false);
  nifv::LatentMogModel model = nifv::InitLatentMog(stats);
  nifv::ValidateLatentMog(model);

  // Locations recover the component centers.
  CHECK(std::abs(model.m(0, 0) - (-2.0)) <= 0.5);
  CHECK(std::abs(model.m(0, 1) - 0.0) <= 0.5);
  CHECK(std::abs(model.m(1, 0) - 3.0) <= 0.5);
  CHECK(std::abs(model.m(1, 1) - 1.0) <= 0.5);
  // Expected precision a/b recovers the unit within-image precision.
  for (int c = 0; c < 2; ++c) {
    for (int j = 0; j < 2; ++j) {
      const double mean_precision = model.a(c, j) / model.b(c, j);
      CHECK(mean_precision >= 1.0 / 3.0);
      CHECK(mean_precision <= 3.0);
    }
  }
  CHECK((model.beta.array() > 0.0).all());
  CHECK((model.beta.array() <= 1e8).all());
}

TEST_CASE("initialization falls back to pooled moments when a component "
          "never fires") {
  std::mt19937_64 rng(610);
  std::vector<nifv::SufficientStats> stats =
      SyntheticImageStats(&rng, 10, true);
  nifv::LatentMogModel model = nifv::InitLatentMog(stats);
  // The silent component gets neutral scale and shape and the pooled
  // location.
  CHECK(model.a(1, 0) == 1.0);
  CHECK(model.a(1, 1) == 1.0);
  CHECK(model.beta(1, 0) == 1.0);
  CHECK(std::abs(model.m(1, 0) - (-2.0)) <= 0.5);
  CHECK(model.b(1, 0) > 0.0);
}

TEST_CASE("initialization rejects malformed input") {
  std::mt19937_64 rng(611);
  std::vector<nifv::SufficientStats> one =
      SyntheticImageStats(&rng, 1, false);
  CHECK_THROWS_AS(nifv::InitLatentMog(one), std::invalid_argument);

  std::vector<nifv::SufficientStats> stats =
      SyntheticImageStats(&rng, 5, false);
  nifv::LatentMogInitOptions opts;
  opts.trunc_factor = 0.0;
  CHECK_THROWS_AS(nifv::InitLatentMog(stats, opts), std::invalid_argument);

  stats[2].s0[0] = -1.0;
  CHECK_THROWS_AS(nifv::InitLatentMog(stats), std::invalid_argument);
}

TEST_CASE("prior training increases the summed bound monotonically") {
  std::mt19937_64 rng(612);
  std::vector<nifv::SufficientStats> stats =
      SyntheticImageStats(&rng, 30, false);
  nifv::LatentMogModel init = nifv::InitLatentMog(stats);

  nifv::LatentMogTrainOptions opts;
  opts.max_iter = 30;
  opts.tol = 1e-12;
  nifv::LatentMogTrainInfo info;
  nifv::LatentMogModel trained =
      nifv::TrainLatentMog(init, stats, opts, &info);
  nifv::ValidateLatentMog(trained);

  REQUIRE(info.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < info.objective_trace.size(); ++i) {
    const double prev = info.objective_trace[i - 1];
    CHECK(info.objective_trace[i] >=
          prev - 1e-9 * std::max(1.0, std::abs(prev)));
  }
  CHECK(info.objective_trace.back() > info.objective_trace.front());
}

TEST_CASE("prior training is deterministic across thread counts") {
  std::mt19937_64 rng(613);
  std::vector<nifv::SufficientStats> stats =
      SyntheticImageStats(&rng, 25, false);
  nifv::LatentMogModel init = nifv::InitLatentMog(stats);

  nifv::LatentMogTrainOptions opts;
  opts.max_iter = 15;
  opts.tol = 0.0;
  nifv::LatentMogTrainInfo info1, info4;
  opts.threads = 1;
  nifv::LatentMogModel m1 = nifv::TrainLatentMog(init, stats, opts, &info1);
  opts.threads = 4;
  nifv::LatentMogModel m4 = nifv::TrainLatentMog(init, stats, opts, &info4);

  REQUIRE(info1.objective_trace.size() == info4.objective_trace.size());
  for (std::size_t i = 0; i < info1.objective_trace.size(); ++i) {
    CHECK(info1.objective_trace[i] == info4.objective_trace[i]);
  }
  CHECK((m1.alpha - m4.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.m - m4.m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.beta - m4.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.a - m4.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.b - m4.b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("latent mixture rejects malformed input") {
  std::mt19937_64 rng(614);
  nifv::LatentMogModel model = RandomModel(&rng, 2, 3);
  nifv::SufficientStats stats;
  stats.s0 = Eigen::VectorXd::Ones(2);
  stats.s1 = Eigen::MatrixXd::Zero(2, 3);
  stats.s2 = Eigen::MatrixXd::Ones(2, 3);

  nifv::SufficientStats bad = stats;
  bad.s0[0] = -0.5;
  CHECK_THROWS_AS(nifv::PosteriorFromStats(model, bad),
                  std::invalid_argument);
  bad = stats;
  bad.s1 = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(nifv::PosteriorFromStats(model, bad),
                  std::invalid_argument);

  nifv::LatentMogModel broken = model;
  broken.beta(0, 0) = 0.0;
  CHECK_THROWS_AS(nifv::ValidateLatentMog(broken), std::invalid_argument);
  broken = model;
  broken.alpha[1] = -1.0;
  CHECK_THROWS_AS(nifv::ValidateLatentMog(broken), std::invalid_argument);

  CHECK_THROWS_AS(nifv::InferLatentMog(model, Eigen::MatrixXd::Zero(5, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      nifv::TrainLatentMog(model, std::vector<nifv::SufficientStats>{}),
      std::invalid_argument);
}
