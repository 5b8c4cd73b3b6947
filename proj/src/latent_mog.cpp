// src/latent_mog.cpp

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

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "nifv/count_models.hpp"
#include "nifv/parallel.hpp"
#include "nifv/specfun.hpp"

namespace nifv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kActiveMass = 1e-3;
constexpr double kBetaCap = 1e8;
constexpr double kGammaShapeCap = 1e6;
constexpr double kHyperFloor = 1e-6;
constexpr int kImageBlock = 1024;

void CheckStatsShape(const SufficientStats& stats, int k, int d) {
  if (stats.s0.size() != k || stats.s1.rows() != k || stats.s1.cols() != d ||
      stats.s2.rows() != k || stats.s2.cols() != d) {
    throw std::invalid_argument("statistics shape does not match model");
  }
  for (int c = 0; c < k; ++c) {
    if (!std::isfinite(stats.s0[c]) || stats.s0[c] < 0.0) {
      throw std::invalid_argument("zeroth-order statistics must be finite "
                                  "and nonnegative");
    }
    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(stats.s1(c, j)) || !std::isfinite(stats.s2(c, j))) {
        throw std::invalid_argument("statistics must be finite");
      }
    }
  }
}

void CheckPosteriorShape(const LatentMogPosterior& post, int k, int d) {
  if (post.alpha_star.size() != k || post.m_star.rows() != k ||
      post.m_star.cols() != d || post.beta_star.rows() != k ||
      post.beta_star.cols() != d || post.a_star.rows() != k ||
      post.a_star.cols() != d || post.b_star.rows() != k ||
      post.b_star.cols() != d) {
    throw std::invalid_argument("posterior shape does not match model");
  }
}

// KL(Gamma(a1,b1) || Gamma(a0,b0)).
double GammaKl(double a1, double b1, double a0, double b0) {
  return (a1 - a0) * Digamma(a1) - LogGamma(a1) + LogGamma(a0) +
         a0 * (std::log(b1) - std::log(b0)) + a1 * (b0 - b1) / b1;
}

double DirichletKl(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double a_sum = a.sum();
  const double b_sum = b.sum();
  double kl = LogGamma(a_sum) - LogGamma(b_sum);
  const double psi_sum = Digamma(a_sum);
  for (int i = 0; i < a.size(); ++i) {
    kl += LogGamma(b[i]) - LogGamma(a[i]);
    kl += (a[i] - b[i]) * (Digamma(a[i]) - psi_sum);
  }
  return kl;
}

// Hyper-dependent part of the summed bound: the expected log prior
// density under every image posterior, reduced to moment aggregates so a
// line-search trial costs O(K*D).
struct PriorAggregates {
  double images = 0.0;
  Eigen::VectorXd mean_log_pi;   // K, summed E[ln pi_k]
  Eigen::MatrixXd mean_log_lam;  // K x D, summed E[ln lambda]
  Eigen::MatrixXd mean_lam;      // K x D, summed E[lambda]
  Eigen::MatrixXd mean_lam_m;    // K x D, summed E[lambda]*m_star
  Eigen::MatrixXd mean_lam_m2;   // K x D, summed E[lambda]*m_star^2
  Eigen::MatrixXd inv_beta;      // K x D, summed 1/beta_star
};

PriorAggregates ZeroAggregates(int k, int d) {
  PriorAggregates agg;
  agg.mean_log_pi = Eigen::VectorXd::Zero(k);
  agg.mean_log_lam = Eigen::MatrixXd::Zero(k, d);
  agg.mean_lam = Eigen::MatrixXd::Zero(k, d);
  agg.mean_lam_m = Eigen::MatrixXd::Zero(k, d);
  agg.mean_lam_m2 = Eigen::MatrixXd::Zero(k, d);
  agg.inv_beta = Eigen::MatrixXd::Zero(k, d);
  return agg;
}

void AccumulateAggregates(const LatentMogPosterior& post,
                          PriorAggregates* agg) {
  const int k = static_cast<int>(post.alpha_star.size());
  const int d = static_cast<int>(post.m_star.cols());
  agg->images += 1.0;
  const double psi_sum = Digamma(post.alpha_star.sum());
  for (int c = 0; c < k; ++c) {
    agg->mean_log_pi[c] += Digamma(post.alpha_star[c]) - psi_sum;
    for (int j = 0; j < d; ++j) {
      const double mean_lam = post.a_star(c, j) / post.b_star(c, j);
      agg->mean_log_lam(c, j) +=
          Digamma(post.a_star(c, j)) - std::log(post.b_star(c, j));
      agg->mean_lam(c, j) += mean_lam;
      agg->mean_lam_m(c, j) += mean_lam * post.m_star(c, j);
      agg->mean_lam_m2(c, j) +=
          mean_lam * post.m_star(c, j) * post.m_star(c, j);
      agg->inv_beta(c, j) += 1.0 / post.beta_star(c, j);
    }
  }
}

void MergeAggregates(const PriorAggregates& other, PriorAggregates* agg) {
  agg->images += other.images;
  agg->mean_log_pi += other.mean_log_pi;
  agg->mean_log_lam += other.mean_log_lam;
  agg->mean_lam += other.mean_lam;
  agg->mean_lam_m += other.mean_lam_m;
  agg->mean_lam_m2 += other.mean_lam_m2;
  agg->inv_beta += other.inv_beta;
}

double ExpectedLogPrior(const LatentMogModel& model,
                        const PriorAggregates& agg) {
  const int k = model.Components();
  const int d = model.Dim();
  const double images = agg.images;

  double total = images * LogGamma(model.alpha.sum());
  for (int c = 0; c < k; ++c) {
    total -= images * LogGamma(model.alpha[c]);
    total += (model.alpha[c] - 1.0) * agg.mean_log_pi[c];
  }
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const double beta = model.beta(c, j);
      const double a = model.a(c, j);
      const double b = model.b(c, j);
      const double mloc = model.m(c, j);
      total += images * (0.5 * std::log(beta) - 0.5 * kLog2Pi +
                         a * std::log(b) - LogGamma(a));
      total += (a - 0.5) * agg.mean_log_lam(c, j);
      total -= b * agg.mean_lam(c, j);
      const double quad = mloc * mloc * agg.mean_lam(c, j) -
                          2.0 * mloc * agg.mean_lam_m(c, j) +
                          agg.mean_lam_m2(c, j) + agg.inv_beta(c, j);
      total -= 0.5 * beta * quad;
    }
  }
  return total;
}

// Gradient of ExpectedLogPrior in the search coordinates: log scale for
// the positive hypers, plain for the location.
Eigen::VectorXd PriorGradient(const LatentMogModel& model,
                              const PriorAggregates& agg) {
  const int k = model.Components();
  const int d = model.Dim();
  const double images = agg.images;
  Eigen::VectorXd grad(k + 4 * k * d);

  const double psi_hat = Digamma(model.alpha.sum());
  for (int c = 0; c < k; ++c) {
    const double g =
        agg.mean_log_pi[c] - images * (Digamma(model.alpha[c]) - psi_hat);
    grad[c] = model.alpha[c] * g;
  }
  const int m_off = k;
  const int beta_off = k + k * d;
  const int a_off = k + 2 * k * d;
  const int b_off = k + 3 * k * d;
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const int idx = c * d + j;
      const double beta = model.beta(c, j);
      const double a = model.a(c, j);
      const double b = model.b(c, j);
      const double mloc = model.m(c, j);
      const double quad = mloc * mloc * agg.mean_lam(c, j) -
                          2.0 * mloc * agg.mean_lam_m(c, j) +
                          agg.mean_lam_m2(c, j) + agg.inv_beta(c, j);
      grad[m_off + idx] = beta * (agg.mean_lam_m(c, j) -
                                  mloc * agg.mean_lam(c, j));
      grad[beta_off + idx] = beta * (0.5 * images / beta - 0.5 * quad);
      grad[a_off + idx] =
          a * (images * (std::log(b) - Digamma(a)) + agg.mean_log_lam(c, j));
      grad[b_off + idx] = b * (images * a / b - agg.mean_lam(c, j));
    }
  }
  return grad;
}

LatentMogModel ApplyStep(const LatentMogModel& model,
                         const Eigen::VectorXd& direction, double step) {
  const int k = model.Components();
  const int d = model.Dim();
  LatentMogModel out = model;
  auto bump = [&](double value) {
    return std::clamp(step * value, -50.0, 50.0);
  };
  // Positive hypers keep a floor so trial candidates stay inside the
  // digamma/log-gamma domain; the line search still rejects them by value.
  const double floor = 1e-7;
  for (int c = 0; c < k; ++c) {
    out.alpha[c] = std::max(model.alpha[c] * std::exp(bump(direction[c])), floor);
  }
  const int m_off = k;
  const int beta_off = k + k * d;
  const int a_off = k + 2 * k * d;
  const int b_off = k + 3 * k * d;
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const int idx = c * d + j;
      out.m(c, j) = model.m(c, j) + step * direction[m_off + idx];
      out.beta(c, j) =
          std::max(model.beta(c, j) * std::exp(bump(direction[beta_off + idx])), floor);
      out.a(c, j) =
          std::max(model.a(c, j) * std::exp(bump(direction[a_off + idx])), floor);
      out.b(c, j) =
          std::max(model.b(c, j) * std::exp(bump(direction[b_off + idx])), floor);
    }
  }
  return out;
}

bool FiniteModel(const LatentMogModel& model) {
  auto ok = [](const Eigen::MatrixXd& mat) {
    for (int r = 0; r < mat.rows(); ++r) {
      for (int c = 0; c < mat.cols(); ++c) {
        if (!std::isfinite(mat(r, c))) return false;
      }
    }
    return true;
  };
  for (int c = 0; c < model.alpha.size(); ++c) {
    if (!std::isfinite(model.alpha[c]) || model.alpha[c] <= 0.0) return false;
  }
  return ok(model.m) && ok(model.beta) && ok(model.a) && ok(model.b) &&
         (model.beta.array() > 0.0).all() && (model.a.array() > 0.0).all() &&
         (model.b.array() > 0.0).all();
}

}  // namespace

void ValidateLatentMog(const LatentMogModel& model) {
  const int k = model.Components();
  const int d = model.Dim();
  if (k < 1 || d < 1) {
    throw std::invalid_argument("model needs >=1 components and dimensions");
  }
  if (model.m.rows() != k || model.beta.rows() != k || model.beta.cols() != d ||
      model.a.rows() != k || model.a.cols() != d || model.b.rows() != k ||
      model.b.cols() != d) {
    throw std::invalid_argument("prior parameter shapes are inconsistent");
  }
  for (int c = 0; c < k; ++c) {
    if (!std::isfinite(model.alpha[c]) || model.alpha[c] <= 0.0) {
      throw std::invalid_argument("alpha entries must be finite and positive");
    }
    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(model.m(c, j))) {
        throw std::invalid_argument("m entries must be finite");
      }
      if (!std::isfinite(model.beta(c, j)) || model.beta(c, j) <= 0.0 ||
          !std::isfinite(model.a(c, j)) || model.a(c, j) <= 0.0 ||
          !std::isfinite(model.b(c, j)) || model.b(c, j) <= 0.0) {
        throw std::invalid_argument(
            "beta, a, b entries must be finite and positive");
      }
    }
  }
}

LatentMogPosterior PosteriorFromStats(const LatentMogModel& model,
                                      const SufficientStats& stats) {
  ValidateLatentMog(model);
  const int k = model.Components();
  const int d = model.Dim();
  CheckStatsShape(stats, k, d);

  LatentMogPosterior post;
  post.alpha_star = model.alpha + stats.s0;
  post.beta_star.resize(k, d);
  post.m_star.resize(k, d);
  post.a_star.resize(k, d);
  post.b_star.resize(k, d);
  for (int c = 0; c < k; ++c) {
    const double s0 = stats.s0[c];
    for (int j = 0; j < d; ++j) {
      const double beta = model.beta(c, j);
      const double beta_star = beta + s0;
      post.beta_star(c, j) = beta_star;
      post.a_star(c, j) = model.a(c, j) + 0.5 * s0;
      if (s0 > 0.0) {
        post.m_star(c, j) =
            (stats.s1(c, j) + beta * model.m(c, j)) / beta_star;
        const double mean = stats.s1(c, j) / s0;
        const double within =
            std::max(0.0, stats.s2(c, j) / s0 - mean * mean);
        const double shift = mean - model.m(c, j);
        post.b_star(c, j) = model.b(c, j) + 0.5 * s0 * within +
                            0.5 * (beta * s0 / beta_star) * shift * shift;
      } else {
        post.m_star(c, j) = model.m(c, j);
        post.b_star(c, j) = model.b(c, j);
      }
    }
  }
  return post;
}

double LatentMogBound(const LatentMogModel& model,
                      const LatentMogPosterior& post,
                      const SufficientStats& stats,
                      double assignment_entropy) {
  ValidateLatentMog(model);
  const int k = model.Components();
  const int d = model.Dim();
  CheckStatsShape(stats, k, d);
  CheckPosteriorShape(post, k, d);

  double bound = -DirichletKl(post.alpha_star, model.alpha);
  const double psi_sum = Digamma(post.alpha_star.sum());
  for (int c = 0; c < k; ++c) {
    const double s0 = stats.s0[c];
    bound += s0 * (Digamma(post.alpha_star[c]) - psi_sum);
    for (int j = 0; j < d; ++j) {
      const double beta_star = post.beta_star(c, j);
      const double a_star = post.a_star(c, j);
      const double b_star = post.b_star(c, j);
      const double m_star = post.m_star(c, j);
      const double mean_lam = a_star / b_star;
      const double mean_log_lam = Digamma(a_star) - std::log(b_star);

      double kl = GammaKl(a_star, b_star, model.a(c, j), model.b(c, j));
      const double shift = model.m(c, j) - m_star;
      kl += 0.5 * (std::log(beta_star / model.beta(c, j)) - 1.0 +
                   model.beta(c, j) / beta_star +
                   model.beta(c, j) * mean_lam * shift * shift);
      bound -= kl;

      const double quad = stats.s2(c, j) - 2.0 * m_star * stats.s1(c, j) +
                          s0 * m_star * m_star;
      bound += 0.5 * s0 * (mean_log_lam - kLog2Pi) -
               0.5 * (mean_lam * quad + s0 / beta_star);
    }
  }
  return bound + assignment_entropy;
}

LatentMogPosterior InferLatentMog(const LatentMogModel& model,
                                  const Eigen::MatrixXd& rows, double tol,
                                  int max_iter, Eigen::MatrixXd* resp_out) {
  ValidateLatentMog(model);
  const int k = model.Components();
  const int d = model.Dim();
  if (rows.cols() != d) {
    throw std::invalid_argument("descriptor width does not match model");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  const int n = static_cast<int>(rows.rows());

  if (n == 0) {
    SufficientStats empty;
    empty.s0 = Eigen::VectorXd::Zero(k);
    empty.s1 = Eigen::MatrixXd::Zero(k, d);
    empty.s2 = Eigen::MatrixXd::Zero(k, d);
    LatentMogPosterior post = PosteriorFromStats(model, empty);
    post.bound = LatentMogBound(model, post, empty, 0.0);
    post.bound_trace.push_back(post.bound);
    post.converged = true;
    if (resp_out != nullptr) resp_out->resize(0, k);
    return post;
  }

  Eigen::MatrixXd resp =
      Eigen::MatrixXd::Constant(n, k, 1.0 / static_cast<double>(k));
  SufficientStats stats = AccumulateStats(resp, rows);
  LatentMogPosterior post;
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    LatentMogPosterior next = PosteriorFromStats(model, stats);
    next.bound_trace = std::move(post.bound_trace);
    post = std::move(next);

    const double psi_sum = Digamma(post.alpha_star.sum());
    Eigen::VectorXd base(k);
    Eigen::MatrixXd mean_lam(k, d), mean_log_lam(k, d);
    for (int c = 0; c < k; ++c) {
      base[c] = Digamma(post.alpha_star[c]) - psi_sum;
      for (int j = 0; j < d; ++j) {
        mean_lam(c, j) = post.a_star(c, j) / post.b_star(c, j);
        mean_log_lam(c, j) =
            Digamma(post.a_star(c, j)) - std::log(post.b_star(c, j));
        base[c] += 0.5 * (mean_log_lam(c, j) - kLog2Pi) -
                   0.5 / post.beta_star(c, j);
      }
    }
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logits(k);
      for (int c = 0; c < k; ++c) {
        double quad = 0.0;
        for (int j = 0; j < d; ++j) {
          const double diff = rows(i, j) - post.m_star(c, j);
          quad += mean_lam(c, j) * diff * diff;
        }
        logits[c] = base[c] - 0.5 * quad;
      }
      const double top = logits.maxCoeff();
      Eigen::VectorXd expd = (logits.array() - top).exp();
      resp.row(i) = (expd / expd.sum()).transpose();
    }

    stats = AccumulateStats(resp, rows);
    double entropy = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c) {
        const double q = resp(i, c);
        if (q > 0.0) entropy -= q * std::log(q);
      }
    }
    post.bound = LatentMogBound(model, post, stats, entropy);
    post.bound_trace.push_back(post.bound);
    const std::size_t steps = post.bound_trace.size();
    if (steps >= 2) {
      const double prev = post.bound_trace[steps - 2];
      if (std::abs(post.bound - prev) <= tol * std::max(1.0, std::abs(prev))) {
        post.converged = true;
        break;
      }
    }
  }
  if (resp_out != nullptr) *resp_out = resp;
  return post;
}

Eigen::VectorXd LatentMogFisherScore(const LatentMogModel& model,
                                     const LatentMogPosterior& post) {
  ValidateLatentMog(model);
  const int k = model.Components();
  const int d = model.Dim();
  CheckPosteriorShape(post, k, d);

  Eigen::VectorXd score(k + 4 * k * d);
  const double psi_shift = Digamma(model.alpha.sum()) -
                           Digamma(post.alpha_star.sum());
  for (int c = 0; c < k; ++c) {
    score[c] = (Digamma(post.alpha_star[c]) - Digamma(model.alpha[c])) +
               psi_shift;
  }
  const int m_off = k;
  const int beta_off = k + k * d;
  const int a_off = k + 2 * k * d;
  const int b_off = k + 3 * k * d;
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const int idx = c * d + j;
      const double mean_lam = post.a_star(c, j) / post.b_star(c, j);
      const double shift = post.m_star(c, j) - model.m(c, j);
      score[m_off + idx] = model.beta(c, j) * mean_lam * shift;
      score[beta_off + idx] =
          0.5 * (1.0 / model.beta(c, j) - mean_lam * shift * shift -
                 1.0 / post.beta_star(c, j));
      score[a_off + idx] =
          (Digamma(post.a_star(c, j)) - Digamma(model.a(c, j))) +
          (std::log(model.b(c, j)) - std::log(post.b_star(c, j)));
      score[b_off + idx] = model.a(c, j) / model.b(c, j) - mean_lam;
    }
  }
  return score;
}

Eigen::VectorXd MogFisherScore(const GaussianMixture& gmm,
                               const SufficientStats& stats) {
  ValidateGmm(gmm);
  const int k = gmm.Components();
  const int d = gmm.Dim();
  CheckStatsShape(stats, k, d);

  const double total = stats.s0.sum();
  Eigen::VectorXd score(k + 2 * k * d);
  for (int c = 0; c < k; ++c) {
    score[c] = stats.s0[c] - total * gmm.weights[c];
  }
  const int mu_off = k;
  const int lam_off = k + k * d;
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) {
      const int idx = c * d + j;
      const double mu = gmm.means(c, j);
      const double var = gmm.variances(c, j);
      score[mu_off + idx] = (stats.s1(c, j) - stats.s0[c] * mu) / var;
      const double quad = stats.s2(c, j) - 2.0 * mu * stats.s1(c, j) +
                          stats.s0[c] * mu * mu;
      score[lam_off + idx] = 0.5 * (stats.s0[c] * var - quad);
    }
  }
  return score;
}

LatentMogModel InitLatentMog(const std::vector<SufficientStats>& stats,
                             const LatentMogInitOptions& opts) {
  if (stats.size() < 2) {
    throw std::invalid_argument("need statistics from at least two images");
  }
  if (opts.trunc_factor <= 0.0) {
    throw std::invalid_argument("trunc_factor must be positive");
  }
  const int k = static_cast<int>(stats[0].s0.size());
  const int d = static_cast<int>(stats[0].s1.cols());
  const int images = static_cast<int>(stats.size());
  for (const SufficientStats& s : stats) CheckStatsShape(s, k, d);

  // Pooled per-dimension moments set the fallback location and the
  // truncation level for per-image precision estimates.
  double pooled_mass = 0.0;
  Eigen::VectorXd pooled_s1 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd pooled_s2 = Eigen::VectorXd::Zero(d);
  for (const SufficientStats& s : stats) {
    pooled_mass += s.s0.sum();
    pooled_s1 += s.s1.colwise().sum().transpose();
    pooled_s2 += s.s2.colwise().sum().transpose();
  }
  if (pooled_mass <= 0.0) {
    throw std::invalid_argument("statistics carry no mass");
  }
  Eigen::VectorXd pooled_mean = pooled_s1 / pooled_mass;
  Eigen::VectorXd pooled_precision(d);
  for (int j = 0; j < d; ++j) {
    const double var = std::max(
        pooled_s2[j] / pooled_mass - pooled_mean[j] * pooled_mean[j], 1e-12);
    pooled_precision[j] = 1.0 / var;
  }

  LatentMogModel model;

  // Mixing prior from the spread of per-image component proportions.
  {
    std::vector<int> rows;
    for (int i = 0; i < images; ++i) {
      if (stats[i].s0.sum() > 0.0) rows.push_back(i);
    }
    if (rows.size() < 2) {
      throw std::invalid_argument("need at least two non-empty images");
    }
    Eigen::MatrixXd props(rows.size(), k);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      props.row(r) =
          (stats[rows[r]].s0 / stats[rows[r]].s0.sum()).transpose();
    }
    model.alpha =
        FitDirichletMomentMatch(props, Eigen::VectorXd::Ones(rows.size()))
            .alpha;
  }

  model.m.resize(k, d);
  model.beta.resize(k, d);
  model.a.resize(k, d);
  model.b.resize(k, d);

  for (int c = 0; c < k; ++c) {
    double mass = 0.0;
    int contributors = 0;
    for (int i = 0; i < images; ++i) {
      mass += stats[i].s0[c];
      if (stats[i].s0[c] > kActiveMass) ++contributors;
    }
    if (mass <= kActiveMass || contributors < 2) {
      std::cerr << "InitLatentMog: component " << c
                << " is inactive; using pooled moments\n";
      for (int j = 0; j < d; ++j) {
        model.m(c, j) = pooled_mean[j];
        model.beta(c, j) = 1.0;
        model.a(c, j) = 1.0;
        model.b(c, j) = 1.0 / pooled_precision[j];
      }
      continue;
    }

    for (int j = 0; j < d; ++j) {
      const double cap = opts.trunc_factor * pooled_precision[j];
      double wsum = 0.0;
      double mean_sum = 0.0, mean_sq_sum = 0.0;
      double prec_sum = 0.0, prec_sq_sum = 0.0;
      for (int i = 0; i < images; ++i) {
        const double w = stats[i].s0[c];
        if (w <= kActiveMass) continue;
        const double mean = stats[i].s1(c, j) / w;
        const double var = stats[i].s2(c, j) / w - mean * mean;
        const double prec = var > 1e-12 ? std::min(1.0 / var, cap) : cap;
        wsum += w;
        mean_sum += w * mean;
        mean_sq_sum += w * mean * mean;
        prec_sum += w * prec;
        prec_sq_sum += w * prec * prec;
      }
      const double mean_loc = mean_sum / wsum;
      const double mean_var =
          std::max(mean_sq_sum / wsum - mean_loc * mean_loc, 0.0);
      const double prec_mean = prec_sum / wsum;
      const double prec_var =
          std::max(prec_sq_sum / wsum - prec_mean * prec_mean, 0.0);

      model.m(c, j) = mean_loc;
      double shape = prec_var > 1e-12 * prec_mean * prec_mean
                         ? prec_mean * prec_mean / prec_var
                         : kGammaShapeCap;
      shape = std::clamp(shape, kHyperFloor, kGammaShapeCap);
      model.a(c, j) = shape;
      model.b(c, j) = std::max(shape / prec_mean, kHyperFloor);
      double beta = mean_var > 1e-12 ? 1.0 / (mean_var * prec_mean) : kBetaCap;
      model.beta(c, j) = std::clamp(beta, kHyperFloor, kBetaCap);
    }
  }
  ValidateLatentMog(model);
  return model;
}

LatentMogModel TrainLatentMog(const LatentMogModel& init,
                              const std::vector<SufficientStats>& stats,
                              const LatentMogTrainOptions& opts,
                              LatentMogTrainInfo* info) {
  ValidateLatentMog(init);
  if (stats.empty()) throw std::invalid_argument("no statistics given");
  const int k = init.Components();
  const int d = init.Dim();
  const int images = static_cast<int>(stats.size());
  for (const SufficientStats& s : stats) CheckStatsShape(s, k, d);
  if (opts.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  const int threads = ResolveThreads(opts.threads);
  LatentMogTrainInfo local_info;
  LatentMogTrainInfo* out = info != nullptr ? info : &local_info;
  out->objective_trace.clear();
  out->converged = false;

  LatentMogModel model = init;
  std::vector<LatentMogPosterior> posts(images);

  struct Phase {
    PriorAggregates agg;
    double objective = 0.0;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    ParallelFor(images, threads, [&](int i) {
      posts[i] = PosteriorFromStats(model, stats[i]);
    });
    Phase phase = BlockedReduce<Phase>(
        images, kImageBlock, threads,
        [&](int lo, int hi) {
          Phase acc;
          acc.agg = ZeroAggregates(k, d);
          for (int i = lo; i < hi; ++i) {
            AccumulateAggregates(posts[i], &acc.agg);
            acc.objective += LatentMogBound(model, posts[i], stats[i], 0.0);
          }
          return acc;
        },
        [&](const Phase& x, const Phase& y) {
          Phase merged = x;
          MergeAggregates(y.agg, &merged.agg);
          merged.objective += y.objective;
          return merged;
        });
    if (phase.agg.mean_log_pi.size() == 0) phase.agg = ZeroAggregates(k, d);

    out->objective_trace.push_back(phase.objective);
    const std::size_t steps = out->objective_trace.size();
    if (steps >= 2) {
      const double prev = out->objective_trace[steps - 2];
      if (std::abs(phase.objective - prev) <=
          opts.tol * std::max(1.0, std::abs(prev))) {
        out->converged = true;
        break;
      }
    }
    if (iter + 1 == opts.max_iter) break;

    // Hyper step: backtracking on the expected log prior, which carries
    // the entire dependence of the summed bound on the hypers.
    const Eigen::VectorXd direction = PriorGradient(model, phase.agg);
    const double current = ExpectedLogPrior(model, phase.agg);
    double step = 1.0;
    bool accepted = false;
    for (int trial = 0; trial < opts.max_line_search; ++trial) {
      LatentMogModel candidate = ApplyStep(model, direction, step);
      if (FiniteModel(candidate)) {
        const double value = ExpectedLogPrior(candidate, phase.agg);
        if (std::isfinite(value) && value >= current) {
          model = candidate;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      out->converged = true;
      break;
    }
  }
  return model;
}

}  // namespace nifv
