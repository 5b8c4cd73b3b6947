// src/count_models.cpp

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

#include "nifv/count_models.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "nifv/specfun.hpp"

namespace nifv {

namespace {

constexpr double kPrecisionMin = 1e-3;
constexpr double kPrecisionMax = 1e6;
constexpr double kAlphaFloor = 1e-6;

void CheckCounts(const Eigen::VectorXd& counts, Eigen::Index k) {
  if (counts.size() != k)
    throw std::invalid_argument("counts: dimension mismatch");
  if (!counts.allFinite() || (counts.array() < 0.0).any())
    throw std::invalid_argument("counts: entries must be finite and >= 0");
}

void CheckAlpha(const Eigen::VectorXd& alpha) {
  if (alpha.size() < 1)
    throw std::invalid_argument("alpha: empty");
  if (!alpha.allFinite() || (alpha.array() <= 0.0).any())
    throw std::invalid_argument("alpha: entries must be finite and positive");
}

}  // namespace

Eigen::VectorXd MultinomialModel::Probs() const {
  const double mx = gamma.maxCoeff();
  Eigen::ArrayXd e = (gamma.array() - mx).exp();
  return e / e.sum();
}

MultinomialModel FitMultinomial(const Eigen::MatrixXd& count_rows) {
  if (count_rows.rows() < 1 || count_rows.cols() < 1)
    throw std::invalid_argument("FitMultinomial: empty input");
  if (!count_rows.allFinite() || (count_rows.array() < 0.0).any())
    throw std::invalid_argument("FitMultinomial: counts must be >= 0");
  Eigen::VectorXd total = count_rows.colwise().sum();
  const double mass = total.sum();
  if (mass <= 0.0)
    throw std::invalid_argument("FitMultinomial: all counts are zero");
  Eigen::ArrayXd p = (total / mass).array().max(1e-12);
  p /= p.sum();
  MultinomialModel model;
  model.gamma = p.log().matrix();
  return model;
}

Eigen::VectorXd BowFisherScore(const MultinomialModel& model,
                               const Eigen::VectorXd& counts) {
  CheckCounts(counts, model.gamma.size());
  const double n = counts.sum();
  return counts - n * model.Probs();
}

double PolyaLogLikelihood(const PolyaModel& model,
                          const Eigen::VectorXd& counts) {
  CheckAlpha(model.alpha);
  CheckCounts(counts, model.alpha.size());
  const double ahat = model.alpha.sum();
  const double n = counts.sum();
  double ll = LogGamma(ahat) - LogGamma(ahat + n);
  for (Eigen::Index k = 0; k < counts.size(); ++k)
    ll += LogGamma(model.alpha[k] + counts[k]) - LogGamma(model.alpha[k]);
  return ll;
}

Eigen::VectorXd PolyaFisherScore(const PolyaModel& model,
                                 const Eigen::VectorXd& counts) {
  CheckAlpha(model.alpha);
  CheckCounts(counts, model.alpha.size());
  const double ahat = model.alpha.sum();
  const double n = counts.sum();
  const double shared = Digamma(ahat) - Digamma(ahat + n);
  Eigen::VectorXd score(counts.size());
  for (Eigen::Index k = 0; k < counts.size(); ++k)
    score[k] = Digamma(model.alpha[k] + counts[k]) - Digamma(model.alpha[k]) +
               shared;
  return score;
}

PolyaModel FitDirichletMomentMatch(const Eigen::MatrixXd& proportions,
                                   const Eigen::VectorXd& weights) {
  const Eigen::Index m = proportions.rows();
  const Eigen::Index k = proportions.cols();
  if (m < 2 || k < 2)
    throw std::invalid_argument(
        "FitDirichletMomentMatch: need >= 2 rows and >= 2 columns");
  if (weights.size() != m)
    throw std::invalid_argument("FitDirichletMomentMatch: weights size");
  if (!weights.allFinite() || (weights.array() < 0.0).any() ||
      weights.sum() <= 0.0)
    throw std::invalid_argument(
        "FitDirichletMomentMatch: weights must be >= 0 with positive sum");
  if (!proportions.allFinite() || (proportions.array() < -1e-12).any())
    throw std::invalid_argument(
        "FitDirichletMomentMatch: proportions must be finite and >= 0");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(proportions.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument(
          "FitDirichletMomentMatch: row " + std::to_string(i) +
          " does not lie on the simplex");
  }

  const double wsum = weights.sum();
  Eigen::VectorXd mean = (proportions.transpose() * weights) / wsum;
  const double m1 = mean[0];
  const double ex2 =
      proportions.col(0).array().square().matrix().dot(weights) / wsum;

  const double numer = m1 - ex2;
  const double denom = ex2 - m1 * m1;
  double s;
  if (denom <= 1e-14 || numer <= 0.0) {
    s = kPrecisionMax;  // no usable cross-row variance
    std::cerr << "warning: FitDirichletMomentMatch precision clamped at "
              << kPrecisionMax << "\n";
  } else {
    s = numer / denom;
    s = std::min(std::max(s, kPrecisionMin), kPrecisionMax);
  }

  PolyaModel model;
  model.alpha = (s * mean.array()).max(kAlphaFloor).matrix();
  return model;
}

std::vector<double> TransferCurve(const PolyaModel& model, int component,
                                  int n_max) {
  CheckAlpha(model.alpha);
  if (component < 0 || component >= model.alpha.size())
    throw std::invalid_argument("TransferCurve: component out of range");
  if (n_max < 1) throw std::invalid_argument("TransferCurve: n_max must be >= 1");
  const double a = model.alpha[component];
  std::vector<double> raw(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) raw[n] = Digamma(a + n);
  const double lo = raw.front();
  const double hi = raw.back();  // psi is strictly increasing, hi > lo
  for (double& v : raw) v = (v - lo) / (hi - lo);
  return raw;
}

}  // namespace nifv
