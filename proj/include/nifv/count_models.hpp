// include/nifv/count_models.hpp

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

#ifndef NIFV_COUNT_MODELS_HPP_
#define NIFV_COUNT_MODELS_HPP_

#include <Eigen/Dense>
#include <vector>

namespace nifv {

// Multinomial word model, parameterized in log space so gradients live in an
// unconstrained coordinate system.
struct MultinomialModel {
  Eigen::VectorXd gamma;  // K log-space parameters
  Eigen::VectorXd Probs() const;  // softmax(gamma)
};

// Maximum-likelihood multinomial over pooled count rows. Probabilities are
// floored at 1e-12 (then renormalized) to keep gamma finite.
MultinomialModel FitMultinomial(const Eigen::MatrixXd& count_rows);

// d/d gamma_k of the multinomial log-likelihood: n_k - N * pi_k.
Eigen::VectorXd BowFisherScore(const MultinomialModel& model,
                               const Eigen::VectorXd& counts);

// Dirichlet compound multinomial over count vectors.
struct PolyaModel {
  Eigen::VectorXd alpha;  // K, strictly positive
};

// ln Gamma(a.) - ln Gamma(a. + N) + sum_k [ln Gamma(a_k + n_k) - ln Gamma(a_k)]
// Accepts fractional (soft) counts; zero counts give exactly 0.
double PolyaLogLikelihood(const PolyaModel& model,
                          const Eigen::VectorXd& counts);

// d/d alpha_k of PolyaLogLikelihood:
// psi(a_k + n_k) - psi(a. + N) - psi(a_k) + psi(a.)
Eigen::VectorXd PolyaFisherScore(const PolyaModel& model,
                                 const Eigen::VectorXd& counts);

// Moment matching on weighted simplex rows. The precision solves the
// first-coordinate identity s = (m1 - E[p1^2]) / (E[p1^2] - m1^2) and is
// clamped to [1e-3, 1e6]; zero cross-row variance clamps at 1e6. Components
// are floored at 1e-6 to keep the model strictly positive.
PolyaModel FitDirichletMomentMatch(const Eigen::MatrixXd& proportions,
                                   const Eigen::VectorXd& weights);

// psi(alpha_k + n) for n = 0..n_max, min-max rescaled to [0,1] over the
// emitted range. Requires n_max >= 1.
std::vector<double> TransferCurve(const PolyaModel& model, int component,
                                  int n_max);

}  // namespace nifv

#endif  // NIFV_COUNT_MODELS_HPP_
