// include/nifv/latent_mog.hpp

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

#ifndef NIFV_LATENT_MOG_HPP_
#define NIFV_LATENT_MOG_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nifv/gmm.hpp"

namespace nifv {

// Mixture of diagonal Gaussians with image-level latent parameters: a
// Dirichlet prior on the mixing weights and an independent Normal-Gamma
// prior on every (component, dimension) mean-precision pair.
struct LatentMogModel {
  Eigen::VectorXd alpha;  // K, positive
  Eigen::MatrixXd m;      // K x D, location of the mean prior
  Eigen::MatrixXd beta;   // K x D, positive mean-precision scale
  Eigen::MatrixXd a;      // K x D, positive Gamma shape
  Eigen::MatrixXd b;      // K x D, positive Gamma rate
  int Components() const { return static_cast<int>(alpha.size()); }
  int Dim() const { return static_cast<int>(m.cols()); }
};

void ValidateLatentMog(const LatentMogModel& model);

struct LatentMogPosterior {
  Eigen::VectorXd alpha_star;  // K
  Eigen::MatrixXd m_star;      // K x D
  Eigen::MatrixXd beta_star;   // K x D
  Eigen::MatrixXd a_star;      // K x D
  Eigen::MatrixXd b_star;      // K x D
  double bound = 0.0;
  bool converged = false;
  std::vector<double> bound_trace;
};

// Closed-form posterior update from soft-assignment statistics. The
// scale and shape updates depend on the statistics only through the
// zeroth-order row; location and rate use the higher orders too.
LatentMogPosterior PosteriorFromStats(const LatentMogModel& model,
                                      const SufficientStats& stats);

// Variational bound at a fixed posterior. Statistics cannot carry the
// assignment entropy, so the caller supplies it when it is known;
// gradients and monotonicity checks are unaffected by the constant.
double LatentMogBound(const LatentMogModel& model,
                      const LatentMogPosterior& post,
                      const SufficientStats& stats,
                      double assignment_entropy = 0.0);

// Alternates closed-form posterior updates with responsibility updates on
// raw descriptor rows. Stops on relative bound change <= tol. The final
// responsibilities are written to resp_out when it is non-null.
LatentMogPosterior InferLatentMog(const LatentMogModel& model,
                                  const Eigen::MatrixXd& rows,
                                  double tol = 1e-7, int max_iter = 100,
                                  Eigen::MatrixXd* resp_out = nullptr);

// Gradient of the bound with the posterior held fixed.
// Layout: [alpha (K); m rows (K*D); beta rows; a rows; b rows].
Eigen::VectorXd LatentMogFisherScore(const LatentMogModel& model,
                                     const LatentMogPosterior& post);

// Gradient of the independent-mixture log-likelihood, computed from
// statistics accumulated under the model's own posteriors.
// Layout: [log-weights (K); means (K*D); precisions (K*D)].
Eigen::VectorXd MogFisherScore(const GaussianMixture& gmm,
                               const SufficientStats& stats);

struct LatentMogInitOptions {
  // Per-image precision estimates are capped at this multiple of the
  // pooled precision before moment matching.
  double trunc_factor = 10.0;
};

// Moment-matched priors from per-image statistics: Dirichlet fit on the
// normalized zeroth-order rows, Gamma fit on truncated per-image
// precisions, and a mean prior matched to the spread of per-image means.
LatentMogModel InitLatentMog(const std::vector<SufficientStats>& stats,
                             const LatentMogInitOptions& opts = {});

struct LatentMogTrainOptions {
  int max_iter = 50;
  double tol = 1e-7;  // relative objective change
  int max_line_search = 40;
  int threads = 0;
};

struct LatentMogTrainInfo {
  std::vector<double> objective_trace;  // sum of per-image bounds
  bool converged = false;
};

// Alternates closed-form posterior updates with gradient steps on the
// priors (log scale for the positive ones). Steps are backtracked until
// the summed bound does not decrease, so the trace is monotone.
LatentMogModel TrainLatentMog(const LatentMogModel& init,
                              const std::vector<SufficientStats>& stats,
                              const LatentMogTrainOptions& opts = {},
                              LatentMogTrainInfo* info = nullptr);

}  // namespace nifv

#endif  // NIFV_LATENT_MOG_HPP_
