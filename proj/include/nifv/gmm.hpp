// include/nifv/gmm.hpp

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

#ifndef NIFV_GMM_HPP_
#define NIFV_GMM_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace nifv {

// Diagonal-covariance Gaussian mixture.
struct GaussianMixture {
  Eigen::VectorXd weights;    // K, positive, sums to 1
  Eigen::MatrixXd means;      // K x D
  Eigen::MatrixXd variances;  // K x D, strictly positive
  int Components() const { return static_cast<int>(weights.size()); }
  int Dim() const { return static_cast<int>(means.cols()); }
};

void ValidateGmm(const GaussianMixture& gmm);

struct GmmTrainOptions {
  int max_iter = 200;
  double tol = 1e-5;  // relative change of the mean per-sample log-likelihood
  int threads = 0;    // 0 = hardware concurrency
  double variance_floor_factor = 1e-4;  // times the global per-dim variance
};

struct GmmTrainInfo {
  std::vector<double> loglik_trace;  // mean per-sample log-likelihood
  std::vector<int> reseed_iters;     // iterations that re-seeded a component
  int iterations = 0;
  bool converged = false;
};

// EM from a k-means++ seeding. Requires samples.rows() >= 10 * k. All
// randomness comes from `seed`; results are bitwise identical for any
// thread count.
GaussianMixture TrainGmm(const Eigen::MatrixXd& samples, int k,
                         std::uint64_t seed, const GmmTrainOptions& opts = {},
                         GmmTrainInfo* info = nullptr);

// ln(weight_k) + ln N(x; mean_k, var_k) for every row and component (N x K).
Eigen::MatrixXd LogJointDensities(const GaussianMixture& gmm,
                                  const Eigen::MatrixXd& rows);

// Row-stochastic posteriors, computed in the log domain with per-row
// max subtraction.
Eigen::MatrixXd Posteriors(const GaussianMixture& gmm,
                           const Eigen::MatrixXd& rows);

// Per-row mixture log density (N vector).
Eigen::VectorXd LogLikelihoodRows(const GaussianMixture& gmm,
                                  const Eigen::MatrixXd& rows);

// Keeps the k_prime largest entries per row, zeroes the rest, renormalizes.
// Ties resolve toward the lower column index. Requires 1 <= k_prime <= K.
Eigen::MatrixXd ClipPosteriors(const Eigen::MatrixXd& resp, int k_prime);

// Zero, first and second order weighted moments of the rows.
struct SufficientStats {
  Eigen::VectorXd s0;  // K
  Eigen::MatrixXd s1;  // K x D
  Eigen::MatrixXd s2;  // K x D
  int Components() const { return static_cast<int>(s0.size()); }
  int Dim() const { return static_cast<int>(s1.cols()); }
};

SufficientStats AccumulateStats(const Eigen::MatrixXd& resp,
                                const Eigen::MatrixXd& rows);

// Binary stats cache: magic "NIFS", u32 version = 1, u32 K, u32 D, then
// s0 (K f64), s1 (K x D f64, row-major), s2 (K x D f64), little-endian.
SufficientStats ReadStatsFile(const std::string& path);
void WriteStatsFile(const SufficientStats& stats, const std::string& path);

}  // namespace nifv

#endif  // NIFV_GMM_HPP_
