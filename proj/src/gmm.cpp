// src/gmm.cpp

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

#include "nifv/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nifv/parallel.hpp"

namespace nifv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr std::int64_t kBlockRows = 1024;
constexpr double kEmptyComponentMass = 1e-8;

struct EmAcc {
  Eigen::VectorXd s0;
  Eigen::MatrixXd s1;
  Eigen::MatrixXd s2;
  double loglik = 0.0;
};

EmAcc CombineAcc(EmAcc a, EmAcc b) {
  a.s0 += b.s0;
  a.s1 += b.s1;
  a.s2 += b.s2;
  a.loglik += b.loglik;
  return a;
}

Eigen::VectorXd GlobalVariance(const Eigen::MatrixXd& samples) {
  const double n = static_cast<double>(samples.rows());
  Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::RowVectorXd var =
      (samples.rowwise() - mean).array().square().colwise().sum() / n;
  return var.transpose();
}

// D^2-weighted center choice; all draws come from `rng` in a fixed order.
Eigen::MatrixXd KmeansPlusPlusCenters(const Eigen::MatrixXd& samples, int k,
                                      std::mt19937_64& rng) {
  const Eigen::Index n = samples.rows();
  Eigen::MatrixXd centers(k, samples.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = samples.row(first(rng));
  Eigen::VectorXd dist2 =
      (samples.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double run = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        run += dist2[i];
        if (run >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);  // all points coincide with chosen centers
    }
    centers.row(c) = samples.row(pick);
    dist2 = dist2.cwiseMin(
        (samples.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

// Mahalanobis distance of each row to its best-explaining component,
// used to relocate starved components.
Eigen::Index FarthestSample(const GaussianMixture& gmm,
                            const Eigen::MatrixXd& samples) {
  const int k = gmm.Components();
  Eigen::VectorXd best =
      Eigen::VectorXd::Constant(samples.rows(), std::numeric_limits<double>::infinity());
  for (int c = 0; c < k; ++c) {
    Eigen::ArrayXd d2 =
        ((samples.rowwise() - gmm.means.row(c)).array().square().rowwise() /
         gmm.variances.row(c).array())
            .rowwise()
            .sum();
    best = best.cwiseMin(d2.matrix());
  }
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < best.size(); ++i)
    if (best[i] > best[arg]) arg = i;
  return arg;
}

}  // namespace

void ValidateGmm(const GaussianMixture& gmm) {
  const int k = gmm.Components();
  if (k < 1) throw std::invalid_argument("gmm: no components");
  if (gmm.means.rows() != k || gmm.variances.rows() != k ||
      gmm.means.cols() != gmm.variances.cols() || gmm.means.cols() < 1)
    throw std::invalid_argument("gmm: inconsistent shapes");
  if ((gmm.weights.array() <= 0.0).any())
    throw std::invalid_argument("gmm: weights must be positive");
  if (std::abs(gmm.weights.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("gmm: weights must sum to 1");
  if ((gmm.variances.array() <= 0.0).any())
    throw std::invalid_argument("gmm: variances must be positive");
}

Eigen::MatrixXd LogJointDensities(const GaussianMixture& gmm,
                                  const Eigen::MatrixXd& rows) {
  const int k = gmm.Components();
  const Eigen::Index dim = gmm.means.cols();
  if (rows.cols() != dim)
    throw std::invalid_argument("LogJointDensities: dimension mismatch");
  Eigen::MatrixXd logp(rows.rows(), k);
  for (int c = 0; c < k; ++c) {
    const double base = std::log(gmm.weights[c]) -
                        0.5 * (dim * kLog2Pi +
                               gmm.variances.row(c).array().log().sum());
    Eigen::ArrayXd mah =
        ((rows.rowwise() - gmm.means.row(c)).array().square().rowwise() /
         gmm.variances.row(c).array())
            .rowwise()
            .sum();
    logp.col(c) = base - 0.5 * mah;
  }
  return logp;
}

Eigen::MatrixXd Posteriors(const GaussianMixture& gmm,
                           const Eigen::MatrixXd& rows) {
  ValidateGmm(gmm);
  Eigen::MatrixXd logp = LogJointDensities(gmm, rows);
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double mx = logp.row(i).maxCoeff();
    Eigen::ArrayXd e = (logp.row(i).array() - mx).exp();
    logp.row(i) = e / e.sum();
  }
  return logp;
}

Eigen::VectorXd LogLikelihoodRows(const GaussianMixture& gmm,
                                  const Eigen::MatrixXd& rows) {
  ValidateGmm(gmm);
  Eigen::MatrixXd logp = LogJointDensities(gmm, rows);
  Eigen::VectorXd ll(rows.rows());
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double mx = logp.row(i).maxCoeff();
    ll[i] = mx + std::log((logp.row(i).array() - mx).exp().sum());
  }
  return ll;
}

Eigen::MatrixXd ClipPosteriors(const Eigen::MatrixXd& resp, int k_prime) {
  const int k = static_cast<int>(resp.cols());
  if (k_prime < 1 || k_prime > k)
    throw std::invalid_argument("ClipPosteriors: k_prime out of range");
  if (k_prime == k) return resp;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(resp.rows(), k);
  std::vector<int> order(k);
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return resp(i, a) > resp(i, b);  // stable: ties keep the lower index
    });
    double kept = 0.0;
    for (int j = 0; j < k_prime; ++j) kept += resp(i, order[j]);
    if (kept <= 0.0)
      throw std::invalid_argument("ClipPosteriors: row has no mass");
    for (int j = 0; j < k_prime; ++j)
      out(i, order[j]) = resp(i, order[j]) / kept;
  }
  return out;
}

SufficientStats AccumulateStats(const Eigen::MatrixXd& resp,
                                const Eigen::MatrixXd& rows) {
  if (resp.rows() != rows.rows())
    throw std::invalid_argument("AccumulateStats: row count mismatch");
  SufficientStats stats;
  stats.s0 = resp.colwise().sum();
  stats.s1 = resp.transpose() * rows;
  stats.s2 = resp.transpose() * rows.cwiseProduct(rows);
  return stats;
}

namespace {

EmAcc EStepBlocked(const GaussianMixture& gmm, const Eigen::MatrixXd& samples,
                   int threads) {
  const int k = gmm.Components();
  const Eigen::Index dim = samples.cols();
  return BlockedReduce<EmAcc>(
      samples.rows(), kBlockRows, threads,
      [&](std::int64_t lo, std::int64_t hi) {
        EmAcc acc;
        acc.s0 = Eigen::VectorXd::Zero(k);
        acc.s1 = Eigen::MatrixXd::Zero(k, dim);
        acc.s2 = Eigen::MatrixXd::Zero(k, dim);
        if (hi <= lo) return acc;
        const auto block = samples.middleRows(lo, hi - lo);
        Eigen::MatrixXd logp = LogJointDensities(gmm, block);
        for (Eigen::Index i = 0; i < logp.rows(); ++i) {
          const double mx = logp.row(i).maxCoeff();
          Eigen::ArrayXd e = (logp.row(i).array() - mx).exp();
          const double sum = e.sum();
          acc.loglik += mx + std::log(sum);
          logp.row(i) = e / sum;
        }
        acc.s0 = logp.colwise().sum();
        acc.s1 = logp.transpose() * block;
        acc.s2 = logp.transpose() * block.cwiseProduct(block);
        return acc;
      },
      CombineAcc);
}

}  // namespace

GaussianMixture TrainGmm(const Eigen::MatrixXd& samples, int k,
                         std::uint64_t seed, const GmmTrainOptions& opts,
                         GmmTrainInfo* info) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (k < 1) throw std::invalid_argument("TrainGmm: k must be positive");
  if (n < 10 * static_cast<Eigen::Index>(k))
    throw std::invalid_argument("TrainGmm: need at least 10*k samples");
  if (dim < 1) throw std::invalid_argument("TrainGmm: empty dimension");

  const Eigen::VectorXd global_var = GlobalVariance(samples);
  const Eigen::VectorXd floor =
      (opts.variance_floor_factor * global_var.array()).max(1e-12).matrix();

  std::mt19937_64 rng(seed);
  GaussianMixture gmm;
  gmm.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  gmm.means = KmeansPlusPlusCenters(samples, k, rng);
  gmm.variances = global_var.transpose().replicate(k, 1).cwiseMax(
      floor.transpose().replicate(k, 1));

  GmmTrainInfo local;
  GmmTrainInfo* out = info ? info : &local;
  out->loglik_trace.clear();
  out->reseed_iters.clear();
  out->converged = false;

  double prev = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    EmAcc acc = EStepBlocked(gmm, samples, opts.threads);
    const double mean_ll = acc.loglik / static_cast<double>(n);
    out->loglik_trace.push_back(mean_ll);
    out->iterations = iter + 1;

    for (int c = 0; c < k; ++c) {
      if (acc.s0[c] < kEmptyComponentMass) {
        const Eigen::Index far = FarthestSample(gmm, samples);
        std::cerr << "warning: TrainGmm re-seeding empty component " << c
                  << " at iteration " << iter << "\n";
        out->reseed_iters.push_back(iter);
        acc.s0[c] = 1.0;
        acc.s1.row(c) = samples.row(far);
        acc.s2.row(c) =
            samples.row(far).array().square() + global_var.transpose().array();
      }
    }

    gmm.weights = acc.s0 / acc.s0.sum();
    gmm.means = acc.s1.array().colwise() / acc.s0.array();
    gmm.variances =
        (acc.s2.array().colwise() / acc.s0.array()) - gmm.means.array().square();
    gmm.variances = gmm.variances.cwiseMax(floor.transpose().replicate(k, 1));

    if (iter > 0 && std::abs(mean_ll - prev) <=
                        opts.tol * std::max(1.0, std::abs(prev))) {
      out->converged = true;
      break;
    }
    prev = mean_ll;
  }
  return gmm;
}

namespace {

constexpr char kStatsMagic[4] = {'N', 'I', 'F', 'S'};
constexpr std::uint32_t kStatsVersion = 1;
constexpr std::size_t kStatsHeaderBytes = 16;

[[noreturn]] void FailStats(const std::string& path, std::size_t offset,
                            const std::string& what) {
  throw std::runtime_error(path + ": " + what + " at byte " +
                           std::to_string(offset));
}

}  // namespace

SufficientStats ReadStatsFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < kStatsHeaderBytes)
    FailStats(path, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kStatsMagic, 4) != 0)
    FailStats(path, 0, "bad magic");
  std::uint32_t version, k, dim;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&k, bytes.data() + 8, 4);
  std::memcpy(&dim, bytes.data() + 12, 4);
  if (version != kStatsVersion)
    FailStats(path, 4, "unsupported version " + std::to_string(version));
  if (k == 0 || dim == 0) FailStats(path, 8, "empty shape");
  const std::size_t want =
      kStatsHeaderBytes + 8ull * (k + 2ull * k * dim);
  if (bytes.size() < want) FailStats(path, bytes.size(), "unexpected end of file");
  if (bytes.size() > want) FailStats(path, want, "trailing bytes");

  SufficientStats stats;
  stats.s0.resize(k);
  stats.s1.resize(k, dim);
  stats.s2.resize(k, dim);
  std::size_t off = kStatsHeaderBytes;
  std::memcpy(stats.s0.data(), bytes.data() + off, 8ull * k);
  // Row-major payload into column-major storage, element-wise.
  off = kStatsHeaderBytes + 8ull * k;
  for (std::uint32_t c = 0; c < k; ++c)
    for (std::uint32_t d = 0; d < dim; ++d, off += 8) {
      double v;
      std::memcpy(&v, bytes.data() + off, 8);
      stats.s1(c, d) = v;
    }
  for (std::uint32_t c = 0; c < k; ++c)
    for (std::uint32_t d = 0; d < dim; ++d, off += 8) {
      double v;
      std::memcpy(&v, bytes.data() + off, 8);
      stats.s2(c, d) = v;
    }
  return stats;
}

void WriteStatsFile(const SufficientStats& stats, const std::string& path) {
  if (stats.s1.rows() != stats.s0.size() || stats.s2.rows() != stats.s0.size() ||
      stats.s1.cols() != stats.s2.cols())
    throw std::invalid_argument(path + ": inconsistent stats shapes");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::uint32_t k = static_cast<std::uint32_t>(stats.s0.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(stats.s1.cols());
  char header[kStatsHeaderBytes] = {};
  std::memcpy(header, kStatsMagic, 4);
  std::memcpy(header + 4, &kStatsVersion, 4);
  std::memcpy(header + 8, &k, 4);
  std::memcpy(header + 12, &dim, 4);
  out.write(header, kStatsHeaderBytes);
  out.write(reinterpret_cast<const char*>(stats.s0.data()), 8ull * k);
  std::vector<double> row(dim);
  for (std::uint32_t c = 0; c < k; ++c) {
    for (std::uint32_t d = 0; d < dim; ++d) row[d] = stats.s1(c, d);
    out.write(reinterpret_cast<const char*>(row.data()), 8ull * dim);
  }
  for (std::uint32_t c = 0; c < k; ++c) {
    for (std::uint32_t d = 0; d < dim; ++d) row[d] = stats.s2(c, d);
    out.write(reinterpret_cast<const char*>(row.data()), 8ull * dim);
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace nifv
