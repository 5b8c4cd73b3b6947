// include/nifv/eval.hpp

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

#ifndef NIFV_EVAL_HPP_
#define NIFV_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nifv {

// One-vs-rest linear classifier. Row c of weights scores class classes[c];
// the score of vector x is weights.row(c).dot(x) + bias[c].
struct LinearModel {
  std::vector<std::string> classes;
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  int Classes() const { return static_cast<int>(classes.size()); }
};

void ValidateLinearModel(const LinearModel& model);

// Result of one binary hinge-loss subproblem, solved in the dual.
struct BinarySvm {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  // Dual objective in minimization form after each epoch; non-increasing.
  std::vector<double> dual_trace;
  int epochs = 0;
  bool converged = false;
};

// Minimizes 0.5 ||w||^2 + c * sum_i hinge(y_i * (w . x_i + b)) by coordinate
// descent on the box-constrained dual, with the bias folded in as a constant
// augmented feature. Labels are +1 / -1. Runs until the duality gap drops to
// gap_tol or max_epochs passes are spent; the visiting order is reshuffled
// every epoch from the seed.
BinarySvm SolveBinarySvm(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         double c, std::uint64_t seed, double gap_tol = 1e-4,
                         int max_epochs = 2000);

struct SvmTrainOptions {
  std::vector<double> c_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
  int folds = 3;
  double gap_tol = 1e-4;
  int max_epochs = 2000;
  int threads = 0;
};

struct SvmTrainInfo {
  double chosen_c = 0.0;
  // Mean validation accuracy per c_grid entry.
  std::vector<double> grid_accuracy;
};

// One-vs-rest training with the regularization constant picked by k-fold
// validation accuracy. Ties go to the smaller constant.
LinearModel TrainLinearSvm(const Eigen::MatrixXd& vectors,
                           const std::vector<std::string>& labels,
                           std::uint64_t seed,
                           const SvmTrainOptions& opts = SvmTrainOptions(),
                           SvmTrainInfo* info = nullptr);

// N x C score matrix for the model's classes.
Eigen::MatrixXd ScoreVectors(const LinearModel& model,
                             const Eigen::MatrixXd& vectors);

// 11-point interpolated average precision: the mean over recall thresholds
// {0, 0.1, ..., 1} of the maximum precision at recall >= threshold. Ranking
// is by descending score with ties broken toward the smaller index. Throws
// when nothing is relevant.
double AveragePrecision11(const Eigen::VectorXd& scores,
                          const std::vector<int>& relevance);

enum class Metric { kMap11, kAccuracy };

Metric ParseMetric(const std::string& name);

// Argmax decisions against integer class labels; score ties go to the
// smaller class index.
double ArgmaxAccuracy(const Eigen::MatrixXd& scores,
                      const std::vector<int>& truth);

struct EvalReport {
  std::vector<std::string> classes;
  // Per-class average precision, or per-class recall under accuracy.
  Eigen::VectorXd per_class;
  double mean = 0.0;
};

EvalReport EvaluateScores(const Eigen::MatrixXd& scores,
                          const std::vector<int>& truth,
                          const std::vector<std::string>& classes,
                          Metric metric);

struct CompareResult {
  double metric_a = 0.0;
  double metric_b = 0.0;
  double delta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool equivalent = false;
};

// Paired bootstrap over test images of the metric difference between two
// systems scored on the same items. The interval is the central 95% of the
// resampled differences; the systems are called equivalent when it contains
// zero. Fewer than 100 resamples is an error.
CompareResult BootstrapCompare(const Eigen::MatrixXd& scores_a,
                               const Eigen::MatrixXd& scores_b,
                               const std::vector<int>& truth, int classes,
                               Metric metric, int iters, std::uint64_t seed,
                               int threads = 0);

}  // namespace nifv

#endif  // NIFV_EVAL_HPP_
