// src/eval.cpp

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
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "nifv/parallel.hpp"
#include "nifv/rng.hpp"

namespace nifv {

namespace {

std::vector<std::string> DistinctClasses(
    const std::vector<std::string>& labels) {
  std::set<std::string> seen(labels.begin(), labels.end());
  return std::vector<std::string>(seen.begin(), seen.end());
}

std::vector<int> LabelIndices(const std::vector<std::string>& labels,
                              const std::vector<std::string>& classes) {
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    index[classes[c]] = static_cast<int>(c);
  }
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = index.at(labels[i]);
  }
  return out;
}

// Interleaved fold assignment keeps every fold close to the global class mix
// as long as items arrive grouped or shuffled consistently.
std::vector<int> FoldAssignment(const std::vector<int>& truth, int folds) {
  std::vector<int> assign(truth.size(), 0);
  std::map<int, int> seen_per_class;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int& count = seen_per_class[truth[i]];
    assign[i] = count % folds;
    ++count;
  }
  return assign;
}

double MeanAveragePrecision(const Eigen::MatrixXd& scores,
                            const std::vector<int>& truth, int classes) {
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> relevance(truth.size(), 0);
    int positives = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c) {
        relevance[i] = 1;
        ++positives;
      }
    }
    if (positives == 0) continue;
    sum += AveragePrecision11(scores.col(c), relevance);
    ++used;
  }
  return used > 0 ? sum / used : 0.0;
}

double MetricValue(const Eigen::MatrixXd& scores, const std::vector<int>& truth,
                   int classes, Metric metric) {
  if (metric == Metric::kAccuracy) return ArgmaxAccuracy(scores, truth);
  return MeanAveragePrecision(scores, truth, classes);
}

}  // namespace

void ValidateLinearModel(const LinearModel& model) {
  const int c = model.Classes();
  if (c < 1) throw std::invalid_argument("model has no classes");
  if (model.weights.rows() != c || model.bias.size() != c) {
    throw std::invalid_argument("weight shape does not match class count");
  }
  if (!model.weights.allFinite() || !model.bias.allFinite()) {
    throw std::invalid_argument("model parameters must be finite");
  }
}

BinarySvm SolveBinarySvm(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         double c, std::uint64_t seed, double gap_tol,
                         int max_epochs) {
  const int n = static_cast<int>(x.rows());
  const int dim = static_cast<int>(x.cols());
  if (n == 0) throw std::invalid_argument("no training vectors");
  if (static_cast<int>(y.size()) != n) {
    throw std::invalid_argument("label count does not match vectors");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("regularization constant must be positive");
  }
  for (int i = 0; i < n; ++i) {
    if (y[i] != 1 && y[i] != -1) {
      throw std::invalid_argument("labels must be +1 or -1");
    }
  }

  // The bias enters as a constant extra feature, so q_ii gains +1 and the
  // diagonal can never vanish.
  Eigen::VectorXd q_diag(n);
  for (int i = 0; i < n; ++i) q_diag[i] = x.row(i).squaredNorm() + 1.0;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double bias = 0.0;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);

  BinarySvm out;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int idx : order) {
      const double margin = y[idx] * (w.dot(x.row(idx)) + bias);
      const double g = margin - 1.0;
      double pg = g;
      if (alpha[idx] <= 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[idx] >= c) {
        pg = std::max(g, 0.0);
      }
      if (pg == 0.0) continue;
      const double prev = alpha[idx];
      alpha[idx] = std::clamp(prev - g / q_diag[idx], 0.0, c);
      const double step = (alpha[idx] - prev) * y[idx];
      w += step * x.row(idx).transpose();
      bias += step;
    }

    const double reg = 0.5 * (w.squaredNorm() + bias * bias);
    double hinge = 0.0;
    for (int i = 0; i < n; ++i) {
      hinge += std::max(0.0, 1.0 - y[i] * (w.dot(x.row(i)) + bias));
    }
    const double primal = reg + c * hinge;
    const double dual = alpha.sum() - reg;
    out.dual_trace.push_back(reg - alpha.sum());
    out.epochs = epoch + 1;
    out.primal_objective = primal;
    out.dual_objective = dual;
    if (primal - dual <= gap_tol) {
      out.converged = true;
      break;
    }
  }

  out.weights = w;
  out.bias = bias;
  return out;
}

LinearModel TrainLinearSvm(const Eigen::MatrixXd& vectors,
                           const std::vector<std::string>& labels,
                           std::uint64_t seed, const SvmTrainOptions& opts,
                           SvmTrainInfo* info) {
  const int n = static_cast<int>(vectors.rows());
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("label count does not match vectors");
  }
  const std::vector<std::string> classes = DistinctClasses(labels);
  const int num_classes = static_cast<int>(classes.size());
  if (num_classes < 2) {
    throw std::invalid_argument("training needs at least two classes");
  }
  if (opts.c_grid.empty()) {
    throw std::invalid_argument("empty regularization grid");
  }
  if (opts.folds < 2 || opts.folds > n) {
    throw std::invalid_argument("fold count out of range");
  }
  const std::vector<int> truth = LabelIndices(labels, classes);

  auto train_all = [&](const Eigen::MatrixXd& train_x,
                       const std::vector<int>& train_y, double c) {
    LinearModel model;
    model.classes = classes;
    model.weights.resize(num_classes, vectors.cols());
    model.bias.resize(num_classes);
    ParallelFor(num_classes, opts.threads, [&](int cls) {
      std::vector<int> sign(train_y.size());
      for (std::size_t i = 0; i < train_y.size(); ++i) {
        sign[i] = train_y[i] == cls ? 1 : -1;
      }
      const BinarySvm fit =
          SolveBinarySvm(train_x, sign, c, MixSeed(seed, cls), opts.gap_tol,
                         opts.max_epochs);
      model.weights.row(cls) = fit.weights.transpose();
      model.bias[cls] = fit.bias;
    });
    return model;
  };

  double chosen_c = opts.c_grid.front();
  std::vector<double> grid_accuracy(opts.c_grid.size(), 0.0);
  if (opts.c_grid.size() > 1) {
    const std::vector<int> assign = FoldAssignment(truth, opts.folds);
    double best = -1.0;
    for (std::size_t gi = 0; gi < opts.c_grid.size(); ++gi) {
      const double c = opts.c_grid[gi];
      double total_correct = 0.0;
      double total_items = 0.0;
      for (int fold = 0; fold < opts.folds; ++fold) {
        std::vector<int> train_rows;
        std::vector<int> val_rows;
        for (int i = 0; i < n; ++i) {
          (assign[i] == fold ? val_rows : train_rows).push_back(i);
        }
        if (train_rows.empty() || val_rows.empty()) continue;
        Eigen::MatrixXd train_x(train_rows.size(), vectors.cols());
        std::vector<int> train_y(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
          train_x.row(i) = vectors.row(train_rows[i]);
          train_y[i] = truth[train_rows[i]];
        }
        std::set<int> present(train_y.begin(), train_y.end());
        if (static_cast<int>(present.size()) < 2) continue;

        const LinearModel model = train_all(train_x, train_y, c);
        Eigen::MatrixXd val_x(val_rows.size(), vectors.cols());
        std::vector<int> val_y(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
          val_x.row(i) = vectors.row(val_rows[i]);
          val_y[i] = truth[val_rows[i]];
        }
        const Eigen::MatrixXd scores = ScoreVectors(model, val_x);
        total_correct += ArgmaxAccuracy(scores, val_y) * val_rows.size();
        total_items += val_rows.size();
      }
      const double acc = total_items > 0.0 ? total_correct / total_items : 0.0;
      grid_accuracy[gi] = acc;
      if (acc > best + 1e-12) {
        best = acc;
        chosen_c = c;
      }
    }
  }

  if (info != nullptr) {
    info->chosen_c = chosen_c;
    info->grid_accuracy = grid_accuracy;
  }
  LinearModel model = train_all(vectors, truth, chosen_c);
  ValidateLinearModel(model);
  return model;
}

Eigen::MatrixXd ScoreVectors(const LinearModel& model,
                             const Eigen::MatrixXd& vectors) {
  ValidateLinearModel(model);
  if (vectors.cols() != model.weights.cols()) {
    throw std::invalid_argument("vector width does not match model");
  }
  return (vectors * model.weights.transpose()).rowwise() +
         model.bias.transpose();
}

double AveragePrecision11(const Eigen::VectorXd& scores,
                          const std::vector<int>& relevance) {
  const int n = static_cast<int>(scores.size());
  if (static_cast<int>(relevance.size()) != n) {
    throw std::invalid_argument("relevance size does not match scores");
  }
  int positives = 0;
  for (int r : relevance) positives += r != 0 ? 1 : 0;
  if (positives == 0) {
    throw std::invalid_argument("average precision needs a relevant item");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  // precision_at[k] and recall_at[k] describe the cut after k+1 items.
  std::vector<double> precision_at(n);
  std::vector<double> recall_at(n);
  int hits = 0;
  for (int k = 0; k < n; ++k) {
    hits += relevance[order[k]] != 0 ? 1 : 0;
    precision_at[k] = static_cast<double>(hits) / (k + 1);
    recall_at[k] = static_cast<double>(hits) / positives;
  }

  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    const double threshold = t / 10.0;
    double best = 0.0;
    for (int k = 0; k < n; ++k) {
      if (recall_at[k] + 1e-12 >= threshold) {
        best = std::max(best, precision_at[k]);
      }
    }
    sum += best;
  }
  return sum / 11.0;
}

Metric ParseMetric(const std::string& name) {
  if (name == "map11") return Metric::kMap11;
  if (name == "accuracy") return Metric::kAccuracy;
  throw std::invalid_argument("unknown metric: " + name);
}

double ArgmaxAccuracy(const Eigen::MatrixXd& scores,
                      const std::vector<int>& truth) {
  const int n = static_cast<int>(scores.rows());
  if (static_cast<int>(truth.size()) != n || n == 0) {
    throw std::invalid_argument("label count does not match scores");
  }
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, arg)) arg = c;
    }
    if (arg == truth[i]) ++correct;
  }
  return static_cast<double>(correct) / n;
}

EvalReport EvaluateScores(const Eigen::MatrixXd& scores,
                          const std::vector<int>& truth,
                          const std::vector<std::string>& classes,
                          Metric metric) {
  const int n = static_cast<int>(scores.rows());
  const int num_classes = static_cast<int>(classes.size());
  if (scores.cols() != num_classes) {
    throw std::invalid_argument("score width does not match class count");
  }
  if (static_cast<int>(truth.size()) != n || n == 0) {
    throw std::invalid_argument("label count does not match scores");
  }

  EvalReport report;
  report.classes = classes;
  report.per_class.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    if (metric == Metric::kMap11) {
      std::vector<int> relevance(n, 0);
      for (int i = 0; i < n; ++i) relevance[i] = truth[i] == c ? 1 : 0;
      report.per_class[c] = AveragePrecision11(scores.col(c), relevance);
    } else {
      int members = 0;
      int correct = 0;
      for (int i = 0; i < n; ++i) {
        if (truth[i] != c) continue;
        ++members;
        int arg = 0;
        for (int k = 1; k < num_classes; ++k) {
          if (scores(i, k) > scores(i, arg)) arg = k;
        }
        if (arg == c) ++correct;
      }
      if (members == 0) {
        throw std::invalid_argument("class " + classes[c] +
                                    " has no test items");
      }
      report.per_class[c] = static_cast<double>(correct) / members;
    }
  }
  report.mean = report.per_class.mean();
  return report;
}

CompareResult BootstrapCompare(const Eigen::MatrixXd& scores_a,
                               const Eigen::MatrixXd& scores_b,
                               const std::vector<int>& truth, int classes,
                               Metric metric, int iters, std::uint64_t seed,
                               int threads) {
  const int n = static_cast<int>(scores_a.rows());
  if (scores_b.rows() != n || scores_a.cols() != classes ||
      scores_b.cols() != classes) {
    throw std::invalid_argument("the systems must score the same test items");
  }
  if (static_cast<int>(truth.size()) != n || n == 0) {
    throw std::invalid_argument("label count does not match scores");
  }
  if (iters < 100) {
    throw std::invalid_argument("bootstrap needs at least 100 resamples");
  }

  CompareResult out;
  out.metric_a = MetricValue(scores_a, truth, classes, metric);
  out.metric_b = MetricValue(scores_b, truth, classes, metric);
  out.delta = out.metric_a - out.metric_b;

  std::vector<double> deltas(iters);
  ParallelFor(iters, threads, [&](int iter) {
    std::mt19937_64 rng(MixSeed(seed, static_cast<std::uint64_t>(iter)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    Eigen::MatrixXd sample_a(n, classes);
    Eigen::MatrixXd sample_b(n, classes);
    std::vector<int> sample_y(n);
    for (int i = 0; i < n; ++i) {
      const int j = pick(rng);
      sample_a.row(i) = scores_a.row(j);
      sample_b.row(i) = scores_b.row(j);
      sample_y[i] = truth[j];
    }
    deltas[iter] = MetricValue(sample_a, sample_y, classes, metric) -
                   MetricValue(sample_b, sample_y, classes, metric);
  });

  std::sort(deltas.begin(), deltas.end());
  auto percentile = [&](double p) {
    const double pos = p * (iters - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, iters - 1);
    const double frac = pos - lo;
    return (1.0 - frac) * deltas[lo] + frac * deltas[hi];
  };
  out.lo = percentile(0.025);
  out.hi = percentile(0.975);
  out.equivalent = out.lo <= 0.0 && out.hi >= 0.0;
  return out;
}

}  // namespace nifv
