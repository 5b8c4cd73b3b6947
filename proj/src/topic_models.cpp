// src/topic_models.cpp

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

#include "nifv/topic_models.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nifv/count_models.hpp"
#include "nifv/parallel.hpp"
#include "nifv/specfun.hpp"

namespace nifv {

namespace {

constexpr double kTopicFloor = 1e-12;
constexpr double kEmptyTopicMass = 1e-8;
constexpr double kLogFloor = 1e-300;
constexpr int kDocBlock = 1024;

void CheckCountRow(const Eigen::VectorXd& counts, int words) {
  if (counts.size() != words) {
    throw std::invalid_argument("count vector length does not match vocabulary");
  }
  for (int k = 0; k < counts.size(); ++k) {
    if (!std::isfinite(counts[k]) || counts[k] < 0.0) {
      throw std::invalid_argument("counts must be finite and nonnegative");
    }
  }
}

void CheckCountMatrix(const Eigen::MatrixXd& counts) {
  if (counts.rows() < 1 || counts.cols() < 2) {
    throw std::invalid_argument("count matrix needs >=1 rows and >=2 columns");
  }
  for (int d = 0; d < counts.rows(); ++d) {
    for (int k = 0; k < counts.cols(); ++k) {
      if (!std::isfinite(counts(d, k)) || counts(d, k) < 0.0) {
        throw std::invalid_argument("counts must be finite and nonnegative");
      }
    }
  }
}

// Normalized row with entries floored away from zero.
Eigen::VectorXd FlooredSimplex(const Eigen::VectorXd& v) {
  Eigen::VectorXd out = v.cwiseMax(0.0);
  double sum = out.sum();
  if (sum <= 0.0) {
    out.setConstant(1.0 / static_cast<double>(out.size()));
    return out;
  }
  out /= sum;
  out = out.cwiseMax(kTopicFloor);
  out /= out.sum();
  return out;
}

Eigen::VectorXd PerturbedTopic(const Eigen::VectorXd& base,
                               std::mt19937_64* rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd row(base.size());
  for (int k = 0; k < base.size(); ++k) {
    row[k] = base[k] * (1.0 + 0.5 * unif(*rng));
  }
  return FlooredSimplex(row);
}

struct PlsaAcc {
  Eigen::MatrixXd soft_counts;  // T x K
  double loglik = 0.0;
};

// KL(Dirichlet(a) || Dirichlet(b)) for equally sized positive vectors.
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

// E[ln x_i] under Dirichlet(a).
Eigen::VectorXd DirichletMeanLog(const Eigen::VectorXd& a) {
  const double psi_sum = Digamma(a.sum());
  Eigen::VectorXd out(a.size());
  for (int i = 0; i < a.size(); ++i) {
    out[i] = Digamma(a[i]) - psi_sum;
  }
  return out;
}

void CheckPosteriorShape(const LdaModel& model, const LdaPosterior& post,
                         int words) {
  const int topics = model.Topics();
  if (post.alpha_star.size() != topics || post.eta_star.rows() != topics ||
      post.eta_star.cols() != model.Words() || post.q.rows() != words ||
      post.q.cols() != topics) {
    throw std::invalid_argument("posterior shape does not match model");
  }
}

}  // namespace

void ValidatePlsa(const PlsaModel& model) {
  const int topics = model.Topics();
  const int words = model.Words();
  if (topics < 1 || words < 2) {
    throw std::invalid_argument("topic-word matrix needs >=1 rows, >=2 cols");
  }
  for (int t = 0; t < topics; ++t) {
    double sum = 0.0;
    for (int k = 0; k < words; ++k) {
      const double v = model.topic_word(t, k);
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("topic rows must be finite, nonnegative");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("topic rows must sum to one");
    }
  }
  if (model.doc_topic_init.size() != topics) {
    throw std::invalid_argument("doc_topic_init length must equal topic count");
  }
  double init_sum = 0.0;
  for (int t = 0; t < topics; ++t) {
    const double v = model.doc_topic_init[t];
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument("doc_topic_init must be positive");
    }
    init_sum += v;
  }
  if (std::abs(init_sum - 1.0) > 1e-6) {
    throw std::invalid_argument("doc_topic_init must sum to one");
  }
}

PlsaModel TrainPlsa(const Eigen::MatrixXd& counts, int topics,
                    std::uint64_t seed, const PlsaTrainOptions& opts,
                    PlsaTrainInfo* info) {
  CheckCountMatrix(counts);
  const int docs = static_cast<int>(counts.rows());
  const int words = static_cast<int>(counts.cols());
  if (topics < 1) throw std::invalid_argument("topic count must be positive");
  if (opts.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  Eigen::VectorXd doc_totals = counts.rowwise().sum();
  for (int d = 0; d < docs; ++d) {
    if (doc_totals[d] <= 0.0) {
      std::ostringstream msg;
      msg << "document " << d << " has zero total count";
      throw std::invalid_argument(msg.str());
    }
  }

  std::mt19937_64 rng(seed);
  Eigen::VectorXd global = FlooredSimplex(counts.colwise().sum().transpose());

  Eigen::MatrixXd topic_word(topics, words);
  for (int t = 0; t < topics; ++t) {
    topic_word.row(t) = PerturbedTopic(global, &rng).transpose();
  }
  Eigen::MatrixXd theta(docs, topics);
  {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int d = 0; d < docs; ++d) {
      Eigen::VectorXd row(topics);
      for (int t = 0; t < topics; ++t) row[t] = 1.0 + 0.1 * unif(rng);
      theta.row(d) = FlooredSimplex(row).transpose();
    }
  }

  const int threads = ResolveThreads(opts.threads);
  PlsaTrainInfo local_info;
  PlsaTrainInfo* out = info != nullptr ? info : &local_info;
  out->loglik_trace.clear();
  out->reseed_iters.clear();
  out->converged = false;

  Eigen::MatrixXd new_theta(docs, topics);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    PlsaAcc total = BlockedReduce<PlsaAcc>(
        docs, kDocBlock, threads,
        [&](int lo, int hi) {
          PlsaAcc acc;
          acc.soft_counts = Eigen::MatrixXd::Zero(topics, words);
          for (int d = lo; d < hi; ++d) {
            Eigen::VectorXd theta_d = theta.row(d).transpose();
            Eigen::VectorXd p = topic_word.transpose() * theta_d;
            Eigen::VectorXd w = Eigen::VectorXd::Zero(words);
            for (int k = 0; k < words; ++k) {
              const double n = counts(d, k);
              if (n > 0.0) {
                const double pk = std::max(p[k], kLogFloor);
                acc.loglik += n * std::log(pk);
                w[k] = n / pk;
              }
            }
            Eigen::VectorXd mass = theta_d.cwiseProduct(topic_word * w);
            new_theta.row(d) = (mass / doc_totals[d]).transpose();
            for (int t = 0; t < topics; ++t) {
              acc.soft_counts.row(t) +=
                  theta_d[t] * topic_word.row(t).cwiseProduct(w.transpose());
            }
          }
          return acc;
        },
        [](const PlsaAcc& a, const PlsaAcc& b) {
          PlsaAcc merged;
          merged.soft_counts = a.soft_counts + b.soft_counts;
          merged.loglik = a.loglik + b.loglik;
          return merged;
        });

    out->loglik_trace.push_back(total.loglik);
    theta.swap(new_theta);
    for (int t = 0; t < topics; ++t) {
      const double mass = total.soft_counts.row(t).sum();
      if (mass <= kEmptyTopicMass) {
        topic_word.row(t) = PerturbedTopic(global, &rng).transpose();
        out->reseed_iters.push_back(iter);
        std::cerr << "TrainPlsa: re-seeded empty topic " << t
                  << " at iteration " << iter << "\n";
      } else {
        topic_word.row(t) = FlooredSimplex(
            total.soft_counts.row(t).transpose()).transpose();
      }
    }

    const std::size_t n = out->loglik_trace.size();
    if (n >= 2) {
      const double prev = out->loglik_trace[n - 2];
      const double cur = out->loglik_trace[n - 1];
      if (std::abs(cur - prev) <= opts.tol * std::max(1.0, std::abs(prev))) {
        out->converged = true;
        break;
      }
    }
  }

  out->doc_topics = theta;
  PlsaModel model;
  model.topic_word = topic_word;
  model.doc_topic_init = FlooredSimplex(theta.colwise().mean().transpose());
  return model;
}

Eigen::VectorXd PlsaFoldIn(const PlsaModel& model,
                           const Eigen::VectorXd& counts, double tol,
                           int max_iter) {
  ValidatePlsa(model);
  CheckCountRow(counts, model.Words());
  Eigen::VectorXd theta = model.doc_topic_init;
  const double total = counts.sum();
  if (total <= 0.0) return theta;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd p = model.topic_word.transpose() * theta;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(counts.size());
    for (int k = 0; k < counts.size(); ++k) {
      if (counts[k] > 0.0) w[k] = counts[k] / std::max(p[k], kLogFloor);
    }
    Eigen::VectorXd next =
        theta.cwiseProduct(model.topic_word * w) / total;
    const double delta = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    if (delta <= tol) break;
  }
  return theta;
}

double PlsaLogLikelihood(const PlsaModel& model, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& counts) {
  ValidatePlsa(model);
  CheckCountRow(counts, model.Words());
  if (theta.size() != model.Topics()) {
    throw std::invalid_argument("theta length must equal topic count");
  }
  Eigen::VectorXd p = model.topic_word.transpose() * theta;
  double ll = 0.0;
  for (int k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0.0) ll += counts[k] * std::log(std::max(p[k], kLogFloor));
  }
  return ll;
}

Eigen::VectorXd PlsaFisherScore(const PlsaModel& model,
                                const Eigen::VectorXd& counts) {
  const int topics = model.Topics();
  const int words = model.Words();
  Eigen::VectorXd theta = PlsaFoldIn(model, counts);
  Eigen::VectorXd p = model.topic_word.transpose() * theta;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(words);
  for (int k = 0; k < words; ++k) {
    if (counts[k] > 0.0) w[k] = counts[k] / std::max(p[k], kLogFloor);
  }
  Eigen::VectorXd mass = theta.cwiseProduct(model.topic_word * w);
  const double total = counts.sum();

  Eigen::VectorXd score(topics + topics * words);
  score.head(topics) = mass - total * theta;
  for (int t = 0; t < topics; ++t) {
    score.segment(topics + t * words, words) =
        (theta[t] * model.topic_word.row(t).cwiseProduct(w.transpose()) -
         mass[t] * model.topic_word.row(t))
            .transpose();
  }
  return score;
}

void ValidateLda(const LdaModel& model) {
  const int topics = model.Topics();
  const int words = model.Words();
  if (topics < 1 || words < 2) {
    throw std::invalid_argument("topic-word prior needs >=1 rows, >=2 cols");
  }
  if (model.alpha.size() != topics) {
    throw std::invalid_argument("alpha length must equal topic count");
  }
  for (int t = 0; t < topics; ++t) {
    if (!std::isfinite(model.alpha[t]) || model.alpha[t] <= 0.0) {
      throw std::invalid_argument("alpha entries must be finite and positive");
    }
    for (int k = 0; k < words; ++k) {
      if (!std::isfinite(model.eta(t, k)) || model.eta(t, k) <= 0.0) {
        throw std::invalid_argument("eta entries must be finite and positive");
      }
    }
  }
}

LdaPosterior LdaInfer(const LdaModel& model, const Eigen::VectorXd& counts,
                      double tol, int max_iter) {
  ValidateLda(model);
  CheckCountRow(counts, model.Words());
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  const int topics = model.Topics();
  const int words = model.Words();

  LdaPosterior post;
  post.q = Eigen::MatrixXd::Constant(words, topics,
                                     1.0 / static_cast<double>(topics));
  post.alpha_star = model.alpha;
  post.eta_star = model.eta;

  for (int sweep = 0; sweep < max_iter; ++sweep) {
    post.alpha_star = model.alpha + post.q.transpose() * counts;
    post.eta_star = model.eta + (counts.asDiagonal() * post.q).transpose();

    Eigen::VectorXd mean_log_theta = DirichletMeanLog(post.alpha_star);
    Eigen::MatrixXd log_q(words, topics);
    for (int t = 0; t < topics; ++t) {
      Eigen::VectorXd mean_log_row =
          DirichletMeanLog(post.eta_star.row(t).transpose());
      log_q.col(t) = mean_log_row.array() + mean_log_theta[t];
    }
    for (int k = 0; k < words; ++k) {
      const double row_max = log_q.row(k).maxCoeff();
      Eigen::VectorXd expd = (log_q.row(k).array() - row_max).exp();
      post.q.row(k) = (expd / expd.sum()).transpose();
    }

    post.bound = LdaBound(model, post, counts);
    post.bound_trace.push_back(post.bound);
    const std::size_t n = post.bound_trace.size();
    if (n >= 2) {
      const double prev = post.bound_trace[n - 2];
      if (std::abs(post.bound - prev) <=
          tol * std::max(1.0, std::abs(prev))) {
        post.converged = true;
        break;
      }
    }
  }
  return post;
}

double LdaBound(const LdaModel& model, const LdaPosterior& post,
                const Eigen::VectorXd& counts) {
  ValidateLda(model);
  CheckCountRow(counts, model.Words());
  CheckPosteriorShape(model, post, static_cast<int>(counts.size()));
  const int topics = model.Topics();
  const int words = model.Words();

  double bound = -DirichletKl(post.alpha_star, model.alpha);
  for (int t = 0; t < topics; ++t) {
    bound -= DirichletKl(post.eta_star.row(t).transpose(),
                         model.eta.row(t).transpose());
  }

  Eigen::VectorXd mean_log_theta = DirichletMeanLog(post.alpha_star);
  Eigen::VectorXd topic_mass = post.q.transpose() * counts;
  bound += topic_mass.dot(mean_log_theta);

  for (int t = 0; t < topics; ++t) {
    Eigen::VectorXd mean_log_row =
        DirichletMeanLog(post.eta_star.row(t).transpose());
    for (int k = 0; k < words; ++k) {
      if (counts[k] > 0.0) {
        bound += counts[k] * post.q(k, t) * mean_log_row[k];
      }
    }
  }

  for (int k = 0; k < words; ++k) {
    if (counts[k] <= 0.0) continue;
    for (int t = 0; t < topics; ++t) {
      const double qkt = post.q(k, t);
      if (qkt > 0.0) bound -= counts[k] * qkt * std::log(qkt);
    }
  }
  return bound;
}

Eigen::VectorXd LdaFisherScore(const LdaModel& model,
                               const LdaPosterior& post) {
  ValidateLda(model);
  const int topics = model.Topics();
  const int words = model.Words();
  if (post.alpha_star.size() != topics || post.eta_star.rows() != topics ||
      post.eta_star.cols() != words) {
    throw std::invalid_argument("posterior shape does not match model");
  }

  Eigen::VectorXd score(topics + topics * words);
  const double psi_shift =
      Digamma(model.alpha.sum()) - Digamma(post.alpha_star.sum());
  for (int t = 0; t < topics; ++t) {
    score[t] =
        (Digamma(post.alpha_star[t]) - Digamma(model.alpha[t])) + psi_shift;
  }
  for (int t = 0; t < topics; ++t) {
    const double row_shift = Digamma(model.eta.row(t).sum()) -
                             Digamma(post.eta_star.row(t).sum());
    for (int k = 0; k < words; ++k) {
      score[topics + t * words + k] =
          (Digamma(post.eta_star(t, k)) - Digamma(model.eta(t, k))) +
          row_shift;
    }
  }
  return score;
}

LdaModel FitLdaFromPlsa(const PlsaModel& model, const Eigen::MatrixXd& counts) {
  ValidatePlsa(model);
  CheckCountMatrix(counts);
  if (counts.cols() != model.Words()) {
    throw std::invalid_argument("count matrix width must match vocabulary");
  }
  const int docs = static_cast<int>(counts.rows());
  const int topics = model.Topics();
  const int words = model.Words();
  if (docs < 2) throw std::invalid_argument("need at least two documents");

  Eigen::MatrixXd doc_topics(docs, topics);
  // Per-document soft word counts for each topic, docs x (topics*words).
  std::vector<Eigen::MatrixXd> soft(docs);
  for (int d = 0; d < docs; ++d) {
    Eigen::VectorXd n = counts.row(d).transpose();
    Eigen::VectorXd theta = PlsaFoldIn(model, n, 1e-10);
    doc_topics.row(d) = theta.transpose();
    Eigen::VectorXd p = model.topic_word.transpose() * theta;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(words);
    for (int k = 0; k < words; ++k) {
      if (n[k] > 0.0) w[k] = n[k] / std::max(p[k], kLogFloor);
    }
    soft[d] = Eigen::MatrixXd(topics, words);
    for (int t = 0; t < topics; ++t) {
      soft[d].row(t) =
          theta[t] * model.topic_word.row(t).cwiseProduct(w.transpose());
    }
  }

  LdaModel out;
  if (topics == 1) {
    // A one-topic mixture is a point mass; any symmetric prior matches it.
    out.alpha = Eigen::VectorXd::Ones(1);
  } else {
    out.alpha =
        FitDirichletMomentMatch(doc_topics, Eigen::VectorXd::Ones(docs)).alpha;
  }

  out.eta = Eigen::MatrixXd(topics, words);
  for (int t = 0; t < topics; ++t) {
    std::vector<int> usable;
    for (int d = 0; d < docs; ++d) {
      if (soft[d].row(t).sum() > 1e-8) usable.push_back(d);
    }
    if (static_cast<int>(usable.size()) >= 2) {
      Eigen::MatrixXd props(usable.size(), words);
      Eigen::VectorXd weights(usable.size());
      for (std::size_t i = 0; i < usable.size(); ++i) {
        const double mass = soft[usable[i]].row(t).sum();
        props.row(i) = soft[usable[i]].row(t) / mass;
        weights[i] = mass;
      }
      out.eta.row(t) =
          FitDirichletMomentMatch(props, weights).alpha.transpose();
    } else {
      std::cerr << "FitLdaFromPlsa: topic " << t
                << " has too little mass; using concentrated prior\n";
      out.eta.row(t) =
          (1e6 * model.topic_word.row(t)).cwiseMax(1e-6);
    }
  }
  return out;
}

}  // namespace nifv
