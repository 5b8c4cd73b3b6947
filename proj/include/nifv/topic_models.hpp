// include/nifv/topic_models.hpp

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

#ifndef NIFV_TOPIC_MODELS_HPP_
#define NIFV_TOPIC_MODELS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace nifv {

// Maximum-likelihood topic mixture. Documents are count vectors over a
// K-word vocabulary; each document mixes T topics.
struct PlsaModel {
  Eigen::MatrixXd topic_word;      // T x K, rows on the simplex
  Eigen::VectorXd doc_topic_init;  // T, seed for fold-in
  int Topics() const { return static_cast<int>(topic_word.rows()); }
  int Words() const { return static_cast<int>(topic_word.cols()); }
};

void ValidatePlsa(const PlsaModel& model);

struct PlsaTrainOptions {
  int max_iter = 500;
  double tol = 1e-7;  // relative corpus log-likelihood change
  int threads = 0;
};

struct PlsaTrainInfo {
  std::vector<double> loglik_trace;  // corpus log-likelihood per iteration
  std::vector<int> reseed_iters;     // iterations that re-seeded a topic
  bool converged = false;
  Eigen::MatrixXd doc_topics;  // M x T mixtures at the final iteration
};

// EM on a document-word count matrix (M x K). Requires nonnegative counts
// and a positive total per document. Randomness only through `seed`.
PlsaModel TrainPlsa(const Eigen::MatrixXd& counts, int topics,
                    std::uint64_t seed, const PlsaTrainOptions& opts = {},
                    PlsaTrainInfo* info = nullptr);

// Document mixture EM with topics fixed, started from doc_topic_init.
// Zero-count documents return doc_topic_init unchanged.
Eigen::VectorXd PlsaFoldIn(const PlsaModel& model,
                           const Eigen::VectorXd& counts, double tol = 1e-12,
                           int max_iter = 2000);

double PlsaLogLikelihood(const PlsaModel& model, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& counts);

// Gradient of the document log-likelihood in the log parameterization of
// the document mixture and of every topic row, evaluated at the folded-in
// mixture. Layout: [theta block (T); topic rows (T*K)]. At the fold-in
// optimum the theta block vanishes.
Eigen::VectorXd PlsaFisherScore(const PlsaModel& model,
                                const Eigen::VectorXd& counts);

// Bayesian topic mixture with Dirichlet priors on the document mixture
// (alpha) and on every topic row (eta).
struct LdaModel {
  Eigen::VectorXd alpha;  // T, positive
  Eigen::MatrixXd eta;    // T x K, positive
  int Topics() const { return static_cast<int>(eta.rows()); }
  int Words() const { return static_cast<int>(eta.cols()); }
};

void ValidateLda(const LdaModel& model);

struct LdaPosterior {
  Eigen::VectorXd alpha_star;  // T
  Eigen::MatrixXd eta_star;    // T x K
  Eigen::MatrixXd q;           // K x T word-type responsibilities
  double bound = 0.0;
  bool converged = false;
  std::vector<double> bound_trace;
};

// Coupled variational updates over word types; identical words share one
// responsibility row. Stops on relative bound change <= tol.
LdaPosterior LdaInfer(const LdaModel& model, const Eigen::VectorXd& counts,
                      double tol = 1e-7, int max_iter = 200);

// Variational bound at an arbitrary fixed posterior state.
double LdaBound(const LdaModel& model, const LdaPosterior& post,
                const Eigen::VectorXd& counts);

// Gradient of the bound with the posterior held fixed. Layout:
// [alpha block (T); eta rows (T*K)].
Eigen::VectorXd LdaFisherScore(const LdaModel& model,
                               const LdaPosterior& post);

// Moment-matched priors from a trained maximum-likelihood mixture: alpha
// from per-document mixtures, eta_t from per-document topic-word
// proportions weighted by per-document topic mass.
LdaModel FitLdaFromPlsa(const PlsaModel& model, const Eigen::MatrixXd& counts);

}  // namespace nifv

#endif  // NIFV_TOPIC_MODELS_HPP_
