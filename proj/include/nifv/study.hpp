// include/nifv/study.hpp

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

#ifndef NIFV_STUDY_HPP_
#define NIFV_STUDY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nifv/descriptors.hpp"
#include "nifv/gmm.hpp"

namespace nifv {

// A mixture fit in a PCA subspace, viewed as a density over the original
// space: component means are zero-padded and every component shares the
// trailing residual variances, so densities stay comparable across different
// (subspace size, component count) choices.
struct JointModel {
  PcaModel pca;
  GaussianMixture mixture;  // dimension = pca.keep
};

void ValidateJointModel(const JointModel& joint);

double JointLogLikelihood(const JointModel& joint, const Eigen::VectorXd& x);

Eigen::VectorXd JointLogLikelihoodRows(const JointModel& joint,
                                       const Eigen::MatrixXd& rows);

// Importance-sampling estimate of the total mass of the joint density. A
// correctly normalized model returns a value near 1.
double MonteCarloNormalization(const JointModel& joint, std::uint64_t seed,
                               int samples);

struct SynthSpec {
  std::string kind = "polya";  // polya | plsa | lda | latmog
  int classes = 2;
  int train_per_class = 100;
  int test_per_class = 100;
  int descriptors_per_image = 500;
  int vocab = 64;  // word centers, or mixture components for latmog
  int dim = 8;     // descriptor dimension before any embedding
  int topics = 4;  // plsa and lda kinds
  // Prior strength of the per-image parameter draw; smaller is burstier.
  double concentration = 8.0;
  // Log-scale separation applied to the class-specific prior means.
  double class_offset = 0.35;
  // latmog kind: precision prior shape and mean-coupling strength. Smaller
  // coupling lets per-image component means wander further from the prior.
  double latent_gamma_shape = 8.0;
  double latent_beta = 1.0;
  // Emission noise around word centers for the count-model kinds.
  double within_sigma = 0.08;
  // When positive, rotate descriptors into this many dimensions and add
  // isotropic residual noise.
  int embed_dim = 0;
  double residual_sigma = 0.05;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  std::vector<DescriptorSet> train;
  std::vector<DescriptorSet> test;
  std::vector<std::string> train_labels;
  std::vector<std::string> test_labels;
  // Ground-truth word centers for the count-model kinds; empty for latmog.
  Eigen::MatrixXd centers;
};

// Samples a dataset by drawing per-image parameters from class-specific
// priors and then iid descriptors given those parameters. Every image is
// generated from its own seeded stream, so the result is reproducible
// regardless of evaluation order.
SynthDataset GenerateSynthetic(const SynthSpec& spec);

struct SweepPoint {
  int dim = 0;
  int components = 0;
};

struct SweepRow {
  int dim = 0;
  int components = 0;
  double loglik_per_descriptor = 0.0;
  double metric = 0.0;
};

// For each (subspace size, component count) pair: fit PCA and a mixture on
// the training descriptors, report the held-out per-descriptor joint
// log-likelihood, and the test accuracy of square-rooted, length-normalized
// mixture scores under a linear classifier. Infeasible pairs are skipped
// with a note. Rows depend only on the pair values and the seed.
std::vector<SweepRow> LoglikVsPerformanceSweep(
    const SynthDataset& data, const std::vector<SweepPoint>& pairs,
    std::uint64_t seed, int threads = 0, int descriptor_cap = 300000);

}  // namespace nifv

#endif  // NIFV_STUDY_HPP_
