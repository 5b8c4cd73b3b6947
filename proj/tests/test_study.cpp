// tests/test_study.cpp

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

#include "nifv/study.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "testing_util.hpp"

namespace nifv {
namespace {

using nifv_test::Close;

constexpr double kLog2Pi = 1.8378770664093454836;

JointModel ToyJoint(std::mt19937_64* rng, int d0, int keep, int k) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd sample(160, d0);
  for (int i = 0; i < sample.rows(); ++i) {
    for (int j = 0; j < d0; ++j) {
      sample(i, j) = (1.5 - 0.4 * j) * unit(*rng) + 0.3 * j;
    }
  }
  JointModel joint;
  joint.pca = FitPca(sample, keep);
  joint.mixture.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  joint.mixture.means.resize(k, keep);
  joint.mixture.variances.resize(k, keep);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < keep; ++j) {
      joint.mixture.means(c, j) = unit(*rng);
      joint.mixture.variances(c, j) = 0.4 + 0.3 * c + 0.1 * j;
    }
  }
  return joint;
}

Eigen::MatrixXd HardCounts(const Eigen::MatrixXd& centers,
                           const DescriptorSet& set) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(1, centers.rows());
  for (int i = 0; i < set.data.rows(); ++i) {
    int arg = 0;
    double best = (set.data.row(i) - centers.row(0)).squaredNorm();
    for (int k = 1; k < centers.rows(); ++k) {
      const double d = (set.data.row(i) - centers.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    counts(0, arg) += 1.0;
  }
  return counts;
}

// Ratio of the across-image count variance to the variance an iid
// multinomial with the pooled proportions would produce.
double DispersionRatio(const SynthDataset& data) {
  const int k = static_cast<int>(data.centers.rows());
  const int m = static_cast<int>(data.train.size());
  Eigen::MatrixXd counts(m, k);
  for (int i = 0; i < m; ++i) {
    counts.row(i) = HardCounts(data.centers, data.train[i]);
  }
  const double n = counts.row(0).sum();
  const Eigen::VectorXd pooled = counts.colwise().sum() / (n * m);
  double empirical = 0.0;
  double multinomial = 0.0;
  for (int c = 0; c < k; ++c) {
    const double mean = counts.col(c).mean();
    empirical += (counts.col(c).array() - mean).square().mean();
    multinomial += n * pooled[c] * (1.0 - pooled[c]);
  }
  return empirical / multinomial;
}

TEST_CASE("keeping every direction leaves the subspace likelihood unchanged") {
  std::mt19937_64 rng(901);
  const JointModel joint = ToyJoint(&rng, 3, 3, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = 2.0 * unit(rng);
    const Eigen::MatrixXd rotated =
        (x - joint.pca.mean).transpose() * joint.pca.basis;
    const double direct = LogLikelihoodRows(joint.mixture, rotated)[0];
    CHECK(Close(JointLogLikelihood(joint, x), direct, 1e-10, 1e-10));
  }
}

TEST_CASE("a single component at the center has a closed-form density") {
  JointModel joint;
  joint.pca.mean = Eigen::Vector3d(0.5, -1.0, 2.0);
  joint.pca.basis = Eigen::Matrix3d::Identity();
  joint.pca.eigenvalues = Eigen::Vector3d(3.0, 2.0, 1.0);
  joint.pca.keep = 1;
  joint.pca.residual_variances = Eigen::Vector2d(0.7, 0.2);
  joint.mixture.weights = Eigen::VectorXd::Ones(1);
  joint.mixture.means = Eigen::MatrixXd::Zero(1, 1);
  joint.mixture.variances = Eigen::MatrixXd::Constant(1, 1, 1.3);

  const double want = -0.5 * (3.0 * kLog2Pi + std::log(1.3) + std::log(0.7) +
                              std::log(0.2));
  CHECK(Close(JointLogLikelihood(joint, joint.pca.mean), want, 1e-12, 1e-12));
}

TEST_CASE("the padded density matches a dense evaluation") {
  std::mt19937_64 rng(902);
  const JointModel joint = ToyJoint(&rng, 4, 2, 3);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(4);
    for (int j = 0; j < 4; ++j) x[j] = 2.5 * unit(rng);
    const Eigen::VectorXd phi =
        joint.pca.basis.transpose() * (x - joint.pca.mean);

    double dense = -1e300;
    for (int k = 0; k < 3; ++k) {
      double term = std::log(joint.mixture.weights[k]);
      for (int d = 0; d < 4; ++d) {
        const double mean = d < 2 ? joint.mixture.means(k, d) : 0.0;
        const double var = d < 2 ? joint.mixture.variances(k, d)
                                 : joint.pca.residual_variances[d - 2];
        const double diff = phi[d] - mean;
        term -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
      }
      const double hi = std::max(dense, term);
      dense = hi + std::log(std::exp(dense - hi) + std::exp(term - hi));
    }
    CHECK(Close(JointLogLikelihood(joint, x), dense, 1e-12, 1e-12));
  }
}

TEST_CASE("joint model validation rejects broken shapes") {
  std::mt19937_64 rng(903);
  JointModel joint = ToyJoint(&rng, 4, 2, 2);
  JointModel missing = joint;
  missing.pca.residual_variances.resize(1);
  CHECK_THROWS_AS(ValidateJointModel(missing), std::invalid_argument);

  JointModel degenerate = joint;
  degenerate.pca.residual_variances[0] = 0.0;
  CHECK_THROWS_AS(ValidateJointModel(degenerate), std::invalid_argument);

  JointModel mismatched = joint;
  mismatched.pca.keep = 3;
  CHECK_THROWS_AS(ValidateJointModel(mismatched), std::invalid_argument);

  CHECK_THROWS_AS(JointLogLikelihood(joint, Eigen::Vector3d(1, 2, 3)),
                  std::invalid_argument);
}

TEST_CASE("the embedded density integrates to one on planar toys") {
  std::mt19937_64 rng(904);
  const JointModel with_residual = ToyJoint(&rng, 2, 1, 2);
  const double mass1 = MonteCarloNormalization(with_residual, 55, 200000);
  CHECK(mass1 >= 0.98);
  CHECK(mass1 <= 1.02);

  const JointModel full = ToyJoint(&rng, 2, 2, 3);
  const double mass2 = MonteCarloNormalization(full, 56, 200000);
  CHECK(mass2 >= 0.98);
  CHECK(mass2 <= 1.02);

  CHECK_THROWS_AS(MonteCarloNormalization(full, 5, 10),
                  std::invalid_argument);
}

TEST_CASE("generation is reproducible down to the last bit") {
  SynthSpec spec;
  spec.kind = "polya";
  spec.classes = 2;
  spec.train_per_class = 4;
  spec.test_per_class = 3;
  spec.descriptors_per_image = 50;
  spec.vocab = 8;
  spec.dim = 3;
  spec.seed = 905;
  const SynthDataset a = GenerateSynthetic(spec);
  const SynthDataset b = GenerateSynthetic(spec);
  REQUIRE(a.train.size() == 8);
  REQUIRE(a.test.size() == 6);
  CHECK(a.train_labels == b.train_labels);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].image_id == b.train[i].image_id);
    CHECK((a.train[i].data - b.train[i].data).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a.centers - b.centers).cwiseAbs().maxCoeff() == 0.0);

  std::set<std::string> ids;
  for (const DescriptorSet& set : a.train) ids.insert(set.image_id);
  for (const DescriptorSet& set : a.test) ids.insert(set.image_id);
  CHECK(ids.size() == a.train.size() + a.test.size());
}

TEST_CASE("a very strong prior makes images share one multinomial") {
  SynthSpec spec;
  spec.kind = "polya";
  spec.classes = 1;
  spec.train_per_class = 40;
  spec.test_per_class = 1;
  spec.descriptors_per_image = 400;
  spec.vocab = 16;
  spec.dim = 4;
  spec.concentration = 1e7;
  spec.class_offset = 0.0;
  spec.within_sigma = 0.05;
  spec.seed = 906;
  const double ratio = DispersionRatio(GenerateSynthetic(spec));
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 1.6);
}

TEST_CASE("a weak prior produces super-multinomial count dispersion") {
  SynthSpec spec;
  spec.kind = "polya";
  spec.classes = 1;
  spec.train_per_class = 40;
  spec.test_per_class = 1;
  spec.descriptors_per_image = 400;
  spec.vocab = 16;
  spec.dim = 4;
  spec.concentration = 2.0;
  spec.class_offset = 0.0;
  spec.within_sigma = 0.05;
  spec.seed = 907;
  CHECK(DispersionRatio(GenerateSynthetic(spec)) >= 5.0);
}

TEST_CASE("topic kinds emit descriptors near the word centers") {
  for (const char* kind : {"plsa", "lda"}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.classes = 2;
    spec.train_per_class = 3;
    spec.test_per_class = 2;
    spec.descriptors_per_image = 60;
    spec.vocab = 10;
    spec.dim = 4;
    spec.topics = 3;
    spec.within_sigma = 0.05;
    spec.seed = 908;
    const SynthDataset data = GenerateSynthetic(spec);
    REQUIRE(data.centers.rows() == 10);
    double worst = 0.0;
    for (const DescriptorSet& set : data.train) {
      for (int i = 0; i < set.data.rows(); ++i) {
        double best = 1e300;
        for (int k = 0; k < 10; ++k) {
          best = std::min(best,
                          (set.data.row(i) - data.centers.row(k)).norm());
        }
        worst = std::max(worst, best);
      }
    }
    CHECK(worst <= 0.5);
  }
}

TEST_CASE("the latent kind fills shapes and stays reproducible") {
  SynthSpec spec;
  spec.kind = "latmog";
  spec.classes = 2;
  spec.train_per_class = 3;
  spec.test_per_class = 2;
  spec.descriptors_per_image = 80;
  spec.vocab = 4;
  spec.dim = 3;
  spec.seed = 909;
  const SynthDataset a = GenerateSynthetic(spec);
  const SynthDataset b = GenerateSynthetic(spec);
  CHECK(a.centers.size() == 0);
  REQUIRE(a.train.size() == 6);
  CHECK(a.train[0].data.rows() == 80);
  CHECK(a.train[0].data.cols() == 3);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK((a.train[i].data - b.train[i].data).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("embedding rotates the signal and adds only faint residual noise") {
  SynthSpec spec;
  spec.kind = "latmog";
  spec.classes = 1;
  spec.train_per_class = 12;
  spec.test_per_class = 1;
  spec.descriptors_per_image = 300;
  spec.vocab = 4;
  spec.dim = 3;
  spec.embed_dim = 6;
  spec.residual_sigma = 0.05;
  spec.seed = 910;
  const SynthDataset data = GenerateSynthetic(spec);
  REQUIRE(data.train[0].data.cols() == 6);

  Eigen::MatrixXd pooled(12 * 300, 6);
  for (int i = 0; i < 12; ++i) {
    pooled.middleRows(i * 300, 300) = data.train[i].data;
  }
  const PcaModel pca = FitPca(pooled, 6);
  for (int j = 0; j < 3; ++j) CHECK(pca.eigenvalues[j] > 0.1);
  for (int j = 3; j < 6; ++j) CHECK(pca.eigenvalues[j] < 0.01);

  SynthSpec bad = spec;
  bad.embed_dim = 2;
  CHECK_THROWS_AS(GenerateSynthetic(bad), std::invalid_argument);
}

TEST_CASE("sweep rows are deterministic and skip infeasible pairs") {
  SynthSpec spec;
  spec.kind = "latmog";
  spec.classes = 2;
  spec.train_per_class = 8;
  spec.test_per_class = 8;
  spec.descriptors_per_image = 120;
  spec.vocab = 4;
  spec.dim = 4;
  spec.embed_dim = 8;
  spec.class_offset = 0.8;
  spec.seed = 911;
  const SynthDataset data = GenerateSynthetic(spec);

  const std::vector<SweepPoint> pairs = {{2, 8}, {4, 4}, {4, 4}, {99, 1}};
  const std::vector<SweepRow> rows =
      LoglikVsPerformanceSweep(data, pairs, 17, 2, 5000);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].dim == rows[2].dim);
  CHECK(rows[1].components == rows[2].components);
  CHECK(rows[1].loglik_per_descriptor == rows[2].loglik_per_descriptor);
  CHECK(rows[1].metric == rows[2].metric);
  for (const SweepRow& row : rows) {
    CHECK(std::isfinite(row.loglik_per_descriptor));
    CHECK(row.metric >= 0.0);
    CHECK(row.metric <= 1.0);
  }
}

TEST_CASE("held-out likelihood peaks once the subspace covers the structure") {
  SynthSpec spec;
  spec.kind = "latmog";
  spec.classes = 2;
  spec.train_per_class = 24;
  spec.test_per_class = 24;
  spec.descriptors_per_image = 250;
  spec.vocab = 8;
  spec.dim = 8;
  spec.embed_dim = 16;
  spec.class_offset = 0.5;
  spec.residual_sigma = 0.05;
  spec.seed = 912;
  const SynthDataset data = GenerateSynthetic(spec);

  const std::vector<SweepPoint> pairs = {{2, 32}, {4, 16}, {8, 8}, {16, 4}};
  const std::vector<SweepRow> rows =
      LoglikVsPerformanceSweep(data, pairs, 23, 0, 8000);
  REQUIRE(rows.size() == 4);
  const double low = std::max(rows[0].loglik_per_descriptor,
                              rows[1].loglik_per_descriptor);
  const double high = std::max(rows[2].loglik_per_descriptor,
                               rows[3].loglik_per_descriptor);
  CHECK(high > low);
}

}  // namespace
}  // namespace nifv
