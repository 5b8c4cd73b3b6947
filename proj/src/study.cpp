// src/study.cpp

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

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "nifv/encoder.hpp"
#include "nifv/eval.hpp"
#include "nifv/latent_mog.hpp"
#include "nifv/parallel.hpp"
#include "nifv/rng.hpp"

namespace nifv {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Shared generator state derived once from the dataset seed; per-image draws
// then come from independent streams so images are reproducible in isolation.
struct SynthSetup {
  Eigen::MatrixXd centers;                    // vocab x dim
  Eigen::MatrixXd topic_word;                 // topics x vocab
  std::vector<Eigen::VectorXd> class_alpha;   // Dirichlet parameters
  Eigen::VectorXd lat_alpha;                  // vocab
  std::vector<Eigen::MatrixXd> class_m;       // vocab x dim per class
  double lat_a = 0.0;
  double lat_b = 0.0;
  double lat_beta = 0.0;
  Eigen::MatrixXd embed_q;                    // embed_dim x embed_dim
};

void ValidateSpec(const SynthSpec& spec) {
  if (spec.kind != "polya" && spec.kind != "plsa" && spec.kind != "lda" &&
      spec.kind != "latmog") {
    throw std::invalid_argument("unknown generator kind: " + spec.kind);
  }
  if (spec.classes < 1 || spec.train_per_class < 1 ||
      spec.test_per_class < 1 || spec.descriptors_per_image < 1) {
    throw std::invalid_argument("generator counts must be at least 1");
  }
  if (spec.vocab < 2 || spec.dim < 1) {
    throw std::invalid_argument("generator needs vocab >= 2 and dim >= 1");
  }
  if ((spec.kind == "plsa" || spec.kind == "lda") && spec.topics < 1) {
    throw std::invalid_argument("topic kinds need topics >= 1");
  }
  if (!(spec.concentration > 0.0) || !(spec.within_sigma >= 0.0)) {
    throw std::invalid_argument("bad prior strength or emission noise");
  }
  if (spec.embed_dim != 0 && spec.embed_dim < spec.dim) {
    throw std::invalid_argument("embedding cannot shrink the dimension");
  }
  if (spec.kind == "latmog" &&
      (!(spec.latent_gamma_shape > 0.0) || !(spec.latent_beta > 0.0))) {
    throw std::invalid_argument("latent prior parameters must be positive");
  }
}

Eigen::VectorXd DirichletDraw(std::mt19937_64* rng,
                              const Eigen::VectorXd& alpha) {
  Eigen::VectorXd draw(alpha.size());
  for (int i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    draw[i] = gamma(*rng);
  }
  const double total = draw.sum();
  if (total <= 0.0) {
    draw.setConstant(1.0 / alpha.size());
    return draw;
  }
  return draw / total;
}

// Class prior means share one base draw and differ by a log-scale pattern,
// so class separation never destroys the burstiness of the per-image draw.
std::vector<Eigen::VectorXd> ClassDirichlets(std::mt19937_64* rng, int size,
                                             int classes, double concentration,
                                             double offset) {
  Eigen::VectorXd base(size);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (int i = 0; i < size; ++i) base[i] = gamma(*rng) + 1e-8;
  base /= base.sum();

  std::bernoulli_distribution flip(0.5);
  std::vector<Eigen::VectorXd> out;
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd mean(size);
    for (int i = 0; i < size; ++i) {
      mean[i] = base[i] * std::exp(flip(*rng) ? offset : -offset);
    }
    mean /= mean.sum();
    out.push_back(concentration * mean);
  }
  return out;
}

SynthSetup BuildSetup(const SynthSpec& spec) {
  std::mt19937_64 rng(MixSeed(spec.seed, 0));
  std::normal_distribution<double> unit(0.0, 1.0);

  SynthSetup setup;
  setup.centers.resize(spec.vocab, spec.dim);
  for (int k = 0; k < spec.vocab; ++k) {
    for (int d = 0; d < spec.dim; ++d) setup.centers(k, d) = 2.5 * unit(rng);
  }

  if (spec.kind == "plsa" || spec.kind == "lda") {
    setup.topic_word.resize(spec.topics, spec.vocab);
    for (int t = 0; t < spec.topics; ++t) {
      setup.topic_word.row(t) =
          DirichletDraw(&rng, Eigen::VectorXd::Constant(spec.vocab, 0.5))
              .transpose();
    }
    setup.class_alpha = ClassDirichlets(&rng, spec.topics, spec.classes,
                                        spec.concentration, spec.class_offset);
  } else if (spec.kind == "polya") {
    setup.class_alpha = ClassDirichlets(&rng, spec.vocab, spec.classes,
                                        spec.concentration, spec.class_offset);
  } else {
    setup.lat_alpha =
        Eigen::VectorXd::Constant(spec.vocab, spec.concentration / spec.vocab);
    setup.lat_a = spec.latent_gamma_shape;
    setup.lat_b = spec.latent_gamma_shape;  // unit expected within variance
    setup.lat_beta = spec.latent_beta;
    std::bernoulli_distribution flip(0.5);
    for (int c = 0; c < spec.classes; ++c) {
      Eigen::MatrixXd m = setup.centers;
      for (int k = 0; k < spec.vocab; ++k) {
        for (int d = 0; d < spec.dim; ++d) {
          m(k, d) += flip(rng) ? spec.class_offset : -spec.class_offset;
        }
      }
      setup.class_m.push_back(m);
    }
  }

  if (spec.embed_dim > 0) {
    Eigen::MatrixXd g(spec.embed_dim, spec.embed_dim);
    for (int i = 0; i < spec.embed_dim; ++i) {
      for (int j = 0; j < spec.embed_dim; ++j) g(i, j) = unit(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < spec.embed_dim; ++j) {
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    setup.embed_q = q;
  }
  return setup;
}

int DrawIndex(std::mt19937_64* rng, const Eigen::VectorXd& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double rest = u(*rng);
  for (int i = 0; i < probs.size(); ++i) {
    rest -= probs[i];
    if (rest <= 0.0) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

DescriptorSet MakeImage(const SynthSpec& spec, const SynthSetup& setup,
                        int cls, std::uint64_t stream) {
  std::mt19937_64 rng(MixSeed(spec.seed, stream));
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n = spec.descriptors_per_image;

  Eigen::MatrixXd data(n, spec.dim);
  if (spec.kind == "latmog") {
    const Eigen::VectorXd pi = DirichletDraw(&rng, setup.lat_alpha);
    Eigen::MatrixXd lambda(spec.vocab, spec.dim);
    Eigen::MatrixXd mu(spec.vocab, spec.dim);
    std::gamma_distribution<double> gamma(setup.lat_a, 1.0 / setup.lat_b);
    for (int k = 0; k < spec.vocab; ++k) {
      for (int d = 0; d < spec.dim; ++d) {
        lambda(k, d) = std::max(gamma(rng), 1e-8);
        mu(k, d) = setup.class_m[cls](k, d) +
                   unit(rng) / std::sqrt(setup.lat_beta * lambda(k, d));
      }
    }
    for (int i = 0; i < n; ++i) {
      const int z = DrawIndex(&rng, pi);
      for (int d = 0; d < spec.dim; ++d) {
        data(i, d) = mu(z, d) + unit(rng) / std::sqrt(lambda(z, d));
      }
    }
  } else {
    Eigen::VectorXd word_probs;
    Eigen::VectorXd theta;
    if (spec.kind == "polya") {
      word_probs = DirichletDraw(&rng, setup.class_alpha[cls]);
    } else {
      theta = DirichletDraw(&rng, setup.class_alpha[cls]);
    }
    for (int i = 0; i < n; ++i) {
      int w;
      if (spec.kind == "polya") {
        w = DrawIndex(&rng, word_probs);
      } else {
        const int t = DrawIndex(&rng, theta);
        w = DrawIndex(&rng, setup.topic_word.row(t).transpose());
      }
      for (int d = 0; d < spec.dim; ++d) {
        data(i, d) = setup.centers(w, d) + spec.within_sigma * unit(rng);
      }
    }
  }

  if (spec.embed_dim > 0) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(n, spec.embed_dim);
    padded.leftCols(spec.dim) = data;
    data = padded * setup.embed_q.transpose();
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < spec.embed_dim; ++d) {
        data(i, d) += spec.residual_sigma * unit(rng);
      }
    }
  }

  DescriptorSet set;
  set.data = data;
  return set;
}

std::string ImageName(const SynthSpec& spec, const std::string& split, int cls,
                      int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return spec.kind + "_" + split + "_c" + std::to_string(cls) + "_" + buf;
}

Eigen::MatrixXd PooledRows(const std::vector<DescriptorSet>& sets) {
  Eigen::Index total = 0;
  for (const DescriptorSet& set : sets) total += set.data.rows();
  if (total == 0) throw std::invalid_argument("no descriptors to pool");
  Eigen::MatrixXd rows(total, sets.front().data.cols());
  Eigen::Index at = 0;
  for (const DescriptorSet& set : sets) {
    rows.middleRows(at, set.data.rows()) = set.data;
    at += set.data.rows();
  }
  return rows;
}

Eigen::MatrixXd Subsample(const Eigen::MatrixXd& rows, int cap,
                          std::uint64_t seed) {
  if (rows.rows() <= cap) return rows;
  std::vector<int> index(rows.rows());
  std::iota(index.begin(), index.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < cap; ++i) {
    std::uniform_int_distribution<int> pick(i,
                                            static_cast<int>(index.size()) - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  index.resize(cap);
  std::sort(index.begin(), index.end());
  Eigen::MatrixXd out(cap, rows.cols());
  for (int i = 0; i < cap; ++i) out.row(i) = rows.row(index[i]);
  return out;
}

}  // namespace

void ValidateJointModel(const JointModel& joint) {
  ValidateGmm(joint.mixture);
  const int d0 = static_cast<int>(joint.pca.mean.size());
  if (joint.pca.basis.rows() != d0 || joint.pca.basis.cols() != d0) {
    throw std::invalid_argument("joint model needs the full rotation basis");
  }
  if (joint.pca.keep < 1 || joint.pca.keep > d0 ||
      joint.mixture.Dim() != joint.pca.keep) {
    throw std::invalid_argument(
        "mixture dimension does not match the kept subspace");
  }
  const int residual = d0 - joint.pca.keep;
  if (joint.pca.residual_variances.size() != residual) {
    throw std::invalid_argument("missing residual variances");
  }
  for (int j = 0; j < residual; ++j) {
    if (!(joint.pca.residual_variances[j] > 0.0)) {
      throw std::invalid_argument("residual variances must be positive");
    }
  }
}

Eigen::VectorXd JointLogLikelihoodRows(const JointModel& joint,
                                       const Eigen::MatrixXd& rows) {
  ValidateJointModel(joint);
  if (rows.cols() != joint.pca.mean.size()) {
    throw std::invalid_argument("vector width does not match the model");
  }
  const Eigen::MatrixXd rotated =
      (rows.rowwise() - joint.pca.mean.transpose()) * joint.pca.basis;
  Eigen::VectorXd ll =
      LogLikelihoodRows(joint.mixture, rotated.leftCols(joint.pca.keep));
  const int residual = static_cast<int>(joint.pca.mean.size()) - joint.pca.keep;
  for (int j = 0; j < residual; ++j) {
    const double var = joint.pca.residual_variances[j];
    const auto col = rotated.col(joint.pca.keep + j).array();
    ll.array() -= 0.5 * (kLog2Pi + std::log(var) + col.square() / var);
  }
  return ll;
}

double JointLogLikelihood(const JointModel& joint, const Eigen::VectorXd& x) {
  return JointLogLikelihoodRows(joint, x.transpose())[0];
}

double MonteCarloNormalization(const JointModel& joint, std::uint64_t seed,
                               int samples) {
  ValidateJointModel(joint);
  if (samples < 1000) {
    throw std::invalid_argument("normalization check needs >= 1000 samples");
  }
  const int d0 = static_cast<int>(joint.pca.mean.size());
  const int keep = joint.pca.keep;

  // Moment-matched diagonal proposal in the rotated frame, inflated so the
  // ratio stays bounded over the whole support.
  Eigen::VectorXd center = Eigen::VectorXd::Zero(d0);
  Eigen::VectorXd spread(d0);
  for (int j = 0; j < keep; ++j) {
    double mean = 0.0;
    double second = 0.0;
    for (int k = 0; k < joint.mixture.Components(); ++k) {
      mean += joint.mixture.weights[k] * joint.mixture.means(k, j);
      second += joint.mixture.weights[k] *
                (joint.mixture.variances(k, j) +
                 joint.mixture.means(k, j) * joint.mixture.means(k, j));
    }
    center[j] = mean;
    spread[j] = 2.0 * std::sqrt(std::max(second - mean * mean, 1e-12));
  }
  for (int j = keep; j < d0; ++j) {
    spread[j] = 2.0 * std::sqrt(joint.pca.residual_variances[j - keep]);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd draws(samples, d0);
  Eigen::VectorXd log_q = Eigen::VectorXd::Zero(samples);
  for (int s = 0; s < samples; ++s) {
    for (int j = 0; j < d0; ++j) {
      const double z = unit(rng);
      draws(s, j) = center[j] + spread[j] * z;
      log_q[s] -= 0.5 * (kLog2Pi + z * z) + std::log(spread[j]);
    }
  }
  const Eigen::MatrixXd x =
      (draws * joint.pca.basis.transpose()).rowwise() +
      joint.pca.mean.transpose();
  const Eigen::VectorXd log_p = JointLogLikelihoodRows(joint, x);
  return (log_p - log_q).array().exp().mean();
}

SynthDataset GenerateSynthetic(const SynthSpec& spec) {
  ValidateSpec(spec);
  const SynthSetup setup = BuildSetup(spec);

  SynthDataset out;
  if (spec.kind != "latmog") out.centers = setup.centers;

  const int train_total = spec.classes * spec.train_per_class;
  auto fill = [&](const std::string& split, int per_class,
                  std::uint64_t stream_base,
                  std::vector<DescriptorSet>* sets,
                  std::vector<std::string>* labels) {
    for (int c = 0; c < spec.classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        const std::uint64_t stream =
            1 + stream_base + static_cast<std::uint64_t>(c) * per_class + i;
        DescriptorSet set = MakeImage(spec, setup, c, stream);
        set.image_id = ImageName(spec, split, c, i);
        sets->push_back(std::move(set));
        labels->push_back("c" + std::to_string(c));
      }
    }
  };
  fill("train", spec.train_per_class, 0, &out.train, &out.train_labels);
  fill("test", spec.test_per_class, train_total, &out.test, &out.test_labels);
  return out;
}

std::vector<SweepRow> LoglikVsPerformanceSweep(
    const SynthDataset& data, const std::vector<SweepPoint>& pairs,
    std::uint64_t seed, int threads, int descriptor_cap) {
  if (data.train.empty() || data.test.empty()) {
    throw std::invalid_argument("sweep needs train and test images");
  }
  if (descriptor_cap < 1) {
    throw std::invalid_argument("descriptor cap must be positive");
  }
  const int d0 = static_cast<int>(data.train.front().data.cols());

  const std::set<std::string> class_set(data.train_labels.begin(),
                                        data.train_labels.end());
  const std::vector<std::string> classes(class_set.begin(), class_set.end());
  std::vector<int> test_truth(data.test_labels.size());
  for (std::size_t i = 0; i < data.test_labels.size(); ++i) {
    const auto it =
        std::find(classes.begin(), classes.end(), data.test_labels[i]);
    if (it == classes.end()) {
      throw std::invalid_argument("test label missing from training set: " +
                                  data.test_labels[i]);
    }
    test_truth[i] = static_cast<int>(it - classes.begin());
  }

  // One shared sample for every pair keeps the log-likelihood column
  // comparable across rows.
  const Eigen::MatrixXd train_sample =
      Subsample(PooledRows(data.train), descriptor_cap, MixSeed(seed, 101));
  const Eigen::MatrixXd test_sample =
      Subsample(PooledRows(data.test), descriptor_cap, MixSeed(seed, 202));

  std::vector<SweepRow> rows;
  for (const SweepPoint& pair : pairs) {
    if (pair.dim < 1 || pair.components < 1 || pair.dim > d0) {
      std::cerr << "sweep: skipping infeasible pair (" << pair.dim << ", "
                << pair.components << ")\n";
      continue;
    }
    const std::uint64_t pair_seed =
        MixSeed(seed, static_cast<std::uint64_t>(pair.dim) * 1000003 +
                          static_cast<std::uint64_t>(pair.components));

    const PcaModel pca = FitPca(train_sample, pair.dim);
    GmmTrainOptions gmm_opts;
    gmm_opts.threads = threads;
    const GaussianMixture gmm = TrainGmm(PcaProject(pca, train_sample),
                                         pair.components, pair_seed, gmm_opts);
    const JointModel joint{pca, gmm};
    const double loglik = JointLogLikelihoodRows(joint, test_sample).mean();

    const int fv_len = gmm.Components() * (1 + 2 * gmm.Dim());
    auto encode = [&](const std::vector<DescriptorSet>& sets) {
      Eigen::MatrixXd fvs(sets.size(), fv_len);
      ParallelFor(static_cast<int>(sets.size()), threads, [&](int i) {
        const Eigen::MatrixXd proj = PcaProject(pca, sets[i].data);
        const Eigen::MatrixXd resp = Posteriors(gmm, proj);
        const SufficientStats stats = AccumulateStats(resp, proj);
        const Eigen::VectorXd raw = MogFisherScore(gmm, stats);
        fvs.row(i) = L2Normalize(PowerNormalize(raw, 0.5)).transpose();
      });
      return fvs;
    };
    const Eigen::MatrixXd train_fvs = encode(data.train);
    const Eigen::MatrixXd test_fvs = encode(data.test);

    SvmTrainOptions svm_opts;
    svm_opts.threads = threads;
    const LinearModel svm =
        TrainLinearSvm(train_fvs, data.train_labels, pair_seed, svm_opts);
    const double metric =
        ArgmaxAccuracy(ScoreVectors(svm, test_fvs), test_truth);

    rows.push_back({pair.dim, pair.components, loglik, metric});
  }
  return rows;
}

}  // namespace nifv
