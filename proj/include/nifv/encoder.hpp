// include/nifv/encoder.hpp

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

#ifndef NIFV_ENCODER_HPP_
#define NIFV_ENCODER_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nifv/count_models.hpp"
#include "nifv/descriptors.hpp"
#include "nifv/gmm.hpp"
#include "nifv/latent_mog.hpp"
#include "nifv/topic_models.hpp"

namespace nifv {

// Per-dimension standardization fitted on training vectors only.
struct WhitenStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;  // floored at 1e-8
};

WhitenStats FitWhitening(const Eigen::MatrixXd& train_rows);
Eigen::VectorXd Whiten(const WhitenStats& stats, const Eigen::VectorXd& v);

// sign(x) |x|^rho elementwise with 0 -> 0 for every rho in [0, 1];
// rho = 0 degenerates to the sign function.
Eigen::VectorXd PowerNormalize(const Eigen::VectorXd& v, double rho);

// v / ||v||; the zero vector maps to itself.
Eigen::VectorXd L2Normalize(const Eigen::VectorXd& v);

struct SpmCell {
  double x0, y0, x1, y1;
};

struct SpmGrid {
  std::vector<SpmCell> cells;
  static SpmGrid Single();
  // 1x1, 2x2, and three horizontal stripes: eight cells.
  static SpmGrid Default();
};

// Patch centers on the cell's right or bottom edge belong to the cell
// only where that edge touches the unit square's boundary.
bool CellContains(const SpmCell& cell, double x, double y);

enum class ModelKind { kBow, kPolya, kPlsa, kLda, kMog, kLatentMog };

// The scored model together with the soft-count vocabulary. Count-based
// kinds read counts from the vocabulary's posterior mass; kMog scores
// the vocabulary mixture itself.
struct EncoderModel {
  ModelKind kind = ModelKind::kBow;
  GaussianMixture vocab;
  MultinomialModel bow;
  PolyaModel polya;
  PlsaModel plsa;
  LdaModel lda;
  LatentMogModel latent;
};

void ValidateEncoderModel(const EncoderModel& model);

struct BlockSpec {
  std::string name;
  int length;
};

// Named parameter blocks of a single-cell score, in emission order.
std::vector<BlockSpec> ScoreLayout(const EncoderModel& model);
int ScoreLength(const EncoderModel& model);

// Unnormalized score of one descriptor pool from its statistics.
Eigen::VectorXd RawScoreFromStats(const EncoderModel& model,
                                  const SufficientStats& stats);

struct EncodeOptions {
  SpmGrid grid = SpmGrid::Single();
  int clip = 0;  // keep the top clip posteriors per descriptor; 0 keeps all
};

struct FisherVector {
  Eigen::VectorXd values;
  std::vector<std::string> block_names;
  std::vector<int> block_offsets;
  std::vector<int> block_lengths;
};

// Concatenated per-cell raw scores with a named layout. Cells without
// descriptors contribute exactly zero blocks. Multi-cell grids require
// patch coordinates; without them the grid falls back to a single cell
// with a warning.
FisherVector EncodeRawImage(const EncoderModel& model,
                            const EncodeOptions& opts,
                            const DescriptorSet& set);

// whiten -> power -> l2; pass a null whitening to skip standardization.
Eigen::VectorXd FinalizeVector(const Eigen::VectorXd& raw,
                               const WhitenStats* whiten, double rho);

FisherVector ReadVectorFile(const std::string& path);
void WriteVectorFile(const FisherVector& fv, const std::string& path);

}  // namespace nifv

#endif  // NIFV_ENCODER_HPP_
