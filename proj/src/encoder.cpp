// src/encoder.cpp

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

#include "nifv/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace nifv {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

constexpr double kStdFloor = 1e-8;
constexpr char kVectorMagic[4] = {'N', 'I', 'F', 'V'};
constexpr std::uint32_t kVectorVersion = 1;
constexpr std::uint32_t kMaxBlockName = 4096;

[[noreturn]] void ParseFail(const std::string& path, const std::string& what,
                            std::size_t offset) {
  throw std::runtime_error(path + ": " + what + " at byte " +
                           std::to_string(offset));
}

}  // namespace

WhitenStats FitWhitening(const Eigen::MatrixXd& train_rows) {
  const int n = static_cast<int>(train_rows.rows());
  const int dim = static_cast<int>(train_rows.cols());
  if (n < 2) {
    throw std::invalid_argument("FitWhitening: need at least two vectors");
  }
  WhitenStats stats;
  stats.mean = train_rows.colwise().mean().transpose();
  stats.std_dev.resize(dim);
  int floored = 0;
  for (int j = 0; j < dim; ++j) {
    const double var =
        (train_rows.col(j).array() - stats.mean[j]).square().sum() / n;
    const double dev = std::sqrt(var);
    if (dev < kStdFloor) {
      stats.std_dev[j] = kStdFloor;
      ++floored;
    } else {
      stats.std_dev[j] = dev;
    }
  }
  if (floored > 0) {
    std::cerr << "FitWhitening: " << floored
              << " constant dimensions floored\n";
  }
  return stats;
}

Eigen::VectorXd Whiten(const WhitenStats& stats, const Eigen::VectorXd& v) {
  if (v.size() != stats.mean.size()) {
    throw std::invalid_argument("Whiten: dimension mismatch");
  }
  return (v - stats.mean).cwiseQuotient(stats.std_dev);
}

Eigen::VectorXd PowerNormalize(const Eigen::VectorXd& v, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("PowerNormalize: rho must lie in [0, 1]");
  }
  if (rho == 1.0) return v;
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (x == 0.0) {
      out[i] = 0.0;
    } else if (rho == 0.0) {
      out[i] = x > 0.0 ? 1.0 : -1.0;
    } else {
      out[i] = std::copysign(std::pow(std::abs(x), rho), x);
    }
  }
  return out;
}

Eigen::VectorXd L2Normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm == 0.0) return v;
  return v / norm;
}

SpmGrid SpmGrid::Single() {
  SpmGrid grid;
  grid.cells.push_back({0.0, 0.0, 1.0, 1.0});
  return grid;
}

SpmGrid SpmGrid::Default() {
  SpmGrid grid;
  grid.cells.push_back({0.0, 0.0, 1.0, 1.0});
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      grid.cells.push_back({0.5 * c, 0.5 * r, 0.5 * (c + 1), 0.5 * (r + 1)});
    }
  }
  for (int r = 0; r < 3; ++r) {
    grid.cells.push_back({0.0, r / 3.0, 1.0, (r + 1) / 3.0});
  }
  return grid;
}

bool CellContains(const SpmCell& cell, double x, double y) {
  const bool in_x =
      x >= cell.x0 && (x < cell.x1 || (cell.x1 >= 1.0 && x <= 1.0));
  const bool in_y =
      y >= cell.y0 && (y < cell.y1 || (cell.y1 >= 1.0 && y <= 1.0));
  return in_x && in_y;
}

void ValidateEncoderModel(const EncoderModel& model) {
  ValidateGmm(model.vocab);
  const int k = model.vocab.Components();
  switch (model.kind) {
    case ModelKind::kBow:
      if (model.bow.gamma.size() != k) {
        throw std::invalid_argument(
            "count model size does not match vocabulary");
      }
      break;
    case ModelKind::kPolya:
      if (model.polya.alpha.size() != k) {
        throw std::invalid_argument(
            "count model size does not match vocabulary");
      }
      for (int c = 0; c < k; ++c) {
        if (!std::isfinite(model.polya.alpha[c]) ||
            model.polya.alpha[c] <= 0.0) {
          throw std::invalid_argument("alpha entries must be positive");
        }
      }
      break;
    case ModelKind::kPlsa:
      ValidatePlsa(model.plsa);
      if (model.plsa.Words() != k) {
        throw std::invalid_argument(
            "count model size does not match vocabulary");
      }
      break;
    case ModelKind::kLda:
      ValidateLda(model.lda);
      if (model.lda.Words() != k) {
        throw std::invalid_argument(
            "count model size does not match vocabulary");
      }
      break;
    case ModelKind::kMog:
      break;
    case ModelKind::kLatentMog:
      ValidateLatentMog(model.latent);
      if (model.latent.Components() != k ||
          model.latent.Dim() != model.vocab.Dim()) {
        throw std::invalid_argument(
            "latent model shape does not match vocabulary");
      }
      break;
  }
}

std::vector<BlockSpec> ScoreLayout(const EncoderModel& model) {
  const int k = model.vocab.Components();
  const int d = model.vocab.Dim();
  switch (model.kind) {
    case ModelKind::kBow:
      return {{"bow.gamma", k}};
    case ModelKind::kPolya:
      return {{"polya.alpha", k}};
    case ModelKind::kPlsa: {
      const int t = model.plsa.Topics();
      return {{"plsa.theta", t}, {"plsa.pi", t * k}};
    }
    case ModelKind::kLda: {
      const int t = model.lda.Topics();
      return {{"lda.alpha", t}, {"lda.eta", t * k}};
    }
    case ModelKind::kMog:
      return {{"mog.gamma", k}, {"mog.mu", k * d}, {"mog.lambda", k * d}};
    case ModelKind::kLatentMog:
      return {{"latmog.alpha", k},
              {"latmog.m", k * d},
              {"latmog.beta", k * d},
              {"latmog.a", k * d},
              {"latmog.b", k * d}};
  }
  throw std::logic_error("unknown model kind");
}

int ScoreLength(const EncoderModel& model) {
  int total = 0;
  for (const BlockSpec& block : ScoreLayout(model)) total += block.length;
  return total;
}

Eigen::VectorXd RawScoreFromStats(const EncoderModel& model,
                                  const SufficientStats& stats) {
  ValidateEncoderModel(model);
  const int k = model.vocab.Components();
  const int d = model.vocab.Dim();
  if (stats.s0.size() != k || stats.s1.rows() != k || stats.s1.cols() != d) {
    throw std::invalid_argument("statistics shape does not match vocabulary");
  }
  switch (model.kind) {
    case ModelKind::kBow:
      return BowFisherScore(model.bow, stats.s0);
    case ModelKind::kPolya:
      return PolyaFisherScore(model.polya, stats.s0);
    case ModelKind::kPlsa:
      return PlsaFisherScore(model.plsa, stats.s0);
    case ModelKind::kLda: {
      LdaPosterior post = LdaInfer(model.lda, stats.s0);
      return LdaFisherScore(model.lda, post);
    }
    case ModelKind::kMog:
      return MogFisherScore(model.vocab, stats);
    case ModelKind::kLatentMog: {
      LatentMogPosterior post = PosteriorFromStats(model.latent, stats);
      return LatentMogFisherScore(model.latent, post);
    }
  }
  throw std::logic_error("unknown model kind");
}

FisherVector EncodeRawImage(const EncoderModel& model,
                            const EncodeOptions& opts,
                            const DescriptorSet& set) {
  ValidateEncoderModel(model);
  if (set.data.cols() != model.vocab.Dim()) {
    throw std::invalid_argument("descriptor width does not match vocabulary");
  }
  SpmGrid grid = opts.grid;
  if (grid.cells.empty()) {
    throw std::invalid_argument("grid needs at least one cell");
  }
  if (grid.cells.size() > 1 && !set.HasCoords()) {
    std::cerr << "EncodeRawImage: " << set.image_id
              << " has no patch coordinates; using a single cell\n";
    grid = SpmGrid::Single();
  }

  const int n = static_cast<int>(set.data.rows());
  const int k = model.vocab.Components();
  Eigen::MatrixXd resp(0, k);
  if (n > 0) {
    resp = Posteriors(model.vocab, set.data);
    if (opts.clip > 0) resp = ClipPosteriors(resp, opts.clip);
  }

  const std::vector<BlockSpec> layout = ScoreLayout(model);
  const int base_len = ScoreLength(model);
  const int cells = static_cast<int>(grid.cells.size());

  FisherVector fv;
  fv.values.resize(static_cast<int>(cells) * base_len);
  int offset = 0;
  for (int ci = 0; ci < cells; ++ci) {
    std::vector<int> members;
    if (cells == 1) {
      members.resize(n);
      for (int i = 0; i < n; ++i) members[i] = i;
    } else {
      for (int i = 0; i < n; ++i) {
        const double x = std::clamp(static_cast<double>(set.coords(i, 0)),
                                    0.0, 1.0);
        const double y = std::clamp(static_cast<double>(set.coords(i, 1)),
                                    0.0, 1.0);
        if (CellContains(grid.cells[ci], x, y)) members.push_back(i);
      }
    }

    Eigen::MatrixXd cell_rows(members.size(), set.data.cols());
    Eigen::MatrixXd cell_resp(members.size(), k);
    for (std::size_t r = 0; r < members.size(); ++r) {
      cell_rows.row(r) = set.data.row(members[r]);
      cell_resp.row(r) = resp.row(members[r]);
    }
    SufficientStats stats = AccumulateStats(cell_resp, cell_rows);
    Eigen::VectorXd block = RawScoreFromStats(model, stats);

    fv.values.segment(offset, base_len) = block;
    const std::string prefix =
        cells > 1 ? "cell" + std::to_string(ci) + "/" : "";
    int local = 0;
    for (const BlockSpec& spec : layout) {
      fv.block_names.push_back(prefix + spec.name);
      fv.block_offsets.push_back(offset + local);
      fv.block_lengths.push_back(spec.length);
      local += spec.length;
    }
    offset += base_len;
  }
  return fv;
}

Eigen::VectorXd FinalizeVector(const Eigen::VectorXd& raw,
                               const WhitenStats* whiten, double rho) {
  Eigen::VectorXd v = whiten != nullptr ? Whiten(*whiten, raw) : raw;
  return L2Normalize(PowerNormalize(v, rho));
}

void WriteVectorFile(const FisherVector& fv, const std::string& path) {
  const std::size_t blocks = fv.block_names.size();
  if (fv.block_offsets.size() != blocks || fv.block_lengths.size() != blocks) {
    throw std::invalid_argument(path + ": layout arrays disagree in size");
  }
  int running = 0;
  for (std::size_t i = 0; i < blocks; ++i) {
    if (fv.block_names[i].empty() ||
        fv.block_names[i].size() > kMaxBlockName) {
      throw std::invalid_argument(path + ": bad block name");
    }
    if (fv.block_offsets[i] != running || fv.block_lengths[i] < 0) {
      throw std::invalid_argument(path + ": layout is not contiguous");
    }
    running += fv.block_lengths[i];
  }
  if (running != fv.values.size()) {
    throw std::invalid_argument(path + ": layout does not cover the vector");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  auto put_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  out.write(kVectorMagic, 4);
  put_u32(kVectorVersion);
  put_u32(static_cast<std::uint32_t>(fv.values.size()));
  put_u32(static_cast<std::uint32_t>(blocks));
  for (std::size_t i = 0; i < blocks; ++i) {
    put_u32(static_cast<std::uint32_t>(fv.block_names[i].size()));
    out.write(fv.block_names[i].data(),
              static_cast<std::streamsize>(fv.block_names[i].size()));
    put_u32(static_cast<std::uint32_t>(fv.block_offsets[i]));
    put_u32(static_cast<std::uint32_t>(fv.block_lengths[i]));
  }
  for (int i = 0; i < fv.values.size(); ++i) {
    const float v = static_cast<float>(fv.values[i]);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

FisherVector ReadVectorFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto need = [&](std::size_t count, const char* what) {
    if (pos + count > bytes.size()) {
      ParseFail(path, std::string("unexpected end of file reading ") + what,
                pos);
    }
  };
  auto get_u32 = [&](const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };

  need(4, "magic");
  if (std::memcmp(bytes.data(), kVectorMagic, 4) != 0) {
    ParseFail(path, "bad magic", 0);
  }
  pos = 4;
  const std::uint32_t version = get_u32("version");
  if (version != kVectorVersion) ParseFail(path, "unsupported version", 4);
  const std::uint32_t length = get_u32("length");
  const std::uint32_t blocks = get_u32("block count");

  FisherVector fv;
  std::uint32_t running = 0;
  for (std::uint32_t i = 0; i < blocks; ++i) {
    const std::size_t name_pos = pos;
    const std::uint32_t name_len = get_u32("block name length");
    if (name_len == 0 || name_len > kMaxBlockName) {
      ParseFail(path, "bad block name length", name_pos);
    }
    need(name_len, "block name");
    fv.block_names.emplace_back(bytes.data() + pos, name_len);
    pos += name_len;
    const std::size_t span_pos = pos;
    const std::uint32_t offset = get_u32("block offset");
    const std::uint32_t block_len = get_u32("block length");
    if (offset != running || offset + block_len > length) {
      ParseFail(path, "layout is not contiguous", span_pos);
    }
    running = offset + block_len;
    fv.block_offsets.push_back(static_cast<int>(offset));
    fv.block_lengths.push_back(static_cast<int>(block_len));
  }
  if (running != length) {
    ParseFail(path, "layout does not cover the vector", pos);
  }

  need(4ull * length, "payload");
  fv.values.resize(length);
  for (std::uint32_t i = 0; i < length; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    fv.values[i] = static_cast<double>(v);
  }
  if (pos != bytes.size()) ParseFail(path, "trailing bytes", pos);
  return fv;
}

}  // namespace nifv
