// src/descriptors.cpp

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

#include "nifv/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace nifv {

namespace {

constexpr char kMagic[4] = {'N', 'I', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 24;

[[noreturn]] void Fail(const std::string& path, std::size_t offset,
                       const std::string& what) {
  throw std::runtime_error(path + ": " + what + " at byte " +
                           std::to_string(offset));
}

std::vector<char> ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

template <class T>
T ReadScalar(const std::vector<char>& bytes, std::size_t offset,
             const std::string& path) {
  if (offset + sizeof(T) > bytes.size())
    Fail(path, offset, "unexpected end of file");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

}  // namespace

DescriptorSet ReadDescriptorFile(const std::string& path) {
  const std::vector<char> bytes = ReadAll(path);
  if (bytes.size() < kHeaderBytes) Fail(path, bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) Fail(path, 0, "bad magic");
  const auto version = ReadScalar<std::uint32_t>(bytes, 4, path);
  if (version != kVersion)
    Fail(path, 4, "unsupported version " + std::to_string(version));
  const auto n = ReadScalar<std::uint64_t>(bytes, 8, path);
  const auto dim = ReadScalar<std::uint32_t>(bytes, 16, path);
  const auto flags = ReadScalar<std::uint8_t>(bytes, 20, path);
  if (flags & ~std::uint8_t{1}) Fail(path, 20, "unknown flag bits");
  for (std::size_t i = 21; i < kHeaderBytes; ++i) {
    if (bytes[i] != 0) Fail(path, i, "nonzero header padding");
  }
  if (n > 0 && dim == 0) Fail(path, 16, "zero dimension with nonzero rows");
  const bool has_coords = flags & 1;
  const std::uint64_t data_floats = n * static_cast<std::uint64_t>(dim);
  const std::uint64_t coord_floats = has_coords ? n * 2 : 0;
  const std::uint64_t want =
      kHeaderBytes + 4 * (data_floats + coord_floats);
  if (bytes.size() < want) Fail(path, bytes.size(), "unexpected end of file");
  if (bytes.size() > want) Fail(path, want, "trailing bytes");

  DescriptorSet set;
  set.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::size_t off = kHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j, off += 4) {
      float f;
      std::memcpy(&f, bytes.data() + off, 4);
      set.data(static_cast<Eigen::Index>(i), j) = f;
    }
  }
  if (has_coords) {
    set.coords.resize(static_cast<Eigen::Index>(n), 2);
    for (std::uint64_t i = 0; i < n; ++i) {
      for (int j = 0; j < 2; ++j, off += 4) {
        float f;
        std::memcpy(&f, bytes.data() + off, 4);
        set.coords(static_cast<Eigen::Index>(i), j) = f;
      }
    }
  } else {
    set.coords.resize(0, 2);
  }
  return set;
}

void WriteDescriptorFile(const DescriptorSet& set, const std::string& path) {
  if (set.coords.rows() != 0 && set.coords.rows() != set.data.rows())
    throw std::invalid_argument(path + ": coords row count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::uint64_t n = static_cast<std::uint64_t>(set.data.rows());
  const std::uint32_t dim = static_cast<std::uint32_t>(set.data.cols());
  const std::uint8_t flags = set.HasCoords() ? 1 : 0;
  char header[kHeaderBytes] = {};
  std::memcpy(header, kMagic, 4);
  std::memcpy(header + 4, &kVersion, 4);
  std::memcpy(header + 8, &n, 8);
  std::memcpy(header + 16, &dim, 4);
  std::memcpy(header + 20, &flags, 1);
  out.write(header, kHeaderBytes);
  std::vector<float> row(dim);
  for (Eigen::Index i = 0; i < set.data.rows(); ++i) {
    for (std::uint32_t j = 0; j < dim; ++j)
      row[j] = static_cast<float>(set.data(i, j));
    out.write(reinterpret_cast<const char*>(row.data()), 4 * dim);
  }
  if (flags & 1) {
    for (Eigen::Index i = 0; i < set.coords.rows(); ++i) {
      const float c[2] = {static_cast<float>(set.coords(i, 0)),
                          static_cast<float>(set.coords(i, 1))};
      out.write(reinterpret_cast<const char*>(c), 8);
    }
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

PcaModel FitPca(const Eigen::MatrixXd& samples, int keep) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (n <= dim)
    throw std::invalid_argument("FitPca: need more samples than dimensions");
  if (keep < 1 || keep > dim)
    throw std::invalid_argument("FitPca: keep out of range");

  PcaModel pca;
  pca.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - pca.mean.transpose();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("FitPca: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; flip to descending.
  pca.eigenvalues = solver.eigenvalues().reverse();
  pca.basis = solver.eigenvectors().rowwise().reverse();
  pca.eigenvalues = pca.eigenvalues.cwiseMax(0.0);

  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::Index arg = 0;
    double best = std::abs(pca.basis(0, c));
    for (Eigen::Index r = 1; r < dim; ++r) {
      const double v = std::abs(pca.basis(r, c));
      if (v > best) {
        best = v;
        arg = r;
      }
    }
    if (pca.basis(arg, c) < 0.0) pca.basis.col(c) = -pca.basis.col(c);
  }

  pca.keep = keep;
  pca.residual_variances = pca.eigenvalues.tail(dim - keep);
  return pca;
}

Eigen::MatrixXd PcaProject(const PcaModel& pca, const Eigen::MatrixXd& rows) {
  if (rows.cols() != pca.mean.size())
    throw std::invalid_argument("PcaProject: dimension mismatch");
  return (rows.rowwise() - pca.mean.transpose()) *
         pca.basis.leftCols(pca.keep);
}

DescriptorSet PcaProject(const PcaModel& pca, const DescriptorSet& set) {
  DescriptorSet out;
  out.image_id = set.image_id;
  out.data = PcaProject(pca, set.data);
  out.coords = set.coords;
  return out;
}

Eigen::VectorXd PcaRotateFull(const PcaModel& pca, const Eigen::VectorXd& x) {
  if (x.size() != pca.mean.size())
    throw std::invalid_argument("PcaRotateFull: dimension mismatch");
  return pca.basis.transpose() * (x - pca.mean);
}

namespace {

std::vector<std::string> SplitFields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

DatasetIndex ReadDatasetIndex(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  DatasetIndex index;
  index.base_dir = std::filesystem::path(path).parent_path().string();
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = SplitFields(line, '\t');
    if (fields.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 4 tab-separated fields, got " +
                               std::to_string(fields.size()));
    DatasetEntry entry;
    entry.image_id = fields[0];
    entry.path = fields[1];
    entry.split = fields[2];
    if (entry.image_id.empty() || entry.path.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": empty image id or path");
    if (entry.split != "train" && entry.split != "val" &&
        entry.split != "test")
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown split '" + entry.split + "'");
    if (!seen.insert(entry.image_id).second)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": duplicate image id '" + entry.image_id +
                               "'");
    if (!fields[3].empty()) {
      for (const std::string& label : SplitFields(fields[3], ',')) {
        if (label.empty())
          throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                   ": empty label");
        entry.labels.push_back(label);
      }
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void WriteDatasetIndex(const DatasetIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const DatasetEntry& e : index.entries) {
    out << e.image_id << '\t' << e.path << '\t' << e.split << '\t';
    for (std::size_t i = 0; i < e.labels.size(); ++i) {
      if (i) out << ',';
      out << e.labels[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string ResolveDescriptorPath(const DatasetIndex& index,
                                  const DatasetEntry& entry) {
  std::filesystem::path p(entry.path);
  if (p.is_absolute() || index.base_dir.empty()) return entry.path;
  return (std::filesystem::path(index.base_dir) / p).string();
}

std::vector<std::string> CollectLabels(const DatasetIndex& index) {
  std::set<std::string> labels;
  for (const DatasetEntry& e : index.entries)
    labels.insert(e.labels.begin(), e.labels.end());
  return std::vector<std::string>(labels.begin(), labels.end());
}

}  // namespace nifv
