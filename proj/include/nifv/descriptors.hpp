// include/nifv/descriptors.hpp

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

#ifndef NIFV_DESCRIPTORS_HPP_
#define NIFV_DESCRIPTORS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace nifv {

// One image's local descriptors, one row per descriptor, plus optional
// spatial coordinates normalized to [0,1]^2.
struct DescriptorSet {
  std::string image_id;
  Eigen::MatrixXd data;                 // N x D
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;  // N x 2 or 0 x 2
  bool HasCoords() const {
    return coords.rows() == data.rows() && data.rows() > 0;
  }
};

struct PcaModel {
  Eigen::VectorXd mean;         // D0
  Eigen::MatrixXd basis;        // D0 x D0, unit eigenvectors in columns,
                                // ordered by descending eigenvalue
  Eigen::VectorXd eigenvalues;  // D0, descending, clamped at 0
  int keep = 0;                 // 1 <= keep <= D0
  Eigen::VectorXd residual_variances;  // D0 - keep trailing eigenvalues
};

// Eigendecomposition of the sample covariance (population normalization,
// 1/N). Requires samples.rows() > samples.cols() and 1 <= keep <= D0. The
// sign of each basis column is fixed so its largest-magnitude entry is
// positive, ties resolved toward the lower row index.
PcaModel FitPca(const Eigen::MatrixXd& samples, int keep);

// y = B_keep^T (x - mean), applied row-wise.
Eigen::MatrixXd PcaProject(const PcaModel& pca, const Eigen::MatrixXd& rows);
DescriptorSet PcaProject(const PcaModel& pca, const DescriptorSet& set);

// Full-rank rotation into the eigenbasis: all D0 coordinates of
// B^T (x - mean).
Eigen::VectorXd PcaRotateFull(const PcaModel& pca, const Eigen::VectorXd& x);

// Binary descriptor file: magic "NIFD", u32 version = 1, u64 row count,
// u32 dimension, u8 flags (bit 0: coords present), zero padding to byte 24,
// then row-major f32 data and, when flagged, N x 2 f32 coordinates. All
// fields little-endian. Malformed input throws std::runtime_error naming
// the offending byte offset.
DescriptorSet ReadDescriptorFile(const std::string& path);
void WriteDescriptorFile(const DescriptorSet& set, const std::string& path);

struct DatasetEntry {
  std::string image_id;
  std::string path;   // descriptor file; relative paths resolve against the index
  std::string split;  // train | val | test
  std::vector<std::string> labels;
};

struct DatasetIndex {
  std::vector<DatasetEntry> entries;
  std::string base_dir;  // directory of the index file, "" for in-memory indexes
};

// Tab-separated lines: image_id, path, split, comma-separated labels.
// Blank lines and lines starting with '#' are ignored.
DatasetIndex ReadDatasetIndex(const std::string& path);
void WriteDatasetIndex(const DatasetIndex& index, const std::string& path);

std::string ResolveDescriptorPath(const DatasetIndex& index,
                                  const DatasetEntry& entry);

// All class labels that occur in the index, sorted and deduplicated.
std::vector<std::string> CollectLabels(const DatasetIndex& index);

}  // namespace nifv

#endif  // NIFV_DESCRIPTORS_HPP_
