// src/model_io.cpp

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

#include "nifv/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace nifv {

namespace {

using Json = nlohmann::ordered_json;

Json VectorToJson(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json MatrixToJson(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd JsonToVector(const Json& j, const std::string& path,
                             const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw std::runtime_error(path + ": field " + field +
                             " must be a non-empty array");
  }
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw std::runtime_error(path + ": field " + field +
                               " holds a non-numeric entry");
    }
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) {
      throw std::runtime_error(path + ": field " + field +
                               " holds a non-finite entry");
    }
  }
  return v;
}

Eigen::MatrixXd JsonToMatrix(const Json& j, const std::string& path,
                             const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw std::runtime_error(path + ": field " + field +
                             " must be a non-empty array of rows");
  }
  Eigen::MatrixXd m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = JsonToVector(j[i], path, field);
    if (i == 0) {
      m.resize(j.size(), row.size());
    } else if (row.size() != m.cols()) {
      throw std::runtime_error(path + ": field " + field +
                               " has ragged rows");
    }
    m.row(i) = row.transpose();
  }
  return m;
}

void RequireFinite(bool ok, const std::string& path) {
  if (!ok) {
    throw std::invalid_argument(path +
                                ": refusing to store non-finite parameters");
  }
}

void WriteJson(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

Json ReadJson(const std::string& path, const std::string& expected_type) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw std::runtime_error(path + ": missing model type tag");
  }
  if (!expected_type.empty() &&
      j["type"].get<std::string>() != expected_type) {
    throw std::runtime_error(path + ": expected a " + expected_type +
                             " model, found " +
                             j["type"].get<std::string>());
  }
  return j;
}

const Json& Field(const Json& j, const std::string& path,
                  const std::string& name) {
  if (!j.contains(name)) {
    throw std::runtime_error(path + ": missing field " + name);
  }
  return j[name];
}

}  // namespace

std::string PeekModelType(const std::string& path) {
  return ReadJson(path, "")["type"].get<std::string>();
}

void SaveMultinomialModel(const MultinomialModel& model,
                          const std::string& path) {
  RequireFinite(model.gamma.allFinite(), path);
  Json j;
  j["type"] = "multinomial";
  j["gamma"] = VectorToJson(model.gamma);
  WriteJson(j, path);
}

MultinomialModel LoadMultinomialModel(const std::string& path) {
  const Json j = ReadJson(path, "multinomial");
  MultinomialModel model;
  model.gamma = JsonToVector(Field(j, path, "gamma"), path, "gamma");
  return model;
}

void SavePolyaModel(const PolyaModel& model, const std::string& path) {
  RequireFinite(model.alpha.allFinite() && (model.alpha.array() > 0.0).all(),
                path);
  Json j;
  j["type"] = "polya";
  j["alpha"] = VectorToJson(model.alpha);
  WriteJson(j, path);
}

PolyaModel LoadPolyaModel(const std::string& path) {
  const Json j = ReadJson(path, "polya");
  PolyaModel model;
  model.alpha = JsonToVector(Field(j, path, "alpha"), path, "alpha");
  if (!(model.alpha.array() > 0.0).all()) {
    throw std::runtime_error(path + ": alpha entries must be positive");
  }
  return model;
}

void SavePlsaModel(const PlsaModel& model, const std::string& path) {
  ValidatePlsa(model);
  Json j;
  j["type"] = "plsa";
  j["topic_word"] = MatrixToJson(model.topic_word);
  j["doc_topic_init"] = VectorToJson(model.doc_topic_init);
  WriteJson(j, path);
}

PlsaModel LoadPlsaModel(const std::string& path) {
  const Json j = ReadJson(path, "plsa");
  PlsaModel model;
  model.topic_word =
      JsonToMatrix(Field(j, path, "topic_word"), path, "topic_word");
  model.doc_topic_init =
      JsonToVector(Field(j, path, "doc_topic_init"), path, "doc_topic_init");
  try {
    ValidatePlsa(model);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return model;
}

void SaveLdaModel(const LdaModel& model, const std::string& path) {
  ValidateLda(model);
  Json j;
  j["type"] = "lda";
  j["alpha"] = VectorToJson(model.alpha);
  j["eta"] = MatrixToJson(model.eta);
  WriteJson(j, path);
}

LdaModel LoadLdaModel(const std::string& path) {
  const Json j = ReadJson(path, "lda");
  LdaModel model;
  model.alpha = JsonToVector(Field(j, path, "alpha"), path, "alpha");
  model.eta = JsonToMatrix(Field(j, path, "eta"), path, "eta");
  try {
    ValidateLda(model);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return model;
}

void SaveLatentMogModel(const LatentMogModel& model, const std::string& path) {
  ValidateLatentMog(model);
  Json j;
  j["type"] = "latmog";
  j["alpha"] = VectorToJson(model.alpha);
  j["m"] = MatrixToJson(model.m);
  j["beta"] = MatrixToJson(model.beta);
  j["a"] = MatrixToJson(model.a);
  j["b"] = MatrixToJson(model.b);
  WriteJson(j, path);
}

LatentMogModel LoadLatentMogModel(const std::string& path) {
  const Json j = ReadJson(path, "latmog");
  LatentMogModel model;
  model.alpha = JsonToVector(Field(j, path, "alpha"), path, "alpha");
  model.m = JsonToMatrix(Field(j, path, "m"), path, "m");
  model.beta = JsonToMatrix(Field(j, path, "beta"), path, "beta");
  model.a = JsonToMatrix(Field(j, path, "a"), path, "a");
  model.b = JsonToMatrix(Field(j, path, "b"), path, "b");
  try {
    ValidateLatentMog(model);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return model;
}

void SaveGmmModel(const GaussianMixture& model, const std::string& path) {
  ValidateGmm(model);
  Json j;
  j["type"] = "mog";
  j["weights"] = VectorToJson(model.weights);
  j["means"] = MatrixToJson(model.means);
  j["variances"] = MatrixToJson(model.variances);
  WriteJson(j, path);
}

GaussianMixture LoadGmmModel(const std::string& path) {
  const Json j = ReadJson(path, "mog");
  GaussianMixture model;
  model.weights = JsonToVector(Field(j, path, "weights"), path, "weights");
  model.means = JsonToMatrix(Field(j, path, "means"), path, "means");
  model.variances =
      JsonToMatrix(Field(j, path, "variances"), path, "variances");
  try {
    ValidateGmm(model);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return model;
}

void SavePcaModel(const PcaModel& model, const std::string& path) {
  RequireFinite(model.mean.allFinite() && model.basis.allFinite() &&
                    model.eigenvalues.allFinite() &&
                    model.residual_variances.allFinite(),
                path);
  Json j;
  j["type"] = "pca";
  j["mean"] = VectorToJson(model.mean);
  j["basis"] = MatrixToJson(model.basis);
  j["eigenvalues"] = VectorToJson(model.eigenvalues);
  j["keep"] = model.keep;
  WriteJson(j, path);
}

PcaModel LoadPcaModel(const std::string& path) {
  const Json j = ReadJson(path, "pca");
  PcaModel model;
  model.mean = JsonToVector(Field(j, path, "mean"), path, "mean");
  model.basis = JsonToMatrix(Field(j, path, "basis"), path, "basis");
  model.eigenvalues =
      JsonToVector(Field(j, path, "eigenvalues"), path, "eigenvalues");
  const Json& keep = Field(j, path, "keep");
  if (!keep.is_number_integer()) {
    throw std::runtime_error(path + ": keep must be an integer");
  }
  model.keep = keep.get<int>();
  const int d0 = static_cast<int>(model.mean.size());
  if (model.basis.rows() != d0 || model.basis.cols() != d0 ||
      model.eigenvalues.size() != d0 || model.keep < 1 || model.keep > d0) {
    throw std::runtime_error(path + ": inconsistent model shapes");
  }
  model.residual_variances = model.eigenvalues.tail(d0 - model.keep);
  return model;
}

void SaveWhitenStats(const WhitenStats& stats, const std::string& path) {
  RequireFinite(stats.mean.allFinite() && stats.std_dev.allFinite() &&
                    (stats.std_dev.array() > 0.0).all(),
                path);
  Json j;
  j["type"] = "whiten";
  j["mean"] = VectorToJson(stats.mean);
  j["std_dev"] = VectorToJson(stats.std_dev);
  WriteJson(j, path);
}

WhitenStats LoadWhitenStats(const std::string& path) {
  const Json j = ReadJson(path, "whiten");
  WhitenStats stats;
  stats.mean = JsonToVector(Field(j, path, "mean"), path, "mean");
  stats.std_dev = JsonToVector(Field(j, path, "std_dev"), path, "std_dev");
  if (stats.mean.size() != stats.std_dev.size() ||
      !(stats.std_dev.array() > 0.0).all()) {
    throw std::runtime_error(path + ": inconsistent whitening statistics");
  }
  return stats;
}

void SaveLinearModel(const LinearModel& model, const std::string& path) {
  ValidateLinearModel(model);
  Json j;
  j["type"] = "linear_svm";
  j["classes"] = Json::array();
  for (const std::string& name : model.classes) j["classes"].push_back(name);
  j["weights"] = MatrixToJson(model.weights);
  j["bias"] = VectorToJson(model.bias);
  WriteJson(j, path);
}

LinearModel LoadLinearModel(const std::string& path) {
  const Json j = ReadJson(path, "linear_svm");
  LinearModel model;
  const Json& classes = Field(j, path, "classes");
  if (!classes.is_array() || classes.empty()) {
    throw std::runtime_error(path + ": classes must be a non-empty array");
  }
  for (const Json& name : classes) {
    if (!name.is_string()) {
      throw std::runtime_error(path + ": class names must be strings");
    }
    model.classes.push_back(name.get<std::string>());
  }
  model.weights = JsonToMatrix(Field(j, path, "weights"), path, "weights");
  model.bias = JsonToVector(Field(j, path, "bias"), path, "bias");
  try {
    ValidateLinearModel(model);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return model;
}

}  // namespace nifv
