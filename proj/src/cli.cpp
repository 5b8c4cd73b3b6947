// src/cli.cpp

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

#include "nifv/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "nifv/count_models.hpp"
#include "nifv/descriptors.hpp"
#include "nifv/encoder.hpp"
#include "nifv/eval.hpp"
#include "nifv/gmm.hpp"
#include "nifv/latent_mog.hpp"
#include "nifv/model_io.hpp"
#include "nifv/parallel.hpp"
#include "nifv/rng.hpp"
#include "nifv/study.hpp"
#include "nifv/topic_models.hpp"

namespace nifv {

namespace {

namespace fs = std::filesystem;

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;

std::uint64_t FnvMix(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string HashFileHex(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  return HexHash(FnvMix(bytes.data(), bytes.size(), kFnvOffset));
}

// Order-sensitive combined content hash over named files.
struct StreamHash {
  std::uint64_t value = kFnvOffset;
  int count = 0;

  void AddFile(const std::string& name, const std::string& path) {
    const std::string bytes = ReadFileBytes(path);
    value = FnvMix(name.data(), name.size(), value);
    value = FnvMix(bytes.data(), bytes.size(), value);
    ++count;
  }
};

// key=value lines describing one command run: echoed options, content hashes
// of inputs and outputs, and the seed. The worker thread count is deliberately
// absent so reruns at different parallelism levels produce identical bytes.
class Manifest {
 public:
  explicit Manifest(const std::string& command) { Add("command", command); }

  void Add(const std::string& key, const std::string& value) {
    rows_.emplace_back(key, value);
  }
  void Add(const std::string& key, const char* value) {
    rows_.emplace_back(key, value);
  }
  void Add(const std::string& key, double value) {
    rows_.emplace_back(key, FormatDouble(value));
  }
  void Add(const std::string& key, int value) {
    rows_.emplace_back(key, std::to_string(value));
  }
  void Add(const std::string& key, std::uint64_t value) {
    rows_.emplace_back(key, std::to_string(value));
  }
  void AddHashes(const StreamHash& ins, const StreamHash& outs) {
    Add("inputs", ins.count);
    Add("inputs_hash", HexHash(ins.value));
    Add("outputs", outs.count);
    Add("outputs_hash", HexHash(outs.value));
  }

  void Write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot write manifest");
    for (const auto& [key, value] : rows_) out << key << "=" << value << "\n";
    if (!out) throw std::runtime_error(path + ": manifest write failed");
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

// ---------------------------------------------------------------------------
// Shared dataset plumbing
// ---------------------------------------------------------------------------

std::vector<const DatasetEntry*> SelectSplit(const DatasetIndex& index,
                                             const std::string& split) {
  std::vector<const DatasetEntry*> out;
  for (const auto& entry : index.entries)
    if (split.empty() || entry.split == split) out.push_back(&entry);
  if (out.empty())
    throw std::runtime_error("no entries for split '" + split + "'");
  return out;
}

std::string PrimaryLabel(const DatasetEntry& entry) {
  if (entry.labels.empty())
    throw std::runtime_error(entry.image_id + ": entry has no label");
  return entry.labels.front();
}

std::string StatsPath(const std::string& dir, const std::string& image_id) {
  return (fs::path(dir) / (image_id + ".nifs")).string();
}

std::string VectorPath(const std::string& dir, const std::string& image_id) {
  return (fs::path(dir) / (image_id + ".nifv")).string();
}

Eigen::MatrixXd VStack(const std::vector<Eigen::MatrixXd>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  if (rows == 0) throw std::runtime_error("no descriptor rows to pool");
  Eigen::MatrixXd out(rows, blocks.front().cols());
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    if (b.cols() != out.cols())
      throw std::runtime_error("descriptor dimensions differ across images");
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

// Uniform row subsample without replacement; indices are sorted so the
// result does not depend on the draw order.
Eigen::MatrixXd SubsampleRows(const Eigen::MatrixXd& rows, int target,
                              std::uint64_t seed) {
  if (target <= 0 || target >= rows.rows()) return rows;
  std::vector<int> idx(rows.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < target; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(target, rows.cols());
  for (int i = 0; i < target; ++i) out.row(i) = rows.row(idx[i]);
  return out;
}

Eigen::MatrixXd PoolDescriptorRows(const DatasetIndex& index,
                                   const std::vector<const DatasetEntry*>& entries,
                                   StreamHash* ins) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(entries.size());
  for (const DatasetEntry* entry : entries) {
    const std::string path = ResolveDescriptorPath(index, *entry);
    if (ins != nullptr) ins->AddFile(entry->image_id, path);
    blocks.push_back(ReadDescriptorFile(path).data);
  }
  return VStack(blocks);
}

std::vector<SufficientStats> LoadStatsSet(
    const std::vector<const DatasetEntry*>& entries,
    const std::string& stats_dir, StreamHash* ins) {
  std::vector<SufficientStats> out;
  out.reserve(entries.size());
  for (const DatasetEntry* entry : entries) {
    const std::string path = StatsPath(stats_dir, entry->image_id);
    if (ins != nullptr) ins->AddFile(entry->image_id, path);
    out.push_back(ReadStatsFile(path));
  }
  return out;
}

// Zeroth-order statistics as count rows, one image per row.
Eigen::MatrixXd StatsCountRows(const std::vector<SufficientStats>& stats) {
  const int m = static_cast<int>(stats.size());
  const int k = static_cast<int>(stats.front().s0.size());
  Eigen::MatrixXd counts(m, k);
  for (int i = 0; i < m; ++i) {
    if (stats[i].s0.size() != k)
      throw std::runtime_error("statistics dimensions differ across images");
    counts.row(i) = stats[i].s0;
  }
  return counts;
}

Eigen::MatrixXd LoadVectorRows(const std::vector<const DatasetEntry*>& entries,
                               const std::string& dir, StreamHash* ins) {
  Eigen::MatrixXd rows;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string path = VectorPath(dir, entries[i]->image_id);
    if (ins != nullptr) ins->AddFile(entries[i]->image_id, path);
    const FisherVector fv = ReadVectorFile(path);
    if (i == 0) rows.resize(entries.size(), fv.values.size());
    if (fv.values.size() != rows.cols())
      throw std::runtime_error(path + ": vector length differs from " +
                               entries[0]->image_id);
    rows.row(i) = fv.values;
  }
  return rows;
}

std::vector<int> TruthAgainstClasses(
    const std::vector<const DatasetEntry*>& entries,
    const std::vector<std::string>& classes) {
  std::vector<int> truth(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string label = PrimaryLabel(*entries[i]);
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end())
      throw std::runtime_error(entries[i]->image_id + ": label '" + label +
                               "' is not a classifier class");
    truth[i] = static_cast<int>(it - classes.begin());
  }
  return truth;
}

std::vector<double> ParseCsvDoubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size())
      throw std::runtime_error("bad number '" + token + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<SweepPoint> ParsePairs(const std::string& text) {
  std::vector<SweepPoint> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const std::size_t at = token.find('x');
    if (at == std::string::npos || at == 0 || at + 1 == token.size())
      throw std::runtime_error("--pairs: bad token '" + token +
                               "', expected DxK");
    out.push_back({std::stoi(token.substr(0, at)),
                   std::stoi(token.substr(at + 1))});
  }
  if (out.empty()) throw std::runtime_error("--pairs: no pairs given");
  return out;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot write");
  return out;
}

// ---------------------------------------------------------------------------
// pca-fit
// ---------------------------------------------------------------------------

struct PcaFitArgs {
  std::string input;
  std::string split = "train";
  int keep = 0;
  int sample = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunPcaFit(const PcaFitArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  Eigen::MatrixXd rows =
      PoolDescriptorRows(index, SelectSplit(index, a.split), &ins);
  rows = SubsampleRows(rows, a.sample, MixSeed(a.seed, 7));
  const PcaModel pca = FitPca(rows, a.keep);
  SavePcaModel(pca, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("pca-fit");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("keep", a.keep);
  m.Add("sample", a.sample);
  m.Add("seed", a.seed);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "pca-fit: " << rows.rows() << " rows, keep=" << a.keep << " -> "
            << a.out << "\n";
}

// ---------------------------------------------------------------------------
// gmm-train
// ---------------------------------------------------------------------------

struct GmmTrainArgs {
  std::string input;
  std::string split = "train";
  int k = 0;
  std::string pca;
  int sample = 0;
  int iters = 200;
  double tol = 1e-5;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunGmmTrain(const GmmTrainArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  Eigen::MatrixXd rows =
      PoolDescriptorRows(index, SelectSplit(index, a.split), &ins);
  rows = SubsampleRows(rows, a.sample, MixSeed(a.seed, 7));
  if (!a.pca.empty()) {
    const PcaModel pca = LoadPcaModel(a.pca);
    ins.AddFile("pca", a.pca);
    rows = PcaProject(pca, rows);
  }

  GmmTrainOptions opts;
  opts.max_iter = a.iters;
  opts.tol = a.tol;
  opts.threads = a.threads;
  GmmTrainInfo info;
  const GaussianMixture model = TrainGmm(rows, a.k, a.seed, opts, &info);
  SaveGmmModel(model, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("gmm-train");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("k", a.k);
  m.Add("pca", a.pca);
  m.Add("sample", a.sample);
  m.Add("iters", a.iters);
  m.Add("tol", a.tol);
  m.Add("seed", a.seed);
  m.Add("final_loglik", info.loglik_trace.back());
  m.Add("iterations", info.iterations);
  m.Add("converged", info.converged ? "true" : "false");
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "gmm-train: k=" << a.k << " on " << rows.rows()
            << " rows, ll/row " << FormatDouble(info.loglik_trace.back())
            << " -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string input;
  std::string split;  // empty selects every entry
  std::string vocab;
  std::string pca;
  int clip = 0;
  int threads = 0;
  std::string out_dir;
};

void RunStats(const StatsArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, a.split);
  const GaussianMixture vocab = LoadGmmModel(a.vocab);
  PcaModel pca;
  const bool use_pca = !a.pca.empty();
  if (use_pca) pca = LoadPcaModel(a.pca);

  StreamHash ins;
  ins.AddFile("index", a.input);
  ins.AddFile("vocab", a.vocab);
  if (use_pca) ins.AddFile("pca", a.pca);
  for (const DatasetEntry* entry : entries)
    ins.AddFile(entry->image_id, ResolveDescriptorPath(index, *entry));

  fs::create_directories(a.out_dir);
  const auto n = static_cast<std::int64_t>(entries.size());
  ParallelFor(n, a.threads, [&](std::int64_t i) {
    DescriptorSet set =
        ReadDescriptorFile(ResolveDescriptorPath(index, *entries[i]));
    if (use_pca) set = PcaProject(pca, set);
    Eigen::MatrixXd resp = Posteriors(vocab, set.data);
    if (a.clip > 0) resp = ClipPosteriors(resp, a.clip);
    WriteStatsFile(AccumulateStats(resp, set.data),
                   StatsPath(a.out_dir, entries[i]->image_id));
  });

  StreamHash outs;
  for (const DatasetEntry* entry : entries)
    outs.AddFile(entry->image_id, StatsPath(a.out_dir, entry->image_id));
  Manifest m("stats");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("vocab", a.vocab);
  m.Add("pca", a.pca);
  m.Add("clip", a.clip);
  m.AddHashes(ins, outs);
  m.Write((fs::path(a.out_dir) / "manifest.txt").string());
  std::cout << "stats: " << n << " files -> " << a.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// fit-polya
// ---------------------------------------------------------------------------

struct FitPolyaArgs {
  std::string input;
  std::string split = "train";
  std::string stats_dir;
  std::string out;
  std::string out_multinomial;
};

void RunFitPolya(const FitPolyaArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, a.split);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const Eigen::MatrixXd counts =
      StatsCountRows(LoadStatsSet(entries, a.stats_dir, &ins));

  Eigen::MatrixXd proportions(counts.rows(), counts.cols());
  Eigen::VectorXd weights(counts.rows());
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const double total = counts.row(i).sum();
    if (total <= 0.0)
      throw std::runtime_error(entries[i]->image_id + ": image has no mass");
    proportions.row(i) = counts.row(i) / total;
    weights[i] = total;
  }
  const PolyaModel polya = FitDirichletMomentMatch(proportions, weights);
  SavePolyaModel(polya, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  if (!a.out_multinomial.empty()) {
    SaveMultinomialModel(FitMultinomial(counts), a.out_multinomial);
    outs.AddFile("out-multinomial", a.out_multinomial);
  }
  Manifest m("fit-polya");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("stats-dir", a.stats_dir);
  m.Add("out-multinomial", a.out_multinomial);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "fit-polya: " << counts.rows() << " images, strength "
            << FormatDouble(polya.alpha.sum()) << " -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// plsa-train
// ---------------------------------------------------------------------------

struct PlsaTrainArgs {
  std::string input;
  std::string split = "train";
  std::string stats_dir;
  int topics = 0;
  int iters = 500;
  double tol = 1e-7;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunPlsaTrain(const PlsaTrainArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const Eigen::MatrixXd counts = StatsCountRows(
      LoadStatsSet(SelectSplit(index, a.split), a.stats_dir, &ins));

  PlsaTrainOptions opts;
  opts.max_iter = a.iters;
  opts.tol = a.tol;
  opts.threads = a.threads;
  PlsaTrainInfo info;
  const PlsaModel model = TrainPlsa(counts, a.topics, a.seed, opts, &info);
  SavePlsaModel(model, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("plsa-train");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("stats-dir", a.stats_dir);
  m.Add("topics", a.topics);
  m.Add("iters", a.iters);
  m.Add("tol", a.tol);
  m.Add("seed", a.seed);
  m.Add("final_loglik", info.loglik_trace.back());
  m.Add("converged", info.converged ? "true" : "false");
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "plsa-train: " << a.topics << " topics, ll "
            << FormatDouble(info.loglik_trace.back()) << " -> " << a.out
            << "\n";
}

// ---------------------------------------------------------------------------
// lda-fit
// ---------------------------------------------------------------------------

struct LdaFitArgs {
  std::string input;
  std::string split = "train";
  std::string stats_dir;
  std::string plsa;
  std::string out;
};

void RunLdaFit(const LdaFitArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const Eigen::MatrixXd counts = StatsCountRows(
      LoadStatsSet(SelectSplit(index, a.split), a.stats_dir, &ins));
  const PlsaModel plsa = LoadPlsaModel(a.plsa);
  ins.AddFile("plsa", a.plsa);

  const LdaModel lda = FitLdaFromPlsa(plsa, counts);
  SaveLdaModel(lda, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("lda-fit");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("stats-dir", a.stats_dir);
  m.Add("plsa", a.plsa);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "lda-fit: " << lda.alpha.size() << " topics -> " << a.out
            << "\n";
}

// ---------------------------------------------------------------------------
// latmog-init / latmog-train
// ---------------------------------------------------------------------------

struct LatmogInitArgs {
  std::string input;
  std::string split = "train";
  std::string stats_dir;
  double trunc_factor = 10.0;
  std::string out;
};

void RunLatmogInit(const LatmogInitArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const std::vector<SufficientStats> stats =
      LoadStatsSet(SelectSplit(index, a.split), a.stats_dir, &ins);

  LatentMogInitOptions opts;
  opts.trunc_factor = a.trunc_factor;
  const LatentMogModel model = InitLatentMog(stats, opts);
  SaveLatentMogModel(model, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("latmog-init");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("stats-dir", a.stats_dir);
  m.Add("trunc-factor", a.trunc_factor);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "latmog-init: " << stats.size() << " images -> " << a.out
            << "\n";
}

struct LatmogTrainArgs {
  std::string input;
  std::string split = "train";
  std::string stats_dir;
  std::string init;
  int iters = 50;
  double tol = 1e-7;
  int threads = 0;
  std::string out;
};

void RunLatmogTrain(const LatmogTrainArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const std::vector<SufficientStats> stats =
      LoadStatsSet(SelectSplit(index, a.split), a.stats_dir, &ins);
  const LatentMogModel init = LoadLatentMogModel(a.init);
  ins.AddFile("init", a.init);

  LatentMogTrainOptions opts;
  opts.max_iter = a.iters;
  opts.tol = a.tol;
  opts.threads = a.threads;
  LatentMogTrainInfo info;
  const LatentMogModel model = TrainLatentMog(init, stats, opts, &info);
  SaveLatentMogModel(model, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("latmog-train");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("stats-dir", a.stats_dir);
  m.Add("init", a.init);
  m.Add("iters", a.iters);
  m.Add("tol", a.tol);
  m.Add("final_objective", info.objective_trace.back());
  m.Add("converged", info.converged ? "true" : "false");
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "latmog-train: objective "
            << FormatDouble(info.objective_trace.back()) << " -> " << a.out
            << "\n";
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::string input;
  std::string vocab;
  std::string model;
  std::string count_model;
  std::string pca;
  std::string stats_dir;
  double rho = 0.5;
  std::string spm = "single";
  int clip = 0;
  std::string whiten = "train";
  int threads = 0;
  std::string out_dir;
};

EncoderModel BuildEncoderModel(const EncodeArgs& a, StreamHash* ins) {
  EncoderModel model;
  model.vocab = LoadGmmModel(a.vocab);
  ins->AddFile("vocab", a.vocab);
  if (a.model == "mog") {
    if (!a.count_model.empty())
      throw std::runtime_error("--model mog takes no --count-model");
    model.kind = ModelKind::kMog;
    return model;
  }
  if (a.count_model.empty())
    throw std::runtime_error("--model " + a.model + " needs --count-model");
  ins->AddFile("count-model", a.count_model);
  if (a.model == "bow") {
    model.kind = ModelKind::kBow;
    const std::string type = PeekModelType(a.count_model);
    if (type == "multinomial") {
      model.bow = LoadMultinomialModel(a.count_model);
    } else if (type == "polya") {
      // log alpha softmaxes to the Polya mean alpha / sum(alpha).
      model.bow.gamma = LoadPolyaModel(a.count_model).alpha.array().log();
    } else {
      throw std::runtime_error(a.count_model +
                               ": expected a multinomial or polya model");
    }
  } else if (a.model == "polya") {
    model.kind = ModelKind::kPolya;
    model.polya = LoadPolyaModel(a.count_model);
  } else if (a.model == "plsa") {
    model.kind = ModelKind::kPlsa;
    model.plsa = LoadPlsaModel(a.count_model);
  } else if (a.model == "lda") {
    model.kind = ModelKind::kLda;
    model.lda = LoadLdaModel(a.count_model);
  } else if (a.model == "latmog") {
    model.kind = ModelKind::kLatentMog;
    model.latent = LoadLatentMogModel(a.count_model);
  } else {
    throw std::runtime_error("unknown --model '" + a.model + "'");
  }
  return model;
}

void RunEncode(const EncodeArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, "");
  StreamHash ins;
  ins.AddFile("index", a.input);
  const EncoderModel model = BuildEncoderModel(a, &ins);
  ValidateEncoderModel(model);

  const bool from_stats = !a.stats_dir.empty();
  const bool use_pca = !a.pca.empty();
  if (from_stats && use_pca)
    throw std::runtime_error("--pca needs descriptor input, not --stats-dir");
  if (from_stats && a.spm != "single")
    throw std::runtime_error("--stats-dir input supports only --spm single");
  PcaModel pca;
  if (use_pca) {
    pca = LoadPcaModel(a.pca);
    ins.AddFile("pca", a.pca);
  }
  EncodeOptions opts;
  opts.clip = a.clip;
  opts.grid = a.spm == "default" ? SpmGrid::Default() : SpmGrid::Single();

  for (const DatasetEntry* entry : entries)
    ins.AddFile(entry->image_id,
                from_stats ? StatsPath(a.stats_dir, entry->image_id)
                           : ResolveDescriptorPath(index, *entry));

  const auto n = static_cast<std::int64_t>(entries.size());
  std::vector<FisherVector> raws(entries.size());
  ParallelFor(n, a.threads, [&](std::int64_t i) {
    if (from_stats) {
      const SufficientStats stats =
          ReadStatsFile(StatsPath(a.stats_dir, entries[i]->image_id));
      FisherVector fv;
      fv.values = RawScoreFromStats(model, stats);
      int offset = 0;
      for (const BlockSpec& block : ScoreLayout(model)) {
        fv.block_names.push_back(block.name);
        fv.block_offsets.push_back(offset);
        fv.block_lengths.push_back(block.length);
        offset += block.length;
      }
      raws[i] = std::move(fv);
    } else {
      DescriptorSet set =
          ReadDescriptorFile(ResolveDescriptorPath(index, *entries[i]));
      set.image_id = entries[i]->image_id;  // the file stores no id
      if (use_pca) set = PcaProject(pca, set);
      raws[i] = EncodeRawImage(model, opts, set);
    }
  });
  for (std::size_t i = 1; i < raws.size(); ++i)
    if (raws[i].block_names != raws[0].block_names ||
        raws[i].block_lengths != raws[0].block_lengths)
      throw std::runtime_error(entries[i]->image_id +
                               ": block layout differs from " +
                               entries[0]->image_id);

  WhitenStats whiten;
  const WhitenStats* whiten_ptr = nullptr;
  if (a.whiten == "train") {
    std::vector<int> train_rows;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i]->split == "train") train_rows.push_back(static_cast<int>(i));
    if (train_rows.size() < 2)
      throw std::runtime_error(
          "whitening needs at least two train images; pass --whiten none");
    Eigen::MatrixXd pool(train_rows.size(), raws[0].values.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i)
      pool.row(i) = raws[train_rows[i]].values;
    whiten = FitWhitening(pool);
    whiten_ptr = &whiten;
  }

  fs::create_directories(a.out_dir);
  StreamHash outs;
  if (whiten_ptr != nullptr) {
    const std::string path = (fs::path(a.out_dir) / "whiten.json").string();
    SaveWhitenStats(whiten, path);
    outs.AddFile("whiten.json", path);
  }
  ParallelFor(n, a.threads, [&](std::int64_t i) {
    FisherVector fv = raws[i];
    fv.values = FinalizeVector(raws[i].values, whiten_ptr, a.rho);
    WriteVectorFile(fv, VectorPath(a.out_dir, entries[i]->image_id));
  });
  for (const DatasetEntry* entry : entries)
    outs.AddFile(entry->image_id, VectorPath(a.out_dir, entry->image_id));

  Manifest m("encode");
  m.Add("input", a.input);
  m.Add("vocab", a.vocab);
  m.Add("model", a.model);
  m.Add("count-model", a.count_model);
  m.Add("pca", a.pca);
  m.Add("stats-dir", a.stats_dir);
  m.Add("rho", a.rho);
  m.Add("spm", a.spm);
  m.Add("clip", a.clip);
  m.Add("whiten", a.whiten);
  m.AddHashes(ins, outs);
  m.Write((fs::path(a.out_dir) / "manifest.txt").string());
  std::cout << "encode: " << n << " vectors, length " << raws[0].values.size()
            << " -> " << a.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// svm-train
// ---------------------------------------------------------------------------

struct SvmTrainArgs {
  std::string input;
  std::string split = "train";
  std::string vectors_dir;
  std::string c_grid;
  int folds = 3;
  double gap_tol = 1e-4;
  int max_epochs = 2000;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunSvmTrain(const SvmTrainArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, a.split);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const Eigen::MatrixXd rows = LoadVectorRows(entries, a.vectors_dir, &ins);
  std::vector<std::string> labels;
  labels.reserve(entries.size());
  for (const DatasetEntry* entry : entries)
    labels.push_back(PrimaryLabel(*entry));

  SvmTrainOptions opts;
  if (!a.c_grid.empty()) {
    opts.c_grid = ParseCsvDoubles(a.c_grid);
    for (double c : opts.c_grid)
      if (c <= 0.0) throw std::runtime_error("--c-grid entries must be positive");
    std::sort(opts.c_grid.begin(), opts.c_grid.end());
  }
  opts.folds = a.folds;
  opts.gap_tol = a.gap_tol;
  opts.max_epochs = a.max_epochs;
  opts.threads = a.threads;
  SvmTrainInfo info;
  const LinearModel model = TrainLinearSvm(rows, labels, a.seed, opts, &info);
  SaveLinearModel(model, a.out);

  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("svm-train");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("vectors-dir", a.vectors_dir);
  m.Add("c-grid", a.c_grid);
  m.Add("folds", a.folds);
  m.Add("gap-tol", a.gap_tol);
  m.Add("max-epochs", a.max_epochs);
  m.Add("seed", a.seed);
  m.Add("chosen_c", info.chosen_c);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "svm-train: " << model.Classes() << " classes, c="
            << FormatDouble(info.chosen_c) << " -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string input;
  std::string split = "test";
  std::string vectors_dir;
  std::string svm;
  std::string metric;
  std::string out;
  std::string predictions;
};

void RunEval(const EvalArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, a.split);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const LinearModel model = LoadLinearModel(a.svm);
  ins.AddFile("svm", a.svm);
  const Eigen::MatrixXd rows = LoadVectorRows(entries, a.vectors_dir, &ins);
  const std::vector<int> truth = TruthAgainstClasses(entries, model.classes);
  const Eigen::MatrixXd scores = ScoreVectors(model, rows);
  const EvalReport report =
      EvaluateScores(scores, truth, model.classes, ParseMetric(a.metric));

  {
    std::ofstream out = OpenOutput(a.out);
    out << "class,value\n";
    for (std::size_t c = 0; c < report.classes.size(); ++c)
      out << report.classes[c] << "," << FormatDouble(report.per_class[c])
          << "\n";
    out << "mean," << FormatDouble(report.mean) << "\n";
  }
  StreamHash outs;
  outs.AddFile("out", a.out);
  if (!a.predictions.empty()) {
    std::ofstream out = OpenOutput(a.predictions);
    out << "image_id,class,score\n";
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t c = 0; c < report.classes.size(); ++c)
        out << entries[i]->image_id << "," << report.classes[c] << ","
            << FormatDouble(scores(i, c)) << "\n";
    outs.AddFile("predictions", a.predictions);
  }

  Manifest m("eval");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("vectors-dir", a.vectors_dir);
  m.Add("svm", a.svm);
  m.Add("metric", a.metric);
  m.Add("predictions", a.predictions);
  m.Add("mean", report.mean);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "eval: mean " << a.metric << " " << FormatDouble(report.mean)
            << " -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareArgs {
  std::string input;
  std::string split = "test";
  std::string vectors_a;
  std::string vectors_b;
  std::string svm_a;
  std::string svm_b;
  std::string metric;
  int iters = 1000;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunCompare(const CompareArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  const auto entries = SelectSplit(index, a.split);
  StreamHash ins;
  ins.AddFile("index", a.input);
  const LinearModel model_a = LoadLinearModel(a.svm_a);
  ins.AddFile("svm-a", a.svm_a);
  const LinearModel model_b = LoadLinearModel(a.svm_b);
  ins.AddFile("svm-b", a.svm_b);
  if (model_a.classes != model_b.classes)
    throw std::runtime_error("classifier class lists differ");

  const Eigen::MatrixXd rows_a = LoadVectorRows(entries, a.vectors_a, &ins);
  const Eigen::MatrixXd rows_b = LoadVectorRows(entries, a.vectors_b, &ins);
  const std::vector<int> truth = TruthAgainstClasses(entries, model_a.classes);
  const CompareResult r = BootstrapCompare(
      ScoreVectors(model_a, rows_a), ScoreVectors(model_b, rows_b), truth,
      static_cast<int>(model_a.classes.size()), ParseMetric(a.metric), a.iters,
      a.seed, a.threads);

  {
    std::ofstream out = OpenOutput(a.out);
    out << "metric_a,metric_b,delta,lo,hi,equivalent\n";
    out << FormatDouble(r.metric_a) << "," << FormatDouble(r.metric_b) << ","
        << FormatDouble(r.delta) << "," << FormatDouble(r.lo) << ","
        << FormatDouble(r.hi) << "," << (r.equivalent ? 1 : 0) << "\n";
  }
  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("compare");
  m.Add("input", a.input);
  m.Add("split", a.split);
  m.Add("vectors-a", a.vectors_a);
  m.Add("vectors-b", a.vectors_b);
  m.Add("svm-a", a.svm_a);
  m.Add("svm-b", a.svm_b);
  m.Add("metric", a.metric);
  m.Add("iters", a.iters);
  m.Add("seed", a.seed);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "compare: a " << FormatDouble(r.metric_a) << " b "
            << FormatDouble(r.metric_b) << " delta " << FormatDouble(r.delta)
            << " ci [" << FormatDouble(r.lo) << ", " << FormatDouble(r.hi)
            << "] equivalent=" << (r.equivalent ? "yes" : "no") << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::string out_dir;
};

void RunSynth(const SynthArgs& a) {
  const SynthDataset data = GenerateSynthetic(a.spec);
  fs::create_directories(fs::path(a.out_dir) / "desc");

  DatasetIndex index;
  index.base_dir = a.out_dir;
  StreamHash outs;
  const auto add = [&](const DescriptorSet& set, const std::string& split,
                       const std::string& label) {
    const std::string rel = "desc/" + set.image_id + ".nifd";
    const std::string abs = (fs::path(a.out_dir) / rel).string();
    WriteDescriptorFile(set, abs);
    outs.AddFile(rel, abs);
    index.entries.push_back({set.image_id, rel, split, {label}});
  };
  for (std::size_t i = 0; i < data.train.size(); ++i)
    add(data.train[i], "train", data.train_labels[i]);
  for (std::size_t i = 0; i < data.test.size(); ++i)
    add(data.test[i], "test", data.test_labels[i]);
  const std::string index_path = (fs::path(a.out_dir) / "index.tsv").string();
  WriteDatasetIndex(index, index_path);
  outs.AddFile("index.tsv", index_path);

  const StreamHash ins;  // synth reads nothing
  Manifest m("synth");
  m.Add("kind", a.spec.kind);
  m.Add("classes", a.spec.classes);
  m.Add("train-per-class", a.spec.train_per_class);
  m.Add("test-per-class", a.spec.test_per_class);
  m.Add("descriptors", a.spec.descriptors_per_image);
  m.Add("vocab", a.spec.vocab);
  m.Add("dim", a.spec.dim);
  m.Add("topics", a.spec.topics);
  m.Add("concentration", a.spec.concentration);
  m.Add("class-offset", a.spec.class_offset);
  m.Add("within-sigma", a.spec.within_sigma);
  m.Add("embed-dim", a.spec.embed_dim);
  m.Add("residual-sigma", a.spec.residual_sigma);
  m.Add("latent-gamma-shape", a.spec.latent_gamma_shape);
  m.Add("latent-beta", a.spec.latent_beta);
  m.Add("seed", a.spec.seed);
  m.AddHashes(ins, outs);
  m.Write((fs::path(a.out_dir) / "manifest.txt").string());
  std::cout << "synth: " << index.entries.size() << " images -> " << a.out_dir
            << "\n";
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string input;
  std::string pairs;
  int cap = 300000;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void RunSweep(const SweepArgs& a) {
  const DatasetIndex index = ReadDatasetIndex(a.input);
  StreamHash ins;
  ins.AddFile("index", a.input);
  SynthDataset data;
  for (const DatasetEntry* entry : SelectSplit(index, "train")) {
    data.train.push_back(
        ReadDescriptorFile(ResolveDescriptorPath(index, *entry)));
    data.train_labels.push_back(PrimaryLabel(*entry));
    ins.AddFile(entry->image_id, ResolveDescriptorPath(index, *entry));
  }
  for (const DatasetEntry* entry : SelectSplit(index, "test")) {
    data.test.push_back(
        ReadDescriptorFile(ResolveDescriptorPath(index, *entry)));
    data.test_labels.push_back(PrimaryLabel(*entry));
    ins.AddFile(entry->image_id, ResolveDescriptorPath(index, *entry));
  }

  const std::vector<SweepRow> rows = LoglikVsPerformanceSweep(
      data, ParsePairs(a.pairs), a.seed, a.threads, a.cap);
  {
    std::ofstream out = OpenOutput(a.out);
    out << "D,K,loglik_per_descriptor,metric\n";
    for (const SweepRow& row : rows)
      out << row.dim << "," << row.components << ","
          << FormatDouble(row.loglik_per_descriptor) << ","
          << FormatDouble(row.metric) << "\n";
  }
  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("sweep");
  m.Add("input", a.input);
  m.Add("pairs", a.pairs);
  m.Add("cap", a.cap);
  m.Add("seed", a.seed);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "sweep: " << rows.size() << " rows -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveArgs {
  double alpha = 1.0;
  int n_max = 50;
  std::string out;
};

void RunCurve(const CurveArgs& a) {
  PolyaModel model;
  model.alpha = Eigen::VectorXd::Constant(2, a.alpha);
  const std::vector<double> curve = TransferCurve(model, 0, a.n_max);
  {
    std::ofstream out = OpenOutput(a.out);
    out << "n,value\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
      out << i << "," << FormatDouble(curve[i]) << "\n";
  }
  const StreamHash ins;
  StreamHash outs;
  outs.AddFile("out", a.out);
  Manifest m("curve");
  m.Add("alpha", a.alpha);
  m.Add("n-max", a.n_max);
  m.AddHashes(ins, outs);
  m.Write(a.out + ".manifest");
  std::cout << "curve: alpha " << FormatDouble(a.alpha) << ", " << curve.size()
            << " points -> " << a.out << "\n";
}

}  // namespace

int RunCli(const std::vector<std::string>& args) {
  CLI::App app{"iid and non-iid image representation toolkit", "nifv"};
  app.set_config("--config", "",
                 "key=value config file; command-line flags win");
  app.fallthrough();  // subcommands inherit, so --config works anywhere
  app.require_subcommand(1);

  PcaFitArgs pca_fit;
  {
    CLI::App* sub = app.add_subcommand("pca-fit", "fit a PCA basis");
    sub->add_option("--input", pca_fit.input, "dataset index (tsv)")->required();
    sub->add_option("--split", pca_fit.split, "split to pool (default train)");
    sub->add_option("--keep", pca_fit.keep, "subspace size")->required();
    sub->add_option("--sample", pca_fit.sample, "row subsample, 0 = all");
    sub->add_option("--seed", pca_fit.seed, "subsample seed");
    sub->add_option("--out", pca_fit.out, "output model (json)")->required();
  }

  GmmTrainArgs gmm_train;
  {
    CLI::App* sub = app.add_subcommand("gmm-train", "train a mixture vocabulary");
    sub->add_option("--input", gmm_train.input, "dataset index (tsv)")->required();
    sub->add_option("--split", gmm_train.split, "split to pool (default train)");
    sub->add_option("--k", gmm_train.k, "components")->required();
    sub->add_option("--pca", gmm_train.pca, "project with this PCA model");
    sub->add_option("--sample", gmm_train.sample, "row subsample, 0 = all");
    sub->add_option("--iters", gmm_train.iters, "EM iteration cap");
    sub->add_option("--tol", gmm_train.tol, "relative log-likelihood tolerance");
    sub->add_option("--threads", gmm_train.threads, "worker threads, 0 = hardware");
    sub->add_option("--seed", gmm_train.seed, "training seed")->required();
    sub->add_option("--out", gmm_train.out, "output model (json)")->required();
  }

  StatsArgs stats;
  {
    CLI::App* sub = app.add_subcommand("stats", "per-image sufficient statistics");
    sub->add_option("--input", stats.input, "dataset index (tsv)")->required();
    sub->add_option("--split", stats.split, "split to cover, empty = all");
    sub->add_option("--vocab", stats.vocab, "mixture vocabulary (json)")->required();
    sub->add_option("--pca", stats.pca, "project with this PCA model");
    sub->add_option("--clip", stats.clip, "keep top posteriors, 0 = all");
    sub->add_option("--threads", stats.threads, "worker threads, 0 = hardware");
    sub->add_option("--out-dir", stats.out_dir, "statistics directory")->required();
  }

  FitPolyaArgs fit_polya;
  {
    CLI::App* sub = app.add_subcommand("fit-polya", "fit count priors from statistics");
    sub->add_option("--input", fit_polya.input, "dataset index (tsv)")->required();
    sub->add_option("--split", fit_polya.split, "split to fit on (default train)");
    sub->add_option("--stats-dir", fit_polya.stats_dir, "statistics directory")->required();
    sub->add_option("--out", fit_polya.out, "output model (json)")->required();
    sub->add_option("--out-multinomial", fit_polya.out_multinomial,
                    "also fit a pooled multinomial");
  }

  PlsaTrainArgs plsa_train;
  {
    CLI::App* sub = app.add_subcommand("plsa-train", "train a topic model on counts");
    sub->add_option("--input", plsa_train.input, "dataset index (tsv)")->required();
    sub->add_option("--split", plsa_train.split, "split to fit on (default train)");
    sub->add_option("--stats-dir", plsa_train.stats_dir, "statistics directory")->required();
    sub->add_option("--topics", plsa_train.topics, "topic count")->required();
    sub->add_option("--iters", plsa_train.iters, "EM iteration cap");
    sub->add_option("--tol", plsa_train.tol, "relative log-likelihood tolerance");
    sub->add_option("--threads", plsa_train.threads, "worker threads, 0 = hardware");
    sub->add_option("--seed", plsa_train.seed, "training seed")->required();
    sub->add_option("--out", plsa_train.out, "output model (json)")->required();
  }

  LdaFitArgs lda_fit;
  {
    CLI::App* sub = app.add_subcommand("lda-fit", "fit Dirichlet priors from a topic model");
    sub->add_option("--input", lda_fit.input, "dataset index (tsv)")->required();
    sub->add_option("--split", lda_fit.split, "split to fit on (default train)");
    sub->add_option("--stats-dir", lda_fit.stats_dir, "statistics directory")->required();
    sub->add_option("--plsa", lda_fit.plsa, "trained topic model (json)")->required();
    sub->add_option("--out", lda_fit.out, "output model (json)")->required();
  }

  LatmogInitArgs latmog_init;
  {
    CLI::App* sub = app.add_subcommand("latmog-init", "moment-matched latent mixture priors");
    sub->add_option("--input", latmog_init.input, "dataset index (tsv)")->required();
    sub->add_option("--split", latmog_init.split, "split to fit on (default train)");
    sub->add_option("--stats-dir", latmog_init.stats_dir, "statistics directory")->required();
    sub->add_option("--trunc-factor", latmog_init.trunc_factor,
                    "precision truncation multiple");
    sub->add_option("--out", latmog_init.out, "output model (json)")->required();
  }

  LatmogTrainArgs latmog_train;
  {
    CLI::App* sub = app.add_subcommand("latmog-train", "refine latent mixture priors");
    sub->add_option("--input", latmog_train.input, "dataset index (tsv)")->required();
    sub->add_option("--split", latmog_train.split, "split to fit on (default train)");
    sub->add_option("--stats-dir", latmog_train.stats_dir, "statistics directory")->required();
    sub->add_option("--init", latmog_train.init, "initial model (json)")->required();
    sub->add_option("--iters", latmog_train.iters, "outer iteration cap");
    sub->add_option("--tol", latmog_train.tol, "relative objective tolerance");
    sub->add_option("--threads", latmog_train.threads, "worker threads, 0 = hardware");
    sub->add_option("--out", latmog_train.out, "output model (json)")->required();
  }

  EncodeArgs encode;
  {
    CLI::App* sub = app.add_subcommand("encode", "encode images as score vectors");
    sub->add_option("--input", encode.input, "dataset index (tsv)")->required();
    sub->add_option("--vocab", encode.vocab, "mixture vocabulary (json)")->required();
    sub->add_option("--model", encode.model, "score model")
        ->required()
        ->check(CLI::IsMember({"bow", "polya", "plsa", "lda", "mog", "latmog"}));
    sub->add_option("--count-model", encode.count_model,
                    "count or latent model (json); not used by mog");
    sub->add_option("--pca", encode.pca, "project with this PCA model");
    sub->add_option("--stats-dir", encode.stats_dir,
                    "encode a statistics cache instead of descriptors");
    sub->add_option("--rho", encode.rho, "power normalization exponent")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--spm", encode.spm, "spatial grid")
        ->check(CLI::IsMember({"single", "default"}));
    sub->add_option("--clip", encode.clip, "keep top posteriors, 0 = all");
    sub->add_option("--whiten", encode.whiten,
                    "standardize against the train split or skip")
        ->check(CLI::IsMember({"none", "train"}));
    sub->add_option("--threads", encode.threads, "worker threads, 0 = hardware");
    sub->add_option("--out-dir", encode.out_dir, "vector directory")->required();
  }

  SvmTrainArgs svm_train;
  {
    CLI::App* sub = app.add_subcommand("svm-train", "train one-vs-rest linear classifiers");
    sub->add_option("--input", svm_train.input, "dataset index (tsv)")->required();
    sub->add_option("--split", svm_train.split, "split to fit on (default train)");
    sub->add_option("--vectors-dir", svm_train.vectors_dir, "vector directory")->required();
    sub->add_option("--c-grid", svm_train.c_grid,
                    "comma-separated regularization grid");
    sub->add_option("--folds", svm_train.folds, "validation folds");
    sub->add_option("--gap-tol", svm_train.gap_tol, "duality gap stop");
    sub->add_option("--max-epochs", svm_train.max_epochs, "epoch cap");
    sub->add_option("--threads", svm_train.threads, "worker threads, 0 = hardware");
    sub->add_option("--seed", svm_train.seed, "shuffle seed")->required();
    sub->add_option("--out", svm_train.out, "output model (json)")->required();
  }

  EvalArgs eval;
  {
    CLI::App* sub = app.add_subcommand("eval", "score a split and report a metric");
    sub->add_option("--input", eval.input, "dataset index (tsv)")->required();
    sub->add_option("--split", eval.split, "split to score (default test)");
    sub->add_option("--vectors-dir", eval.vectors_dir, "vector directory")->required();
    sub->add_option("--svm", eval.svm, "classifier model (json)")->required();
    sub->add_option("--metric", eval.metric, "map11 or accuracy")
        ->required()
        ->check(CLI::IsMember({"map11", "accuracy"}));
    sub->add_option("--out", eval.out, "report csv")->required();
    sub->add_option("--predictions", eval.predictions, "per-image score csv");
  }

  CompareArgs compare;
  {
    CLI::App* sub = app.add_subcommand("compare", "paired bootstrap of two systems");
    sub->add_option("--input", compare.input, "dataset index (tsv)")->required();
    sub->add_option("--split", compare.split, "split to score (default test)");
    sub->add_option("--vectors-a", compare.vectors_a, "first vector directory")->required();
    sub->add_option("--vectors-b", compare.vectors_b, "second vector directory")->required();
    sub->add_option("--svm-a", compare.svm_a, "first classifier (json)")->required();
    sub->add_option("--svm-b", compare.svm_b, "second classifier (json)")->required();
    sub->add_option("--metric", compare.metric, "map11 or accuracy")
        ->required()
        ->check(CLI::IsMember({"map11", "accuracy"}));
    sub->add_option("--iters", compare.iters, "bootstrap resamples");
    sub->add_option("--threads", compare.threads, "worker threads, 0 = hardware");
    sub->add_option("--seed", compare.seed, "resample seed")->required();
    sub->add_option("--out", compare.out, "comparison csv")->required();
  }

  SynthArgs synth;
  {
    CLI::App* sub = app.add_subcommand("synth", "sample a synthetic dataset");
    sub->add_option("--kind", synth.spec.kind, "generator family")
        ->required()
        ->check(CLI::IsMember({"polya", "plsa", "lda", "latmog"}));
    sub->add_option("--classes", synth.spec.classes, "class count");
    sub->add_option("--train-per-class", synth.spec.train_per_class, "train images per class");
    sub->add_option("--test-per-class", synth.spec.test_per_class, "test images per class");
    sub->add_option("--descriptors", synth.spec.descriptors_per_image, "descriptors per image");
    sub->add_option("--vocab", synth.spec.vocab, "word centers or components");
    sub->add_option("--dim", synth.spec.dim, "descriptor dimension");
    sub->add_option("--topics", synth.spec.topics, "topics for the topic kinds");
    sub->add_option("--concentration", synth.spec.concentration,
                    "prior strength; smaller is burstier");
    sub->add_option("--class-offset", synth.spec.class_offset,
                    "log-scale class separation");
    sub->add_option("--within-sigma", synth.spec.within_sigma,
                    "emission noise around word centers");
    sub->add_option("--embed-dim", synth.spec.embed_dim,
                    "rotate into this many dimensions, 0 = off");
    sub->add_option("--residual-sigma", synth.spec.residual_sigma,
                    "embedding residual noise");
    sub->add_option("--latent-gamma-shape", synth.spec.latent_gamma_shape,
                    "latent kind precision shape");
    sub->add_option("--latent-beta", synth.spec.latent_beta,
                    "latent kind mean coupling");
    sub->add_option("--seed", synth.spec.seed, "generator seed")->required();
    sub->add_option("--out-dir", synth.out_dir, "dataset directory")->required();
  }

  SweepArgs sweep;
  {
    CLI::App* sub = app.add_subcommand("sweep", "subspace size versus component count study");
    sub->add_option("--input", sweep.input, "dataset index (tsv)")->required();
    sub->add_option("--pairs", sweep.pairs, "comma-separated DxK pairs")->required();
    sub->add_option("--cap", sweep.cap, "pooled descriptor cap");
    sub->add_option("--threads", sweep.threads, "worker threads, 0 = hardware");
    sub->add_option("--seed", sweep.seed, "sweep seed")->required();
    sub->add_option("--out", sweep.out, "result csv")->required();
  }

  CurveArgs curve;
  {
    CLI::App* sub = app.add_subcommand("curve", "count transfer curve");
    sub->add_option("--alpha", curve.alpha, "prior strength per component")
        ->required()
        ->check(CLI::PositiveNumber);
    sub->add_option("--n-max", curve.n_max, "largest count")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", curve.out, "curve csv")->required();
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("nifv");
  for (const std::string& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("pca-fit")) RunPcaFit(pca_fit);
    else if (app.got_subcommand("gmm-train")) RunGmmTrain(gmm_train);
    else if (app.got_subcommand("stats")) RunStats(stats);
    else if (app.got_subcommand("fit-polya")) RunFitPolya(fit_polya);
    else if (app.got_subcommand("plsa-train")) RunPlsaTrain(plsa_train);
    else if (app.got_subcommand("lda-fit")) RunLdaFit(lda_fit);
    else if (app.got_subcommand("latmog-init")) RunLatmogInit(latmog_init);
    else if (app.got_subcommand("latmog-train")) RunLatmogTrain(latmog_train);
    else if (app.got_subcommand("encode")) RunEncode(encode);
    else if (app.got_subcommand("svm-train")) RunSvmTrain(svm_train);
    else if (app.got_subcommand("eval")) RunEval(eval);
    else if (app.got_subcommand("compare")) RunCompare(compare);
    else if (app.got_subcommand("synth")) RunSynth(synth);
    else if (app.got_subcommand("sweep")) RunSweep(sweep);
    else if (app.got_subcommand("curve")) RunCurve(curve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nifv
