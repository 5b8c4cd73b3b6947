// include/nifv/model_io.hpp

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

#ifndef NIFV_MODEL_IO_HPP_
#define NIFV_MODEL_IO_HPP_

#include <string>

#include "nifv/count_models.hpp"
#include "nifv/descriptors.hpp"
#include "nifv/encoder.hpp"
#include "nifv/eval.hpp"
#include "nifv/gmm.hpp"
#include "nifv/latent_mog.hpp"
#include "nifv/topic_models.hpp"

namespace nifv {

// Every model is stored as a single JSON object with a "type" tag. Loading
// validates shapes and finiteness and throws std::runtime_error with the
// path on malformed input; saving rejects non-finite parameters instead of
// silently writing nulls.

std::string PeekModelType(const std::string& path);

void SaveMultinomialModel(const MultinomialModel& model,
                          const std::string& path);
MultinomialModel LoadMultinomialModel(const std::string& path);

void SavePolyaModel(const PolyaModel& model, const std::string& path);
PolyaModel LoadPolyaModel(const std::string& path);

void SavePlsaModel(const PlsaModel& model, const std::string& path);
PlsaModel LoadPlsaModel(const std::string& path);

void SaveLdaModel(const LdaModel& model, const std::string& path);
LdaModel LoadLdaModel(const std::string& path);

void SaveLatentMogModel(const LatentMogModel& model, const std::string& path);
LatentMogModel LoadLatentMogModel(const std::string& path);

void SaveGmmModel(const GaussianMixture& model, const std::string& path);
GaussianMixture LoadGmmModel(const std::string& path);

void SavePcaModel(const PcaModel& model, const std::string& path);
PcaModel LoadPcaModel(const std::string& path);

void SaveWhitenStats(const WhitenStats& stats, const std::string& path);
WhitenStats LoadWhitenStats(const std::string& path);

void SaveLinearModel(const LinearModel& model, const std::string& path);
LinearModel LoadLinearModel(const std::string& path);

}  // namespace nifv

#endif  // NIFV_MODEL_IO_HPP_
