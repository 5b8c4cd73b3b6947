// include/nifv/specfun.hpp

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

#ifndef NIFV_SPECFUN_HPP_
#define NIFV_SPECFUN_HPP_

namespace nifv {

// Natural logarithm of the Gamma function. Arguments must be finite and
// >= 1e-8; anything else throws std::domain_error.
double LogGamma(double x);

// Derivative of LogGamma (the digamma function psi). Same domain contract
// as LogGamma.
double Digamma(double x);

}  // namespace nifv

#endif  // NIFV_SPECFUN_HPP_
