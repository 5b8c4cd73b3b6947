// src/specfun.cpp

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

#include "nifv/specfun.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nifv {

namespace {

constexpr double kMinArg = 1e-8;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

void CheckArg(const char* name, double x) {
  if (!(std::isfinite(x) && x >= kMinArg)) {
    throw std::domain_error(std::string(name) +
                            ": argument must be finite and >= 1e-8, got " +
                            std::to_string(x));
  }
}

}  // namespace

double Digamma(double x) {
  CheckArg("Digamma", x);
  // Shift into the asymptotic regime with psi(x) = psi(x + 1) - 1/x.
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic series in 1/x^2, Bernoulli terms through x^-12.
  const double r = 1.0 / x;
  const double r2 = r * r;
  const double tail =
      r2 * (1.0 / 12.0 -
            r2 * (1.0 / 120.0 -
                  r2 * (1.0 / 252.0 -
                        r2 * (1.0 / 240.0 -
                              r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0))))));
  return std::log(x) - 0.5 * r - tail + acc;
}

double LogGamma(double x) {
  CheckArg("LogGamma", x);
  // Shift into the asymptotic regime with lgamma(x) = lgamma(x + 1) - ln x.
  double acc = 0.0;
  while (x < 10.0) {
    acc -= std::log(x);
    x += 1.0;
  }
  // Stirling series, Bernoulli terms through x^-11.
  const double r = 1.0 / x;
  const double r2 = r * r;
  const double series =
      r * (1.0 / 12.0 -
           r2 * (1.0 / 360.0 -
                 r2 * (1.0 / 1260.0 -
                       r2 * (1.0 / 1680.0 -
                             r2 * (1.0 / 1188.0 - r2 * (691.0 / 360360.0))))));
  return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + series + acc;
}

}  // namespace nifv
