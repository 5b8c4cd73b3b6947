// tests/testing_util.hpp

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

#ifndef NIFV_TESTS_TESTING_UTIL_HPP_
#define NIFV_TESTS_TESTING_UTIL_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>

namespace nifv_test {

// Central finite difference of a scalar function of one coordinate of a
// parameter vector, with the other coordinates held fixed.
inline double CentralDiff(const std::function<double(double)>& f, double x,
                          double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - b| <= tol_rel * max(|a|, |b|) + tol_abs
inline bool Close(double a, double b, double tol_rel, double tol_abs) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= tol_rel * scale + tol_abs;
}

inline Eigen::VectorXd RandomSimplex(std::mt19937_64& rng, int k,
                                     double conc = 1.0) {
  std::gamma_distribution<double> g(conc, 1.0);
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = g(rng) + 1e-12;
  return v / v.sum();
}

inline Eigen::VectorXd RandomPositive(std::mt19937_64& rng, int k, double lo,
                                      double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = std::exp(u(rng));
  return v;
}

}  // namespace nifv_test

#endif  // NIFV_TESTS_TESTING_UTIL_HPP_
