// tests/test_specfun.cpp

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

#include <doctest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nifv/specfun.hpp"

namespace {
constexpr double kEulerGamma = 0.57721566490153286061;
}

TEST_CASE("log_gamma closed-form values") {
  CHECK(std::abs(nifv::LogGamma(1.0) - 0.0) <= 1e-12);
  CHECK(std::abs(nifv::LogGamma(5.0) - std::log(24.0)) <= 1e-12);
  CHECK(std::abs(nifv::LogGamma(0.5) - 0.5 * std::log(M_PI)) <= 1e-12);
}

TEST_CASE("digamma closed-form values") {
  CHECK(std::abs(nifv::Digamma(1.0) - (-kEulerGamma)) <= 1e-12);
  CHECK(std::abs(nifv::Digamma(2.0) - (1.0 - kEulerGamma)) <= 1e-12);
  CHECK(std::abs(nifv::Digamma(0.5) - (-kEulerGamma - 2.0 * std::log(2.0))) <=
        1e-12);
}

TEST_CASE("digamma and log_gamma recurrences on random points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e3));
  for (int i = 0; i < 10000; ++i) {
    const double x = std::exp(u(rng));
    CHECK(std::abs(nifv::Digamma(x + 1.0) - nifv::Digamma(x) - 1.0 / x) <=
          1e-10);
    CHECK(std::abs(nifv::LogGamma(x + 1.0) - nifv::LogGamma(x) - std::log(x)) <=
          1e-10);
  }
}

TEST_CASE("digamma equals finite difference of log_gamma") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(std::log(0.1), std::log(100.0));
  const double h = 1e-5;
  for (int i = 0; i < 2000; ++i) {
    const double x = std::exp(u(rng));
    const double fd = (nifv::LogGamma(x + h) - nifv::LogGamma(x - h)) / (2 * h);
    const double psi = nifv::Digamma(x);
    CHECK(std::abs(fd - psi) <= 1e-6 * std::max(1.0, std::abs(psi)));
  }
}

TEST_CASE("digamma is strictly increasing") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(std::log(1e-6), std::log(1e5));
  for (int i = 0; i < 2000; ++i) {
    const double a = std::exp(u(rng));
    const double b = a * 1.01 + 1e-7;
    CHECK(nifv::Digamma(b) > nifv::Digamma(a));
  }
}

// Independent reference implementation.
TEST_CASE("agreement with boost.math") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(std::log(1e-6), std::log(1e6));
  for (int i = 0; i < 5000; ++i) {
    const double x = std::exp(u(rng));
    const double lg = nifv::LogGamma(x);
    const double ps = nifv::Digamma(x);
    CHECK(std::abs(lg - boost::math::lgamma(x)) <=
          1e-12 * std::max(1.0, std::abs(lg)));
    CHECK(std::abs(ps - boost::math::digamma(x)) <=
          1e-12 * std::max(1.0, std::abs(ps)));
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(nifv::LogGamma(0.0), std::domain_error);
  CHECK_THROWS_AS(nifv::LogGamma(-1.0), std::domain_error);
  CHECK_THROWS_AS(nifv::LogGamma(1e-9), std::domain_error);
  CHECK_THROWS_AS(nifv::LogGamma(std::nan("")), std::domain_error);
  CHECK_THROWS_AS(nifv::Digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(nifv::Digamma(-3.5), std::domain_error);
  CHECK_THROWS_AS(nifv::Digamma(std::numeric_limits<double>::infinity()),
                  std::domain_error);
}
