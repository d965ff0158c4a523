// Copyright 2026 The Arbiter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ARBITER_COMMON_HPP_
#define ARBITER_COMMON_HPP_

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace arbiter {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Probability/normalization slack used by the domain-type invariants.
inline constexpr double kProbTol = 1e-12;

// Thrown when a value leaves its declared domain (bounds, simplex, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Thrown on structural problems (dimension mismatch, bad config, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
[[noreturn]] inline void fail_check(const char* expr, const std::string& msg) {
  std::ostringstream os;
  os << "check failed: " << expr;
  if (!msg.empty()) os << " (" << msg << ")";
  throw InvalidArgument(os.str());
}
}  // namespace detail

#define ARB_CHECK(cond, msg)                              \
  do {                                                    \
    if (!(cond)) ::arbiter::detail::fail_check(#cond, msg); \
  } while (0)

inline void check_index(int value, int bound, const char* what) {
  if (value < 0 || value >= bound) {
    std::ostringstream os;
    os << what << " index " << value << " out of range [0," << bound << ")";
    throw std::out_of_range(os.str());
  }
}

// Shannon entropy of a probability vector. Zero entries contribute zero.
inline double shannon_entropy(const Vec& p) {
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

// Numerically stable log(sum(exp(x))).
inline double log_sum_exp(const Vec& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

}  // namespace arbiter

#endif  // ARBITER_COMMON_HPP_
