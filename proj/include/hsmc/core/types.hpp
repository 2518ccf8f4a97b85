// Copyright 2026 The HSMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HSMC_CORE_TYPES_HPP
#define HSMC_CORE_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hsmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Error categories used across the library. Every throwing contract maps to
/// one of these so callers can dispatch without string matching.
enum class ErrorCode {
  kDimensionMismatch,
  kNotPositiveDefinite,   // payload: failing pivot index
  kUnsupportedTapeOp,     // payload-free; message names the offending op
  kFixedPointDivergence,  // payload: residual norm in value()
  kDegenerateWeights,     // payload: time index
  kNonFiniteValue,
  kInvalidArgument,
  kIoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, long index = -1,
        double value = 0.0)
      : std::runtime_error(message), code_(code), index_(index), value_(value) {}

  ErrorCode code() const { return code_; }
  /// Context-dependent integer payload (pivot index, time step, ...).
  long index() const { return index_; }
  /// Context-dependent scalar payload (residual norm, ...).
  double value() const { return value_; }

 private:
  ErrorCode code_;
  long index_;
  double value_;
};

inline void require(bool cond, ErrorCode code, const std::string& message,
                    long index = -1, double value = 0.0) {
  if (!cond) throw Error(code, message, index, value);
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace hsmc

#endif  // HSMC_CORE_TYPES_HPP
