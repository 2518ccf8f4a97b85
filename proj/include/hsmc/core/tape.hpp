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

#ifndef HSMC_CORE_TAPE_HPP
#define HSMC_CORE_TAPE_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsmc/core/types.hpp"

namespace hsmc {

class Tape;

/// Operations the tape knows how to differentiate. Anything else must go
/// through opaque_eval, whose backward pass raises kUnsupportedTapeOp.
enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,      // elementwise; either side may be 1x1 (broadcast)
  kDiv,      // elementwise; either side may be 1x1 (broadcast)
  kMatMul,
  kTranspose,
  kAffine,   // s * a + c, elementwise with scalar constants
  kTanh,
  kRelu,
  kStep,     // 1[x > 0]; derivative zero almost everywhere
  kSigmoid,
  kSoftplus,
  kExp,
  kLog,
  kSqrt,
  kSquare,
  kSin,
  kCos,
  kDot,      // Frobenius inner product -> 1x1
  kSum,      // sum of entries -> 1x1
  kVCat,     // stack rows of a over rows of b
  kSegment,  // rows [i0, i0+i1)
  kDiagVec,  // diagonal of a square matrix as a column vector
  kDiagMat,  // column vector to diagonal matrix
  kPosdefSolve,   // K^{-1} B for symmetric positive-definite K
  kPosdefLogdet,  // log|K| for symmetric positive-definite K
  kOpaque,   // value computed outside the op set; not differentiable
};

const char* op_name(Op op);

/// A differentiable value: a dense matrix, optionally recorded as a node on
/// a tape. Column vectors are n-by-1 matrices and scalars are 1-by-1. Taped
/// and untaped values flow through the same arithmetic, so model code is
/// written once and runs with or without gradients.
class Val {
 public:
  Val() = default;
  Val(Mat m) : m_(std::move(m)) {}                       // NOLINT(runtime/explicit)
  Val(const Vec& v) : m_(v) {}                           // NOLINT(runtime/explicit)
  Val(double x) : m_(Mat::Constant(1, 1, x)) {}          // NOLINT(runtime/explicit)
  Val(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool taped() const { return tape_ != nullptr; }
  bool defined() const { return tape_ != nullptr || m_.size() > 0; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Mat& value() const;
  double scalar() const;
  Vec vector() const { return value().col(0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
  Mat m_;
};

/// Reverse-mode tape over matrix values. Nodes are appended in evaluation
/// order, so parents always precede children and one backward sweep visits
/// each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int push(Op op, Mat value, int a = -1, int b = -1, double s = 0.0,
           double c = 0.0, int i0 = 0, int i1 = 0);

  const Mat& value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  Val leaf(Mat v) { return Val(this, push(Op::kLeaf, std::move(v))); }
  Val constant(Mat v) { return Val(this, push(Op::kConst, std::move(v))); }

  /// Leaf memoized per external parameter slot: repeated requests within one
  /// tape return the same node, so adjoints accumulate in one place.
  Val param_leaf(int slot, const Mat& v);
  bool has_param(int slot) const { return param_nodes_.count(slot) > 0; }

  /// Runs the backward sweep from a scalar output. Overwrites any adjoints
  /// from a previous sweep on this tape.
  void backward(int output_id);

  /// Adjoint of a node after backward(); zeros if the node was not reached.
  Mat adjoint(int id) const;
  /// Adjoint of a registered parameter slot; zeros(rows, cols) if untouched.
  Mat param_adjoint(int slot, Eigen::Index rows, Eigen::Index cols) const;

  void clear();

 private:
  struct Node {
    Mat value;
    int a = -1;
    int b = -1;
    Op op = Op::kConst;
    double s = 0.0;
    double c = 0.0;
    int i0 = 0;
    int i1 = 0;
  };

  void accumulate(int id, const Mat& grad);

  std::vector<Node> nodes_;
  std::vector<Mat> adjoints_;  // empty Mat == not reached
  std::unordered_map<int, int> param_nodes_;
};

// ---- Recorded operations -------------------------------------------------
//
// Each returns a Val on the common tape of its operands (or an untaped Val
// when none is taped). Shape violations throw kDimensionMismatch.

Val operator+(const Val& a, const Val& b);
Val operator-(const Val& a, const Val& b);
Val operator-(const Val& a);
/// Scalar scaling: one side must be 1x1 (or use the double overloads).
Val operator*(const Val& a, const Val& b);
Val operator*(double s, const Val& a);
Val operator*(const Val& a, double s);
Val operator/(const Val& a, const Val& b);
Val operator/(const Val& a, double s);
Val operator+(const Val& a, double c);
Val operator-(const Val& a, double c);

Val cwise_mul(const Val& a, const Val& b);
Val cwise_div(const Val& a, const Val& b);
Val matmul(const Val& a, const Val& b);
Val transpose(const Val& a);
Val tanh(const Val& a);
Val relu(const Val& a);
Val step(const Val& a);
Val sigmoid(const Val& a);
Val softplus(const Val& a);
Val exp(const Val& a);
Val log(const Val& a);
Val sqrt(const Val& a);
Val square(const Val& a);
Val sin(const Val& a);
Val cos(const Val& a);
Val dot(const Val& a, const Val& b);
Val sum(const Val& a);
Val vcat(const Val& a, const Val& b);
Val vcat(const std::vector<Val>& parts);
Val segment(const Val& a, int start, int len);
Val diag_vec(const Val& a);
Val diag_mat(const Val& a);
Val posdef_solve(const Val& k, const Val& b);
Val posdef_logdet(const Val& k);

/// log(mean of exp(terms)) for scalar terms, computed stably. The shift is
/// detached, which leaves both the value and the gradient exact.
Val log_mean_exp(const std::vector<Val>& terms);

/// Evaluates an arbitrary function of the value. The result participates in
/// forward computation but raises kUnsupportedTapeOp if the backward sweep
/// reaches it.
Val opaque_eval(const Val& a, Mat (*fn)(const Mat&), const char* what);

/// d(output)/d(each wrt): runs backward on output's tape. Output must be a
/// taped scalar; wrt entries must be leaves on the same tape.
std::vector<Mat> grad(const Val& output, const std::vector<Val>& wrt);

}  // namespace hsmc

#endif  // HSMC_CORE_TAPE_HPP
