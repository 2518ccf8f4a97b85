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

#include "hsmc/core/tape.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace hsmc {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAffine: return "affine";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kStep: return "step";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftplus: return "softplus";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kSquare: return "square";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kDot: return "dot";
    case Op::kSum: return "sum";
    case Op::kVCat: return "vcat";
    case Op::kSegment: return "segment";
    case Op::kDiagVec: return "diag_vec";
    case Op::kDiagMat: return "diag_mat";
    case Op::kPosdefSolve: return "posdef_solve";
    case Op::kPosdefLogdet: return "posdef_logdet";
    case Op::kOpaque: return "opaque";
  }
  return "?";
}

const Mat& Val::value() const {
  require(defined(), ErrorCode::kInvalidArgument, "use of undefined Val");
  return tape_ ? tape_->value(id_) : m_;
}

double Val::scalar() const {
  const Mat& m = value();
  require(m.rows() == 1 && m.cols() == 1, ErrorCode::kDimensionMismatch,
          "scalar() on non-1x1 value");
  return m(0, 0);
}

int Tape::push(Op op, Mat value, int a, int b, double s, double c, int i0,
               int i1) {
  Node n;
  n.value = std::move(value);
  n.a = a;
  n.b = b;
  n.op = op;
  n.s = s;
  n.c = c;
  n.i0 = i0;
  n.i1 = i1;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Val Tape::param_leaf(int slot, const Mat& v) {
  auto it = param_nodes_.find(slot);
  if (it != param_nodes_.end()) return Val(this, it->second);
  int id = push(Op::kLeaf, v);
  param_nodes_.emplace(slot, id);
  return Val(this, id);
}

void Tape::accumulate(int id, const Mat& grad) {
  const Mat& v = nodes_[id].value;
  Mat& adj = adjoints_[id];
  if (v.rows() == grad.rows() && v.cols() == grad.cols()) {
    if (adj.size() == 0) {
      adj = grad;
    } else {
      adj += grad;
    }
    return;
  }
  // Reduction of a broadcasted contribution back onto a 1x1 parent.
  require(v.rows() == 1 && v.cols() == 1, ErrorCode::kDimensionMismatch,
          "adjoint shape mismatch");
  if (adj.size() == 0) adj = Mat::Zero(1, 1);
  adj(0, 0) += grad.sum();
}

Mat Tape::adjoint(int id) const {
  if (id >= 0 && id < static_cast<int>(adjoints_.size()) &&
      adjoints_[id].size() > 0) {
    return adjoints_[id];
  }
  const Mat& v = nodes_[id].value;
  return Mat::Zero(v.rows(), v.cols());
}

Mat Tape::param_adjoint(int slot, Eigen::Index rows, Eigen::Index cols) const {
  auto it = param_nodes_.find(slot);
  if (it == param_nodes_.end()) return Mat::Zero(rows, cols);
  return adjoint(it->second);
}

void Tape::clear() {
  nodes_.clear();
  adjoints_.clear();
  param_nodes_.clear();
}

void Tape::backward(int output_id) {
  require(output_id >= 0 && output_id < static_cast<int>(nodes_.size()),
          ErrorCode::kInvalidArgument, "backward: bad output id");
  const Mat& out = nodes_[output_id].value;
  require(out.rows() == 1 && out.cols() == 1, ErrorCode::kDimensionMismatch,
          "backward: output must be scalar");

  adjoints_.assign(nodes_.size(), Mat());
  adjoints_[output_id] = Mat::Ones(1, 1);

  for (int id = output_id; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Mat& g = adjoints_[id];
    if (g.size() == 0) continue;  // node not on any path to the output
    const Mat* av = n.a >= 0 ? &nodes_[n.a].value : nullptr;
    const Mat* bv = n.b >= 0 ? &nodes_[n.b].value : nullptr;

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kMul: {
        bool a_scalar = av->size() == 1 && g.size() > 1;
        bool b_scalar = bv->size() == 1 && g.size() > 1;
        if (b_scalar) {
          accumulate(n.a, g * (*bv)(0, 0));
        } else {
          // same shape as g whether or not a broadcasts; accumulate reduces
          accumulate(n.a, g.cwiseProduct(*bv));
        }
        if (a_scalar) {
          accumulate(n.b, g.cwiseProduct(*bv) * 0.0 + g.cwiseProduct(*bv));
        } else if (av->size() == 1) {
          accumulate(n.b, g * (*av)(0, 0));
        } else {
          accumulate(n.b, g.cwiseProduct(*av));
        }
        break;
      }
      case Op::kDiv: {
        // y = a / b
        if (bv->size() == 1 && g.size() > 1) {
          double binv = 1.0 / (*bv)(0, 0);
          accumulate(n.a, g * binv);
          accumulate(n.b, -(g.cwiseProduct(*av) * (binv * binv)));
        } else if (av->size() == 1 && g.size() > 1) {
          accumulate(n.a, g.cwiseQuotient(*bv));
          Mat db = -(g * (*av)(0, 0)).cwiseQuotient(bv->cwiseProduct(*bv));
          accumulate(n.b, db);
        } else {
          accumulate(n.a, g.cwiseQuotient(*bv));
          accumulate(n.b,
                     -(g.cwiseProduct(*av)).cwiseQuotient(bv->cwiseProduct(*bv)));
        }
        break;
      }
      case Op::kMatMul:
        accumulate(n.a, g * bv->transpose());
        accumulate(n.b, av->transpose() * g);
        break;
      case Op::kTranspose:
        accumulate(n.a, g.transpose());
        break;
      case Op::kAffine:
        accumulate(n.a, g * n.s);
        break;
      case Op::kTanh:
        accumulate(n.a, g.cwiseProduct(Mat::Ones(g.rows(), g.cols()) -
                                       n.value.cwiseProduct(n.value)));
        break;
      case Op::kRelu:
        accumulate(n.a, g.cwiseProduct(
                            (av->array() > 0.0).cast<double>().matrix()));
        break;
      case Op::kStep:
        break;  // derivative zero a.e.
      case Op::kSigmoid:
        accumulate(n.a, g.cwiseProduct(n.value.cwiseProduct(
                            Mat::Ones(g.rows(), g.cols()) - n.value)));
        break;
      case Op::kSoftplus:
        accumulate(n.a, g.cwiseProduct(
                            (1.0 / (1.0 + (-av->array()).exp())).matrix()));
        break;
      case Op::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kLog:
        accumulate(n.a, g.cwiseQuotient(*av));
        break;
      case Op::kSqrt:
        accumulate(n.a, (g.array() / (2.0 * n.value.array())).matrix());
        break;
      case Op::kSquare:
        accumulate(n.a, 2.0 * g.cwiseProduct(*av));
        break;
      case Op::kSin:
        accumulate(n.a, g.cwiseProduct(av->array().cos().matrix()));
        break;
      case Op::kCos:
        accumulate(n.a, -g.cwiseProduct(av->array().sin().matrix()));
        break;
      case Op::kDot:
        accumulate(n.a, g(0, 0) * (*bv));
        accumulate(n.b, g(0, 0) * (*av));
        break;
      case Op::kSum:
        accumulate(n.a, Mat::Constant(av->rows(), av->cols(), g(0, 0)));
        break;
      case Op::kVCat:
        accumulate(n.a, g.topRows(av->rows()));
        accumulate(n.b, g.bottomRows(bv->rows()));
        break;
      case Op::kSegment: {
        Mat da = Mat::Zero(av->rows(), av->cols());
        da.middleRows(n.i0, n.i1) = g;
        accumulate(n.a, da);
        break;
      }
      case Op::kDiagVec: {
        Mat da = Mat::Zero(av->rows(), av->cols());
        da.diagonal() = g.col(0);
        accumulate(n.a, da);
        break;
      }
      case Op::kDiagMat:
        accumulate(n.a, Mat(g.diagonal()));
        break;
      case Op::kPosdefSolve: {
        Eigen::LLT<Mat> llt(*av);
        Mat kg = llt.solve(g);
        accumulate(n.b, kg);
        accumulate(n.a, Mat(-kg * n.value.transpose()));
        break;
      }
      case Op::kPosdefLogdet: {
        Eigen::LLT<Mat> llt(*av);
        Mat kinv = llt.solve(Mat::Identity(av->rows(), av->cols()));
        accumulate(n.a, Mat(g(0, 0) * kinv));
        break;
      }
      case Op::kOpaque:
        throw Error(ErrorCode::kUnsupportedTapeOp,
                    std::string("backward reached unsupported op: ") +
                        "opaque(" + opaque_names_.at(id) + ")");
    }
  }
}

namespace detail {

Tape* common_tape(const Val& a, const Val& b) {
  if (a.taped() && b.taped()) {
    require(a.tape() == b.tape(), ErrorCode::kInvalidArgument,
            "operands recorded on different tapes");
    return a.tape();
  }
  return a.taped() ? a.tape() : b.tape();
}

int ensure_node(Tape* t, const Val& v) {
  if (v.taped()) return v.id();
  return t->push(Op::kConst, v.value());
}

Val unary(Op op, const Val& a, Mat value, double s = 0.0, double c = 0.0,
          int i0 = 0, int i1 = 0) {
  if (!a.taped()) return Val(std::move(value));
  Tape* t = a.tape();
  return Val(t, t->push(op, std::move(value), a.id(), -1, s, c, i0, i1));
}

Val binary(Op op, const Val& a, const Val& b, Mat value) {
  Tape* t = common_tape(a, b);
  if (t == nullptr) return Val(std::move(value));
  int ia = ensure_node(t, a);
  int ib = ensure_node(t, b);
  return Val(t, t->push(op, std::move(value), ia, ib));
}

void require_same_shape(const Val& a, const Val& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          ErrorCode::kDimensionMismatch, std::string(what) + ": shape mismatch");
}

bool is_scalar(const Val& v) { return v.rows() == 1 && v.cols() == 1; }

void require_broadcastable(const Val& a, const Val& b, const char* what) {
  if (is_scalar(a) || is_scalar(b)) return;
  require_same_shape(a, b, what);
}

Mat bval(const Val& v, Eigen::Index r, Eigen::Index c) {
  if (v.rows() == r && v.cols() == c) return v.value();
  return Mat::Constant(r, c, v.value()(0, 0));
}

}  // namespace detail

using detail::binary;
using detail::bval;
using detail::unary;

Val operator+(const Val& a, const Val& b) {
  detail::require_broadcastable(a, b, "add");
  Eigen::Index r = std::max(a.rows(), b.rows());
  Eigen::Index c = std::max(a.cols(), b.cols());
  return binary(Op::kAdd, a, b, bval(a, r, c) + bval(b, r, c));
}

Val operator-(const Val& a, const Val& b) {
  detail::require_broadcastable(a, b, "sub");
  Eigen::Index r = std::max(a.rows(), b.rows());
  Eigen::Index c = std::max(a.cols(), b.cols());
  return binary(Op::kSub, a, b, bval(a, r, c) - bval(b, r, c));
}

Val operator-(const Val& a) { return unary(Op::kAffine, a, -a.value(), -1.0); }

Val cwise_mul(const Val& a, const Val& b) {
  detail::require_broadcastable(a, b, "mul");
  Eigen::Index r = std::max(a.rows(), b.rows());
  Eigen::Index c = std::max(a.cols(), b.cols());
  return binary(Op::kMul, a, b, bval(a, r, c).cwiseProduct(bval(b, r, c)));
}

Val cwise_div(const Val& a, const Val& b) {
  detail::require_broadcastable(a, b, "div");
  Eigen::Index r = std::max(a.rows(), b.rows());
  Eigen::Index c = std::max(a.cols(), b.cols());
  return binary(Op::kDiv, a, b, bval(a, r, c).cwiseQuotient(bval(b, r, c)));
}

Val operator*(const Val& a, const Val& b) {
  require(detail::is_scalar(a) || detail::is_scalar(b),
          ErrorCode::kDimensionMismatch,
          "operator*: one side must be scalar; use cwise_mul or matmul");
  return cwise_mul(a, b);
}

Val operator*(double s, const Val& a) {
  return unary(Op::kAffine, a, s * a.value(), s);
}
Val operator*(const Val& a, double s) { return s * a; }
Val operator/(const Val& a, const Val& b) {
  require(detail::is_scalar(b) || detail::is_scalar(a),
          ErrorCode::kDimensionMismatch,
          "operator/: one side must be scalar; use cwise_div");
  return cwise_div(a, b);
}
Val operator/(const Val& a, double s) { return (1.0 / s) * a; }
Val operator+(const Val& a, double c) {
  return unary(Op::kAffine, a, (a.value().array() + c).matrix(), 1.0, c);
}
Val operator-(const Val& a, double c) { return a + (-c); }

Val matmul(const Val& a, const Val& b) {
  require(a.cols() == b.rows(), ErrorCode::kDimensionMismatch,
          "matmul: inner dimensions differ");
  return binary(Op::kMatMul, a, b, a.value() * b.value());
}

Val transpose(const Val& a) {
  return unary(Op::kTranspose, a, a.value().transpose());
}

Val tanh(const Val& a) { return unary(Op::kTanh, a, a.value().array().tanh().matrix()); }
Val relu(const Val& a) { return unary(Op::kRelu, a, a.value().cwiseMax(0.0)); }
Val step(const Val& a) {
  return unary(Op::kStep, a, (a.value().array() > 0.0).cast<double>().matrix());
}
Val sigmoid(const Val& a) {
  return unary(Op::kSigmoid, a,
               (1.0 / (1.0 + (-a.value().array()).exp())).matrix());
}
Val softplus(const Val& a) {
  // max(x,0) + log1p(exp(-|x|)) is stable on both tails
  auto x = a.value().array();
  Mat v = (x.max(0.0) + (-x.abs()).exp().log1p()).matrix();
  return unary(Op::kSoftplus, a, std::move(v));
}
Val exp(const Val& a) { return unary(Op::kExp, a, a.value().array().exp().matrix()); }
Val log(const Val& a) { return unary(Op::kLog, a, a.value().array().log().matrix()); }
Val sqrt(const Val& a) { return unary(Op::kSqrt, a, a.value().array().sqrt().matrix()); }
Val square(const Val& a) { return unary(Op::kSquare, a, a.value().array().square().matrix()); }
Val sin(const Val& a) { return unary(Op::kSin, a, a.value().array().sin().matrix()); }
Val cos(const Val& a) { return unary(Op::kCos, a, a.value().array().cos().matrix()); }

Val dot(const Val& a, const Val& b) {
  detail::require_same_shape(a, b, "dot");
  return binary(Op::kDot, a, b,
                Mat::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()));
}

Val sum(const Val& a) {
  return unary(Op::kSum, a, Mat::Constant(1, 1, a.value().sum()));
}

Val vcat(const Val& a, const Val& b) {
  require(a.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "vcat: column counts differ");
  Mat v(a.rows() + b.rows(), a.cols());
  v << a.value(), b.value();
  return binary(Op::kVCat, a, b, std::move(v));
}

Val vcat(const std::vector<Val>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "vcat: empty list");
  Val acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = vcat(acc, parts[i]);
  return acc;
}

Val segment(const Val& a, int start, int len) {
  require(start >= 0 && len >= 0 && start + len <= a.rows(),
          ErrorCode::kDimensionMismatch, "segment: range out of bounds");
  return unary(Op::kSegment, a, a.value().middleRows(start, len), 0.0, 0.0,
               start, len);
}

Val diag_vec(const Val& a) {
  require(a.rows() == a.cols(), ErrorCode::kDimensionMismatch,
          "diag_vec: matrix not square");
  return unary(Op::kDiagVec, a, Mat(a.value().diagonal()));
}

Val diag_mat(const Val& a) {
  require(a.cols() == 1, ErrorCode::kDimensionMismatch,
          "diag_mat: expected a column vector");
  return unary(Op::kDiagMat, a, Mat(a.value().col(0).asDiagonal()));
}

Val posdef_solve(const Val& k, const Val& b) {
  require(k.rows() == k.cols() && k.rows() == b.rows(),
          ErrorCode::kDimensionMismatch, "posdef_solve: shape mismatch");
  Eigen::LLT<Mat> llt(k.value());
  require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "posdef_solve: matrix not positive definite");
  return binary(Op::kPosdefSolve, k, b, llt.solve(b.value()));
}

Val posdef_logdet(const Val& k) {
  require(k.rows() == k.cols(), ErrorCode::kDimensionMismatch,
          "posdef_logdet: matrix not square");
  Eigen::LLT<Mat> llt(k.value());
  require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "posdef_logdet: matrix not positive definite");
  double ld = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return unary(Op::kPosdefLogdet, k, Mat::Constant(1, 1, ld));
}

Val log_mean_exp(const std::vector<Val>& terms) {
  require(!terms.empty(), ErrorCode::kInvalidArgument, "log_mean_exp: empty");
  double shift = -std::numeric_limits<double>::infinity();
  for (const Val& t : terms) shift = std::max(shift, t.scalar());
  require(std::isfinite(shift), ErrorCode::kDegenerateWeights,
          "log_mean_exp: all terms are -inf");
  Val acc = exp(terms[0] - shift);
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + exp(terms[i] - shift);
  return log(acc / static_cast<double>(terms.size())) + shift;
}

Val opaque_eval(const Val& a, Mat (*fn)(const Mat&), const char* what) {
  Mat v = fn(a.value());
  if (!a.taped()) return Val(std::move(v));
  Tape* t = a.tape();
  int id = t->push(Op::kOpaque, std::move(v), a.id());
  t->note_opaque(id, what);
  return Val(t, id);
}

std::vector<Mat> grad(const Val& output, const std::vector<Val>& wrt) {
  require(output.taped(), ErrorCode::kInvalidArgument,
          "grad: output is not recorded on a tape");
  Tape* t = output.tape();
  t->backward(output.id());
  std::vector<Mat> out;
  out.reserve(wrt.size());
  for (const Val& v : wrt) {
    require(v.taped() && v.tape() == t, ErrorCode::kInvalidArgument,
            "grad: wrt value not on the output's tape");
    out.push_back(t->adjoint(v.id()));
  }
  return out;
}

}  // namespace hsmc
