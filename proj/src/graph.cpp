// Copyright 2026 cp3 contributors
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

#include "cp3/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cp3 {

namespace {

const char* op_name(Graph::Op op) {
  switch (op) {
    case Graph::Op::kInput: return "input";
    case Graph::Op::kConstant: return "constant";
    case Graph::Op::kMatMul: return "matmul";
    case Graph::Op::kTranspose: return "transpose";
    case Graph::Op::kAdd: return "add";
    case Graph::Op::kSub: return "sub";
    case Graph::Op::kMul: return "mul";
    case Graph::Op::kDiv: return "div";
    case Graph::Op::kScale: return "scale";
    case Graph::Op::kAddScalar: return "add_scalar";
    case Graph::Op::kRelu: return "relu";
    case Graph::Op::kSqrt: return "sqrt";
    case Graph::Op::kSoftmaxRows: return "softmax_rows";
    case Graph::Op::kSoftmaxGroups: return "softmax_groups";
    case Graph::Op::kConcatCols: return "concat_cols";
    case Graph::Op::kConcatRows: return "concat_rows";
    case Graph::Op::kGatherRows: return "gather_rows";
    case Graph::Op::kSliceCols: return "slice_cols";
    case Graph::Op::kBroadcastRows: return "broadcast_rows";
    case Graph::Op::kBroadcastCols: return "broadcast_cols";
    case Graph::Op::kReshape: return "reshape";
    case Graph::Op::kSumAll: return "sum_all";
    case Graph::Op::kSumRows: return "sum_rows";
    case Graph::Op::kSumCols: return "sum_cols";
    case Graph::Op::kSumGroups: return "sum_groups";
    case Graph::Op::kMaxRows: return "max_rows";
    case Graph::Op::kMaxCols: return "max_cols";
  }
  return "?";
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

}  // namespace

void Graph::check_ref(NodeRef r, const char* opname) const {
  if (r.id < 0 || r.id >= static_cast<int>(nodes_.size()))
    throw ShapeError(std::string(opname) + ": dangling node reference");
}

const Tensor& Graph::value(NodeRef r) const {
  check_ref(r, "value");
  return nodes_[static_cast<std::size_t>(r.id)].value;
}

const Tensor& Graph::input_value(const std::string& name) const {
  auto it = inputs_.find(name);
  if (it == inputs_.end())
    throw ShapeError("unknown input '" + name + "'");
  return nodes_[static_cast<std::size_t>(it->second)].value;
}

NodeRef Graph::push(Node n, const char* opname) {
  eval(n);
  if (!n.value.all_finite())
    throw std::runtime_error(std::string("non-finite value produced by op '") +
                             opname + "'");
  nodes_.push_back(std::move(n));
  return NodeRef{static_cast<int>(nodes_.size()) - 1};
}

NodeRef Graph::input(const std::string& name, Tensor initial) {
  if (inputs_.count(name))
    throw ShapeError("duplicate input name '" + name + "'");
  if (!initial.all_finite())
    throw std::runtime_error("non-finite value bound to input '" + name + "'");
  Node n;
  n.op = Op::kInput;
  n.value = std::move(initial);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  inputs_[name] = id;
  return NodeRef{id};
}

NodeRef Graph::constant(Tensor v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

#define CP3_BINARY_FACTORY(fname, opkind)                       \
  NodeRef Graph::fname(NodeRef a, NodeRef b) {                  \
    check_ref(a, #fname);                                       \
    check_ref(b, #fname);                                       \
    Node n;                                                     \
    n.op = opkind;                                              \
    n.a = a.id;                                                 \
    n.b = b.id;                                                 \
    return push(std::move(n), #fname);                          \
  }

CP3_BINARY_FACTORY(matmul, Op::kMatMul)
CP3_BINARY_FACTORY(add, Op::kAdd)
CP3_BINARY_FACTORY(sub, Op::kSub)
CP3_BINARY_FACTORY(mul, Op::kMul)
CP3_BINARY_FACTORY(div, Op::kDiv)
CP3_BINARY_FACTORY(concat_cols, Op::kConcatCols)
CP3_BINARY_FACTORY(concat_rows, Op::kConcatRows)
#undef CP3_BINARY_FACTORY

#define CP3_UNARY_FACTORY(fname, opkind)        \
  NodeRef Graph::fname(NodeRef a) {             \
    check_ref(a, #fname);                       \
    Node n;                                     \
    n.op = opkind;                              \
    n.a = a.id;                                 \
    return push(std::move(n), #fname);          \
  }

CP3_UNARY_FACTORY(transpose, Op::kTranspose)
CP3_UNARY_FACTORY(relu, Op::kRelu)
CP3_UNARY_FACTORY(sqrt, Op::kSqrt)
CP3_UNARY_FACTORY(softmax_rows, Op::kSoftmaxRows)
CP3_UNARY_FACTORY(sum_all, Op::kSumAll)
CP3_UNARY_FACTORY(sum_rows, Op::kSumRows)
CP3_UNARY_FACTORY(sum_cols, Op::kSumCols)
CP3_UNARY_FACTORY(max_rows, Op::kMaxRows)
CP3_UNARY_FACTORY(max_cols, Op::kMaxCols)
#undef CP3_UNARY_FACTORY

NodeRef Graph::scale(NodeRef a, double c) {
  check_ref(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c = c;
  return push(std::move(n), "scale");
}

NodeRef Graph::add_scalar(NodeRef a, double c) {
  check_ref(a, "add_scalar");
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id;
  n.c = c;
  return push(std::move(n), "add_scalar");
}

NodeRef Graph::softmax_groups(NodeRef a, Index group) {
  check_ref(a, "softmax_groups");
  Node n;
  n.op = Op::kSoftmaxGroups;
  n.a = a.id;
  n.i0 = group;
  return push(std::move(n), "softmax_groups");
}

NodeRef Graph::gather_rows(NodeRef a, std::vector<Index> indices) {
  check_ref(a, "gather_rows");
  Node n;
  n.op = Op::kGatherRows;
  n.a = a.id;
  n.indices = std::move(indices);
  return push(std::move(n), "gather_rows");
}

NodeRef Graph::slice_cols(NodeRef a, Index begin, Index len) {
  check_ref(a, "slice_cols");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = begin;
  n.i1 = len;
  return push(std::move(n), "slice_cols");
}

NodeRef Graph::broadcast_rows(NodeRef a, Index rows) {
  check_ref(a, "broadcast_rows");
  Node n;
  n.op = Op::kBroadcastRows;
  n.a = a.id;
  n.i0 = rows;
  return push(std::move(n), "broadcast_rows");
}

NodeRef Graph::broadcast_cols(NodeRef a, Index cols) {
  check_ref(a, "broadcast_cols");
  Node n;
  n.op = Op::kBroadcastCols;
  n.a = a.id;
  n.i0 = cols;
  return push(std::move(n), "broadcast_cols");
}

NodeRef Graph::reshape(NodeRef a, Index r, Index c) {
  check_ref(a, "reshape");
  Node n;
  n.op = Op::kReshape;
  n.a = a.id;
  n.i0 = r;
  n.i1 = c;
  return push(std::move(n), "reshape");
}

NodeRef Graph::sum_groups(NodeRef a, Index group) {
  check_ref(a, "sum_groups");
  Node n;
  n.op = Op::kSumGroups;
  n.a = a.id;
  n.i0 = group;
  return push(std::move(n), "sum_groups");
}

void Graph::mark_output(const std::string& name, NodeRef r) {
  check_ref(r, "mark_output");
  outputs_[name] = r.id;
}

// ---------------------------------------------------------------------------
// Evaluation

void Graph::eval(Node& n) {
  const char* opn = op_name(n.op);
  auto val = [&](int id) -> const Mat& {
    return nodes_[static_cast<std::size_t>(id)].value.values;
  };
  Mat& out = n.value.values;
  switch (n.op) {
    case Op::kInput:
    case Op::kConstant:
      break;
    case Op::kMatMul: {
      const Mat& a = val(n.a);
      const Mat& b = val(n.b);
      if (a.cols() != b.rows())
        shape_fail(opn, dims(nodes_[static_cast<std::size_t>(n.a)].value) +
                            " * " +
                            dims(nodes_[static_cast<std::size_t>(n.b)].value));
      out.noalias() = a * b;
      break;
    }
    case Op::kTranspose:
      out = val(n.a).transpose();
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const Mat& a = val(n.a);
      const Mat& b = val(n.b);
      if (a.rows() != b.rows() || a.cols() != b.cols())
        shape_fail(opn, dims(nodes_[static_cast<std::size_t>(n.a)].value) +
                            " vs " +
                            dims(nodes_[static_cast<std::size_t>(n.b)].value));
      if (n.op == Op::kAdd)
        out = a + b;
      else if (n.op == Op::kSub)
        out = a - b;
      else if (n.op == Op::kMul)
        out = a.cwiseProduct(b);
      else
        out = a.cwiseQuotient(b);
      break;
    }
    case Op::kScale:
      out = n.c * val(n.a);
      break;
    case Op::kAddScalar:
      out = val(n.a).array() + n.c;
      break;
    case Op::kRelu: {
      const Mat& a = val(n.a);
      out = a.cwiseMax(0.0);
      if (a.size() > 0) {
        // Signed value of the coefficient closest to the kink. Keeping the
        // sign lets gradcheck tell a moved kink from a static one.
        Index r = 0, c = 0;
        a.cwiseAbs().minCoeff(&r, &c);
        note_kink_margin(a(r, c));
      }
      break;
    }
    case Op::kSqrt:
      out = val(n.a).cwiseSqrt();
      break;
    case Op::kSoftmaxRows: {
      const Mat& a = val(n.a);
      out.resize(a.rows(), a.cols());
      for (Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).maxCoeff();
        Eigen::RowVectorXd e = (a.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
      }
      break;
    }
    case Op::kSoftmaxGroups: {
      const Mat& a = val(n.a);
      const Index g = n.i0;
      if (g < 1 || a.rows() % g != 0)
        shape_fail(opn, "rows " + std::to_string(a.rows()) +
                            " not divisible by group " + std::to_string(g));
      out.resize(a.rows(), a.cols());
      for (Index base = 0; base < a.rows(); base += g) {
        for (Index c = 0; c < a.cols(); ++c) {
          double m = a(base, c);
          for (Index r = 1; r < g; ++r) m = std::max(m, a(base + r, c));
          double s = 0.0;
          for (Index r = 0; r < g; ++r) {
            const double e = std::exp(a(base + r, c) - m);
            out(base + r, c) = e;
            s += e;
          }
          for (Index r = 0; r < g; ++r) out(base + r, c) /= s;
        }
      }
      break;
    }
    case Op::kConcatCols: {
      const Mat& a = val(n.a);
      const Mat& b = val(n.b);
      if (a.rows() != b.rows()) shape_fail(opn, "row mismatch");
      out.resize(a.rows(), a.cols() + b.cols());
      out.leftCols(a.cols()) = a;
      out.rightCols(b.cols()) = b;
      break;
    }
    case Op::kConcatRows: {
      const Mat& a = val(n.a);
      const Mat& b = val(n.b);
      if (a.cols() != b.cols()) shape_fail(opn, "column mismatch");
      out.resize(a.rows() + b.rows(), a.cols());
      out.topRows(a.rows()) = a;
      out.bottomRows(b.rows()) = b;
      break;
    }
    case Op::kGatherRows: {
      const Mat& a = val(n.a);
      for (Index idx : n.indices)
        if (idx < 0 || idx >= a.rows())
          shape_fail(opn, "index " + std::to_string(idx) + " out of " +
                              std::to_string(a.rows()) + " rows");
      out.resize(static_cast<Index>(n.indices.size()), a.cols());
      for (std::size_t i = 0; i < n.indices.size(); ++i)
        out.row(static_cast<Index>(i)) = a.row(n.indices[i]);
      break;
    }
    case Op::kSliceCols: {
      const Mat& a = val(n.a);
      if (n.i0 < 0 || n.i1 < 1 || n.i0 + n.i1 > a.cols())
        shape_fail(opn, "slice [" + std::to_string(n.i0) + ", +" +
                            std::to_string(n.i1) + ") out of " +
                            std::to_string(a.cols()) + " cols");
      out = a.middleCols(n.i0, n.i1);
      break;
    }
    case Op::kBroadcastRows: {
      const Mat& a = val(n.a);
      if (a.rows() != 1) shape_fail(opn, "expects a 1 x C operand");
      out = a.replicate(n.i0, 1);
      break;
    }
    case Op::kBroadcastCols: {
      const Mat& a = val(n.a);
      if (a.cols() != 1) shape_fail(opn, "expects an N x 1 operand");
      out = a.replicate(1, n.i0);
      break;
    }
    case Op::kReshape: {
      const Mat& a = val(n.a);
      if (n.i0 * n.i1 != a.size())
        shape_fail(opn, dims(nodes_[static_cast<std::size_t>(n.a)].value) +
                            " -> " + std::to_string(n.i0) + "x" +
                            std::to_string(n.i1));
      out = Eigen::Map<const Mat>(a.data(), n.i0, n.i1);
      break;
    }
    case Op::kSumAll: {
      out.resize(1, 1);
      out(0, 0) = val(n.a).sum();
      break;
    }
    case Op::kSumRows:
      out = val(n.a).colwise().sum();
      break;
    case Op::kSumCols:
      out = val(n.a).rowwise().sum();
      break;
    case Op::kSumGroups: {
      const Mat& a = val(n.a);
      const Index g = n.i0;
      if (g < 1 || a.rows() % g != 0)
        shape_fail(opn, "rows " + std::to_string(a.rows()) +
                            " not divisible by group " + std::to_string(g));
      out.resize(a.rows() / g, a.cols());
      for (Index i = 0; i < out.rows(); ++i)
        out.row(i) = a.middleRows(i * g, g).colwise().sum();
      break;
    }
    case Op::kMaxRows: {
      const Mat& a = val(n.a);
      out.resize(1, a.cols());
      n.argmax.assign(static_cast<std::size_t>(a.cols()), 0);
      for (Index c = 0; c < a.cols(); ++c) {
        Index arg = 0;
        double best = a(0, c);
        double second = -std::numeric_limits<double>::infinity();
        for (Index r = 1; r < a.rows(); ++r) {
          const double v = a(r, c);
          if (v > best) {
            second = best;
            best = v;
            arg = r;
          } else if (v > second) {
            second = v;
          }
        }
        out(0, c) = best;
        n.argmax[static_cast<std::size_t>(c)] = arg;
        if (a.rows() > 1)
          note_kink_margin(best - second);
      }
      break;
    }
    case Op::kMaxCols: {
      const Mat& a = val(n.a);
      out.resize(a.rows(), 1);
      n.argmax.assign(static_cast<std::size_t>(a.rows()), 0);
      for (Index r = 0; r < a.rows(); ++r) {
        Index arg = 0;
        double best = a(r, 0);
        double second = -std::numeric_limits<double>::infinity();
        for (Index c = 1; c < a.cols(); ++c) {
          const double v = a(r, c);
          if (v > best) {
            second = best;
            best = v;
            arg = c;
          } else if (v > second) {
            second = v;
          }
        }
        out(r, 0) = best;
        n.argmax[static_cast<std::size_t>(r)] = arg;
        if (a.cols() > 1)
          note_kink_margin(best - second);
      }
      break;
    }
  }
  if (n.op != Op::kInput && n.op != Op::kConstant) {
    // Rank bookkeeping: results are rank-2 except elementwise ops on rank-1.
    const int ra = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].value.rank : 2;
    n.value.rank = (out.rows() == 1 && ra == 1) ? 1 : 2;
  }
}

std::map<std::string, Tensor> Graph::forward(
    const std::map<std::string, Tensor>& inputs) {
  for (const auto& [name, tensor] : inputs) {
    auto it = inputs_.find(name);
    if (it == inputs_.end())
      throw ShapeError("forward: unknown input '" + name + "'");
    Tensor& slot = nodes_[static_cast<std::size_t>(it->second)].value;
    if (!slot.same_shape(tensor))
      throw ShapeError("forward: input '" + name + "' expects " + dims(slot) +
                       ", got " + dims(tensor));
    if (!tensor.all_finite())
      throw std::runtime_error("non-finite value bound to input '" + name + "'");
    slot.values = tensor.values;
  }
  last_kink_margin_ = std::numeric_limits<double>::infinity();
  for (auto& n : nodes_) {
    if (n.op == Op::kInput || n.op == Op::kConstant) continue;
    eval(n);
    if (!n.value.all_finite())
      throw std::runtime_error(
          std::string("non-finite value produced by op '") + op_name(n.op) +
          "'");
  }
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : outputs_)
    out[name] = nodes_[static_cast<std::size_t>(id)].value;
  return out;
}

// ---------------------------------------------------------------------------
// Reverse sweep

void Graph::backprop(Node& n) {
  auto val = [&](int id) -> const Mat& {
    return nodes_[static_cast<std::size_t>(id)].value.values;
  };
  auto grad = [&](int id) -> Mat& {
    return nodes_[static_cast<std::size_t>(id)].grad;
  };
  const Mat& g = n.grad;
  switch (n.op) {
    case Op::kInput:
    case Op::kConstant:
      break;
    case Op::kMatMul:
      grad(n.a).noalias() += g * val(n.b).transpose();
      grad(n.b).noalias() += val(n.a).transpose() * g;
      break;
    case Op::kTranspose:
      grad(n.a) += g.transpose();
      break;
    case Op::kAdd:
      grad(n.a) += g;
      grad(n.b) += g;
      break;
    case Op::kSub:
      grad(n.a) += g;
      grad(n.b) -= g;
      break;
    case Op::kMul:
      grad(n.a) += g.cwiseProduct(val(n.b));
      grad(n.b) += g.cwiseProduct(val(n.a));
      break;
    case Op::kDiv:
      grad(n.a) += g.cwiseQuotient(val(n.b));
      grad(n.b) -= g.cwiseProduct(n.value.values).cwiseQuotient(val(n.b));
      break;
    case Op::kScale:
      grad(n.a) += n.c * g;
      break;
    case Op::kAddScalar:
      grad(n.a) += g;
      break;
    case Op::kRelu:
      grad(n.a) += (val(n.a).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
      break;
    case Op::kSqrt:
      grad(n.a) += 0.5 * g.cwiseQuotient(n.value.values);
      break;
    case Op::kSoftmaxRows: {
      const Mat& y = n.value.values;
      Mat& ga = grad(n.a);
      for (Index i = 0; i < y.rows(); ++i) {
        const double dot = g.row(i).cwiseProduct(y.row(i)).sum();
        ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
      }
      break;
    }
    case Op::kSoftmaxGroups: {
      const Mat& y = n.value.values;
      const Index gsz = n.i0;
      Mat& ga = grad(n.a);
      for (Index base = 0; base < y.rows(); base += gsz) {
        for (Index c = 0; c < y.cols(); ++c) {
          double dot = 0.0;
          for (Index r = 0; r < gsz; ++r)
            dot += g(base + r, c) * y(base + r, c);
          for (Index r = 0; r < gsz; ++r)
            ga(base + r, c) += y(base + r, c) * (g(base + r, c) - dot);
        }
      }
      break;
    }
    case Op::kConcatCols: {
      const Index ca = val(n.a).cols();
      grad(n.a) += g.leftCols(ca);
      grad(n.b) += g.rightCols(g.cols() - ca);
      break;
    }
    case Op::kConcatRows: {
      const Index ra = val(n.a).rows();
      grad(n.a) += g.topRows(ra);
      grad(n.b) += g.bottomRows(g.rows() - ra);
      break;
    }
    case Op::kGatherRows: {
      Mat& ga = grad(n.a);
      for (std::size_t i = 0; i < n.indices.size(); ++i)
        ga.row(n.indices[i]) += g.row(static_cast<Index>(i));
      break;
    }
    case Op::kSliceCols:
      grad(n.a).middleCols(n.i0, n.i1) += g;
      break;
    case Op::kBroadcastRows:
      grad(n.a) += g.colwise().sum();
      break;
    case Op::kBroadcastCols:
      grad(n.a) += g.rowwise().sum();
      break;
    case Op::kReshape: {
      const Mat& a = val(n.a);
      grad(n.a) += Eigen::Map<const Mat>(g.data(), a.rows(), a.cols());
      break;
    }
    case Op::kSumAll:
      grad(n.a).array() += g(0, 0);
      break;
    case Op::kSumRows:
      grad(n.a) += g.replicate(val(n.a).rows(), 1);
      break;
    case Op::kSumCols:
      grad(n.a) += g.replicate(1, val(n.a).cols());
      break;
    case Op::kSumGroups: {
      Mat& ga = grad(n.a);
      const Index gsz = n.i0;
      for (Index i = 0; i < g.rows(); ++i)
        ga.middleRows(i * gsz, gsz) += g.row(i).replicate(gsz, 1);
      break;
    }
    case Op::kMaxRows: {
      Mat& ga = grad(n.a);
      for (Index c = 0; c < g.cols(); ++c)
        ga(n.argmax[static_cast<std::size_t>(c)], c) += g(0, c);
      break;
    }
    case Op::kMaxCols: {
      Mat& ga = grad(n.a);
      for (Index r = 0; r < g.rows(); ++r)
        ga(r, n.argmax[static_cast<std::size_t>(r)]) += g(r, 0);
      break;
    }
  }
}

std::map<std::string, Tensor> Graph::gradients(const std::string& seed_output) {
  auto it = outputs_.find(seed_output);
  if (it == outputs_.end())
    throw ShapeError("gradients: unknown output '" + seed_output + "'");
  Node& seed = nodes_[static_cast<std::size_t>(it->second)];
  if (!seed.value.is_scalar())
    throw ShapeError("gradients: output '" + seed_output +
                     "' is not scalar-valued (" + dims(seed.value) + ")");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  seed.grad(0, 0) = 1.0;
  for (auto itn = nodes_.rbegin(); itn != nodes_.rend(); ++itn) backprop(*itn);
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : inputs_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    out[name] = Tensor(n.grad, n.value.rank);
  }
  return out;
}

std::map<std::string, Tensor> Graph::gradients(
    const std::map<std::string, Tensor>& inputs,
    const std::string& seed_output) {
  forward(inputs);
  return gradients(seed_output);
}

// ---------------------------------------------------------------------------
// Finite-difference check

GradCheckResult gradcheck(Graph& g, const std::string& seed_output, double h,
                          const std::vector<std::string>& names) {
  std::vector<std::string> check_names = names;
  if (check_names.empty())
    for (const auto& [name, id] : g.input_ids()) check_names.push_back(name);

  auto analytic = g.gradients(seed_output);
  // Numerical-zero threshold. Backward passes leave cancellation residue
  // proportional to the magnitudes summed, so the cutoff scales with the
  // largest gradient anywhere in the graph instead of being fixed.
  double grad_scale = 1.0;
  for (const auto& [name, grad] : analytic)
    if (grad.values.size() > 0)
      grad_scale = std::max(grad_scale, grad.values.cwiseAbs().maxCoeff());
  const double zero_tol = 1e-9 * grad_scale;
  GradCheckResult result;
  for (const auto& name : check_names) {
    const Tensor x0 = g.input_value(name);
    const Mat& ga = analytic.at(name).values;
    Tensor x = x0;
    for (Index r = 0; r < x0.rows(); ++r) {
      for (Index c = 0; c < x0.cols(); ++c) {
        const double hi = h * std::max(1.0, std::abs(x0.values(r, c)));
        x.values(r, c) = x0.values(r, c) + hi;
        const double fp = g.forward({{name, x}}).at(seed_output).scalar_value();
        const double margin_p = g.last_kink_margin();
        x.values(r, c) = x0.values(r, c) - hi;
        const double fm = g.forward({{name, x}}).at(seed_output).scalar_value();
        const double margin_m = g.last_kink_margin();
        x.values(r, c) = x0.values(r, c);
        // A kink disqualifies the coordinate only when the perturbation
        // itself moves something near it; a static near-kink value shows up
        // with an identical margin in both passes and stays checkable.
        if (std::min(std::abs(margin_p), std::abs(margin_m)) < 10.0 * hi &&
            margin_p != margin_m) {
          ++result.skipped;
          continue;
        }
        const double numeric = (fp - fm) / (2.0 * hi);
        const double a = ga(r, c);
        // Both sides at roundoff level means the derivatives agree; the
        // 1e-12 denominator floor would otherwise turn cancellation
        // residue into noise for parameters the output is invariant to.
        if (std::abs(a) <= zero_tol && std::abs(numeric) <= zero_tol) {
          ++result.checked;
          continue;
        }
        const double rel = std::abs(a - numeric) /
                           std::max({1e-12, std::abs(a), std::abs(numeric)});
        ++result.checked;
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst = name + "[" + std::to_string(r) + "," +
                         std::to_string(c) + "]";
        }
      }
    }
    g.forward({{name, x0}});  // restore
  }
  return result;
}

}  // namespace cp3
