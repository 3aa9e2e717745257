// Copyright 2026 The GQWformer Authors
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

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gqw/tensor.hpp"

namespace gqw::ad {

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  /// Accumulated gradient; empty (0x0) if nothing reached this tensor.
  const Mat& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of a forward pass. Backward visits nodes in exact reverse
/// order of recording; gradient contributions are summed into each parent.
class Tape {
 public:
  /// Receives the gradient flowing into the node and pushes contributions to
  /// its parents through accumulate().
  using BackwardFn = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input.
  Var leaf(Mat value) { return push(std::move(value), true, nullptr, "leaf"); }
  /// Input that never receives gradient.
  Var constant(Mat value) { return push(std::move(value), false, nullptr, "constant"); }

  /// Records the result of an operation. The backward function is dropped when
  /// no parent requires a gradient.
  Var record(Mat value, std::initializer_list<Var> parents, BackwardFn backward, const char* op) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward), op);
  }

  Var record(Mat value, std::span<const Var> parents, BackwardFn backward, const char* op) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owner(p, op);
      needs = needs || node(p).requires_grad;
    }
    if (!all_finite(value)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, op);
  }

  /// Adds g into v's gradient (allocating it on first use).
  void accumulate(const Var& v, const Mat& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
      throw ShapeError(std::string("gradient shape mismatch at ") + n.op + ": " + shape_str(g) +
                       " vs " + shape_str(n.value));
    }
    if (n.grad.size() == 0 && n.value.size() != 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 output. May only be called once per tape.
  void backward(const Var& root) {
    check_owner(root, "backward");
    if (backward_done_) throw std::logic_error("backward: tape already differentiated");
    const Node& r = node(root);
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      throw ShapeError("backward: root must be a scalar, got " + shape_str(r.value));
    }
    backward_done_ = true;
    if (!r.requires_grad) return;
    accumulate(root, Mat::Ones(1, 1));
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      if (!all_finite(n.grad)) {
        throw NumericError(std::string("non-finite gradient reaching ") + n.op);
      }
      // The node's gradient is final at this point; copy so the callback may
      // accumulate into other nodes freely.
      const Mat g = n.grad;
      n.backward(*this, g);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool differentiated() const { return backward_done_; }

 private:
  friend class Var;

  struct Node {
    Mat value;
    Mat grad;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "";
  };

  Var push(Mat value, bool requires_grad, BackwardFn backward, const char* op) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(backward), requires_grad, op});
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v, const char* op) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
      throw std::invalid_argument(std::string(op) + ": operand belongs to another tape");
    }
  }

  Node& node(const Var& v) { return nodes_[v.id_]; }
  const Node& node(const Var& v) const { return nodes_[v.id_]; }

  // deque keeps references returned by Var::value() stable while recording.
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

inline const Mat& Var::value() const { return tape_->node(*this).value; }
inline const Mat& Var::grad() const { return tape_->node(*this).grad; }
inline bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

/// Gradient of v, or zeros of v's shape if no gradient reached it.
inline Mat gradient_or_zero(const Var& v) {
  if (v.grad().size() == 0) return Mat::Zero(v.rows(), v.cols());
  return v.grad();
}

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
}

inline Tape& tape_of(const Var& v, const char* op) {
  if (!v.valid()) throw std::invalid_argument(std::string(op) + ": invalid operand");
  return *v.tape();
}

// Elementwise op; deriv maps an input entry to d out / d in.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, const char* op, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a, op);
  Mat out = a.value().unaryExpr(fwd);
  return t.record(std::move(out), {a},
                  [a, deriv](Tape& tp, const Mat& g) {
                    const Mat& x = a.value();
                    Mat d(x.rows(), x.cols());
                    for (Index i = 0; i < x.size(); ++i) d.data()[i] = deriv(x.data()[i]);
                    tp.accumulate(a, g.cwiseProduct(d));
                  },
                  op);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Mat out = a.value() * b.value();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& tp, const Mat& g) {
                    if (a.requires_grad()) tp.accumulate(a, g * b.value().transpose());
                    if (b.requires_grad()) tp.accumulate(b, a.value().transpose() * g);
                  },
                  "matmul");
}

inline Var transpose(const Var& a) {
  Tape& t = detail::tape_of(a, "transpose");
  Mat out = a.value().transpose();
  return t.record(std::move(out), {a},
                  [a](Tape& tp, const Mat& g) { tp.accumulate(a, g.transpose()); }, "transpose");
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tape& t = detail::tape_of(a, "add");
  Mat out = a.value() + b.value();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& tp, const Mat& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, g);
                  },
                  "add");
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tape& t = detail::tape_of(a, "sub");
  Mat out = a.value() - b.value();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& tp, const Mat& g) {
                    tp.accumulate(a, g);
                    if (b.requires_grad()) tp.accumulate(b, -g);
                  },
                  "sub");
}

/// a + row, with the 1 x c row broadcast over every row of a.
inline Var add_row_broadcast(const Var& a, const Var& row) {
  Tape& t = detail::tape_of(a, "add_row_broadcast");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row_broadcast: " + shape_str(a.value()) + " + " +
                     shape_str(row.value()));
  }
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row},
                  [a, row](Tape& tp, const Mat& g) {
                    tp.accumulate(a, g);
                    if (row.requires_grad()) tp.accumulate(row, g.colwise().sum());
                  },
                  "add_row_broadcast");
}

inline Var scalar_mul(const Var& a, double s) {
  Tape& t = detail::tape_of(a, "scalar_mul");
  Mat out = a.value() * s;
  return t.record(std::move(out), {a},
                  [a, s](Tape& tp, const Mat& g) { tp.accumulate(a, g * s); }, "scalar_mul");
}

inline Var hadamard(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "hadamard");
  Tape& t = detail::tape_of(a, "hadamard");
  Mat out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a, b},
                  [a, b](Tape& tp, const Mat& g) {
                    if (a.requires_grad()) tp.accumulate(a, g.cwiseProduct(b.value()));
                    if (b.requires_grad()) tp.accumulate(b, g.cwiseProduct(a.value()));
                  },
                  "hadamard");
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

inline Var square(const Var& a) {
  return detail::unary(
      a, "square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

inline Var relu(const Var& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(const Var& a, double slope) {
  return detail::unary(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  return detail::unary(a, "sigmoid", sigmoid_scalar, [](double x) {
    const double s = sigmoid_scalar(x);
    return s * (1.0 - s);
  });
}

inline Var tanh(const Var& a) {
  return detail::unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double x) {
        const double th = std::tanh(x);
        return 1.0 - th * th;
      });
}

// ---------------------------------------------------------------------------
// Reshaping and indexing
// ---------------------------------------------------------------------------

inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = detail::tape_of(parts[0], "concat_rows");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].value()) + " vs " +
                       shape_str(p.value()));
    }
    rows += p.rows();
  }
  Mat out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [ps](Tape& tp, const Mat& g) {
                    Index r0 = 0;
                    for (const Var& p : ps) {
                      if (p.requires_grad()) tp.accumulate(p, g.middleRows(r0, p.rows()));
                      r0 += p.rows();
                    }
                  },
                  "concat_rows");
}

inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = detail::tape_of(parts[0], "concat_cols");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].value()) + " vs " +
                       shape_str(p.value()));
    }
    cols += p.cols();
  }
  Mat out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [ps](Tape& tp, const Mat& g) {
                    Index c0 = 0;
                    for (const Var& p : ps) {
                      if (p.requires_grad()) tp.accumulate(p, g.middleCols(c0, p.cols()));
                      c0 += p.cols();
                    }
                  },
                  "concat_cols");
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_rows(const Var& a, Index begin, Index count) {
  Tape& t = detail::tape_of(a, "slice_rows");
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of " + shape_str(a.value()));
  }
  Mat out = a.value().middleRows(begin, count);
  return t.record(std::move(out), {a},
                  [a, begin, count](Tape& tp, const Mat& g) {
                    Mat full = Mat::Zero(a.rows(), a.cols());
                    full.middleRows(begin, count) = g;
                    tp.accumulate(a, full);
                  },
                  "slice_rows");
}

/// Rows of table selected by indices (repeats allowed).
inline Var embedding_lookup(const Var& table, std::span<const int> indices) {
  Tape& t = detail::tape_of(table, "embedding_lookup");
  Mat out(static_cast<Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows()) {
      throw ShapeError("embedding_lookup: index " + std::to_string(indices[i]) + " out of " +
                       shape_str(table.value()));
    }
    out.row(static_cast<Index>(i)) = table.value().row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return t.record(std::move(out), {table},
                  [table, idx](Tape& tp, const Mat& g) {
                    Mat full = Mat::Zero(table.rows(), table.cols());
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      full.row(idx[i]) += g.row(static_cast<Index>(i));
                    }
                    tp.accumulate(table, full);
                  },
                  "embedding_lookup");
}

/// out(i, j) = values(index(i, j)) for a column vector `values`; entries with a
/// negative index are 0 and receive no gradient.
inline Var gather_entries(const Var& values, const std::vector<std::vector<int>>& index,
                          Index cols) {
  Tape& t = detail::tape_of(values, "gather_entries");
  if (values.cols() != 1) throw ShapeError("gather_entries: values must be a column vector");
  const Index rows = static_cast<Index>(index.size());
  Mat out = Mat::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = index[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) > cols) throw ShapeError("gather_entries: row too long");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] < 0) continue;
      if (row[j] >= values.rows()) throw ShapeError("gather_entries: index out of range");
      out(i, static_cast<Index>(j)) = values.value()(row[j], 0);
    }
  }
  return t.record(std::move(out), {values},
                  [values, index](Tape& tp, const Mat& g) {
                    Mat full = Mat::Zero(values.rows(), 1);
                    for (std::size_t i = 0; i < index.size(); ++i) {
                      for (std::size_t j = 0; j < index[i].size(); ++j) {
                        if (index[i][j] >= 0) {
                          full(index[i][j], 0) += g(static_cast<Index>(i), static_cast<Index>(j));
                        }
                      }
                    }
                    tp.accumulate(values, full);
                  },
                  "gather_entries");
}

/// out(:, k) = a(:, perm[k]). perm must be a permutation of the columns.
inline Var permute_columns(const Var& a, std::span<const int> perm) {
  Tape& t = detail::tape_of(a, "permute_columns");
  if (static_cast<Index>(perm.size()) != a.cols()) {
    throw ShapeError("permute_columns: permutation length " + std::to_string(perm.size()) +
                     " for " + shape_str(a.value()));
  }
  Mat out(a.rows(), a.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    out.col(static_cast<Index>(k)) = a.value().col(perm[k]);
  }
  std::vector<int> p(perm.begin(), perm.end());
  return t.record(std::move(out), {a},
                  [a, p](Tape& tp, const Mat& g) {
                    Mat back(g.rows(), g.cols());
                    for (std::size_t k = 0; k < p.size(); ++k) {
                      back.col(p[k]) = g.col(static_cast<Index>(k));
                    }
                    tp.accumulate(a, back);
                  },
                  "permute_columns");
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

/// Row sums as an r x 1 column.
inline Var sum_rows(const Var& a) {
  Tape& t = detail::tape_of(a, "sum_rows");
  Mat out = a.value().rowwise().sum();
  return t.record(std::move(out), {a},
                  [a](Tape& tp, const Mat& g) {
                    Mat full(a.rows(), a.cols());
                    for (Index c = 0; c < a.cols(); ++c) full.col(c) = g.col(0);
                    tp.accumulate(a, full);
                  },
                  "sum_rows");
}

/// Sum of all entries as a 1x1 tensor.
inline Var sum(const Var& a) {
  Tape& t = detail::tape_of(a, "sum");
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a},
                  [a](Tape& tp, const Mat& g) {
                    tp.accumulate(a, Mat::Constant(a.rows(), a.cols(), g(0, 0)));
                  },
                  "sum");
}

/// Sums consecutive groups of `group` columns: r x (g*m) -> r x m.
inline Var sum_column_groups(const Var& a, Index group) {
  Tape& t = detail::tape_of(a, "sum_column_groups");
  if (group <= 0 || a.cols() % group != 0) {
    throw ShapeError("sum_column_groups: group " + std::to_string(group) + " for " +
                     shape_str(a.value()));
  }
  const Index m = a.cols() / group;
  Mat out(a.rows(), m);
  for (Index j = 0; j < m; ++j) out.col(j) = a.value().middleCols(j * group, group).rowwise().sum();
  return t.record(std::move(out), {a},
                  [a, group, m](Tape& tp, const Mat& g) {
                    Mat full(a.rows(), a.cols());
                    for (Index j = 0; j < m; ++j) {
                      for (Index c = 0; c < group; ++c) full.col(j * group + c) = g.col(j);
                    }
                    tp.accumulate(a, full);
                  },
                  "sum_column_groups");
}

inline Var mean_over_list(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("mean_over_list: empty list");
  Tape& t = detail::tape_of(parts[0], "mean_over_list");
  Mat out = Mat::Zero(parts[0].rows(), parts[0].cols());
  for (const Var& p : parts) {
    detail::require_same_shape(parts[0], p, "mean_over_list");
    out += p.value();
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  out *= inv;
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [ps, inv](Tape& tp, const Mat& g) {
                    for (const Var& p : ps) tp.accumulate(p, g * inv);
                  },
                  "mean_over_list");
}

// ---------------------------------------------------------------------------
// Attention, reflections, losses
// ---------------------------------------------------------------------------

namespace detail {

inline Mat softmax_rows(const Mat& s) {
  Mat out(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    double z = 0.0;
    for (Index j = 0; j < s.cols(); ++j) {
      out(i, j) = std::exp(s(i, j) - mx);
      z += out(i, j);
    }
    out.row(i) /= z;
  }
  return out;
}

// Backward of a row softmax given its output y.
inline Mat softmax_rows_backward(const Mat& y, const Mat& g) {
  Mat gin(y.rows(), y.cols());
  for (Index i = 0; i < y.rows(); ++i) {
    const double dot = y.row(i).dot(g.row(i));
    for (Index j = 0; j < y.cols(); ++j) gin(i, j) = y(i, j) * (g(i, j) - dot);
  }
  return gin;
}

}  // namespace detail

/// Plain row-wise softmax.
inline Var row_softmax(const Var& scores) {
  Tape& t = detail::tape_of(scores, "row_softmax");
  Mat out = detail::softmax_rows(scores.value());
  return t.record(std::move(out), {scores},
                  [scores](Tape& tp, const Mat& g) {
                    // Output is recomputed from the input; cheap at graph scale.
                    const Mat y = detail::softmax_rows(scores.value());
                    tp.accumulate(scores, detail::softmax_rows_backward(y, g));
                  },
                  "row_softmax");
}

/// softmax over each row of (scores + bias).
inline Var row_softmax_with_bias(const Var& scores, const Var& bias) {
  detail::require_same_shape(scores, bias, "row_softmax_with_bias");
  Tape& t = detail::tape_of(scores, "row_softmax_with_bias");
  Mat out = detail::softmax_rows(scores.value() + bias.value());
  return t.record(std::move(out), {scores, bias},
                  [scores, bias](Tape& tp, const Mat& g) {
                    const Mat y = detail::softmax_rows(scores.value() + bias.value());
                    const Mat gin = detail::softmax_rows_backward(y, g);
                    if (scores.requires_grad()) tp.accumulate(scores, gin);
                    if (bias.requires_grad()) tp.accumulate(bias, gin);
                  },
                  "row_softmax_with_bias");
}

/// Squared-norm floor below which a reflection vector counts as zero and the
/// reflection degenerates to the identity.
inline constexpr double kDegenerateReflection = 1e-12;

/// Blockwise Householder reflection. x is r x (p*d), e is p x d; column block j
/// of every row of x is mapped to y = x - 2 e (e^T x) / (e^T e) using row j of e.
/// With p == 1 this is the plain rank-1 reflection of each row of x.
inline Var rank1_householder_apply(const Var& x, const Var& e) {
  Tape& t = detail::tape_of(x, "rank1_householder_apply");
  const Index p = e.rows();
  const Index d = e.cols();
  if (p * d != x.cols()) {
    throw ShapeError("rank1_householder_apply: x " + shape_str(x.value()) + " vs e " +
                     shape_str(e.value()));
  }
  const Mat& xv = x.value();
  const Mat& ev = e.value();
  Mat out = xv;
  for (Index j = 0; j < p; ++j) {
    const auto ej = ev.row(j);
    const double s = ej.squaredNorm();
    if (s < kDegenerateReflection) continue;
    auto blk = out.middleCols(j * d, d);
    const Eigen::VectorXd proj = xv.middleCols(j * d, d) * ej.transpose();
    blk.noalias() -= (2.0 / s) * proj * ej;
  }
  return t.record(
      std::move(out), {x, e},
      [x, e, p, d](Tape& tp, const Mat& g) {
        const Mat& xv = x.value();
        const Mat& ev = e.value();
        Mat gx = g;
        Mat ge = Mat::Zero(p, d);
        for (Index j = 0; j < p; ++j) {
          const auto ej = ev.row(j);
          const double s = ej.squaredNorm();
          if (s < kDegenerateReflection) continue;
          const auto gb = g.middleCols(j * d, d);
          const auto xb = xv.middleCols(j * d, d);
          const Eigen::VectorXd ge_proj = gb * ej.transpose();  // g.e per row
          const Eigen::VectorXd xe_proj = xb * ej.transpose();  // x.e per row
          // The reflection is symmetric, so the input gradient is U g.
          gx.middleCols(j * d, d).noalias() -= (2.0 / s) * ge_proj * ej;
          if (e.requires_grad()) {
            // d/de of -2 (x.e)(g.e)/s summed over rows.
            const double cross = xe_proj.dot(ge_proj);
            Eigen::RowVectorXd de = -(2.0 / s) * (ge_proj.transpose() * xb + xe_proj.transpose() * gb);
            de += (4.0 * cross / (s * s)) * ej;
            ge.row(j) = de;
          }
        }
        if (x.requires_grad()) tp.accumulate(x, gx);
        if (e.requires_grad()) tp.accumulate(e, ge);
      },
      "rank1_householder_apply");
}

/// x multiplied elementwise by a fixed (pre-scaled) mask.
inline Var dropout_mask_apply(const Var& x, const Mat& mask) {
  Tape& t = detail::tape_of(x, "dropout_mask_apply");
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
    throw ShapeError("dropout_mask_apply: mask " + shape_str(mask) + " for " +
                     shape_str(x.value()));
  }
  Mat out = x.value().cwiseProduct(mask);
  return t.record(std::move(out), {x},
                  [x, mask](Tape& tp, const Mat& g) { tp.accumulate(x, g.cwiseProduct(mask)); },
                  "dropout_mask_apply");
}

/// Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p).
inline Mat make_dropout_mask(Index rows, Index cols, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return Mat::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

/// Softmax cross-entropy of a 1 x C logit row against a class id.
inline Var cross_entropy(const Var& logits, int label) {
  Tape& t = detail::tape_of(logits, "cross_entropy");
  if (logits.rows() != 1) throw ShapeError("cross_entropy: logits must be 1 x C");
  if (label < 0 || label >= logits.cols()) {
    throw ShapeError("cross_entropy: label " + std::to_string(label) + " for " +
                     shape_str(logits.value()));
  }
  const Mat probs = detail::softmax_rows(logits.value());
  Mat out(1, 1);
  out(0, 0) = -std::log(probs(0, label));
  if (!std::isfinite(out(0, 0))) {
    const double mx = logits.value().maxCoeff();
    const double lse = mx + std::log((logits.value().array() - mx).exp().sum());
    out(0, 0) = lse - logits.value()(0, label);
  }
  return t.record(std::move(out), {logits},
                  [logits, probs, label](Tape& tp, const Mat& g) {
                    Mat d = probs;
                    d(0, label) -= 1.0;
                    tp.accumulate(logits, d * g(0, 0));
                  },
                  "cross_entropy");
}

}  // namespace gqw::ad
