// Copyright 2026 The rackopt Authors
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

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rackopt {

/// Eager reverse-mode tape over dense Eigen matrices. Every operation
/// computes its value immediately and records a closure that propagates the
/// adjoint back to its inputs; backward() replays the closures in reverse.
template <typename Scalar>
class Tape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Var {
    std::size_t id = 0;
  };

  Var constant(Matrix value) { return push(std::move(value), nullptr); }

  /// Leaf whose adjoint is kept after backward().
  Var leaf(Matrix value) { return push(std::move(value), nullptr); }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }

  /// Adjoint of `v` after backward(); zero matrix if nothing reached it.
  Matrix grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b) {
    return push(value(a) * value(b), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g * t.value(b).transpose());
      t.accumulate(b, t.value(a).transpose() * g);
    });
  }

  /// a * b^T
  Var matmul_nt(Var a, Var b) {
    return push(value(a) * value(b).transpose(), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g * t.value(b));
      t.accumulate(b, g.transpose() * t.value(a));
    });
  }

  Var add(Var a, Var b) {
    return push(value(a) + value(b), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  /// a + row, with the 1 x n row broadcast over the rows of a.
  Var add_row(Var a, Var row) {
    Matrix out = value(a);
    out.rowwise() += value(row).row(0);
    return push(std::move(out), [a, row](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(row, g.colwise().sum());
    });
  }

  /// a .* row, with the 1 x n row broadcast over the rows of a.
  Var mul_row(Var a, Var row) {
    Matrix out = value(a).array().rowwise() * value(row).row(0).array();
    return push(std::move(out), [a, row](Tape& t, const Matrix& g) {
      t.accumulate(a, (g.array().rowwise() * t.value(row).row(0).array()).matrix());
      t.accumulate(row, (g.array() * t.value(a).array()).colwise().sum().matrix());
    });
  }

  Var scale(Var a, Scalar s) {
    return push(value(a) * s, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
  }

  Var relu(Var a) {
    return push(value(a).cwiseMax(Scalar(0)), [a](Tape& t, const Matrix& g) {
      t.accumulate(a, (t.value(a).array() > Scalar(0)).select(g, Scalar(0)).matrix());
    });
  }

  Var tanh(Var a) {
    Matrix out = value(a).array().tanh();
    const std::size_t self = nodes_.size();
    return push(std::move(out), [a, self](Tape& t, const Matrix& g) {
      const Matrix& y = t.nodes_[self].value;
      t.accumulate(a, (g.array() * (Scalar(1) - y.array().square())).matrix());
    });
  }

  /// Row-wise softmax. Entries with mask[j] != 0 are excluded and come out
  /// exactly zero; an empty mask excludes nothing.
  Var softmax_rows(Var a, std::span<const char> mask = {}) {
    Matrix out = value(a);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      Scalar peak = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (!masked(mask, j)) peak = std::max(peak, out(i, j));
      }
      Scalar total = 0;
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        out(i, j) = masked(mask, j) ? Scalar(0) : std::exp(out(i, j) - peak);
        total += out(i, j);
      }
      out.row(i) /= total;
    }
    const std::size_t self = nodes_.size();
    return push(std::move(out), [a, self](Tape& t, const Matrix& g) {
      const Matrix& y = t.nodes_[self].value;
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = (g.array() * y.array()).rowwise().sum();
      Matrix dx = y.array() * (g.colwise() - dot).array();
      t.accumulate(a, dx);
    });
  }

  /// Log-softmax of a 1 x n row over the unmasked entries; masked entries
  /// are -inf in the value and receive no adjoint.
  Var log_softmax_masked(Var a, std::span<const char> mask) {
    const Matrix& x = value(a);
    if (x.rows() != 1) throw std::invalid_argument("log_softmax_masked expects a row vector");
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!masked(mask, j)) peak = std::max(peak, x(0, j));
    }
    Scalar total = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!masked(mask, j)) total += std::exp(x(0, j) - peak);
    }
    const Scalar log_total = peak + std::log(total);
    Matrix out(1, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(0, j) = masked(mask, j) ? -std::numeric_limits<Scalar>::infinity() : x(0, j) - log_total;
    }
    std::vector<char> mask_copy(mask.begin(), mask.end());
    const std::size_t self = nodes_.size();
    return push(std::move(out), [a, self, mask_copy](Tape& t, const Matrix& g) {
      const Matrix& y = t.nodes_[self].value;
      const std::span<const char> m(mask_copy);
      Scalar gsum = 0;
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        if (!masked(m, j)) gsum += g(0, j);
      }
      Matrix dx = Matrix::Zero(1, y.cols());
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        if (!masked(m, j)) dx(0, j) = g(0, j) - std::exp(y(0, j)) * gsum;
      }
      t.accumulate(a, dx);
    });
  }

  /// (x - mean) / sqrt(var + eps) per row.
  Var normalize_rows(Var a, Scalar eps) {
    const Matrix& x = value(a);
    const Eigen::Index n = x.cols();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
        ((centered.array().square().rowwise().sum() / Scalar(n)) + eps).rsqrt();
    Matrix out = centered.array().colwise() * inv_std.array();
    const std::size_t self = nodes_.size();
    return push(std::move(out), [a, self, inv_std, n](Tape& t, const Matrix& g) {
      const Matrix& y = t.nodes_[self].value;
      const auto g_mean = g.rowwise().mean();
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gy_mean =
          (g.array() * y.array()).rowwise().sum() / Scalar(n);
      Matrix dx = ((g.colwise() - g_mean).array() - y.array().colwise() * gy_mean.array())
                      .colwise() *
                  inv_std.array();
      t.accumulate(a, dx);
    });
  }

  /// Column means as a 1 x n row.
  Var mean_rows(Var a) {
    const Eigen::Index rows = value(a).rows();
    return push(value(a).colwise().mean(), [a, rows](Tape& t, const Matrix& g) {
      t.accumulate(a, g.replicate(rows, 1) / Scalar(rows));
    });
  }

  Var row(Var a, Eigen::Index i) {
    return push(value(a).row(i), [a, i](Tape& t, const Matrix& g) {
      Matrix dx = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      dx.row(i) = g;
      t.accumulate(a, dx);
    });
  }

  Var cols(Var a, Eigen::Index start, Eigen::Index count) {
    return push(value(a).middleCols(start, count), [a, start, count](Tape& t, const Matrix& g) {
      Matrix dx = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      dx.middleCols(start, count) = g;
      t.accumulate(a, dx);
    });
  }

  Var concat_cols(std::span<const Var> parts) {
    const Eigen::Index rows = value(parts.front()).rows();
    Eigen::Index total = 0;
    for (Var p : parts) total += value(p).cols();
    Matrix out(rows, total);
    Eigen::Index offset = 0;
    for (Var p : parts) {
      out.middleCols(offset, value(p).cols()) = value(p);
      offset += value(p).cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return push(std::move(out), [inputs](Tape& t, const Matrix& g) {
      Eigen::Index at = 0;
      for (Var p : inputs) {
        const Eigen::Index c = t.value(p).cols();
        t.accumulate(p, g.middleCols(at, c));
        at += c;
      }
    });
  }

  /// 1 x 1 entry (i, j).
  Var element(Var a, Eigen::Index i, Eigen::Index j) {
    Matrix out(1, 1);
    out(0, 0) = value(a)(i, j);
    return push(std::move(out), [a, i, j](Tape& t, const Matrix& g) {
      Matrix dx = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      dx(i, j) = g(0, 0);
      t.accumulate(a, dx);
    });
  }

  /// sum_i weights[i] * terms[i] for 1 x 1 terms.
  Var weighted_sum(std::span<const Var> terms, std::span<const Scalar> weights) {
    Matrix out = Matrix::Zero(1, 1);
    for (std::size_t i = 0; i < terms.size(); ++i) out(0, 0) += weights[i] * value(terms[i])(0, 0);
    std::vector<Var> inputs(terms.begin(), terms.end());
    std::vector<Scalar> w(weights.begin(), weights.end());
    return push(std::move(out), [inputs, w](Tape& t, const Matrix& g) {
      for (std::size_t i = 0; i < inputs.size(); ++i) t.accumulate(inputs[i], g * w[i]);
    });
  }

  /// Seeds d root / d root = 1 on a 1 x 1 root and propagates.
  void backward(Var root) {
    if (value(root).size() != 1) throw std::invalid_argument("backward needs a scalar root");
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.id].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
  }

 private:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };

  static bool masked(std::span<const char> mask, Eigen::Index j) {
    return !mask.empty() && mask[static_cast<std::size_t>(j)] != 0;
  }

  Var push(Matrix value, Backward backward) {
    nodes_.push_back({std::move(value), Matrix(), std::move(backward)});
    return {nodes_.size() - 1};
  }

  void accumulate(Var v, const Matrix& g) {
    Matrix& dst = nodes_[v.id].grad;
    if (dst.size() == 0) {
      dst = g;
    } else {
      dst += g;
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace rackopt
