#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "unroll/linalg.hpp"
#include "unroll/matrix.hpp"
#include "unroll/prox.hpp"

namespace unroll::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t index = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

enum class Op {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kScaleByParam,
  kTranspose,
  kSolve,
  kSoftThreshold,
  kHardThresholdTopk,
  kSigmoidPlusThreshold,
  kRowGroupSoftThreshold,
  kMseLoss,
  kMaskedLoss,
};

/// Append-only record of primitive applications. Parents always precede
/// their children, so the node order is a topological order.
///
/// A Tape is single-owner; record and differentiate it from one thread.
class Tape {
 public:
  struct Node {
    Op op = Op::kLeaf;
    std::array<std::size_t, 3> parents{};
    std::size_t parent_count = 0;
    Matrix value;
    std::vector<std::size_t> kept;    // hard threshold support
    double weight = 0.0;              // masked-loss penalty weight
    std::shared_ptr<const Lu> system;  // factorized matrix of a solve node
  };

  /// Records a leaf: a trainable parameter or a constant input.
  Var leaf(Matrix value) { return push(Op::kLeaf, {}, std::move(value)); }
  Var scalar(double value) { return leaf(Matrix(1, 1, {value})); }

  const Matrix& value(Var v) const { return nodes_.at(v.index).value; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b) { return push(Op::kMatmul, {a, b}, unroll::matmul(value(a), value(b))); }
  Var add(Var a, Var b) { return push(Op::kAdd, {a, b}, unroll::add(value(a), value(b))); }
  Var sub(Var a, Var b) { return push(Op::kSub, {a, b}, unroll::sub(value(a), value(b))); }
  Var transpose(Var a) { return push(Op::kTranspose, {a}, unroll::transpose(value(a))); }

  /// s·x for a 1x1 variable s.
  Var scale_by_param(Var x, Var s) {
    require_scalar(s, "scale_by_param");
    return push(Op::kScaleByParam, {x, s}, unroll::scale(value(x), value(s)[0]));
  }

  /// x = a⁻¹·b. The backward rule solves the transposed system against the
  /// incoming gradient.
  Var solve(Var a, Var b) {
    auto lu = std::make_shared<const Lu>(value(a));
    Var out = push(Op::kSolve, {a, b}, lu->solve(value(b)));
    nodes_.back().system = std::move(lu);
    return out;
  }

  Var soft_threshold(Var x, Var lambda) {
    require_scalar(lambda, "soft_threshold");
    return push(Op::kSoftThreshold, {x, lambda}, unroll::soft_threshold(value(x), value(lambda)[0]));
  }

  Var hard_threshold_topk(Var x, std::size_t k) {
    auto kept = topk_indices(value(x), k);
    Matrix y(x.rows, x.cols);
    for (std::size_t i : kept) y[i] = value(x)[i];
    Var out = push(Op::kHardThresholdTopk, {x}, std::move(y));
    nodes_.back().kept = std::move(kept);
    return out;
  }

  Var sigmoid_plus_threshold(Var x, Var alpha, Var beta) {
    require_scalar(alpha, "sigmoid_plus_threshold");
    require_scalar(beta, "sigmoid_plus_threshold");
    return push(Op::kSigmoidPlusThreshold, {x, alpha, beta},
                unroll::sigmoid_plus_threshold(value(x), value(alpha)[0], value(beta)[0]));
  }

  Var row_group_soft_threshold(Var x, Var lambda) {
    require_scalar(lambda, "row_group_soft_threshold");
    return push(Op::kRowGroupSoftThreshold, {x, lambda},
                unroll::row_group_soft_threshold(value(x), value(lambda)[0]));
  }

  /// ‖pred − target‖² as a 1x1 value.
  Var mse_loss(Var pred, Var target) {
    const double v = squared_norm(unroll::sub(value(pred), value(target)));
    return push(Op::kMseLoss, {pred, target}, Matrix(1, 1, {v}));
  }

  /// (1/N)·Σ B·|p − t|² + w·(1 − B)·|p|, with B = 𝟙[t ≠ 0] and N the entry count.
  Var masked_loss(Var pred, Var target, double penalty_weight) {
    if (!(penalty_weight >= 0.0)) throw ContractError("masked_loss: penalty weight must be nonnegative");
    const Matrix& p = value(pred);
    const Matrix& t = value(target);
    detail::require_same_shape(p, t, "masked_loss");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (t[i] != 0.0) {
        total += (p[i] - t[i]) * (p[i] - t[i]);
      } else {
        total += penalty_weight * std::abs(p[i]);
      }
    }
    const double n = static_cast<double>(p.size());
    Var out = push(Op::kMaskedLoss, {pred, target}, Matrix(1, 1, {p.empty() ? 0.0 : total / n}));
    nodes_.back().weight = penalty_weight;
    return out;
  }

 private:
  void require_scalar(Var v, const char* op) const {
    if (v.rows != 1 || v.cols != 1) throw ShapeError(std::string(op) + ": parameter must be 1x1");
  }

  Var push(Op op, std::initializer_list<Var> parents, Matrix value) {
    Node n;
    n.op = op;
    for (Var p : parents) {
      if (p.index >= nodes_.size()) throw ContractError("tape: parent does not belong to this tape");
      n.parents[n.parent_count++] = p.index;
    }
    Var v{nodes_.size(), value.rows(), value.cols()};
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return v;
  }

  std::vector<Node> nodes_;
};

/// Adjoints of every node with respect to one scalar output.
class Gradients {
 public:
  explicit Gradients(std::vector<Matrix> grads) : grads_(std::move(grads)) {}

  const Matrix& operator[](Var v) const { return grads_.at(v.index); }
  const Matrix& at(std::size_t index) const { return grads_.at(index); }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::vector<Matrix> grads_;
};

namespace detail {

inline void accumulate(Matrix& into, const Matrix& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

}  // namespace detail

/// Reverse sweep from a 1x1 loss. Visits nodes in strictly decreasing index
/// order, each at most once; nodes the loss does not depend on keep a zero adjoint.
inline Gradients backward(const Tape& tape, Var loss) {
  if (loss.rows != 1 || loss.cols != 1) throw ContractError("backward: loss must be 1x1");
  if (loss.index >= tape.size()) throw ContractError("backward: loss does not belong to this tape");

  std::vector<Matrix> g(tape.size());
  std::vector<bool> reached(tape.size(), false);
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const Matrix& v = tape.node(i).value;
    g[i] = Matrix(v.rows(), v.cols());
  }
  g[loss.index][0] = 1.0;
  reached[loss.index] = true;

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    if (!reached[idx]) continue;
    const auto& n = tape.node(idx);
    const Matrix& gy = g[idx];
    for (std::size_t p = 0; p < n.parent_count; ++p) reached[n.parents[p]] = true;
    auto parent_value = [&](std::size_t p) -> const Matrix& { return tape.node(n.parents[p]).value; };
    auto parent_grad = [&](std::size_t p) -> Matrix& { return g[n.parents[p]]; };

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        detail::accumulate(parent_grad(0), unroll::matmul(gy, unroll::transpose(parent_value(1))));
        detail::accumulate(parent_grad(1), unroll::matmul_tn(parent_value(0), gy));
        break;
      }
      case Op::kAdd:
        detail::accumulate(parent_grad(0), gy);
        detail::accumulate(parent_grad(1), gy);
        break;
      case Op::kSub: {
        detail::accumulate(parent_grad(0), gy);
        Matrix& gb = parent_grad(1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
        break;
      }
      case Op::kTranspose:
        detail::accumulate(parent_grad(0), unroll::transpose(gy));
        break;
      case Op::kScaleByParam: {
        const Matrix& x = parent_value(0);
        const double s = parent_value(1)[0];
        Matrix& gx = parent_grad(0);
        double gs = 0.0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += s * gy[i];
          gs += gy[i] * x[i];
        }
        parent_grad(1)[0] += gs;
        break;
      }
      case Op::kSolve: {
        const Matrix gb = n.system->solve_transposed(gy);
        detail::accumulate(parent_grad(1), gb);
        Matrix& ga = parent_grad(0);
        const Matrix& x = n.value;
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) s += gb(i, c) * x(j, c);
            ga(i, j) -= s;
          }
        break;
      }
      case Op::kSoftThreshold: {
        // Subgradient 0 at the kink |x| = λ.
        const Matrix& x = parent_value(0);
        const double lambda = parent_value(1)[0];
        Matrix& gx = parent_grad(0);
        double gl = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (std::abs(x[i]) > lambda) {
            gx[i] += gy[i];
            gl -= (x[i] > 0.0 ? 1.0 : -1.0) * gy[i];
          }
        }
        parent_grad(1)[0] += gl;
        break;
      }
      case Op::kHardThresholdTopk: {
        Matrix& gx = parent_grad(0);
        for (std::size_t i : n.kept) gx[i] += gy[i];
        break;
      }
      case Op::kSigmoidPlusThreshold: {
        const Matrix& x = parent_value(0);
        const double alpha = parent_value(1)[0];
        const double beta = parent_value(2)[0];
        Matrix& gx = parent_grad(0);
        double ga = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double xi = x[i];
          if (xi <= 0.0) continue;  // right-sided branch at 0: derivative 0
          const double e = std::exp(-beta * (xi - alpha));
          double sig = 0.0, dsig = 0.0;  // σ and σ(1 − σ)
          if (std::isfinite(e)) {
            sig = 1.0 / (1.0 + e);
            dsig = e / ((1.0 + e) * (1.0 + e));
            if (!std::isfinite(dsig)) dsig = 0.0;
          }
          gx[i] += gy[i] * (sig + xi * beta * dsig);
          ga -= gy[i] * xi * beta * dsig;
          gb += gy[i] * xi * (xi - alpha) * dsig;
        }
        parent_grad(1)[0] += ga;
        parent_grad(2)[0] += gb;
        break;
      }
      case Op::kRowGroupSoftThreshold: {
        const Matrix& x = parent_value(0);
        const double lambda = parent_value(1)[0];
        Matrix& gx = parent_grad(0);
        double gl = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const auto row = x.row(r);
          const auto grow = gy.row(r);
          double ss = 0.0, rg = 0.0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            ss += row[j] * row[j];
            rg += row[j] * grow[j];
          }
          const double nrm = std::sqrt(ss);
          if (nrm <= lambda) continue;
          const double shrink = 1.0 - lambda / nrm;
          const double coupling = lambda * rg / (nrm * nrm * nrm);
          auto out = gx.row(r);
          for (std::size_t j = 0; j < row.size(); ++j) out[j] += shrink * grow[j] + coupling * row[j];
          gl -= rg / nrm;
        }
        parent_grad(1)[0] += gl;
        break;
      }
      case Op::kMseLoss: {
        const Matrix& p = parent_value(0);
        const Matrix& t = parent_value(1);
        Matrix& gp = parent_grad(0);
        Matrix& gt = parent_grad(1);
        const double s = gy[0];
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = 2.0 * s * (p[i] - t[i]);
          gp[i] += d;
          gt[i] -= d;
        }
        break;
      }
      case Op::kMaskedLoss: {
        const Matrix& p = parent_value(0);
        const Matrix& t = parent_value(1);
        Matrix& gp = parent_grad(0);
        Matrix& gt = parent_grad(1);
        const double s = p.empty() ? 0.0 : gy[0] / static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (t[i] != 0.0) {
            const double d = 2.0 * s * (p[i] - t[i]);
            gp[i] += d;
            gt[i] -= d;
          } else if (p[i] != 0.0) {
            gp[i] += s * n.weight * (p[i] > 0.0 ? 1.0 : -1.0);
          }
        }
        break;
      }
    }
  }
  return Gradients(std::move(g));
}

/// Smallest distance of any recorded pre-activation to a point where its
/// primitive is not differentiable: |x| = λ for soft thresholding, the gap
/// between the k-th and (k+1)-th magnitudes for top-k, x = 0 for S⁺, and
/// ‖row‖ = λ for row-group shrinkage. +∞ when the tape has no such primitive.
inline double kink_margin(const Tape& tape) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const auto& n = tape.node(i);
    const Matrix& x = tape.node(n.parents[0]).value;
    switch (n.op) {
      case Op::kSoftThreshold: {
        const double lambda = tape.node(n.parents[1]).value[0];
        for (double v : x.values()) margin = std::min(margin, std::abs(std::abs(v) - lambda));
        break;
      }
      case Op::kHardThresholdTopk: {
        if (n.kept.empty() || n.kept.size() >= x.size()) break;
        std::vector<double> mags;
        for (double v : x.values()) mags.push_back(std::abs(v));
        std::sort(mags.begin(), mags.end(), std::greater<>());
        margin = std::min(margin, mags[n.kept.size() - 1] - mags[n.kept.size()]);
        break;
      }
      case Op::kSigmoidPlusThreshold:
        for (double v : x.values()) margin = std::min(margin, std::abs(v));
        break;
      case Op::kRowGroupSoftThreshold: {
        const double lambda = tape.node(n.parents[1]).value[0];
        for (std::size_t r = 0; r < x.rows(); ++r) {
          double ss = 0.0;
          for (double v : x.row(r)) ss += v * v;
          margin = std::min(margin, std::abs(std::sqrt(ss) - lambda));
        }
        break;
      }
      default:
        break;
    }
  }
  return margin;
}

/// Central differences (f(p + h·e_i) − f(p − h·e_i)) / 2h for every coordinate.
inline std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> p, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace unroll::ad
