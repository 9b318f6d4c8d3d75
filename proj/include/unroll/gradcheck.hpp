#pragma once

// Tape gradients of a model's loss against central finite differences of the
// same loss, compared block by block over the flat raw-parameter vector.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "unroll/autodiff.hpp"
#include "unroll/nets.hpp"
#include "unroll/training.hpp"

namespace unroll {

struct GradBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
  bool scalar = false;      // a single coordinate (threshold, step, ...)
  double rel_err = 0.0;     // ‖g_tape − g_fd‖ / max(‖g_fd‖, floor)
};

struct GradcheckResult {
  std::vector<GradBlock> blocks;
  double max_rel_err = 0.0;         // over all blocks
  double max_rel_err_scalar = 0.0;  // over single-coordinate blocks
  double max_rel_err_matrix = 0.0;  // over matrix blocks
  double kink_margin = 0.0;         // from the recorded forward pass
  std::vector<double> tape_grad;
  std::vector<double> fd_grad;
};

inline constexpr double kGradNormFloor = 1e-8;

/// Partition of the flat parameter vector: every identity-mapped leaf is one
/// block, every remaining coordinate is its own block.
inline std::vector<GradBlock> gradient_blocks(const Recorded& rec, const ad::Tape& tape, std::size_t count) {
  std::vector<GradBlock> blocks;
  std::vector<bool> covered(count, false);
  for (const auto& b : rec.bindings) {
    if (b.map != Binding::Map::kIdentity) continue;
    const std::size_t sz = tape.value(b.var).size();
    blocks.push_back({b.offset, sz, false, 0.0});
    for (std::size_t i = 0; i < sz; ++i) covered[b.offset + i] = true;
  }
  for (std::size_t i = 0; i < count; ++i)
    if (!covered[i]) blocks.push_back({i, 1, true, 0.0});
  std::sort(blocks.begin(), blocks.end(), [](const GradBlock& a, const GradBlock& b) { return a.offset < b.offset; });
  return blocks;
}

inline double model_loss(const UnrolledModel& model, const Matrix& input, const Matrix& target, LossKind kind,
                         double lambda_loss) {
  const Matrix out = model.forward(input);
  return kind == LossKind::kMse ? squared_norm(sub(out, target)) : masked_loss(out, target, lambda_loss);
}

inline GradcheckResult gradcheck_model(const UnrolledModel& model, const Matrix& input, const Matrix& target,
                                       LossKind kind, double lambda_loss, double h = 1e-6) {
  GradcheckResult res;
  ad::Tape tape;
  const Recorded rec = model.record(tape, input);
  const ad::Var t = tape.leaf(target);
  const ad::Var loss = kind == LossKind::kMse ? tape.mse_loss(rec.output, t) : tape.masked_loss(rec.output, t, lambda_loss);
  const ad::Gradients g = ad::backward(tape, loss);
  res.kink_margin = ad::kink_margin(tape);

  const std::vector<double> p0 = model.pack();
  res.tape_grad.assign(p0.size(), 0.0);
  pull_gradient(rec, tape, g, res.tape_grad);

  UnrolledModel probe = model;
  res.fd_grad = ad::finite_diff_grad(
      [&](const std::vector<double>& p) {
        probe.unpack(p);
        return model_loss(probe, input, target, kind, lambda_loss);
      },
      p0, h);

  res.blocks = gradient_blocks(rec, tape, p0.size());
  for (auto& b : res.blocks) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      diff += (res.tape_grad[i] - res.fd_grad[i]) * (res.tape_grad[i] - res.fd_grad[i]);
      ref += res.fd_grad[i] * res.fd_grad[i];
    }
    b.rel_err = std::sqrt(diff) / std::max(std::sqrt(ref), kGradNormFloor);
    res.max_rel_err = std::max(res.max_rel_err, b.rel_err);
    (b.scalar ? res.max_rel_err_scalar : res.max_rel_err_matrix) =
        std::max(b.scalar ? res.max_rel_err_scalar : res.max_rel_err_matrix, b.rel_err);
  }
  return res;
}

}  // namespace unroll
