#pragma once

// Model checkpoints as URK1 containers. Layer l's arrays are named "L<l>.<field>";
// unrolled-ADMM branches use "L<l>.B<i>.<field>".

#include <string>

#include "unroll/container.hpp"
#include "unroll/nets.hpp"

namespace unroll {

namespace detail {

inline std::string layer_key(std::size_t l, const char* field) { return "L" + std::to_string(l) + "." + field; }

inline std::string branch_key(std::size_t l, std::size_t i, const char* field) {
  return "L" + std::to_string(l) + ".B" + std::to_string(i) + "." + field;
}


}  // namespace detail

inline Container checkpoint_to_container(const UnrolledModel& model) {
  Container c;
  c.put_scalar("model_kind", static_cast<double>(model.kind()));
  c.put_scalar("depth", static_cast<double>(model.depth()));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        c.put_scalar("tied", p.tied ? 1.0 : 0.0);
        if constexpr (std::is_same_v<P, ListaParams>) {
          for (std::size_t l = 0; l < p.layers.size(); ++l) {
            c.put(detail::layer_key(l, "we"), p.layers[l].we);
            c.put(detail::layer_key(l, "wt"), p.layers[l].wt);
            c.put_scalar(detail::layer_key(l, "log_lambda"), p.layers[l].log_lambda);
          }
        } else if constexpr (std::is_same_v<P, LihtParams>) {
          c.put_scalar("k", static_cast<double>(p.k));
          for (std::size_t l = 0; l < p.layers.size(); ++l) {
            c.put(detail::layer_key(l, "we"), p.layers[l].we);
            c.put(detail::layer_key(l, "wt"), p.layers[l].wt);
          }
        } else if constexpr (std::is_same_v<P, LSparcomParams>) {
          for (std::size_t l = 0; l < p.layers.size(); ++l) {
            c.put(detail::layer_key(l, "we"), p.layers[l].we);
            c.put(detail::layer_key(l, "wt"), p.layers[l].wt);
            c.put_scalar(detail::layer_key(l, "alpha"), p.layers[l].alpha);
            c.put_scalar(detail::layer_key(l, "log_beta"), p.layers[l].log_beta);
          }
        } else {
          c.put_scalar("learn_d", p.learn_operators ? 1.0 : 0.0);
          c.put_scalar("branches", p.stages.empty() ? 0.0 : static_cast<double>(p.stages[0].branches.size()));
          c.put("measurement", model.measurement());
          for (std::size_t l = 0; l < p.stages.size(); ++l) {
            for (std::size_t i = 0; i < p.stages[l].branches.size(); ++i) {
              const auto& b = p.stages[l].branches[i];
              c.put(detail::branch_key(l, i, "d"), b.d);
              c.put_scalar(detail::branch_key(l, i, "log_lambda"), b.log_lambda);
              c.put_scalar(detail::branch_key(l, i, "log_rho"), b.log_rho);
              c.put_scalar(detail::branch_key(l, i, "log_eta"), b.log_eta);
            }
          }
        }
      },
      model.params());
  return c;
}

inline UnrolledModel checkpoint_from_container(const Container& c) {
  const auto kind_code = static_cast<int>(c.scalar("model_kind"));
  if (kind_code < 0 || kind_code > 3) throw FormatError("checkpoint: unknown model kind");
  const auto kind = static_cast<ModelKind>(kind_code);
  const auto depth = static_cast<std::size_t>(c.scalar("depth"));
  const bool tied = c.scalar("tied") != 0.0;
  const std::size_t stored = detail::stored_layers(depth, tied);
  switch (kind) {
    case ModelKind::kLista: {
      ListaParams p{depth, tied, {}};
      for (std::size_t l = 0; l < stored; ++l) {
        p.layers.push_back({c.matrix(detail::layer_key(l, "we")), c.matrix(detail::layer_key(l, "wt")),
                            c.scalar(detail::layer_key(l, "log_lambda"))});
      }
      return UnrolledModel(std::move(p));
    }
    case ModelKind::kLiht: {
      LihtParams p{depth, tied, static_cast<std::size_t>(c.scalar("k")), {}};
      for (std::size_t l = 0; l < stored; ++l) {
        p.layers.push_back({c.matrix(detail::layer_key(l, "we")), c.matrix(detail::layer_key(l, "wt"))});
      }
      return UnrolledModel(std::move(p));
    }
    case ModelKind::kLsparcom: {
      LSparcomParams p{depth, tied, {}};
      for (std::size_t l = 0; l < stored; ++l) {
        p.layers.push_back({c.matrix(detail::layer_key(l, "we")), c.matrix(detail::layer_key(l, "wt")),
                            c.scalar(detail::layer_key(l, "alpha")), c.scalar(detail::layer_key(l, "log_beta"))});
      }
      return UnrolledModel(std::move(p));
    }
    case ModelKind::kUadmm: {
      UnrolledAdmmParams p{depth, tied, c.scalar("learn_d") != 0.0, {}};
      const auto branches = static_cast<std::size_t>(c.scalar("branches"));
      for (std::size_t l = 0; l < stored; ++l) {
        AdmmStage st;
        for (std::size_t i = 0; i < branches; ++i) {
          st.branches.push_back({c.matrix(detail::branch_key(l, i, "d")), c.scalar(detail::branch_key(l, i, "log_lambda")),
                                 c.scalar(detail::branch_key(l, i, "log_rho")),
                                 c.scalar(detail::branch_key(l, i, "log_eta"))});
        }
        p.stages.push_back(std::move(st));
      }
      return UnrolledModel(std::move(p), c.matrix("measurement"));
    }
  }
  throw FormatError("checkpoint: unknown model kind");
}

inline void save_checkpoint(const std::string& path, const UnrolledModel& model) {
  save_container(path, checkpoint_to_container(model));
}

inline UnrolledModel load_checkpoint(const std::string& path) { return checkpoint_from_container(load_container(path)); }

}  // namespace unroll
