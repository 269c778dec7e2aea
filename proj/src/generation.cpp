#include "gmce/generation.hpp"

#include <chrono>
#include <cmath>

namespace gmce {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TensorPtr row_tensor(const std::vector<double>& v) {
  return Tensor::from({1, v.size()}, std::vector<double>(v));
}

/// Decode and sharpen the categorical blocks with a temperature softmax so
/// the result stays differentiable end to end (tanh continuous block is
/// passed through unchanged).
TensorPtr decode_sharpened(Graph* g, const DisentangledAutoencoder& model,
                           const TensorPtr& z_full, double t) {
  auto x = model.decode_full(g, z_full);
  const auto& cfg = model.config();
  if (cfg.categorical_blocks.empty()) return x;
  TensorPtr out;
  if (cfg.continuous_width > 0) out = ops::slice_cols(g, x, 0, cfg.continuous_width);
  std::size_t off = cfg.continuous_width;
  for (std::size_t w : cfg.categorical_blocks) {
    auto block = ops::softmax_t(g, ops::slice_cols(g, x, off, w), t);
    out = out ? ops::concat_cols(g, out, block) : block;
    off += w;
  }
  return out;
}

}  // namespace

void GenerationConfig::validate() const {
  if (grid < 1) throw ContractError("generation config: grid must be >= 1");
  if (!(boundary > 0.0 && boundary < 1.0)) {
    throw ContractError("generation config: boundary must lie in (0,1)");
  }
  if (!(tolerance > 0.0)) throw ContractError("generation config: tolerance must be > 0");
  if (bisection_cap < 1) throw ContractError("generation config: bisection cap must be >= 1");
}

void GdlConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("gdl config: lr must be > 0");
  if (max_iterations < 0) throw ContractError("gdl config: iteration cap must be >= 0");
  if (!(boundary > 0.0 && boundary < 1.0)) {
    throw ContractError("gdl config: boundary must lie in (0,1)");
  }
  if (!(tolerance > 0.0)) throw ContractError("gdl config: tolerance must be > 0");
  if (!(softmax_temperature > 0.0)) {
    throw ContractError("gdl config: softmax temperature must be > 0");
  }
}

std::vector<double> interpolate(std::span<const double> z_q, std::span<const double> mu1,
                                double alpha) {
  if (z_q.size() != mu1.size()) throw DimensionError("interpolate: widths differ");
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("interpolate: alpha must lie in [0,1]");
  std::vector<double> out(z_q.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = (1.0 - alpha) * z_q[j] + alpha * mu1[j];
  }
  return out;
}

CounterfactualResult generate(const DisentangledAutoencoder& model, const FrozenClassifier& f,
                              const std::vector<double>& x_q, const GenerationConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();

  CounterfactualResult r;
  r.query = x_q;

  const double score_q = f.score_row(x_q);
  if (score_q >= cfg.boundary) {
    throw ContractError("generate: query is already classified as the target class (score " +
                        std::to_string(score_q) + ")");
  }

  auto x = row_tensor(x_q);
  auto [z_q, z_u_q] = model.encode(nullptr, x);  // z_{u,q} fixed for the whole search

  const auto& mu1 = model.gm.mean_1;
  const std::size_t d_z = z_q->cols();
  auto score_at = [&](double alpha) {
    auto z_s = Tensor::from({1, d_z}, interpolate(z_q->data, mu1->data, alpha));
    auto x_s = model.decode(nullptr, z_s, z_u_q);
    return std::pair<double, TensorPtr>(f.score_row(x_s->data), x_s);
  };
  auto qualifies = [&](double s) {
    return s >= cfg.boundary && std::fabs(s - cfg.boundary) < cfg.tolerance;
  };

  // The grid is scanned ascending in small batches: identical semantics to
  // a point-by-point scan, but the decoder and classifier amortize their
  // per-call overhead across the chunk.
  const std::size_t S = cfg.grid;
  const std::size_t chunk = 48;
  std::vector<double> scores;
  scores.reserve(S);
  double found_alpha = -1.0;
  bool crossed = false;
  bool done = false;
  for (std::size_t k0 = 1; k0 <= S && !done; k0 += chunk) {
    const std::size_t rows = std::min(S, k0 + chunk - 1) - k0 + 1;
    auto z_s = Tensor::zeros({rows, d_z});
    auto z_u_rows = Tensor::zeros({rows, z_u_q->cols()});
    for (std::size_t i = 0; i < rows; ++i) {
      const double alpha = static_cast<double>(k0 + i) / static_cast<double>(S);
      for (std::size_t j = 0; j < d_z; ++j) {
        z_s->at(i, j) = (1.0 - alpha) * z_q->data[j] + alpha * mu1->data[j];
      }
      for (std::size_t j = 0; j < z_u_q->cols(); ++j) z_u_rows->at(i, j) = z_u_q->data[j];
    }
    auto pred = f.forward(nullptr, model.decode(nullptr, z_s, z_u_rows));
    for (std::size_t i = 0; i < rows; ++i) {
      const double s = pred->data[i];
      scores.push_back(s);
      r.score = s;
      if (s >= cfg.boundary) crossed = true;
      if (qualifies(s)) {
        found_alpha = static_cast<double>(k0 + i) / static_cast<double>(S);
        if (cfg.alpha_mode == AlphaMode::smallest) {  // minimal change: first hit wins
          done = true;
          break;
        }
      }
    }
  }

  if (found_alpha < 0.0 && cfg.refine) {
    // sign change of f - T between adjacent grid points: bisect into the band
    for (std::size_t k = 1; k < scores.size(); ++k) {
      if (scores[k - 1] < cfg.boundary && scores[k] >= cfg.boundary) {
        double a = static_cast<double>(k) / static_cast<double>(S);
        double b = static_cast<double>(k + 1) / static_cast<double>(S);
        for (int it = 0; it < cfg.bisection_cap; ++it) {
          const double mid = 0.5 * (a + b);
          auto [s, x_s] = score_at(mid);
          if (qualifies(s)) {
            found_alpha = mid;
            break;
          }
          (s < cfg.boundary ? a : b) = mid;
        }
        break;
      }
    }
  }

  if (found_alpha < 0.0) {
    r.failure_reason = crossed ? "boundary crossed but no point within tolerance"
                               : "no boundary crossing along the interpolation path";
    r.seconds = seconds_since(t0);
    return r;
  }

  // independent re-check of the postcondition
  auto [s_final, x_final] = score_at(found_alpha);
  if (!qualifies(s_final)) {
    throw ContractError("generate: success postcondition violated on re-check");
  }
  r.success = true;
  r.alpha = found_alpha;
  r.score = s_final;
  r.counterfactual = x_final->data;
  r.seconds = seconds_since(t0);
  return r;
}

CounterfactualResult generate_gdl(const DisentangledAutoencoder& model,
                                  const FrozenClassifier& f, const std::vector<double>& x_q,
                                  const GdlConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();

  CounterfactualResult r;
  r.query = x_q;

  auto x = row_tensor(x_q);
  auto [z_q, z_u_q] = model.encode(nullptr, x);
  auto z_init = ops::concat_cols(nullptr, z_q, z_u_q);
  auto z_t = Tensor::from({1, z_init->cols()}, std::vector<double>(z_init->data));  // leaf

  auto boundary = Tensor::from({1, 1}, {cfg.boundary});
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    Graph g;
    auto x_t = decode_sharpened(&g, model, z_t, cfg.softmax_temperature);
    auto s_t = f.forward(&g, x_t);
    const double s = s_t->data[0];
    r.score = s;
    r.iterations = it;
    if (s > cfg.boundary && std::fabs(s - cfg.boundary) < cfg.tolerance) {
      r.success = true;
      r.counterfactual = x_t->data;
      r.seconds = seconds_since(t0);
      return r;
    }
    if (it == cfg.max_iterations) break;
    auto loss = ops::square(&g, ops::sub(&g, s_t, boundary));
    z_t->zero_grad();
    g.backward(loss);
    for (std::size_t j = 0; j < z_t->data.size(); ++j) {
      z_t->data[j] -= cfg.lr * z_t->grad[j];
    }
    z_t->zero_grad();
  }

  r.failure_reason = "iteration cap exhausted before crossing the boundary";
  r.seconds = seconds_since(t0);
  return r;
}

InterpolationTrace trace_path(const DisentangledAutoencoder& model, const FrozenClassifier& f,
                              const std::vector<double>& x_q, const GenerationConfig& cfg) {
  cfg.validate();
  InterpolationTrace trace;
  auto x = row_tensor(x_q);
  auto [z_q, z_u_q] = model.encode(nullptr, x);
  const auto& mu1 = model.gm.mean_1;
  for (std::size_t k = 0; k < cfg.grid; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(cfg.grid);
    auto z_s = Tensor::from({1, z_q->cols()}, interpolate(z_q->data, mu1->data, alpha));
    auto x_s = model.decode(nullptr, z_s, z_u_q);
    trace.alphas.push_back(alpha);
    trace.scores.push_back(f.score_row(x_s->data));
  }
  return trace;
}

}  // namespace gmce
