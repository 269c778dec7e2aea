#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmce/model.hpp"

namespace gmce {

/// Which qualifying grid point generate() returns. `smallest` is the
/// default (minimal change); `largest` replicates the last-overwrite
/// semantics of the published pseudo code.
enum class AlphaMode { smallest, largest };

struct GenerationConfig {
  std::size_t grid = 100;   // number of alpha samples, alpha_k = k/S in (0,1]
  double boundary = 0.5;    // T
  double tolerance = 0.1;   // tol
  bool refine = false;      // bisect between grid points when the band was missed
  int bisection_cap = 20;
  AlphaMode alpha_mode = AlphaMode::smallest;

  void validate() const;
};

struct CounterfactualResult {
  std::vector<double> query;  // preprocessed
  std::optional<std::vector<double>> counterfactual;
  double alpha = 0.0;  // interpolation coefficient; 0 for the gradient baseline
  double score = 0.0;  // f(x_cf) on success, last observed score otherwise
  bool success = false;
  std::string failure_reason;
  double seconds = 0.0;
  int iterations = 0;  // gradient steps taken (gradient baseline only)
};

struct InterpolationTrace {
  std::vector<double> alphas;
  std::vector<double> scores;
};

/// z_s = (1 - alpha) * z_q + alpha * mu1, elementwise.
std::vector<double> interpolate(std::span<const double> z_q, std::span<const double> mu1,
                                double alpha);

/// Linear interpolation search toward the target-class centroid
/// (z_{u,q} computed once and held fixed). A grid point qualifies when
/// f(x_s) >= T and |f(x_s) - T| < tol; success results are re-checked
/// against those bounds independently of the search loop.
/// Precondition: f(x_q) < T (the query must be base class).
CounterfactualResult generate(const DisentangledAutoencoder& model, const FrozenClassifier& f,
                              const std::vector<double>& x_q, const GenerationConfig& cfg);

struct GdlConfig {
  double lr = 0.05;
  int max_iterations = 1000;
  double boundary = 0.5;
  double tolerance = 0.1;
  /// Temperature of the categorical-block sharpening applied before the
  /// classifier so the decode stays differentiable.
  double softmax_temperature = 0.5;

  void validate() const;
};

/// Gradient-descent baseline: descend (T - f(decode(z)))^2 over the full
/// concatenated latent until f(x_t) > T within tolerance or the cap.
CounterfactualResult generate_gdl(const DisentangledAutoencoder& model,
                                  const FrozenClassifier& f, const std::vector<double>& x_q,
                                  const GdlConfig& cfg);

/// Score curve over alpha_k = k/S, k = 0..S-1 (starts at the
/// reconstruction's score); for plotting, never a failure.
InterpolationTrace trace_path(const DisentangledAutoencoder& model, const FrozenClassifier& f,
                              const std::vector<double>& x_q, const GenerationConfig& cfg);

}  // namespace gmce
