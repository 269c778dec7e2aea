#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "gmce/errors.hpp"

namespace gmce {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major float64 tensor with an optional gradient buffer.
///
/// Rank is 1 or 2. A scalar is shape {1}. Rank-1 tensors act as a single
/// row (1, n) wherever a batch dimension is expected, so biases and
/// per-feature vectors broadcast over the leading batch dimension.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad() or first backward

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  static TensorPtr zeros(std::vector<std::size_t> shape);
  static TensorPtr full(std::vector<std::size_t> shape, double value);
  static TensorPtr scalar(double value);
  static TensorPtr row(std::vector<double> values);
  static TensorPtr from(std::vector<std::size_t> shape, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }
  std::size_t rows() const;
  std::size_t cols() const;

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();  // allocate zero-filled buffer if absent
  void zero_grad();    // drop the buffer

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double item() const;  // scalar value; ContractError if not scalar
};

/// Reverse-mode tape. Ops append nodes in forward order, which is a
/// topological order by construction; backward() replays it once in
/// reverse, accumulating gradients additively across fan-out.
///
/// The tape is rebuilt for every forward pass. Passing a null Graph* to an
/// op runs it forward-only (inference mode).
class Graph {
 public:
  void record(TensorPtr out, std::function<void()> backward_fn);

  /// Seed d(loss)/d(loss) = 1 and propagate. Nodes whose output never
  /// received a gradient are skipped (they do not feed this loss).
  void backward(const TensorPtr& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
};

enum class Activation { none, relu, leaky_relu, tanh, sigmoid };

namespace ops {

// Shape rules: matmul is strict rank-2 (m,k)x(k,n). Elementwise binary ops
// take equal shapes, or a (B,n) first argument with an (n) / (1,n) second
// argument broadcast over the batch. Unary ops keep the input shape.
// Every op validates shapes and checks its output for NaN/Inf.

TensorPtr matmul(Graph* g, const TensorPtr& a, const TensorPtr& b);

/// Fused activation(x w + b): one tape node, numerically identical to the
/// matmul/add/activation composition.
TensorPtr dense(Graph* g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                Activation act);
TensorPtr add(Graph* g, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Graph* g, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Graph* g, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Graph* g, const TensorPtr& a, double c);

TensorPtr relu(Graph* g, const TensorPtr& a);
TensorPtr leaky_relu(Graph* g, const TensorPtr& a, double slope = 0.01);
TensorPtr sigmoid(Graph* g, const TensorPtr& a);
TensorPtr tanh(Graph* g, const TensorPtr& a);
TensorPtr log(Graph* g, const TensorPtr& a);
TensorPtr square(Graph* g, const TensorPtr& a);

/// Row-wise softmax over the trailing dimension with temperature t > 0:
/// softmax(x/t).
TensorPtr softmax_t(Graph* g, const TensorPtr& a, double t);

TensorPtr sum(Graph* g, const TensorPtr& a);   // all elements -> scalar
TensorPtr mean(Graph* g, const TensorPtr& a);  // all elements -> scalar

TensorPtr concat_cols(Graph* g, const TensorPtr& a, const TensorPtr& b);
TensorPtr slice_cols(Graph* g, const TensorPtr& a, std::size_t first, std::size_t count);

}  // namespace ops

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter group. step() consumes the gradients
/// populated by backward(), updates parameters in place and zeroes the
/// gradients afterwards.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig cfg, std::vector<TensorPtr> params);

  void step();
  long steps_taken() const { return t_; }
  const std::vector<TensorPtr>& params() const { return params_; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamConfig cfg_;
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

void zero_grads(std::span<const TensorPtr> params);

/// Deterministic RNG. mt19937_64 is fully specified by the standard and the
/// Gaussian draw uses explicit Box-Muller, so identical seeds give
/// bit-identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform();                        // [0, 1)
  double normal();                         // N(0, 1)
  std::size_t index(std::size_t n);        // {0, ..., n-1}
  std::uint64_t raw() { return eng_(); }

  /// Derive a decorrelated child seed for a named subsystem.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Tensor with i.i.d. N(0, scale^2) entries, deterministic per seed.
TensorPtr seeded_normal_init(std::vector<std::size_t> shape, std::uint64_t seed, double scale);

/// FNV-1a over the raw bytes of the data buffer (grad excluded).
std::uint64_t hash_tensor(const Tensor& t);
std::uint64_t hash_params(std::span<const TensorPtr> params);

}  // namespace gmce
