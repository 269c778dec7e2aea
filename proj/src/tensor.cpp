#include "gmce/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace gmce {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank 1 or 2");
  if (shape.size() > 2) throw DimensionError("tensors above rank 2 are not supported");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

// Second argument broadcasts over the batch when it is one row wide enough.
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rows() >= 1 && b.rows() == 1 && a.cols() == b.cols() && a.shape.size() == 2;
}

void check_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b) && !row_broadcast(a, b)) {
    throw DimensionError(std::string(op) + ": shapes do not match and are not row-broadcastable");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_size(shape), 0.0);
}

TensorPtr Tensor::zeros(std::vector<std::size_t> shape) {
  return std::make_shared<Tensor>(std::move(shape));
}

TensorPtr Tensor::full(std::vector<std::size_t> shape, double value) {
  auto t = std::make_shared<Tensor>(std::move(shape));
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorPtr Tensor::scalar(double value) { return full({1}, value); }

TensorPtr Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return from({n}, std::move(values));
}

TensorPtr Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  auto t = std::make_shared<Tensor>(std::move(shape));
  if (values.size() != t->data.size()) {
    throw DimensionError("Tensor::from: value count does not match shape");
  }
  t->data = std::move(values);
  return t;
}

std::size_t Tensor::rows() const { return shape.size() == 2 ? shape[0] : 1; }
std::size_t Tensor::cols() const { return shape.back(); }

void Tensor::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.clear(); }

double& Tensor::at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item(): tensor is not scalar");
  return data[0];
}

void Graph::record(TensorPtr out, std::function<void()> backward_fn) {
  nodes_.push_back(Node{std::move(out), std::move(backward_fn)});
}

void Graph::backward(const TensorPtr& loss) {
  if (!loss || !loss->is_scalar()) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->has_grad()) it->back();
  }
}

namespace ops {

namespace {

TensorPtr make_out(std::vector<std::size_t> shape) {
  return std::make_shared<Tensor>(std::move(shape));
}

// Accumulate grad from `out` into `in` under the elementwise broadcast rules.
void accumulate_elementwise(Tensor& in, const Tensor& out,
                            const std::function<double(std::size_t)>& contrib) {
  in.ensure_grad();
  if (in.data.size() == out.data.size()) {
    for (std::size_t i = 0; i < in.data.size(); ++i) in.grad[i] += contrib(i);
  } else {
    // in is one broadcast row; reduce over the batch
    const std::size_t n = in.data.size();
    for (std::size_t i = 0; i < out.data.size(); ++i) in.grad[i % n] += contrib(i);
  }
}

}  // namespace

TensorPtr matmul(Graph* g, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0]) {
    throw DimensionError("matmul: requires (m,k)x(k,n)");
  }
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = make_out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out->data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a->data[i * k + p];
      const double* brow = b->data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  check_finite(*out, "matmul");
  if (g) {
    g->record(out, [a, b, out, m, k, n] {
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double go = out->grad[i * n + j];
          if (go == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            a->grad[i * k + p] += go * b->data[p * n + j];
            b->grad[p * n + j] += go * a->data[i * k + p];
          }
        }
      }
    });
  }
  return out;
}

namespace {

double activation_apply(Activation act, double v) {
  switch (act) {
    case Activation::none: return v;
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::leaky_relu: return v > 0.0 ? v : 0.01 * v;
    case Activation::tanh: return std::tanh(v);
    case Activation::sigmoid: {
      if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    }
  }
  return v;
}

// derivative from the activation output alone (all supported activations
// admit this)
double activation_deriv(Activation act, double y) {
  switch (act) {
    case Activation::none: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return y > 0.0 ? 1.0 : 0.01;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

}  // namespace

TensorPtr dense(Graph* g, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                Activation act) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0]) {
    throw DimensionError("dense: requires (m,k)x(k,n)");
  }
  if (b->size() != w->shape[1]) throw DimensionError("dense: bias width mismatch");
  const std::size_t m = x->shape[0], k = x->shape[1], n = w->shape[1];
  auto out = make_out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out->data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) orow[j] = b->data[j];
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x->data[i * k + p];
      const double* wrow = w->data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * wrow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] = activation_apply(act, orow[j]);
  }
  check_finite(*out, "dense");
  if (g) {
    g->record(out, [x, w, b, out, act, m, k, n] {
      x->ensure_grad();
      w->ensure_grad();
      b->ensure_grad();
      std::vector<double> g_pre(n);
      for (std::size_t i = 0; i < m; ++i) {
        const double* orow = out->data.data() + i * n;
        const double* grow = out->grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          g_pre[j] = grow[j] * activation_deriv(act, orow[j]);
          b->grad[j] += g_pre[j];
        }
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x->data[i * k + p];
          const double* wrow = w->data.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            acc += g_pre[j] * wrow[j];
            w->grad[p * n + j] += xv * g_pre[j];
          }
          x->grad[i * k + p] += acc;
        }
      }
    });
  }
  return out;
}

TensorPtr add(Graph* g, const TensorPtr& a, const TensorPtr& b) {
  check_elementwise(*a, *b, "add");
  auto out = make_out(a->shape);
  const std::size_t nb = b->data.size();
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = a->data[i] + b->data[i % nb];
  }
  check_finite(*out, "add");
  if (g) {
    g->record(out, [a, b, out] {
      accumulate_elementwise(*a, *out, [&](std::size_t i) { return out->grad[i]; });
      accumulate_elementwise(*b, *out, [&](std::size_t i) { return out->grad[i]; });
    });
  }
  return out;
}

TensorPtr sub(Graph* g, const TensorPtr& a, const TensorPtr& b) {
  check_elementwise(*a, *b, "sub");
  auto out = make_out(a->shape);
  const std::size_t nb = b->data.size();
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = a->data[i] - b->data[i % nb];
  }
  check_finite(*out, "sub");
  if (g) {
    g->record(out, [a, b, out] {
      accumulate_elementwise(*a, *out, [&](std::size_t i) { return out->grad[i]; });
      accumulate_elementwise(*b, *out, [&](std::size_t i) { return -out->grad[i]; });
    });
  }
  return out;
}

TensorPtr mul(Graph* g, const TensorPtr& a, const TensorPtr& b) {
  check_elementwise(*a, *b, "mul");
  auto out = make_out(a->shape);
  const std::size_t nb = b->data.size();
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = a->data[i] * b->data[i % nb];
  }
  check_finite(*out, "mul");
  if (g) {
    g->record(out, [a, b, out] {
      const std::size_t nb2 = b->data.size();
      accumulate_elementwise(*a, *out,
                             [&](std::size_t i) { return out->grad[i] * b->data[i % nb2]; });
      accumulate_elementwise(*b, *out,
                             [&](std::size_t i) { return out->grad[i] * a->data[i]; });
    });
  }
  return out;
}

TensorPtr scale(Graph* g, const TensorPtr& a, double c) {
  auto out = make_out(a->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * c;
  check_finite(*out, "scale");
  if (g) {
    g->record(out, [a, out, c] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->data.size(); ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

namespace {

// f and dfdx are stateless functors; dfdx receives (x, y).
template <typename F, typename DF>
TensorPtr unary(Graph* g, const TensorPtr& a, const char* name, F f, DF dfdx) {
  auto out = make_out(a->shape);
  for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = f(a->data[i]);
  check_finite(*out, name);
  if (g) {
    g->record(out, [a, out, dfdx] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->data.size(); ++i) {
        a->grad[i] += out->grad[i] * dfdx(a->data[i], out->data[i]);
      }
    });
  }
  return out;
}

}  // namespace

TensorPtr relu(Graph* g, const TensorPtr& a) {
  return unary(
      g, a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

TensorPtr leaky_relu(Graph* g, const TensorPtr& a, double slope) {
  return unary(
      g, a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

TensorPtr sigmoid(Graph* g, const TensorPtr& a) {
  auto f = [](double x) {
    // evaluate on the side that cannot overflow
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return unary(g, a, "sigmoid", f, [](double, double y) { return y * (1.0 - y); });
}

TensorPtr tanh(Graph* g, const TensorPtr& a) {
  return unary(
      g, a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

TensorPtr log(Graph* g, const TensorPtr& a) {
  return unary(
      g, a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

TensorPtr square(Graph* g, const TensorPtr& a) {
  return unary(
      g, a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

TensorPtr softmax_t(Graph* g, const TensorPtr& a, double t) {
  if (!(t > 0.0)) throw ContractError("softmax_t: temperature must be > 0");
  const std::size_t rows = a->rows(), n = a->cols();
  auto out = make_out(a->shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a->data.data() + r * n;
    double* y = out->data.data() + r * n;
    double mx = x[0] / t;
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j] / t);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] / t - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  check_finite(*out, "softmax_t");
  if (g) {
    g->record(out, [a, out, t, rows, n] {
      a->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = out->data.data() + r * n;
        const double* go = out->grad.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += go[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) {
          a->grad[r * n + j] += y[j] * (go[j] - dot) / t;
        }
      }
    });
  }
  return out;
}

TensorPtr sum(Graph* g, const TensorPtr& a) {
  auto out = Tensor::scalar(std::accumulate(a->data.begin(), a->data.end(), 0.0));
  check_finite(*out, "sum");
  if (g) {
    g->record(out, [a, out] {
      a->ensure_grad();
      const double go = out->grad[0];
      for (double& gv : a->grad) gv += go;
    });
  }
  return out;
}

TensorPtr mean(Graph* g, const TensorPtr& a) {
  const double n = static_cast<double>(a->data.size());
  auto out = Tensor::scalar(std::accumulate(a->data.begin(), a->data.end(), 0.0) / n);
  check_finite(*out, "mean");
  if (g) {
    g->record(out, [a, out, n] {
      a->ensure_grad();
      const double go = out->grad[0] / n;
      for (double& gv : a->grad) gv += go;
    });
  }
  return out;
}

TensorPtr concat_cols(Graph* g, const TensorPtr& a, const TensorPtr& b) {
  if (a->rows() != b->rows()) throw DimensionError("concat_cols: row counts differ");
  const std::size_t rows = a->rows(), na = a->cols(), nb = b->cols();
  const bool rank2 = a->shape.size() == 2 || b->shape.size() == 2;
  auto out = rank2 ? make_out({rows, na + nb}) : make_out({na + nb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < na; ++j) out->data[r * (na + nb) + j] = a->data[r * na + j];
    for (std::size_t j = 0; j < nb; ++j) out->data[r * (na + nb) + na + j] = b->data[r * nb + j];
  }
  if (g) {
    g->record(out, [a, b, out, rows, na, nb] {
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < na; ++j) a->grad[r * na + j] += out->grad[r * (na + nb) + j];
        for (std::size_t j = 0; j < nb; ++j)
          b->grad[r * nb + j] += out->grad[r * (na + nb) + na + j];
      }
    });
  }
  return out;
}

TensorPtr slice_cols(Graph* g, const TensorPtr& a, std::size_t first, std::size_t count) {
  const std::size_t rows = a->rows(), n = a->cols();
  if (count == 0 || first + count > n) throw DimensionError("slice_cols: range out of bounds");
  auto out = a->shape.size() == 2 ? make_out({rows, count}) : make_out({count});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < count; ++j) out->data[r * count + j] = a->data[r * n + first + j];
  }
  if (g) {
    g->record(out, [a, out, rows, n, first, count] {
      a->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < count; ++j) {
          a->grad[r * n + first + j] += out->grad[r * count + j];
        }
      }
    });
  }
  return out;
}

}  // namespace ops

AdamState::AdamState(AdamConfig cfg, std::vector<TensorPtr> params)
    : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->data.size(), 0.0);
    v_.emplace_back(p->data.size(), 0.0);
  }
}

void AdamState::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = *params_[pi];
    if (!p.has_grad()) throw ContractError("adam step: parameter has no gradient");
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gv = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gv;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gv * gv;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
}

void zero_grads(std::span<const TensorPtr> params) {
  for (const auto& p : params) p->zero_grad();
}

double Rng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] keeps the log finite
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index: empty range");
  return static_cast<std::size_t>(eng_() % n);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TensorPtr seeded_normal_init(std::vector<std::size_t> shape, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw ContractError("seeded_normal_init: scale must be > 0");
  auto t = Tensor::zeros(std::move(shape));
  Rng rng(seed);
  for (double& v : t->data) v = scale * rng.normal();
  return t;
}

std::uint64_t hash_tensor(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t d : t.shape) {
    mix(reinterpret_cast<const unsigned char*>(&d), sizeof(d));
  }
  mix(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(double));
  return h;
}

std::uint64_t hash_params(std::span<const TensorPtr> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const std::uint64_t hp = hash_tensor(*p);
    const auto* b = reinterpret_cast<const unsigned char*>(&hp);
    for (std::size_t i = 0; i < sizeof(hp); ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace gmce
