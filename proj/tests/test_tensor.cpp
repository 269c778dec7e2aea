#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmce/tensor.hpp"
#include "gradcheck.hpp"

using namespace gmce;
using gmce::testing::max_grad_error;
using gmce::testing::random_tensor;

TEST_CASE("forward op definitions") {
  auto x = Tensor::row({-1.0, 0.0, 2.0});
  auto r = ops::relu(nullptr, x);
  CHECK(r->data == std::vector<double>{0.0, 0.0, 2.0});

  CHECK(ops::sigmoid(nullptr, Tensor::scalar(0.0))->item() == doctest::Approx(0.5));

  auto sm = ops::softmax_t(nullptr, Tensor::row({1.0, 1.0}), 0.5);
  CHECK(sm->data[0] == doctest::Approx(0.5));
  CHECK(sm->data[1] == doctest::Approx(0.5));

  auto mm = ops::matmul(nullptr, Tensor::from({2, 2}, {1, 2, 3, 4}),
                        Tensor::from({2, 2}, {5, 6, 7, 8}));
  CHECK(mm->data == std::vector<double>{19, 22, 43, 50});

  auto broad = ops::add(nullptr, Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}),
                        Tensor::row({10, 20, 30}));
  CHECK(broad->data == std::vector<double>{11, 22, 33, 14, 25, 36});

  CHECK(ops::mean(nullptr, Tensor::from({2, 2}, {1, 2, 3, 4}))->item() == doctest::Approx(2.5));
}

TEST_CASE("shape and numeric errors") {
  CHECK_THROWS_AS(ops::matmul(nullptr, Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  DimensionError);
  CHECK_THROWS_AS(ops::add(nullptr, Tensor::zeros({2, 3}), Tensor::zeros({2, 2})),
                  DimensionError);
  CHECK_THROWS_AS(ops::slice_cols(nullptr, Tensor::zeros({2, 3}), 2, 2), DimensionError);
  CHECK_THROWS_AS(ops::log(nullptr, Tensor::row({-1.0})), NumericError);
  CHECK_THROWS_AS(ops::softmax_t(nullptr, Tensor::row({1.0}), 0.0), ContractError);

  Graph g;
  CHECK_THROWS_AS(g.backward(Tensor::zeros({2})), ContractError);
}

TEST_CASE("backward basics") {
  Graph g;
  auto x = Tensor::scalar(0.0);
  auto y = ops::sigmoid(&g, x);
  g.backward(y);
  CHECK(x->grad[0] == doctest::Approx(0.25));

  Graph g2;
  auto v = Tensor::row({1.0, 2.0});
  auto loss = ops::sum(&g2, ops::square(&g2, v));
  g2.backward(loss);
  CHECK(v->grad[0] == doctest::Approx(2.0));
  CHECK(v->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("fan-out sums contributions") {
  // two paths: loss = x*x + 3x  ->  dloss/dx = 2x + 3
  Graph g;
  auto x = Tensor::scalar(5.0);
  auto loss = ops::add(&g, ops::mul(&g, x, x), ops::scale(&g, x, 3.0));
  g.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(13.0));
}

TEST_CASE("gradients match central finite differences per op") {
  Rng rng(901);
  for (int rep = 0; rep < 5; ++rep) {
    {
      auto a = random_tensor({4, 3}, rng);
      auto b = random_tensor({3, 2}, rng);
      CHECK(max_grad_error({a, b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::matmul(g, a, b)));
            }) < 1e-4);
    }
    {
      auto a = random_tensor({4, 3}, rng);
      auto b = random_tensor({4, 3}, rng);
      auto brow = random_tensor({3}, rng);
      CHECK(max_grad_error({a, b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::add(g, a, b)));
            }) < 1e-4);
      CHECK(max_grad_error({a, b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::sub(g, a, b)));
            }) < 1e-4);
      CHECK(max_grad_error({a, b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::mul(g, a, b)));
            }) < 1e-4);
      CHECK(max_grad_error({a, brow}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::add(g, a, brow)));
            }) < 1e-4);
      CHECK(max_grad_error({a}, [&](Graph* g) {
              return ops::mean(g, ops::scale(g, ops::square(g, a), -1.7));
            }) < 1e-4);
    }
    {
      auto x = random_tensor({4, 3}, rng, /*avoid_kink=*/true);
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::relu(g, x)));
            }) < 1e-4);
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::leaky_relu(g, x)));
            }) < 1e-4);
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::sigmoid(g, x)));
            }) < 1e-4);
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::tanh(g, x)));
            }) < 1e-4);
    }
    {
      // log needs strictly positive inputs
      auto x = random_tensor({4, 3}, rng);
      for (double& v : x->data) v = std::fabs(v) + 0.5;
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::log(g, x)));
            }) < 1e-4);
    }
    {
      auto x = random_tensor({4, 3}, rng);
      auto w = random_tensor({4, 3}, rng);
      CHECK(max_grad_error({x}, [&](Graph* g) {
              return ops::sum(g, ops::mul(g, ops::softmax_t(g, x, 0.7), w));
            }) < 1e-4);
    }
    {
      auto a = random_tensor({4, 2}, rng);
      auto b = random_tensor({4, 3}, rng);
      CHECK(max_grad_error({a, b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::concat_cols(g, a, b)));
            }) < 1e-4);
      CHECK(max_grad_error({b}, [&](Graph* g) {
              return ops::sum(g, ops::square(g, ops::slice_cols(g, b, 1, 2)));
            }) < 1e-4);
    }
    {
      auto x = random_tensor({4, 3}, rng, /*avoid_kink=*/true);
      auto w = random_tensor({3, 2}, rng);
      auto b = random_tensor({2}, rng);
      for (auto act : {Activation::none, Activation::relu, Activation::leaky_relu,
                       Activation::tanh, Activation::sigmoid}) {
        CHECK(max_grad_error({x, w, b}, [&](Graph* g) {
                return ops::sum(g, ops::square(g, ops::dense(g, x, w, b, act)));
              }) < 1e-4);
      }
    }
  }
}

TEST_CASE("adam first step and fixed points") {
  auto p = Tensor::scalar(1.0);
  AdamState opt(AdamConfig{.lr = 1e-3}, {p});

  p->ensure_grad();
  p->grad[0] = 4.0;
  opt.step();
  // first step moves by ~lr against the gradient sign
  CHECK(p->data[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK_FALSE(p->has_grad());  // grads zeroed afterward

  // zero gradient on a fresh state: parameter unchanged
  auto p0 = Tensor::scalar(0.75);
  AdamState fresh(AdamConfig{}, {p0});
  p0->ensure_grad();
  fresh.step();
  CHECK(p0->data[0] == doctest::Approx(0.75));

  // identical gradients keep moving the parameter against the sign
  auto q = Tensor::scalar(0.0);
  AdamState opt2(AdamConfig{.lr = 1e-2}, {q});
  double prev = q->data[0];
  for (int i = 0; i < 2; ++i) {
    q->ensure_grad();
    q->grad[0] = -2.5;
    opt2.step();
    CHECK(q->data[0] > prev);
    prev = q->data[0];
  }

  auto r = Tensor::scalar(0.0);
  AdamState opt3(AdamConfig{}, {r});
  CHECK_THROWS_AS(opt3.step(), ContractError);  // missing grad
}

TEST_CASE("seeded init determinism and distribution") {
  auto a = seeded_normal_init({3, 5}, 42, 1.0);
  auto b = seeded_normal_init({3, 5}, 42, 1.0);
  CHECK(a->data == b->data);

  auto c = seeded_normal_init({3, 5}, 43, 1.0);
  CHECK(a->data != c->data);

  auto big = seeded_normal_init({100000}, 7, 1.0);
  double mean = 0.0;
  for (double v : big->data) mean += v;
  mean /= static_cast<double>(big->data.size());
  CHECK(std::fabs(mean) < 0.02);

  CHECK_THROWS_AS(seeded_normal_init({2}, 1, 0.0), ContractError);
}

TEST_CASE("tensor hash is content sensitive") {
  auto a = Tensor::row({1.0, 2.0});
  auto b = Tensor::row({1.0, 2.0});
  CHECK(hash_tensor(*a) == hash_tensor(*b));
  b->data[1] = 2.0000001;
  CHECK(hash_tensor(*a) != hash_tensor(*b));
}
