// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>

#include "autodiff/grad_check.hpp"
#include "autodiff/ops.hpp"
#include "common/rng.hpp"

using namespace ockm;
using namespace ockm::ad;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  Tensor t(r, c);
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Checks op(inputs) against central differences through a random linear
// read-out so every output entry contributes.
double check_op(std::vector<Tensor> inputs, const std::function<Var(Tape&, std::vector<Var>&)>& op,
                std::uint64_t seed = 11) {
  std::vector<Tensor> grads(inputs.size());
  Tensor readout;
  LossFn fn = [&](bool with_grad) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& in : inputs) vars.push_back(tape.leaf(in));
    Var out = op(tape, vars);
    if (readout.empty()) {
      Rng rng(seed);
      readout = random_tensor(rng, out.rows(), out.cols(), -1.0, 1.0);
    }
    Var loss = sum(mul(out, tape.constant(readout)));
    if (with_grad) {
      tape.backward(loss);
      for (std::size_t i = 0; i < vars.size(); ++i) grads[i] = tape.grad(vars[i].id);
    }
    return loss.item();
  };
  std::vector<GradParam> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.push_back({"in" + std::to_string(i), &inputs[i], &grads[i]});
  return grad_check(fn, params).max_rel_error;
}

}  // namespace

TEST_CASE("derivative of x*x at 3 is 6") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  tape.backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("complex abs2 of (3,4) is 25 with gradient (6,8)") {
  Tape tape;
  Var re = tape.leaf(Tensor::scalar(3.0));
  Var im = tape.leaf(Tensor::scalar(4.0));
  Var a = cabs2({re, im});
  CHECK(a.item() == 25.0);
  tape.backward(a);
  CHECK(re.grad()[0] == 6.0);
  CHECK(im.grad()[0] == 8.0);
}

TEST_CASE("softmax backward rows sum to zero") {
  Rng rng(3);
  Tape tape;
  Var x = tape.leaf(random_tensor(rng, 4, 6, -2, 2));
  Var y = softmax_rows(x);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += y.value()(i, j);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  tape.backward(sum(mul(y, tape.constant(random_tensor(rng, 4, 6, -1, 1)))));
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += x.grad()(i, j);
    CHECK(std::fabs(s) < 1e-14);
  }
}

TEST_CASE("constant loss gives zero gradients and linear loss gives the input") {
  Tape tape;
  Var w = tape.leaf(Tensor::from(1, 3, {0.5, -1.0, 2.0}));
  Var x = tape.constant(Tensor::from(3, 1, {1.0, 2.0, 3.0}));
  Var c = tape.constant(4.0);
  Var loss = add(matmul(w, x), scale(sum(w), 0.0));
  loss = add(loss, c);
  tape.backward(loss);
  CHECK(w.grad()[0] == 1.0);
  CHECK(w.grad()[1] == 2.0);
  CHECK(w.grad()[2] == 3.0);

  Tape t2;
  Var v = t2.leaf(Tensor::from(2, 1, {1.0, 2.0}));
  Var k = add(scale(v, 0.0), t2.constant(Tensor::from(2, 1, {5.0, 6.0})));
  t2.backward(sum(k));
  CHECK(v.grad()[0] == 0.0);
  CHECK(v.grad()[1] == 0.0);
}

TEST_CASE("backward rejects a second call and a non-scalar root") {
  Tape tape;
  Var x = tape.leaf(Tensor::from(2, 1, {1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(x), DimensionError);
  Var s = sum(x);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), ConfigError);
  tape.reset();
  CHECK(tape.size() == 0);
}

TEST_CASE("shape mismatch raises a dimension error") {
  Tape tape;
  Var a = tape.leaf(Tensor(2, 3));
  Var b = tape.leaf(Tensor(4, 3));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("grad_check on a quadratic is exact to 1e-9") {
  Tensor x = Tensor::from(3, 1, {0.3, -1.2, 2.5});
  Tensor g(3, 1);
  LossFn fn = [&](bool with_grad) {
    Tape tape;
    Var v = tape.leaf(x);
    Var loss = sum(mul(square(v), tape.constant(Tensor::from(3, 1, {1.0, 2.0, 3.0}))));
    if (with_grad) {
      tape.backward(loss);
      g = v.grad();
    }
    return loss.item();
  };
  auto rep = grad_check(fn, {{"x", &x, &g}});
  CHECK(rep.max_rel_error < 1e-9);
  CHECK(rep.finite);
}

TEST_CASE("grad_check detects a corrupted adjoint") {
  Tensor x = Tensor::from(2, 1, {0.7, -0.4});
  Tensor g(2, 1);
  LossFn fn = [&](bool with_grad) {
    Tape tape;
    Var v = tape.leaf(x);
    // sin with a deliberately wrong adjoint (uses sin instead of cos)
    Tensor out(2, 1);
    for (std::size_t i = 0; i < 2; ++i) out[i] = std::sin(x[i]);
    Var y = tape.record(std::move(out), {v}, [v](Tape& t, int self) {
      for (std::size_t i = 0; i < 2; ++i) t.grad(v.id)[i] += t.grad(self)[i] * std::sin(t.value(v.id)[i]);
    });
    Var loss = sum(y);
    if (with_grad) {
      tape.backward(loss);
      g = v.grad();
    }
    return loss.item();
  };
  auto rep = grad_check(fn, {{"x", &x, &g}});
  CHECK(rep.max_rel_error > 1e-2);
}

TEST_CASE("every adjoint rule passes grad_check below 1e-7") {
  Rng rng(5);
  auto R = [&](std::size_t r, std::size_t c, double lo = -1.5, double hi = 1.5) {
    return random_tensor(rng, r, c, lo, hi);
  };
  using Fn = std::function<Var(Tape&, std::vector<Var>&)>;

  SUBCASE("binary broadcasting") {
    CHECK(check_op({R(3, 4), R(3, 4)}, Fn([](Tape&, auto& v) { return add(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4), R(1, 4)}, Fn([](Tape&, auto& v) { return sub(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4), R(3, 1)}, Fn([](Tape&, auto& v) { return mul(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4), R(1, 1, 0.5, 2.0)}, Fn([](Tape&, auto& v) { return div(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4), R(3, 4)}, Fn([](Tape&, auto& v) { return maximum(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return mul(v[0], v[0]); })) < 1e-7);
  }
  SUBCASE("unary") {
    CHECK(check_op({R(3, 3)}, Fn([](Tape&, auto& v) { return exp(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3, 0.2, 3.0)}, Fn([](Tape&, auto& v) { return log(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3, 0.2, 3.0)}, Fn([](Tape&, auto& v) { return sqrt(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3)}, Fn([](Tape&, auto& v) { return sin(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3)}, Fn([](Tape&, auto& v) { return cos(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3)}, Fn([](Tape&, auto& v) { return tanh(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3, -4, 4)}, Fn([](Tape&, auto& v) { return sigmoid(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3, -4, 4)}, Fn([](Tape&, auto& v) { return softplus(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 3, 0.1, 2.0)}, Fn([](Tape&, auto& v) { return abs(neg(v[0])); })) < 1e-7);
    CHECK(check_op({R(3, 3, 0.1, 2.0)}, Fn([](Tape&, auto& v) { return relu(v[0]); })) < 1e-7);
    CHECK(check_op({Tensor::from(1, 4, {0.3, -0.6, 2.5, -3.0})},
                   Fn([](Tape&, auto& v) { return huber(v[0], 1.0); })) < 1e-7);
    CHECK(check_op({Tensor::from(1, 4, {0.3, -0.6, 2.5, -3.0})},
                   Fn([](Tape&, auto& v) { return clamp(v[0], -1.0, 1.0); })) < 1e-7);
    CHECK(check_op({R(2, 3)}, Fn([](Tape&, auto& v) { return rsub(2.0, scale(add(v[0], 0.5), 3.0)); })) < 1e-7);
  }
  SUBCASE("reductions") {
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return sum(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return mean(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return max(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return sum_rows(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return sum_cols(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return norm_rows(v[0]); })) < 1e-7);
  }
  SUBCASE("linear algebra and structure") {
    CHECK(check_op({R(3, 4), R(4, 2)}, Fn([](Tape&, auto& v) { return matmul(v[0], v[1]); })) < 1e-7);
    CHECK(check_op({R(3, 4)}, Fn([](Tape&, auto& v) { return transpose(v[0]); })) < 1e-7);
    CHECK(check_op({R(5, 3)}, Fn([](Tape&, auto& v) { return slice_rows(v[0], 1, 4); })) < 1e-7);
    CHECK(check_op({R(3, 5)}, Fn([](Tape&, auto& v) { return slice_cols(v[0], 2, 5); })) < 1e-7);
    CHECK(check_op({R(2, 3), R(1, 3)}, Fn([](Tape&, auto& v) { return concat_rows({v[0], v[1]}); })) < 1e-7);
    CHECK(check_op({R(2, 3), R(2, 1)}, Fn([](Tape&, auto& v) { return concat_cols({v[0], v[1]}); })) < 1e-7);
    static const std::vector<int> idx = {2, -1, 0, 2};
    CHECK(check_op({R(3, 2)}, Fn([](Tape&, auto& v) { return gather_rows(v[0], idx); })) < 1e-7);
  }
  SUBCASE("attention building blocks") {
    CHECK(check_op({R(3, 5)}, Fn([](Tape&, auto& v) { return softmax_rows(v[0]); })) < 1e-7);
    CHECK(check_op({R(3, 6)}, Fn([](Tape&, auto& v) { return layer_norm_rows(v[0]); })) < 1e-7);
    static const std::vector<int> idx = {0, 1, -1, 2, 3, 1};
    CHECK(check_op({R(2, 4), R(4, 4)}, Fn([](Tape&, auto& v) { return grouped_scores(v[0], v[1], idx, 3); })) <
          1e-7);
    CHECK(check_op({R(2, 3), R(4, 5)}, Fn([](Tape&, auto& v) { return grouped_mix(v[0], v[1], idx, 3); })) < 1e-7);
  }
  SUBCASE("complex") {
    CHECK(check_op({R(3, 1), R(3, 1), R(1, 1), R(1, 1)}, Fn([](Tape&, auto& v) {
            CVar z = cmul({v[0], v[1]}, {v[2], v[3]});
            return concat_cols({z.re, z.im});
          })) < 1e-7);
    CHECK(check_op({R(3, 1), R(3, 1)}, Fn([](Tape&, auto& v) { return cabs2({v[0], v[1]}); })) < 1e-7);
    static const Tensor ar = [] {
      Rng r(9);
      return random_tensor(r, 4, 3, -1, 1);
    }();
    static const Tensor ai = [] {
      Rng r(10);
      return random_tensor(r, 4, 3, -1, 1);
    }();
    CHECK(check_op({R(3, 1), R(3, 1)}, Fn([](Tape&, auto& v) {
            CVar y = cmatvec(ar, ai, {v[0], v[1]});
            return concat_cols({y.re, y.im});
          })) < 1e-7);
  }
}
