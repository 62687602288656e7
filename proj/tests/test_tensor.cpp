#include <stdexcept>

#include "doctest.h"
#include "dmrl/ops.hpp"
#include "dmrl/tensor.hpp"

using namespace dmrl;

TEST_CASE("tensor shape and data agree") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.dim(0) == 2);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0}, {}), std::invalid_argument);
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Tensor x({2, 2}, {1, -2, 3, 4}, /*requires_grad=*/true);
  Tape tape;
  Tensor root = sum_all(x);
  tape.backward(root);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward of mean(x*x) gives 2x/n") {
  // Analytic oracle: d/dx_i mean(x^2) = 2 x_i / n; x = [1, 2] -> [1, 2].
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  Tensor root = mean_all(mul(x, x));
  tape.backward(root);
  CHECK(x.grad()[0] == doctest::Approx(1.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor x({2, 2}, {1, 2, 3, 4}, true);
  Tape tape;
  Tensor y = mul_scalar(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("backward rejects roots from another tape") {
  Tensor x({1}, {3.0}, true);
  Tensor y;
  {
    Tape tape;
    y = mul_scalar(x, 2.0);
  }
  Tape other;
  CHECK_THROWS_AS(other.backward(y), std::invalid_argument);
}

TEST_CASE("calling backward twice doubles leaf gradients") {
  Tensor x({3}, {1, 2, 3}, true);
  Tape tape;
  Tensor root = sum_all(x);
  tape.backward(root);
  tape.backward(root);
  for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("gradient accumulation is linear over roots") {
  // backward(a) then backward(b) accumulates the same totals as
  // backward on a + b.
  Tensor x({2}, {0.5, -1.5}, true);
  std::vector<double> separate, combined;
  {
    Tape tape;
    Tensor a = sum_all(mul(x, x));
    Tensor b = mean_all(x);
    tape.backward(a);
    tape.backward(b);
    separate = x.grad();
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor a = sum_all(mul(x, x));
    Tensor b = mean_all(x);
    tape.backward(add(a, b));
    combined = x.grad();
  }
  REQUIRE(separate.size() == combined.size());
  for (size_t i = 0; i < separate.size(); ++i) CHECK(separate[i] == doctest::Approx(combined[i]).epsilon(1e-12));
}

TEST_CASE("tensors outliving their tape degrade to constants") {
  Tensor x({2}, {1, 2}, true);
  Tensor y;
  {
    Tape tape;
    y = mul_scalar(x, 3.0);
    CHECK(grad_path(y));
  }
  CHECK_FALSE(grad_path(y));
  // On a new tape, y acts as plain data: gradients reach x only through the
  // live factor, and a y-only expression cannot serve as a backward root.
  Tape tape;
  Tensor root = sum_all(mul(y, x));
  tape.backward(root);
  CHECK(x.grad()[0] == doctest::Approx(3.0));
  CHECK(x.grad()[1] == doctest::Approx(6.0));
  Tensor dead = sum_all(mul(y, y));
  CHECK_THROWS_AS(tape.backward(dead), std::invalid_argument);
}

TEST_CASE("detach cuts the gradient path") {
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  Tensor y = mul_scalar(x, 2.0);
  Tensor z = sum_all(mul(y.detach(), y));
  tape.backward(z);
  // d/dx of sum(c * 2x) with c = detach(2x): each coordinate 2 * c_i = 4x_i.
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("no-grad scope suspends recording") {
  Tensor x({2}, {1, 2}, true);
  Tape tape;
  Tensor y;
  {
    NoGradGuard ng;
    y = mul_scalar(x, 2.0);
  }
  CHECK_FALSE(grad_path(y));
  Tensor root = sum_all(mul(y, x));
  tape.backward(root);
  CHECK(x.grad()[0] == doctest::Approx(2.0));  // only through the second factor
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("zeroing between backward passes resets accumulation") {
  Tensor x({2}, {1, 1}, true);
  Tape tape;
  Tensor root = sum_all(x);
  tape.backward(root);
  x.zero_grad();
  tape.backward(root);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}
