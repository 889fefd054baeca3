#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ctxtag/error.hpp"
#include "ctxtag/grad_check.hpp"
#include "ctxtag/ops.hpp"
#include "ctxtag/rng.hpp"

using namespace ctxtag;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Weighted sum with fixed random coefficients, so every output element
// contributes a distinct amount to the checked scalar.
Tensor probe(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(t.numel());
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return sum(mul(t, Tensor(t.shape(), std::move(w))));
}

}  // namespace

TEST(Elementwise, Examples) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::vector({0.0})).at(0), 0.5);
  EXPECT_DOUBLE_EQ(tanh(Tensor::vector({0.0})).at(0), 0.0);
  EXPECT_EQ(values(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4}))), (std::vector<double>{3, 8}));
  EXPECT_EQ(values(one_minus(Tensor::vector({0.25, 1.0}))), (std::vector<double>{0.75, 0.0}));
}

TEST(Elementwise, BroadcastTrailing) {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::vector({10, 20, 30});
  EXPECT_EQ(values(add(m, b)), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  const Tensor col = Tensor::matrix(2, 1, {100, 200});
  EXPECT_EQ(values(add(m, col)), (std::vector<double>{101, 102, 103, 204, 205, 206}));
  EXPECT_EQ(values(mul(m, Tensor::scalar(2.0))), (std::vector<double>{2, 4, 6, 8, 10, 12}));
}

TEST(Elementwise, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2x3)"), std::string::npos);
    EXPECT_NE(msg.find("(2)"), std::string::npos);
  }
}

TEST(Elementwise, BroadcastAddCommutes) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.index(5), c = 1 + rng.index(5);
    const Tensor a = random_tensor({r, c}, rng);
    const Tensor b = random_tensor({c}, rng);
    EXPECT_EQ(values(add(a, b)), values(add(b, a)));
  }
}

TEST(Matmul, Examples) {
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(eye, a)), values(a));
  const Tensor ones = Tensor::matrix(2, 1, {1, 1});
  const Tensor c = matmul(a, ones);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(values(c), (std::vector<double>{3, 7}));
  EXPECT_THROW(matmul(a, Tensor::zeros({3, 1})), ShapeError);
}

TEST(Matmul, GradOfSumIsOnesTimesBTransposed) {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  auto f = [&] { return sum(matmul(a, b)); };
  f().backward();
  // d sum(AB) / dA[i][p] = sum_j B[p][j]
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t p = 0; p < 4; ++p) {
      EXPECT_NEAR(a.grad()[i * 4 + p], b.at(p, 0) + b.at(p, 1), 1e-12);
    }
  }
  const auto numeric = numeric_gradient(f, a, 1e-6);
  EXPECT_LT(max_relative_error(a.grad(), numeric), 1e-6);
}

TEST(Softmax, Examples) {
  EXPECT_EQ(values(softmax(Tensor::vector({0, 0}), 0)), (std::vector<double>{0.5, 0.5}));
  const Tensor p = softmax(Tensor::vector({std::log(1.0), std::log(3.0)}), 0);
  EXPECT_NEAR(p.at(0), 0.25, 1e-15);
  EXPECT_NEAR(p.at(1), 0.75, 1e-15);
  const Tensor x = Tensor::vector({0.3, -1.2, 2.0});
  const Tensor shifted = add(x, Tensor::scalar(5.5));
  const auto a = values(softmax(x, 0));
  const auto b = values(softmax(shifted, 0));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Softmax, MaskedPositionsAreExactlyZero) {
  const Mask mask{true, false, true, false};
  const Tensor p = softmax(Tensor::vector({1.0, 50.0, -2.0, 3.0}), 0, &mask);
  EXPECT_EQ(p.at(1), 0.0);
  EXPECT_EQ(p.at(3), 0.0);
  EXPECT_NEAR(p.at(0) + p.at(2), 1.0, 1e-15);
  const Mask none{false, false};
  EXPECT_THROW(softmax(Tensor::vector({1.0, 2.0}), 0, &none), ShapeError);
}

TEST(Softmax, SumsToOneOverRandomInputs) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(30);
    Mask mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.bernoulli(0.6);
    mask[rng.index(n)] = true;
    const Tensor p = softmax(random_tensor({n}, rng, -10, 10), 0, &mask);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(p.at(i), 0.0);
      ASSERT_LE(p.at(i), 1.0);
      if (!mask[i]) {
        ASSERT_EQ(p.at(i), 0.0);
      }
      total += p.at(i);
    }
    ASSERT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Softmax, AlongInnerAxisOfMatrix) {
  const Tensor x = Tensor::matrix(2, 2, {0, 0, 0, std::log(3.0)});
  const Tensor rows = softmax(x, 1);
  EXPECT_NEAR(rows.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(rows.at(1, 1), 0.75, 1e-15);
  const Tensor cols = softmax(x, 0);
  EXPECT_NEAR(cols.at(0, 1), 0.25, 1e-15);
}

TEST(ConcatGather, Examples) {
  const Tensor t = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(gather_rows(t, 1)), (std::vector<double>{3, 4}));
  EXPECT_EQ(values(concat({Tensor::vector({1, 2}), Tensor::vector({3})}, 0)), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(gather_rows(t, 3), ShapeError);
  EXPECT_THROW(concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}, 0), ShapeError);
  const Tensor wide = concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}, 1);
  EXPECT_EQ(wide.shape(), (Shape{2, 5}));
}

TEST(ConcatGather, GatherGradientTouchesOnlySelectedRow) {
  Rng rng(3);
  Tensor t = random_tensor({4, 3}, rng);
  auto f = [&] { return probe(gather_rows(t, 2), 99); };
  f().backward();
  const auto numeric = numeric_gradient(f, t);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 2) {
        EXPECT_NE(t.grad()[r * 3 + c], 0.0);
      } else {
        EXPECT_EQ(t.grad()[r * 3 + c], 0.0);
        EXPECT_EQ(numeric[r * 3 + c], 0.0);
      }
    }
  }
  EXPECT_LT(max_relative_error(t.grad(), numeric), 1e-6);
}

TEST(ConcatGather, ConcatThenGatherRecoversRows) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cols = 1 + rng.index(6);
    const Tensor a = random_tensor({1 + rng.index(4), cols}, rng);
    const Tensor b = random_tensor({1 + rng.index(4), cols}, rng);
    const Tensor joined = concat({a, b}, 0);
    for (std::size_t r = 0; r < b.dim(0); ++r) {
      EXPECT_EQ(values(gather_rows(joined, a.dim(0) + r)), values(gather_rows(b, r)));
    }
  }
}

TEST(Reduce, Examples) {
  EXPECT_EQ(sum(Tensor::vector({1, 2, 3})).item(), 6.0);
  EXPECT_EQ(mean(Tensor::vector({2, 4})).item(), 3.0);
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(sum(m, 0)), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(values(mean(m, 1)), (std::vector<double>{2, 5}));
  EXPECT_THROW(sum(m, 2), ShapeError);
}

TEST(Backward, Examples) {
  Tensor x = Tensor::vector({1, -2}, true);
  sum(mul(x, x)).backward();
  EXPECT_EQ(values(Tensor::vector({x.grad()[0], x.grad()[1]})), (std::vector<double>{2, -4}));

  Tensor y = Tensor::scalar(0.0, true);
  sigmoid(y).backward();
  EXPECT_DOUBLE_EQ(y.grad()[0], 0.25);

  EXPECT_THROW(mul(x, x).backward(), ShapeError);
}

TEST(Backward, AccumulatesUntilReset) {
  Tensor x = Tensor::vector({3.0}, true);
  const Tensor loss = sum(mul(x, x));
  loss.backward();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  x.zero_grad();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SharedSubexpressionVisitedOnce) {
  Tensor x = Tensor::vector({0.7}, true);
  const Tensor h = tanh(x);
  const Tensor loss = sum(add(h, mul(h, h)));
  const Graph g = Graph::from(loss);
  EXPECT_TRUE(g.is_topologically_ordered());
  std::size_t tanh_count = 0;
  for (const Tensor& n : g.nodes()) tanh_count += n.same_node(h) ? 1 : 0;
  EXPECT_EQ(tanh_count, 1u);
  loss.backward();
  const double t = std::tanh(0.7);
  EXPECT_NEAR(x.grad()[0], (1 + 2 * t) * (1 - t * t), 1e-14);
}

TEST(Backward, CompositeMatchesNumericGradient) {
  Rng rng(17);
  Tensor w1 = random_tensor({4, 5}, rng);
  Tensor w2 = random_tensor({5, 3}, rng);
  Tensor x = random_tensor({2, 4}, rng);
  auto f = [&] { return sum(tanh(matmul(tanh(matmul(x, w1)), w2))); };
  std::vector<Tensor> inputs{w1, w2, x};
  EXPECT_LT(grad_check(f, inputs), 1e-6);
}

TEST(Backward, NoGradGuardSkipsRecording) {
  Tensor x = Tensor::vector({1.0}, true);
  NoGradGuard guard;
  const Tensor y = tanh(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(GradCheck, ScaledGradientIsFlagged) {
  Rng rng(23);
  Tensor w = random_tensor({3, 3}, rng);
  Tensor x = random_tensor({3}, rng);
  auto f = [&] { return sum(tanh(matmul(x, w))); };
  w.zero_grad();
  f().backward();
  std::vector<double> doubled(w.grad().begin(), w.grad().end());
  for (double& g : doubled) g *= 2.0;
  const auto numeric = numeric_gradient(f, w);
  // |2g - g| / (|2g| + |g|) = 1/3
  EXPECT_NEAR(max_relative_error(doubled, numeric), 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  auto f = [] { return Tensor::scalar(4.0); };
  std::vector<Tensor> inputs{x};
  EXPECT_EQ(grad_check(f, inputs), 0.0);
}

// Every differentiable op on random small shapes.
TEST(GradCheck, EveryOperationOnRandomShapes) {
  Rng rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.index(6), k = 1 + rng.index(6), n = 1 + rng.index(6);
    Tensor a = random_tensor({m, k}, rng);
    Tensor b = random_tensor({k, n}, rng);
    Tensor c = random_tensor({m, k}, rng);
    Tensor row = random_tensor({k}, rng);
    Tensor pos = random_tensor({m, k}, rng, 0.5, 2.0);
    const std::uint64_t s = rng.next();
    Mask mask(k);
    for (std::size_t i = 0; i < k; ++i) mask[i] = rng.bernoulli(0.7);
    mask[0] = true;

    std::vector<std::pair<const char*, ScalarFn>> cases = {
        {"add", [&] { return probe(add(a, c), s); }},
        {"add_broadcast", [&] { return probe(add(a, row), s); }},
        {"sub", [&] { return probe(sub(a, row), s); }},
        {"mul", [&] { return probe(mul(a, c), s); }},
        {"mul_broadcast", [&] { return probe(mul(a, row), s); }},
        {"scale", [&] { return probe(scale(a, -1.7), s); }},
        {"tanh", [&] { return probe(tanh(a), s); }},
        {"sigmoid", [&] { return probe(sigmoid(a), s); }},
        {"one_minus", [&] { return probe(one_minus(a), s); }},
        {"log", [&] { return probe(log(pos), s); }},
        {"matmul", [&] { return probe(matmul(a, b), s); }},
        {"matmul_vec", [&] { return probe(matmul(row, b), s); }},
        {"softmax", [&] { return probe(softmax(a, 1), s); }},
        {"softmax_masked", [&] { return probe(softmax(a, 1, &mask), s); }},
        {"concat", [&] { return probe(concat({a, c}, 1), s); }},
        {"gather", [&] { return probe(gather_rows(a, m - 1), s); }},
        {"sum_axis", [&] { return probe(sum(a, 0), s); }},
        {"mean", [&] { return probe(mean(a, 1), s); }},
        {"reshape", [&] { return probe(reshape(a, {m * k}), s); }},
    };
    for (auto& [name, f] : cases) {
      std::vector<Tensor> inputs{a, b, c, row, pos};
      EXPECT_LT(grad_check(f, inputs), 1e-5) << name << " trial " << trial;
    }
  }
}

TEST(Forward, FiniteOnBoundedInputs) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({4, 5}, rng, -10, 10);
    const Tensor w = random_tensor({5, 3}, rng, -10, 10);
    for (const Tensor& out : {sigmoid(x), tanh(x), softmax(x, 1), matmul(x, w), mul(x, x)}) {
      for (double v : out.data()) ASSERT_TRUE(std::isfinite(v));
    }
  }
}
