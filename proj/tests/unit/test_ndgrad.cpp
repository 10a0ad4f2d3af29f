#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "simt/errors.hpp"
#include "simt/ops.hpp"

using namespace simt;
using simt::testing::grad_check;
using simt::testing::random_tensor;

TEST_CASE("matmul hand cases") {
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {3, 4, 5, 6});
  auto out = ops::matmul(eye, m);
  CHECK(std::vector<double>(out.values().begin(), out.values().end()) ==
        std::vector<double>{3, 4, 5, 6});

  auto row = Tensor::from({1, 2}, {1, 2});
  auto col = Tensor::from({2, 1}, {3, 4});
  auto dot = ops::matmul(row, col);
  CHECK(dot.shape() == Shape{1, 1});
  CHECK(dot.item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 2});
  try {
    ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient vs central differences") {
  Rng rng(7);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto r = grad_check([&] { return ops::sum(ops::matmul(a, b)); }, {a, b});
  CHECK(r.checked == 20);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("batched and transposed matmul gradients") {
  Rng rng(11);
  auto a = random_tensor({2, 3, 3, 4}, rng);
  auto b = random_tensor({2, 3, 5, 4}, rng);
  auto w = random_tensor({2, 3, 3, 5}, rng);
  auto loss = [&] { return ops::sum(ops::mul(ops::matmul(a, b, ops::Transpose::kYes), w)); };
  CHECK(grad_check(loss, {a, b}).max_rel_error < 1e-6);

  auto shared = random_tensor({4, 2}, rng);
  auto w2 = random_tensor({2, 3, 3, 2}, rng);
  auto loss2 = [&] { return ops::sum(ops::mul(ops::matmul(a, shared), w2)); };
  CHECK(grad_check(loss2, {a, shared}).max_rel_error < 1e-6);

  auto shared_t = random_tensor({6, 4}, rng);
  auto w3 = random_tensor({2, 3, 3, 6}, rng);
  auto loss3 = [&] {
    return ops::sum(ops::mul(ops::matmul(a, shared_t, ops::Transpose::kYes), w3));
  };
  CHECK(grad_check(loss3, {a, shared_t}).max_rel_error < 1e-6);
}

TEST_CASE("softmax values and stabilization") {
  auto even = ops::softmax(Tensor::from({2}, {0, 0}));
  CHECK(even.values()[0] == doctest::Approx(0.5));
  CHECK(even.values()[1] == doctest::Approx(0.5));

  auto big = ops::softmax(Tensor::from({2}, {1000, 0}));
  CHECK(std::isfinite(big.values()[0]));
  CHECK(big.values()[0] == doctest::Approx(1.0));
  CHECK(big.values()[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax sums to one for extreme magnitudes") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double magnitude = std::pow(10.0, static_cast<double>(trial % 7) - 1.0);
    auto x = random_tensor({3, 9}, rng, false, magnitude);
    auto y = ops::softmax(x, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        const double p = y.values()[r * 9 + c];
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        total += p;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("softmax gradient vs central differences") {
  Rng rng(5);
  auto x = random_tensor({5}, rng);
  auto w = random_tensor({5}, rng, false);
  auto r = grad_check([&] { return ops::sum(ops::mul(ops::softmax(x), w)); }, {x});
  CHECK(r.max_rel_error < 1e-6);

  auto x3 = random_tensor({2, 4, 3}, rng);
  auto w3 = random_tensor({2, 4, 3}, rng, false);
  auto r3 = grad_check([&] { return ops::sum(ops::mul(ops::softmax(x3, 1), w3)); }, {x3});
  CHECK(r3.max_rel_error < 1e-6);
}

TEST_CASE("masked softmax puts exact zeros on -inf entries") {
  const double ninf = -std::numeric_limits<double>::infinity();
  auto x = Tensor::from({1, 4}, {0.3, -1.2, 2.0, 0.1});
  auto mask = Tensor::from({1, 4}, {0, 0, ninf, ninf});
  auto y = ops::softmax(ops::add_mask(x, mask));
  CHECK(y.values()[2] == 0.0);
  CHECK(y.values()[3] == 0.0);
  auto prefix = ops::softmax(Tensor::from({1, 2}, {0.3, -1.2}));
  CHECK(y.values()[0] == prefix.values()[0]);
  CHECK(y.values()[1] == prefix.values()[1]);
}

TEST_CASE("cross entropy analytic cases") {
  // Correct class with a huge margin.
  auto confident = Tensor::from({1, 3}, {0, 50, 0});
  const int target1[] = {1};
  CHECK(ops::cross_entropy_label_smoothed(confident, target1, 0.0).item() ==
        doctest::Approx(0.0).epsilon(1e-12));

  const int vocab = 7;
  auto uniform = Tensor::zeros({2, static_cast<std::size_t>(vocab)});
  const int targets[] = {3, 5};
  CHECK(ops::cross_entropy_label_smoothed(uniform, targets, 0.0).item() ==
        doctest::Approx(std::log(vocab)).epsilon(1e-12));
}

TEST_CASE("label-smoothed cross entropy matches direct formula") {
  Rng rng(19);
  auto logits = random_tensor({2, 4}, rng);
  const int targets[] = {2, 0};
  const double eps = 0.1;
  double expected = 0.0;
  for (int r = 0; r < 2; ++r) {
    double z = 0.0;
    for (int v = 0; v < 4; ++v) z += std::exp(logits.values()[r * 4 + v]);
    for (int v = 0; v < 4; ++v) {
      const double nll = -(logits.values()[r * 4 + v] - std::log(z));
      const double weight = eps / 4.0 + (v == targets[r] ? 1.0 - eps : 0.0);
      expected += weight * nll;
    }
  }
  expected /= 2.0;
  auto loss = ops::cross_entropy_label_smoothed(logits, targets, eps);
  CHECK(std::abs(loss.item() - expected) < 1e-9);

  auto r = grad_check([&] { return ops::cross_entropy_label_smoothed(logits, targets, eps); }, {logits});
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("cross entropy ignores padding and rejects bad ids") {
  Rng rng(23);
  auto logits = random_tensor({3, 4}, rng);
  const int with_pad[] = {1, 0, 2};
  const int pad = 0;
  auto masked = ops::cross_entropy_label_smoothed(logits, with_pad, 0.0, pad);
  auto rows = Tensor::from({2, 4}, {logits.values()[0], logits.values()[1], logits.values()[2],
                                    logits.values()[3], logits.values()[8], logits.values()[9],
                                    logits.values()[10], logits.values()[11]});
  const int kept[] = {1, 2};
  CHECK(masked.item() == doctest::Approx(ops::cross_entropy_label_smoothed(rows, kept, 0.0).item()));

  const int bad[] = {1, 4, 2};
  CHECK_THROWS_AS(ops::cross_entropy_label_smoothed(logits, bad, 0.0), InputError);
}

TEST_CASE("backward basics") {
  auto w = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
  auto unused = Tensor::from({2}, {1.0, 1.0}, true);
  backward(ops::sum(w));
  CHECK(std::vector<double>(w.grad().begin(), w.grad().end()) == std::vector<double>{1, 1, 1});
  CHECK(unused.grad()[0] == 0.0);
  CHECK(unused.grad()[1] == 0.0);

  CHECK_THROWS_AS(backward(ops::add(w, w)), UsageError);
}

TEST_CASE("layer norm, relu, embedding, reshape, swap, slice gradients") {
  Rng rng(29);
  auto x = random_tensor({2, 3, 4}, rng);
  auto gain = random_tensor({4}, rng);
  auto bias = random_tensor({4}, rng);
  auto w = random_tensor({2, 3, 4}, rng, false);
  auto ln = [&] { return ops::sum(ops::mul(ops::layer_norm(x, gain, bias), w)); };
  CHECK(grad_check(ln, {x, gain, bias}).max_rel_error < 1e-6);

  auto table = random_tensor({5, 3}, rng);
  const int ids[] = {4, 0, 4, 2};
  auto we = random_tensor({2, 2, 3}, rng, false);
  auto emb = [&] { return ops::sum(ops::mul(ops::embedding(table, ids, {2, 2}), we)); };
  CHECK(grad_check(emb, {table}).max_rel_error < 1e-6);
  const int bad[] = {5};
  CHECK_THROWS_AS(ops::embedding(table, bad, {1}), InputError);

  auto y = random_tensor({2, 3, 2, 2}, rng);
  auto wy = random_tensor({2, 2, 3, 2}, rng, false);
  auto sw = [&] { return ops::sum(ops::mul(ops::swap_axes12(y), wy)); };
  CHECK(grad_check(sw, {y}).max_rel_error < 1e-6);

  auto ws = random_tensor({2, 2, 4}, rng, false);
  auto sl = [&] {
    return ops::sum(ops::mul(ops::relu(ops::slice_axis1(x, 1, 3)), ws));
  };
  CHECK(grad_check(sl, {x}).max_rel_error < 1e-6);

  auto b = random_tensor({4}, rng);
  auto wr = random_tensor({6, 4}, rng, false);
  auto rs = [&] {
    return ops::sum(ops::mul(ops::add_bias(ops::reshape(ops::scale(x, 0.7), {6, 4}), b), wr));
  };
  CHECK(grad_check(rs, {x, b}).max_rel_error < 1e-6);
}

TEST_CASE("dropout is seeded and scales kept units") {
  auto x = Tensor::full({1000}, 1.0, true);
  Rng r1(42), r2(42);
  auto a = ops::dropout(x, 0.25, r1);
  auto b = ops::dropout(x, 0.25, r2);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  std::size_t zeros = 0;
  for (double v : a.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.75));
    }
  }
  CHECK(zeros > 200);
  CHECK(zeros < 300);
  Rng r3(1);
  CHECK(ops::dropout(x, 0.0, r3).node() == x.node());
}

TEST_CASE("no-grad mode records nothing") {
  auto w = Tensor::from({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  auto y = ops::scale(w, 3.0);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), DimensionError);
  auto t = Tensor::zeros({2, 3}, true);
  CHECK(t.grad().size() == t.size());
}
