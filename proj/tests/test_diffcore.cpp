// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ocrf/diff/gradcheck.hpp"
#include "ocrf/diff/ops.hpp"
#include "ocrf/diff/tape.hpp"
#include "ocrf/render/losses.hpp"
#include "ocrf/util/rng.hpp"

using namespace ocrf;
using diff::Tensor;

namespace {

Tensor random_tensor(diff::Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  util::Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("forward op values match analytic anchors") {
  const Tensor zero = Tensor::scalar(0.0);
  CHECK(diff::sigmoid(zero).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(diff::softplus(zero).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const Tensor v = Tensor::from_values({1, 2}, {3.0, 4.0});
  const Tensor n = diff::l2_normalize(v, 1);
  CHECK(n.at(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n.at(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("backward on sum of squares") {
  Tensor x = Tensor::from_values({2}, {1.0, 2.0}, /*requires_grad=*/true);
  diff::Tape tape;
  {
    diff::TapeScope scope(tape);
    const Tensor loss = diff::sum_all(diff::mul(x, x));
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward through sigmoid of a product") {
  Tensor w = Tensor::from_values({1}, {0.0}, /*requires_grad=*/true);
  const Tensor x = Tensor::from_values({1}, {1.0});
  diff::Tape tape;
  {
    diff::TapeScope scope(tape);
    const Tensor y = diff::sigmoid(diff::mul(w, x));
    tape.backward(y);
  }
  CHECK(w.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("fan-out sums branch gradients: f(x) = x^2 + x") {
  Tensor x = Tensor::from_values({3}, {0.5, -1.5, 2.0}, /*requires_grad=*/true);
  diff::Tape tape;
  {
    diff::TapeScope scope(tape);
    const Tensor f = diff::sum_all(diff::add(diff::mul(x, x), x));
    tape.backward(f);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i) + 1.0).epsilon(1e-14));
  }
}

TEST_CASE("backward rejects a non-scalar root") {
  Tensor x = Tensor::from_values({2}, {1.0, 2.0}, /*requires_grad=*/true);
  diff::Tape tape;
  diff::TapeScope scope(tape);
  const Tensor y = diff::mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("shape mismatch is rejected with both shapes named") {
  const Tensor a({2, 3});
  const Tensor b({3, 2});
  try {
    (void)diff::add(a, b);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2,3)") != std::string::npos);
    CHECK(msg.find("(3,2)") != std::string::npos);
  }
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  const Tensor x = random_tensor({7, 9}, 42, -5.0, 5.0);
  const Tensor y = diff::softmax(x, 1);
  for (int64_t i = 0; i < 7; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 9; ++j) sum += y.at(i, j);
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("max-pool ties route gradient to the lowest index") {
  Tensor x = Tensor::from_values({4}, {2.0, 7.0, 7.0, 1.0}, /*requires_grad=*/true);
  diff::Tape tape;
  {
    diff::TapeScope scope(tape);
    tape.backward(diff::sum_all(diff::reduce_max_axis(x, 0)));
  }
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("l2_normalize guard maps an exactly-zero row to a unit vector") {
  const Tensor x = Tensor::from_values({2, 3}, {0.0, 0.0, 0.0, 1.0, 2.0, 2.0});
  const Tensor y = diff::l2_normalize(x, 1);
  CHECK(y.at(0, 0) == 1.0);
  CHECK(y.at(0, 1) == 0.0);
  CHECK(y.at(0, 2) == 0.0);
  double norm = 0.0;
  for (int64_t j = 0; j < 3; ++j) norm += y.at(1, j) * y.at(1, j);
  CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-9);
}

TEST_CASE("gradcheck: linear layer under 1e-5") {
  const Tensor x = random_tensor({5, 4}, 1);
  const Tensor w = random_tensor({4, 3}, 2);
  const Tensor b = random_tensor({3}, 3);
  const Tensor probe_w = random_tensor({5, 3}, 4);
  const double err = diff::gradcheck(
      [probe_w](const std::vector<Tensor>& in) {
        return diff::sum_all(diff::mul(diff::linear(in[0], in[1], in[2]), probe_w));
      },
      {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("gradcheck: constant function has exactly zero error") {
  const Tensor x = random_tensor({3, 3}, 5);
  const double err = diff::gradcheck(
      [](const std::vector<Tensor>&) { return Tensor::scalar(4.25); }, {x});
  CHECK(err == 0.0);
}

TEST_CASE("gradcheck: 3x3 stride-2 convolution under 1e-5") {
  const Tensor x = random_tensor({2, 6, 6}, 6);
  const Tensor w = random_tensor({3, 2, 3, 3}, 7);
  const Tensor b = random_tensor({3}, 8);
  const double err = diff::gradcheck(
      [](const std::vector<Tensor>& in) {
        return diff::mean_all(diff::square(diff::conv2d(in[0], in[1], &in[2], 2, 1)));
      },
      {x, w, b});
  CHECK(err < 1e-5);
}

TEST_CASE("gradcheck: masked SSIM on a random 16x16 image under 1e-5") {
  const Tensor pred = random_tensor({16, 16, 3}, 9, 0.1, 0.9);
  const Tensor gt = random_tensor({16, 16, 3}, 10, 0.1, 0.9);
  Tensor mask({16, 16, 3});
  util::Rng rng(11);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double v = rng.uniform() < 0.7 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) mask.at(y, x, c) = v;
    }
  }
  const double err = diff::gradcheck(
      [gt, mask](const std::vector<Tensor>& in) {
        return render::masked_ssim({in[0]}, gt, mask);
      },
      {pred});
  CHECK(err < 1e-5);
}

TEST_CASE("tensor reused across two ops accumulates both gradients") {
  Tensor x = Tensor::from_values({2}, {1.0, 3.0}, /*requires_grad=*/true);
  diff::Tape tape;
  {
    diff::TapeScope scope(tape);
    const Tensor a = diff::scale(x, 2.0);
    const Tensor b = diff::mul(x, x);
    tape.backward(diff::sum_all(diff::add(a, b)));
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0 + 2.0 * 1.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0 + 2.0 * 3.0));
}
