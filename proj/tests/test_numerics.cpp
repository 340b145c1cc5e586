#include <doctest.h>

#include <cmath>

#include "distill/numerics.hpp"

using namespace distill;

namespace {

Latent random_nonzero(RngStream& rng, int d) {
  for (;;) {
    Latent v = gaussian_draw(rng, d);
    if (v.norm() > 1e-6) return v;
  }
}

}  // namespace

TEST_CASE("cosine similarity hand values") {
  Latent v(3);
  v << 0.3, -1.2, 4.0;
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));

  Latent e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));

  // hand oracle: (1*2 + 2*1) / (sqrt(5) * sqrt(5)) = 4/5
  Latent a(2), b(2);
  a << 1, 2;
  b << 2, 1;
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("cosine similarity zero-norm inputs name the argument") {
  Latent z = Latent::Zero(2);
  Latent v(2);
  v << 1, 1;
  CHECK_THROWS_WITH_AS(cosine_similarity(z, v),
                       doctest::Contains("first argument"), DomainError);
  CHECK_THROWS_WITH_AS(cosine_similarity(v, z),
                       doctest::Contains("second argument"), DomainError);
}

TEST_CASE("cosine similarity symmetry and bounds over random vectors") {
  RngStream rng(7, 0);
  for (int i = 0; i < 200; ++i) {
    const int d = 1 + static_cast<int>(rng.below(6));
    const Latent a = random_nonzero(rng, d);
    const Latent b = random_nonzero(rng, d);
    const double ab = cosine_similarity(a, b);
    const double ba = cosine_similarity(b, a);
    CHECK(ab == ba);
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("cosine similarity collinear arguments") {
  RngStream rng(8, 0);
  for (int i = 0; i < 50; ++i) {
    const Latent a = random_nonzero(rng, 3);
    const double k = 0.01 + 10.0 * rng.uniform();
    CHECK(cosine_similarity(a, (k * a).eval()) == doctest::Approx(1.0));
    CHECK(cosine_similarity(a, (-k * a).eval()) == doctest::Approx(-1.0));
  }
}

TEST_CASE("cosine similarity is scale invariant") {
  RngStream rng(9, 0);
  for (int i = 0; i < 100; ++i) {
    const Latent a = random_nonzero(rng, 4);
    const Latent b = random_nonzero(rng, 4);
    const double base = cosine_similarity(a, b);
    const double k = std::exp(6.0 * (rng.uniform() - 0.5));
    const double scaled = cosine_similarity((k * a).eval(), b);
    CHECK(std::abs(scaled - base) <= 1e-12 * std::max(1.0, std::abs(base)));
  }
}

TEST_CASE("cosine gradient matches central finite differences") {
  RngStream rng(10, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Latent a = random_nonzero(rng, 3);
    const Latent b = random_nonzero(rng, 3);
    const Latent grad = cosine_similarity_gradient(a, b);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Latent ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      const double fd =
          (cosine_similarity(ap, b) - cosine_similarity(am, b)) / (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("rng streams are reproducible and purpose-split") {
  RngStream a(0, 0);
  RngStream b(0, 0);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream c(0, 1);
  RngStream d(1, 0);
  bool differs_stream = false;
  bool differs_seed = false;
  RngStream a2(0, 0);
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t base = a2.next_u64();
    differs_stream |= c.next_u64() != base;
    differs_seed |= d.next_u64() != base;
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("gaussian_draw is deterministic for a fixed stream") {
  RngStream r1(0, 0);
  RngStream r2(0, 0);
  const Latent a = gaussian_draw(r1, 8);
  const Latent b = gaussian_draw(r2, 8);
  CHECK(a == b);
  CHECK_THROWS_AS(gaussian_draw(r1, 0), DomainError);
}

TEST_CASE("gaussian_draw moments match the law of large numbers") {
  const int n = 100000;
  const int d = 3;
  RngStream rng(42, 3);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    const Latent z = gaussian_draw(rng, d);
    mean += z;
    sq += z.cwiseProduct(z);
  }
  mean /= n;
  sq /= n;
  for (int k = 0; k < d; ++k) {
    CHECK(std::abs(mean[k]) < 0.02);
    const double var = sq[k] - mean[k] * mean[k];
    CHECK(std::abs(var - 1.0) < 0.05);
  }
}

TEST_CASE("seeded_shuffle yields a seeded permutation") {
  std::vector<int> v1(100), v2(100);
  for (int i = 0; i < 100; ++i) v1[i] = v2[i] = i;
  RngStream r1(5, 0), r2(5, 0);
  seeded_shuffle(v1, r1);
  seeded_shuffle(v2, r2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("optimizer: zero gradient and zero decay leave params unchanged") {
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 0.5;
  const Eigen::VectorXd before = p;
  OptimizerState state = OptimizerState::make(3, 1e-3, 0.0);
  optimizer_step(p, Eigen::VectorXd::Zero(3), state);
  CHECK(p == before);
  CHECK(state.step_count == 1);
}

TEST_CASE("optimizer: single-step closed form on a scalar") {
  // m_hat = 1, v_hat = 1 after one step, so p <- 1 - lr / (1 + eps)
  Eigen::VectorXd p(1);
  p << 1.0;
  Eigen::VectorXd g(1);
  g << 1.0;
  OptimizerState state = OptimizerState::make(1, 1e-3, 0.0);
  optimizer_step(p, g, state);
  CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("optimizer: decoupled decay shrinks params geometrically") {
  Eigen::VectorXd p(1);
  p << 2.0;
  OptimizerState state = OptimizerState::make(1, 1e-3, 0.01);
  double prev = p[0];
  const double factor = 1.0 - 1e-3 * 0.01;
  for (int i = 0; i < 50; ++i) {
    optimizer_step(p, Eigen::VectorXd::Zero(1), state);
    CHECK(p[0] == doctest::Approx(prev * factor).epsilon(1e-14));
    CHECK(p[0] < prev);
    prev = p[0];
  }
}

TEST_CASE("optimizer rejects non-finite gradients with the step index") {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  OptimizerState state = OptimizerState::make(2, 1e-3, 0.0);
  CHECK_THROWS_WITH_AS(optimizer_step(p, g, state),
                       doctest::Contains("step 1"), TrainingError);
}
