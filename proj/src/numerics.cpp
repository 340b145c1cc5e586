#include "distill/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace distill {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double cosine_similarity(const Latent& a, const Latent& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0) {
    throw DomainError("cosine_similarity: first argument has zero norm");
  }
  if (nb == 0.0) {
    throw DomainError("cosine_similarity: second argument has zero norm");
  }
  const double s = a.dot(b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

Latent cosine_similarity_gradient(const Latent& a, const Latent& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0) {
    throw DomainError("cosine_similarity_gradient: first argument has zero norm");
  }
  if (nb == 0.0) {
    throw DomainError("cosine_similarity_gradient: second argument has zero norm");
  }
  const double s = a.dot(b) / (na * nb);
  return b / (na * nb) - (s / (na * na)) * a;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
  // Mix seed and stream id so that nearby (seed, stream) pairs land in
  // unrelated regions of the state space.
  std::uint64_t s = seed;
  std::uint64_t mixed = splitmix64(s);
  s = mixed ^ (0xA0761D6478BD642FULL * (stream_id + 1));
  (void)splitmix64(s);
  state_ = s;
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the log finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) {
    throw DomainError("RngStream::below: n must be positive");
  }
  return next_u64() % n;
}

Latent gaussian_draw(RngStream& rng, Eigen::Index d) {
  if (d < 1) {
    throw DomainError("gaussian_draw: dimension must be >= 1");
  }
  Latent z(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    z[i] = rng.gaussian();
  }
  return z;
}

OptimizerState OptimizerState::make(Eigen::Index n, double learning_rate,
                                    double weight_decay) {
  OptimizerState s;
  s.first_moment = Eigen::VectorXd::Zero(n);
  s.second_moment = Eigen::VectorXd::Zero(n);
  s.learning_rate = learning_rate;
  s.weight_decay = weight_decay;
  return s;
}

void optimizer_step(Eigen::Ref<Eigen::VectorXd> params,
                    const Eigen::Ref<const Eigen::VectorXd>& grads,
                    OptimizerState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size()) {
    throw ConfigError("optimizer_step: parameter/gradient/moment shape mismatch");
  }
  if (!grads.allFinite()) {
    throw TrainingError("optimizer_step: non-finite gradient at step " +
                        std::to_string(state.step_count + 1));
  }
  state.step_count += 1;
  params *= (1.0 - state.learning_rate * state.weight_decay);
  state.first_moment =
      state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  params -= (state.learning_rate / bc1) *
            (state.first_moment.array() /
             ((state.second_moment.array() / bc2).sqrt() + state.epsilon))
                .matrix();
}

}  // namespace distill
