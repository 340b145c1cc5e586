#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "distill/errors.hpp"

namespace distill {

/// A point in latent space. All training, memory and similarity machinery
/// operates on these; the dimension is fixed per run.
using Latent = Eigen::VectorXd;

/// Cosine similarity a.b / (|a||b|), clamped to [-1, 1] against rounding.
/// Throws DomainError naming the offending argument on zero-norm input.
double cosine_similarity(const Latent& a, const Latent& b);

/// d/da of cosine_similarity(a, b).
Latent cosine_similarity_gradient(const Latent& a, const Latent& b);

// Deterministic random stream. One stream per logical purpose (data, init,
// noise, sampling) so changing the consumption pattern of one purpose never
// perturbs the others. The generator is a splitmix64 walk, which makes the
// sequence a pure function of (seed, stream_id, draw index) on any platform;
// std::normal_distribution is implementation-defined and would break the
// reproducibility contract.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal via Box-Muller (cached spare).
  double gaussian();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// d independent standard-normal draws; advancing the stream is the only
/// state change.
Latent gaussian_draw(RngStream& rng, Eigen::Index d);

/// Fisher-Yates shuffle driven by a deterministic stream.
template <typename T>
void seeded_shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Adaptive-moment optimizer with decoupled weight decay (AdamW). Moments
// have exactly the parameter shape; step_count increases by one per update.
struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step_count = 0;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState make(Eigen::Index n, double learning_rate,
                             double weight_decay);
};

/// One bias-corrected update in place. Decay is applied multiplicatively to
/// the parameters before the moment update (decoupled). Throws TrainingError
/// carrying the step index on non-finite gradients.
void optimizer_step(Eigen::Ref<Eigen::VectorXd> params,
                    const Eigen::Ref<const Eigen::VectorXd>& grads,
                    OptimizerState& state);

}  // namespace distill
