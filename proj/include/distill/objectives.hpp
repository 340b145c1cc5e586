#pragma once

#include <optional>
#include <vector>

#include "distill/memory.hpp"
#include "distill/numerics.hpp"

namespace distill {

// Balancing weights for the two diversity terms in the combined loss.
struct LossWeights {
  double lambda_real = 0.002;
  double lambda_gen = 0.008;
};

// Per-step loss decomposition kept for logging. The invariant
// total = diffusion + lambda_real * real_term + lambda_gen * gen_term
// holds by construction.
struct LossBreakdown {
  double diffusion = 0.0;
  double real_term = 0.0;
  double gen_term = 0.0;
  double total = 0.0;
  std::optional<std::size_t> selected_real_index;
  std::optional<std::size_t> selected_gen_index;
};

struct TermValue {
  double value = 0.0;
  std::optional<std::size_t> index;
};

/// Representativeness term: minus the minimum similarity between the
/// clean-latent estimate and the real memory, so that minimizing the total
/// pulls the least similar pair closer. Empty memory contributes zero.
TermValue real_loss(const Latent& z_hat, const MemorySet& m_real);

/// Diversity term: plus the maximum similarity against the generative
/// memory, so that minimizing pushes the most similar pair apart. Empty
/// memory contributes zero.
TermValue gen_loss(const Latent& z_hat, const MemorySet& m_gen);

LossBreakdown combined_loss(double diffusion, double real_term,
                            double gen_term, const LossWeights& w);
LossBreakdown combined_loss(double diffusion, const TermValue& rl,
                            const TermValue& gl, const LossWeights& w);

/// Sum of similarities against a whole dataset. Diagnostic only: replacing
/// the memories with full-dataset alignment drags generated latents toward
/// the distribution center, which the benchmark demonstrates.
double naive_alignment(const Latent& z_hat, const std::vector<Latent>& dataset);

}  // namespace distill
