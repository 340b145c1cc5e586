#include "distill/objectives.hpp"

namespace distill {

TermValue real_loss(const Latent& z_hat, const MemorySet& m_real) {
  const auto extreme = m_real.extreme_similarity(z_hat, ExtremeMode::Min);
  if (!extreme) {
    return TermValue{0.0, std::nullopt};
  }
  return TermValue{-extreme->value, extreme->index};
}

TermValue gen_loss(const Latent& z_hat, const MemorySet& m_gen) {
  const auto extreme = m_gen.extreme_similarity(z_hat, ExtremeMode::Max);
  if (!extreme) {
    return TermValue{0.0, std::nullopt};
  }
  return TermValue{extreme->value, extreme->index};
}

LossBreakdown combined_loss(double diffusion, double real_term,
                            double gen_term, const LossWeights& w) {
  LossBreakdown b;
  b.diffusion = diffusion;
  b.real_term = real_term;
  b.gen_term = gen_term;
  b.total = diffusion + w.lambda_real * real_term + w.lambda_gen * gen_term;
  return b;
}

LossBreakdown combined_loss(double diffusion, const TermValue& rl,
                            const TermValue& gl, const LossWeights& w) {
  LossBreakdown b = combined_loss(diffusion, rl.value, gl.value, w);
  b.selected_real_index = rl.index;
  b.selected_gen_index = gl.index;
  return b;
}

double naive_alignment(const Latent& z_hat,
                       const std::vector<Latent>& dataset) {
  if (dataset.empty()) {
    throw StateError("naive_alignment: dataset is empty");
  }
  double sum = 0.0;
  for (const Latent& z : dataset) {
    sum += cosine_similarity(z_hat, z);
  }
  return sum;
}

}  // namespace distill
