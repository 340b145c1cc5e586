#pragma once

#include <filesystem>
#include <vector>

#include "distill/memory.hpp"
#include "distill/numerics.hpp"
#include "distill/objectives.hpp"

namespace distill {

// Cumulative noise-retention coefficients alpha_bar_t, t = 1..T. Strictly
// decreasing, all in (0, 1).
struct VarianceSchedule {
  Eigen::VectorXd alpha_bar;

  int timesteps() const { return static_cast<int>(alpha_bar.size()); }
  /// 1-based lookup; throws on out-of-range t.
  double alpha_bar_at(int t) const;

  /// Validate an explicit alpha_bar sequence (test fixtures).
  static VarianceSchedule from_alpha_bar(Eigen::VectorXd alpha_bar);
};

/// Linear per-step beta schedule; alpha_bar_t is the running product of
/// (1 - beta_s).
VarianceSchedule make_schedule(int timesteps, double beta_start,
                               double beta_end);

// Class conditioning (one-hot) plus sinusoidal time features of t/T.
struct ConditioningVector {
  Eigen::VectorXd embedding;
  Eigen::VectorXd time_embedding;
};

Eigen::VectorXd one_hot(int label, int num_classes);
Eigen::VectorXd time_embedding(int t, int timesteps, int features);
ConditioningVector make_conditioning(int label, int num_classes, int t,
                                     int timesteps, int features);

struct DenoiserDims {
  int latent_dim = 2;
  int time_features = 8;
  int num_classes = 4;
  int hidden_width = 64;
  int hidden_layers = 2;

  int input_dim() const { return latent_dim + time_features + num_classes; }
  int linear_layers() const { return hidden_layers + 1; }
  void validate() const;
  bool operator==(const DenoiserDims&) const = default;
};

// Fully connected noise predictor mapping
// (z_t (+) time_embedding (+) class embedding) -> predicted noise.
// Parameters live in one flat vector so the optimizer and serializer see a
// single contiguous shape; layers are Eigen maps into it.
class DenoiserParams {
 public:
  explicit DenoiserParams(const DenoiserDims& dims);

  static DenoiserParams random_init(const DenoiserDims& dims, RngStream& rng);

  const DenoiserDims& dims() const { return dims_; }
  Eigen::VectorXd& flat() { return theta_; }
  const Eigen::VectorXd& flat() const { return theta_; }

  int layer_rows(int layer) const;
  int layer_cols(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

 private:
  DenoiserDims dims_;
  std::vector<int> weight_offsets_;
  std::vector<int> bias_offsets_;
  Eigen::VectorXd theta_;
};

/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps.
Latent forward_noise(const Latent& z0, int t, const Latent& eps,
                     const VarianceSchedule& sched);

/// One-step clean-latent estimate, the exact inverse of forward_noise at the
/// predicted noise: (z_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t).
Latent predict_z0(const Latent& z_t, int t, const Latent& eps_hat,
                  const VarianceSchedule& sched);

/// Squared L2 distance between predicted and true noise.
double diffusion_loss(const Latent& eps_hat, const Latent& eps);

/// Deterministic feed-forward evaluation of the noise predictor.
Latent denoiser_forward(const DenoiserParams& params, const Latent& z_t,
                        const ConditioningVector& c);

/// Deterministic denoising recursion (no per-step noise injection) over an
/// evenly strided subsequence of {1..T}, starting from a fresh Gaussian
/// draw. steps = 1 degenerates to a single predict_z0 application.
Latent sample(const DenoiserParams& params, const VarianceSchedule& sched,
              int label, int steps, RngStream& rng);

struct TrainExample {
  Latent z0;
  int label = 0;
  int t = 1;
  Latent eps;
};

struct StepEval {
  Eigen::VectorXd grad;                    // d(mean total)/d(theta)
  std::vector<LossBreakdown> per_example;  // one row per batch element
  std::vector<Latent> z_hat;               // clean-latent estimates
  double mean_total = 0.0;
};

/// Mean combined loss over the batch and its analytic gradient. The
/// diversity terms differentiate only through the selected memory element
/// (stored memory latents are constants); pass memories = nullptr or empty
/// memories to recover the pure diffusion gradient.
StepEval loss_gradient(const DenoiserParams& params,
                       const VarianceSchedule& sched,
                       const std::vector<TrainExample>& batch,
                       const MemoryBank* memories, const LossWeights& w);

/// Versioned little-endian parameter file.
void save_params(const DenoiserParams& params,
                 const std::filesystem::path& path);
DenoiserParams load_params(const std::filesystem::path& path);

}  // namespace distill
