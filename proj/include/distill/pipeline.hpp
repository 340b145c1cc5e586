#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "distill/diffusion.hpp"
#include "distill/memory.hpp"
#include "distill/objectives.hpp"

namespace distill {

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t noise = 3;
  std::uint64_t sampling = 4;

  Seeds shifted(std::uint64_t k) const {
    return Seeds{data + k, init + k, noise + k, sampling + k};
  }
};

// All run hyperparameters. Paper-default values where the paper states
// them (epochs 8, batch 8, lr 1e-3, lambdas 0.002/0.008, capacity 64,
// 50 sampling steps); the rest are artifact defaults.
struct DistillConfig {
  int epochs = 8;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  LossWeights lambda;
  std::size_t capacity_real = 64;
  std::size_t capacity_gen = 64;
  int sampling_steps = 50;
  int ipc = 10;
  Seeds seeds;
  EvictionPolicy policy_real = EvictionPolicy::MaxSimilaritySum;
  EvictionPolicy policy_gen = EvictionPolicy::MaxSimilaritySum;
  bool per_class_memory = true;

  // model / schedule (artifact choices)
  int latent_dim = 2;
  int hidden_width = 64;
  int hidden_layers = 2;
  int time_features = 8;
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int pretrain_epochs = 200;

  void validate() const;
  DenoiserDims denoiser_dims(int num_classes) const;
  VarianceSchedule schedule() const;
};

struct LabeledLatent {
  Latent z;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledLatent> items;
  int num_classes = 0;

  void validate() const;
};

struct LogRow {
  long step = 0;
  int epoch = 0;
  int label = 0;
  double diffusion = 0.0;
  double real_term = 0.0;
  double gen_term = 0.0;
  double total = 0.0;
};

struct EpochSnapshot {
  int epoch = 0;
  MemoryBank bank;
};

struct RunArtifacts {
  DenoiserParams params;
  std::vector<LabeledLatent> distilled;  // exactly ipc per class
  std::vector<LogRow> training_log;
  std::vector<EpochSnapshot> memory_snapshots;
};

/// Train a fresh model with the pure diffusion loss; the local substitute
/// for a pretrained backbone. Zero pretrain epochs returns the seeded random
/// initialization unchanged. loss_trajectory, when given, receives the
/// batch-mean loss per step.
DenoiserParams pretrain(const DistillConfig& config, const Dataset& dataset,
                        std::vector<double>* loss_trajectory = nullptr);

/// The diversity-driven fine-tuning loop: per batch draw (t, eps), update
/// parameters with the combined-loss gradient, then enqueue each element's
/// real latent and clean-latent estimate into its class memories and evict
/// back to capacity. After the final epoch the distilled set is generated.
RunArtifacts distill(const DenoiserParams& pretrained,
                     const DistillConfig& config, const Dataset& dataset);

/// Exactly ipc samples per class by deterministic sampling; any ipc is
/// served from one fine-tuned model without retraining.
std::vector<LabeledLatent> generate_distilled(const DenoiserParams& params,
                                              const DistillConfig& config);

void write_distilled_csv(const std::vector<LabeledLatent>& distilled,
                         std::ostream& out);
std::vector<LabeledLatent> read_distilled_csv(std::istream& in);
void write_training_log_csv(const std::vector<LogRow>& log, std::ostream& out);

/// Lay out params, distilled set, training log and per-epoch memory
/// snapshots under dir.
void write_artifacts(const RunArtifacts& artifacts,
                     const std::filesystem::path& dir);

}  // namespace distill
