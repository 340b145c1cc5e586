#include "distill/pipeline.hpp"

#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "distill/io.hpp"

namespace distill {

namespace {

// Stream ids per purpose; pretrain and distill use disjoint ids so a distill
// run reproduces exactly whether or not pretraining happened in-process.
constexpr std::uint64_t kPretrainShuffle = 10;
constexpr std::uint64_t kPretrainNoise = 11;
constexpr std::uint64_t kInitStream = 12;
constexpr std::uint64_t kDistillShuffle = 20;
constexpr std::uint64_t kDistillNoise = 21;

}  // namespace

void DistillConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (lambda.lambda_real < 0.0 || lambda.lambda_gen < 0.0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (capacity_real < 1 || capacity_gen < 1) {
    throw ConfigError("memory capacities must be >= 1");
  }
  if (ipc < 1) throw ConfigError("ipc must be >= 1");
  if (sampling_steps < 1 || sampling_steps > timesteps) {
    throw ConfigError("sampling_steps must lie in [1, timesteps]");
  }
  DenoiserDims dims = denoiser_dims(1);
  dims.validate();
  if (timesteps < 2) throw ConfigError("timesteps must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("need 0 < beta_start <= beta_end < 1");
  }
}

DenoiserDims DistillConfig::denoiser_dims(int num_classes) const {
  DenoiserDims dims;
  dims.latent_dim = latent_dim;
  dims.time_features = time_features;
  dims.num_classes = num_classes;
  dims.hidden_width = hidden_width;
  dims.hidden_layers = hidden_layers;
  return dims;
}

VarianceSchedule DistillConfig::schedule() const {
  return make_schedule(timesteps, beta_start, beta_end);
}

void Dataset::validate() const {
  if (items.empty()) {
    throw ConfigError("dataset is empty");
  }
  if (num_classes < 1) {
    throw ConfigError("dataset needs at least one class");
  }
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  for (const LabeledLatent& item : items) {
    if (item.label < 0 || item.label >= num_classes) {
      throw ConfigError("dataset label out of range");
    }
    counts[static_cast<std::size_t>(item.label)] += 1;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw ConfigError("class " + std::to_string(c) + " has no samples");
    }
  }
}

namespace {

struct TrainLoopResult {
  std::vector<LogRow> log;
  std::vector<EpochSnapshot> snapshots;
};

// Shared epoch/batch loop for pretraining (memories == nullptr) and
// fine-tuning. Each epoch visits every sample exactly once in a seeded
// shuffle; per element one timestep and one noise vector are drawn from the
// noise stream in a fixed order.
TrainLoopResult run_training(DenoiserParams& params,
                             const DistillConfig& config,
                             const Dataset& dataset, int epochs,
                             const LossWeights& weights, MemoryBank* memories,
                             RngStream& shuffle_rng, RngStream& noise_rng,
                             std::vector<double>* step_losses = nullptr) {
  const VarianceSchedule sched = config.schedule();
  const int T = sched.timesteps();
  OptimizerState opt = OptimizerState::make(
      params.flat().size(), config.learning_rate, config.weight_decay);

  TrainLoopResult result;
  std::vector<std::size_t> order(dataset.items.size());
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    seeded_shuffle(order, shuffle_rng);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(),
                   begin + static_cast<std::size_t>(config.batch_size));
      std::vector<TrainExample> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const LabeledLatent& item = dataset.items[order[k]];
        TrainExample ex;
        ex.z0 = item.z;
        ex.label = item.label;
        ex.t = 1 + static_cast<int>(noise_rng.below(
                       static_cast<std::uint64_t>(T)));
        ex.eps = gaussian_draw(noise_rng, config.latent_dim);
        batch.push_back(std::move(ex));
      }
      step += 1;

      StepEval eval;
      try {
        eval = loss_gradient(params, sched, batch, memories, weights);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + " step " +
                            std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(eval.mean_total)) {
        throw TrainingError("divergence: non-finite loss at epoch " +
                            std::to_string(epoch) + " step " +
                            std::to_string(step));
      }
      optimizer_step(params.flat(), eval.grad, opt);

      if (memories != nullptr) {
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const LogRow row{step,
                           epoch,
                           batch[k].label,
                           eval.per_example[k].diffusion,
                           eval.per_example[k].real_term,
                           eval.per_example[k].gen_term,
                           eval.per_example[k].total};
          result.log.push_back(row);
        }
        // Alg. 1 order: parameter update first, then memory refresh. The
        // enqueued generated latents are the pre-update estimates and are
        // stored as constants.
        for (std::size_t k = 0; k < batch.size(); ++k) {
          memories->real(batch[k].label).enqueue(batch[k].z0);
        }
        for (std::size_t k = 0; k < batch.size(); ++k) {
          memories->gen(batch[k].label).enqueue(eval.z_hat[k]);
        }
      }
      if (step_losses != nullptr) {
        step_losses->push_back(eval.mean_total);
      }
    }
    if (memories != nullptr) {
      result.snapshots.push_back(EpochSnapshot{epoch, *memories});
    }
  }
  return result;
}

}  // namespace

DenoiserParams pretrain(const DistillConfig& config, const Dataset& dataset,
                        std::vector<double>* loss_trajectory) {
  config.validate();
  dataset.validate();
  RngStream init_rng(config.seeds.init, kInitStream);
  DenoiserParams params = DenoiserParams::random_init(
      config.denoiser_dims(dataset.num_classes), init_rng);
  if (config.pretrain_epochs == 0) {
    return params;
  }
  RngStream shuffle_rng(config.seeds.data, kPretrainShuffle);
  RngStream noise_rng(config.seeds.noise, kPretrainNoise);
  run_training(params, config, dataset, config.pretrain_epochs,
               LossWeights{0.0, 0.0}, nullptr, shuffle_rng, noise_rng,
               loss_trajectory);
  return params;
}

RunArtifacts distill(const DenoiserParams& pretrained,
                     const DistillConfig& config, const Dataset& dataset) {
  config.validate();
  dataset.validate();
  if (pretrained.dims() != config.denoiser_dims(dataset.num_classes)) {
    throw ConfigError("pretrained parameters do not match the run config");
  }

  DenoiserParams params = pretrained;
  MemoryBank memories(dataset.num_classes, config.per_class_memory,
                      config.capacity_real, config.capacity_gen,
                      config.policy_real, config.policy_gen);
  RngStream shuffle_rng(config.seeds.data, kDistillShuffle);
  RngStream noise_rng(config.seeds.noise, kDistillNoise);
  TrainLoopResult loop =
      run_training(params, config, dataset, config.epochs, config.lambda,
                   &memories, shuffle_rng, noise_rng);

  RunArtifacts artifacts{std::move(params), {}, std::move(loop.log),
                         std::move(loop.snapshots)};
  artifacts.distilled = generate_distilled(artifacts.params, config);
  return artifacts;
}

std::vector<LabeledLatent> generate_distilled(const DenoiserParams& params,
                                              const DistillConfig& config) {
  const VarianceSchedule sched = config.schedule();
  const int num_classes = params.dims().num_classes;
  std::vector<LabeledLatent> out;
  out.reserve(static_cast<std::size_t>(num_classes) *
              static_cast<std::size_t>(config.ipc));
  for (int label = 0; label < num_classes; ++label) {
    for (int j = 0; j < config.ipc; ++j) {
      // One stream per (class, index): extending ipc keeps earlier samples.
      RngStream rng(config.seeds.sampling,
                    (static_cast<std::uint64_t>(label) << 32) |
                        static_cast<std::uint64_t>(j));
      out.push_back(LabeledLatent{
          sample(params, sched, label, config.sampling_steps, rng), label});
    }
  }
  return out;
}

void write_distilled_csv(const std::vector<LabeledLatent>& distilled,
                         std::ostream& out) {
  const Eigen::Index d = distilled.empty() ? 0 : distilled.front().z.size();
  out << "class,label";
  for (Eigen::Index k = 0; k < d; ++k) {
    out << ",coord_" << k;
  }
  out << "\n";
  for (const LabeledLatent& item : distilled) {
    out << item.label << ",class_" << item.label;
    for (Eigen::Index k = 0; k < item.z.size(); ++k) {
      out << "," << format_double(item.z[k]);
    }
    out << "\n";
  }
}

std::vector<LabeledLatent> read_distilled_csv(std::istream& in) {
  std::vector<LabeledLatent> items;
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("distilled CSV is empty");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < 3) {
      throw IoError("malformed distilled CSV row: " + line);
    }
    LabeledLatent item;
    item.label = static_cast<int>(parse_long(fields[0], "class"));
    item.z = Latent(fields.size() - 2);
    for (std::size_t k = 2; k < fields.size(); ++k) {
      item.z[static_cast<Eigen::Index>(k - 2)] =
          parse_double(fields[k], "coord");
    }
    items.push_back(std::move(item));
  }
  return items;
}

void write_training_log_csv(const std::vector<LogRow>& log,
                            std::ostream& out) {
  out << "step,epoch,class,diffusion,real_term,gen_term,total\n";
  for (const LogRow& row : log) {
    out << row.step << "," << row.epoch << "," << row.label << ","
        << format_double(row.diffusion) << "," << format_double(row.real_term)
        << "," << format_double(row.gen_term) << ","
        << format_double(row.total) << "\n";
  }
}

void write_artifacts(const RunArtifacts& artifacts,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_params(artifacts.params, dir / "params.bin");
  {
    std::ostringstream csv;
    write_distilled_csv(artifacts.distilled, csv);
    write_file(dir / "distilled.csv", csv.str());
  }
  {
    std::ostringstream csv;
    write_training_log_csv(artifacts.training_log, csv);
    write_file(dir / "training_log.csv", csv.str());
  }
  const std::filesystem::path mem_dir = dir / "memories";
  std::filesystem::create_directories(mem_dir);
  for (const EpochSnapshot& snap : artifacts.memory_snapshots) {
    for (int g = 0; g < snap.bank.groups(); ++g) {
      const std::string suffix = "epoch_" + std::to_string(snap.epoch) +
                                 "_group_" + std::to_string(g) + ".csv";
      {
        std::ostringstream csv;
        snap.bank.real(g).write_csv(csv);
        write_file(mem_dir / ("real_" + suffix), csv.str());
      }
      {
        std::ostringstream csv;
        snap.bank.gen(g).write_csv(csv);
        write_file(mem_dir / ("gen_" + suffix), csv.str());
      }
    }
  }
}

}  // namespace distill
