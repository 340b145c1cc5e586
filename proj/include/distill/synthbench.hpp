#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "distill/pipeline.hpp"

namespace distill {

struct GmmComponent {
  Eigen::VectorXd mean;
  double weight = 1.0;
};

struct GmmClass {
  std::vector<GmmComponent> components;
  double sigma = 0.25;  // shared isotropic standard deviation
};

// Class-conditional Gaussian mixture used as the desk-scale stand-in for an
// image dataset. At least one deliberately rare component (weight <= 0.05)
// creates the sparse region the diversity machinery is meant to cover.
struct GmmSpec {
  std::vector<GmmClass> classes;
  int samples_per_class = 2000;
  double train_fraction = 0.8;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int dim() const;
  void validate() const;

  /// Classes on a ring, components fanned out in angle around each class
  /// center; the last (rare) component sits at the outer angular edge.
  static GmmSpec ring(int num_classes, const std::vector<double>& weights,
                      double sigma, int samples_per_class, double radius,
                      double mode_angle);

  /// 4 classes x 3 components with weights 0.6/0.35/0.05, d = 2,
  /// 2000 samples per class.
  static GmmSpec default_benchmark();
};

struct Benchmark {
  Dataset train;
  Dataset test;
};

/// Seeded per-class/component draws with a deterministic 80/20 split.
Benchmark make_benchmark(const GmmSpec& spec, RngStream& rng);

struct ClassifierConfig {
  int hidden = 32;
  int steps = 300;
  double learning_rate = 0.01;
};

// Small fully connected softmax classifier, the downstream evaluation model.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier(int input_dim, int hidden, int num_classes);

  int predict(const Latent& z) const;
  Eigen::VectorXd logits(const Latent& z) const;

  int input_dim() const { return input_dim_; }
  int num_classes() const { return num_classes_; }
  Eigen::VectorXd& flat() { return theta_; }
  const Eigen::VectorXd& flat() const { return theta_; }

 private:
  friend SoftmaxClassifier train_classifier(const Dataset&,
                                            const ClassifierConfig&,
                                            RngStream&);
  int input_dim_;
  int hidden_;
  int num_classes_;
  Eigen::VectorXd theta_;
};

/// Fixed-budget full-batch training (cross-entropy); deterministic given the
/// stream.
SoftmaxClassifier train_classifier(const Dataset& train,
                                   const ClassifierConfig& config,
                                   RngStream& rng);

double top1_accuracy(const SoftmaxClassifier& clf, const Dataset& test);

struct SeedMetrics {
  std::uint64_t seed = 0;
  double top1_accuracy = 0.0;
  double mode_coverage = 0.0;
  double mean_nn_distance = 0.0;
};

struct EvalReport {
  double top1_accuracy = 0.0;
  double mode_coverage = 0.0;
  double mean_nn_distance = 0.0;
  std::vector<SeedMetrics> per_seed;
};

/// Train a classifier on the distilled set, report top-1 on the test set,
/// mode coverage (component mean within 2 sigma of a same-class distilled
/// sample) and the mean test-to-distilled nearest-neighbor distance.
EvalReport evaluate(const std::vector<LabeledLatent>& distilled,
                    const Dataset& test, const GmmSpec& spec,
                    const ClassifierConfig& config, std::uint64_t eval_seed);

EvalReport merge_reports(const std::vector<SeedMetrics>& per_seed);

/// IPC random draws per class from the training set: the Random baseline.
std::vector<LabeledLatent> random_subset_baseline(const Dataset& train,
                                                  int ipc, RngStream& rng);

// Ring-benchmark parameters in config-file form; to_spec() materializes the
// GmmSpec. Defaults reproduce GmmSpec::default_benchmark().
struct RingBenchParams {
  int classes = 4;
  std::vector<double> weights = {0.6, 0.35, 0.05};
  double sigma = 0.25;
  int samples_per_class = 2000;
  double train_fraction = 0.8;
  double radius = 2.0;
  double mode_angle = 0.5235987755982988;  // pi / 6

  GmmSpec to_spec() const;
};

// Everything one experiment run needs.
struct ExperimentConfig {
  DistillConfig distill;
  RingBenchParams bench;
  ClassifierConfig eval;
  std::uint64_t eval_seed = 5;

  GmmSpec bench_spec() const { return bench.to_spec(); }
  void validate() const;
};

struct RunOutcome {
  bool ok = false;
  std::string error_category;  // set when !ok
  SeedMetrics metrics;
};

struct AblationCell {
  EvictionPolicy policy_real = EvictionPolicy::MaxSimilaritySum;
  EvictionPolicy policy_gen = EvictionPolicy::MaxSimilaritySum;
};

struct AblationRow {
  AblationCell cell;
  int ipc = 0;
  std::uint64_t trial = 0;
  RunOutcome outcome;
};

/// One distill+evaluate per (cell, trial), evaluated at every requested ipc;
/// pretraining is shared across cells within a trial. Failed runs surface as
/// explicit error rows, never as dropped rows.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::vector<AblationCell>& cells,
                                      const std::vector<int>& ipcs,
                                      int trials, int jobs);

enum class SweepParameter { LambdaReal, LambdaGen, Capacity };

SweepParameter parse_sweep_parameter(const std::string& name);
std::string to_string(SweepParameter p);

struct SweepRow {
  double value = 0.0;
  std::uint64_t trial = 0;
  RunOutcome outcome;
};

struct SweepSummaryRow {
  double value = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  int ok_trials = 0;
};

std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                SweepParameter parameter,
                                const std::vector<double>& values, int trials,
                                int jobs);

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRow>& rows);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        std::ostream& out);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
void write_sweep_summary_csv(const std::vector<SweepSummaryRow>& rows,
                             std::ostream& out);

struct FieldPoint {
  double x = 0.0;
  double y = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

struct FieldBounds {
  double x_min = -3.0;
  double x_max = 3.0;
  double y_min = -3.0;
  double y_max = 3.0;
  int nx = 25;
  int ny = 25;
};

/// Normalized denoising directions (z_hat - z) on a regular grid at a fixed
/// timestep; requires a 2-d latent space.
std::vector<FieldPoint> gradient_field(const DenoiserParams& params,
                                       const VarianceSchedule& sched,
                                       const FieldBounds& bounds, int t,
                                       int label);

void write_field_csv(const std::vector<FieldPoint>& field, std::ostream& out);
void write_field_svg(const std::vector<FieldPoint>& field,
                     const FieldBounds& bounds, std::ostream& out);

}  // namespace distill
