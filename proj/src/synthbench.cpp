#include "distill/synthbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "distill/io.hpp"

namespace distill {

int GmmSpec::dim() const {
  if (classes.empty() || classes.front().components.empty()) {
    throw ConfigError("GMM spec has no components");
  }
  return static_cast<int>(classes.front().components.front().mean.size());
}

void GmmSpec::validate() const {
  if (classes.empty()) {
    throw ConfigError("GMM spec needs at least one class");
  }
  if (samples_per_class < 1) {
    throw ConfigError("samples_per_class must be >= 1");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  const int d = dim();
  for (const GmmClass& cls : classes) {
    if (cls.components.empty()) {
      throw ConfigError("every class needs at least one component");
    }
    if (cls.sigma < 0.0) {
      throw ConfigError("component sigma must be >= 0");
    }
    double weight_sum = 0.0;
    for (const GmmComponent& comp : cls.components) {
      if (!(comp.weight > 0.0)) {
        throw ConfigError("component weights must be positive");
      }
      if (comp.mean.size() != d) {
        throw ConfigError("component means must share one dimension");
      }
      weight_sum += comp.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
      throw ConfigError("component weights must sum to 1 per class");
    }
  }
}

GmmSpec GmmSpec::ring(int num_classes, const std::vector<double>& weights,
                      double sigma, int samples_per_class, double radius,
                      double mode_angle) {
  if (num_classes < 1) {
    throw ConfigError("ring benchmark needs at least one class");
  }
  GmmSpec spec;
  spec.samples_per_class = samples_per_class;
  const int m = static_cast<int>(weights.size());
  for (int c = 0; c < num_classes; ++c) {
    GmmClass cls;
    cls.sigma = sigma;
    const double center = 2.0 * M_PI * c / num_classes;
    for (int j = 0; j < m; ++j) {
      const double angle =
          center + (j - (m - 1) / 2.0) * mode_angle;
      GmmComponent comp;
      comp.mean = Eigen::Vector2d(radius * std::cos(angle),
                                  radius * std::sin(angle));
      comp.weight = weights[static_cast<std::size_t>(j)];
      cls.components.push_back(std::move(comp));
    }
    spec.classes.push_back(std::move(cls));
  }
  spec.validate();
  return spec;
}

GmmSpec GmmSpec::default_benchmark() {
  // Rare mode (weight 0.05) at the angular edge of each class.
  return ring(4, {0.6, 0.35, 0.05}, 0.25, 2000, 2.0, M_PI / 6.0);
}

namespace {

std::size_t pick_component(const GmmClass& cls, RngStream& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t j = 0; j < cls.components.size(); ++j) {
    cum += cls.components[j].weight;
    if (u < cum) {
      return j;
    }
  }
  return cls.components.size() - 1;
}

}  // namespace

Benchmark make_benchmark(const GmmSpec& spec, RngStream& rng) {
  spec.validate();
  const int d = spec.dim();
  Benchmark bench;
  bench.train.num_classes = spec.num_classes();
  bench.test.num_classes = spec.num_classes();
  const int train_count = static_cast<int>(
      std::floor(spec.train_fraction * spec.samples_per_class));
  if (train_count < 1 || train_count >= spec.samples_per_class) {
    throw ConfigError("train_fraction leaves an empty split");
  }
  for (int c = 0; c < spec.num_classes(); ++c) {
    const GmmClass& cls = spec.classes[static_cast<std::size_t>(c)];
    for (int i = 0; i < spec.samples_per_class; ++i) {
      const GmmComponent& comp = cls.components[pick_component(cls, rng)];
      Latent z = comp.mean + cls.sigma * gaussian_draw(rng, d);
      auto& split = i < train_count ? bench.train : bench.test;
      split.items.push_back(LabeledLatent{std::move(z), c});
    }
  }
  return bench;
}

SoftmaxClassifier::SoftmaxClassifier(int input_dim, int hidden,
                                     int num_classes)
    : input_dim_(input_dim), hidden_(hidden), num_classes_(num_classes) {
  if (input_dim < 1 || hidden < 1 || num_classes < 1) {
    throw ConfigError("classifier dimensions must be >= 1");
  }
  theta_ = Eigen::VectorXd::Zero(hidden * input_dim + hidden +
                                 num_classes * hidden + num_classes);
}

namespace {

struct ClassifierViews {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::VectorXd> b2;
};

ClassifierViews views(const Eigen::VectorXd& theta, int in, int hidden,
                      int classes) {
  const double* p = theta.data();
  return ClassifierViews{
      {p, hidden, in},
      {p + hidden * in, hidden},
      {p + hidden * in + hidden, classes, hidden},
      {p + hidden * in + hidden + classes * hidden, classes}};
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

}  // namespace

Eigen::VectorXd SoftmaxClassifier::logits(const Latent& z) const {
  if (z.size() != input_dim_) {
    throw ConfigError("classifier input dimension mismatch");
  }
  const ClassifierViews v = views(theta_, input_dim_, hidden_, num_classes_);
  const Eigen::VectorXd h = ((v.w1 * z + v.b1).array().tanh()).matrix();
  return v.w2 * h + v.b2;
}

int SoftmaxClassifier::predict(const Latent& z) const {
  Eigen::Index best = 0;
  logits(z).maxCoeff(&best);
  return static_cast<int>(best);
}

SoftmaxClassifier train_classifier(const Dataset& train,
                                   const ClassifierConfig& config,
                                   RngStream& rng) {
  train.validate();
  if (config.steps < 1 || config.hidden < 1 ||
      !(config.learning_rate > 0.0)) {
    throw ConfigError("invalid classifier config");
  }
  const int d = static_cast<int>(train.items.front().z.size());
  const int C = train.num_classes;
  const int H = config.hidden;
  SoftmaxClassifier clf(d, H, C);

  // init: weights ~ N(0, 1/sqrt(fan_in)), biases zero
  {
    double* p = clf.flat().data();
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < H * d; ++i) p[i] = s1 * rng.gaussian();
    const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
    double* w2 = p + H * d + H;
    for (int i = 0; i < C * H; ++i) w2[i] = s2 * rng.gaussian();
  }

  const Eigen::Index n = static_cast<Eigen::Index>(train.items.size());
  Eigen::MatrixXd X(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    X.row(i) = train.items[static_cast<std::size_t>(i)].z.transpose();
    labels[static_cast<std::size_t>(i)] =
        train.items[static_cast<std::size_t>(i)].label;
  }

  OptimizerState opt =
      OptimizerState::make(clf.flat().size(), config.learning_rate, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int step = 0; step < config.steps; ++step) {
    const ClassifierViews v = views(clf.flat(), d, H, C);
    Eigen::MatrixXd hid = (X * v.w1.transpose()).rowwise() + v.b1.transpose();
    hid = hid.array().tanh().matrix();
    Eigen::MatrixXd logits =
        (hid * v.w2.transpose()).rowwise() + v.b2.transpose();

    // softmax cross-entropy gradient
    Eigen::MatrixXd g2(n, C);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd p = softmax(logits.row(i).transpose());
      const int y = labels[static_cast<std::size_t>(i)];
      loss -= std::log(std::max(p[y], 1e-300)) * inv_n;
      g2.row(i) = p.transpose() * inv_n;
      g2(i, y) -= inv_n;
    }
    if (!std::isfinite(loss)) {
      throw TrainingError("classifier diverged at step " +
                          std::to_string(step + 1));
    }

    Eigen::VectorXd grad(clf.flat().size());
    double* gp = grad.data();
    Eigen::Map<Eigen::MatrixXd> gw1(gp, H, d);
    Eigen::Map<Eigen::VectorXd> gb1(gp + H * d, H);
    Eigen::Map<Eigen::MatrixXd> gw2(gp + H * d + H, C, H);
    Eigen::Map<Eigen::VectorXd> gb2(gp + H * d + H + C * H, C);

    gw2 = g2.transpose() * hid;
    gb2 = g2.colwise().sum().transpose();
    Eigen::MatrixXd g1 =
        (g2 * v.w2).cwiseProduct((1.0 - hid.array().square()).matrix());
    gw1 = g1.transpose() * X;
    gb1 = g1.colwise().sum().transpose();

    optimizer_step(clf.flat(), grad, opt);
  }
  return clf;
}

double top1_accuracy(const SoftmaxClassifier& clf, const Dataset& test) {
  test.validate();
  long correct = 0;
  for (const LabeledLatent& item : test.items) {
    if (clf.predict(item.z) == item.label) {
      correct += 1;
    }
  }
  return static_cast<double>(correct) /
         static_cast<double>(test.items.size());
}

EvalReport evaluate(const std::vector<LabeledLatent>& distilled,
                    const Dataset& test, const GmmSpec& spec,
                    const ClassifierConfig& config, std::uint64_t eval_seed) {
  if (distilled.empty()) {
    throw ConfigError("evaluate: distilled set is empty");
  }
  spec.validate();

  Dataset distilled_set;
  distilled_set.items = distilled;
  distilled_set.num_classes = spec.num_classes();
  distilled_set.validate();

  RngStream rng(eval_seed, 30);
  const SoftmaxClassifier clf = train_classifier(distilled_set, config, rng);

  EvalReport report;
  report.top1_accuracy = top1_accuracy(clf, test);

  // mode coverage: a component counts as covered when some distilled sample
  // of its class lies within 2 sigma of its mean
  long covered = 0;
  long total = 0;
  for (int c = 0; c < spec.num_classes(); ++c) {
    const GmmClass& cls = spec.classes[static_cast<std::size_t>(c)];
    for (const GmmComponent& comp : cls.components) {
      total += 1;
      for (const LabeledLatent& item : distilled) {
        if (item.label == c &&
            (item.z - comp.mean).norm() <= 2.0 * cls.sigma) {
          covered += 1;
          break;
        }
      }
    }
  }
  report.mode_coverage =
      static_cast<double>(covered) / static_cast<double>(total);

  double nn_sum = 0.0;
  for (const LabeledLatent& item : test.items) {
    double best = std::numeric_limits<double>::infinity();
    for (const LabeledLatent& s : distilled) {
      best = std::min(best, (item.z - s.z).norm());
    }
    nn_sum += best;
  }
  report.mean_nn_distance = nn_sum / static_cast<double>(test.items.size());

  report.per_seed = {SeedMetrics{eval_seed, report.top1_accuracy,
                                 report.mode_coverage,
                                 report.mean_nn_distance}};
  return report;
}

EvalReport merge_reports(const std::vector<SeedMetrics>& per_seed) {
  if (per_seed.empty()) {
    throw StateError("merge_reports: no per-seed metrics");
  }
  EvalReport report;
  for (const SeedMetrics& m : per_seed) {
    report.top1_accuracy += m.top1_accuracy;
    report.mode_coverage += m.mode_coverage;
    report.mean_nn_distance += m.mean_nn_distance;
  }
  const double n = static_cast<double>(per_seed.size());
  report.top1_accuracy /= n;
  report.mode_coverage /= n;
  report.mean_nn_distance /= n;
  report.per_seed = per_seed;
  return report;
}

std::vector<LabeledLatent> random_subset_baseline(const Dataset& train,
                                                  int ipc, RngStream& rng) {
  train.validate();
  if (ipc < 1) {
    throw ConfigError("ipc must be >= 1");
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(train.num_classes));
  for (std::size_t i = 0; i < train.items.size(); ++i) {
    by_class[static_cast<std::size_t>(train.items[i].label)].push_back(i);
  }
  std::vector<LabeledLatent> subset;
  for (auto& indices : by_class) {
    seeded_shuffle(indices, rng);
    for (int j = 0; j < ipc; ++j) {
      subset.push_back(
          train.items[indices[static_cast<std::size_t>(j) % indices.size()]]);
    }
  }
  return subset;
}

GmmSpec RingBenchParams::to_spec() const {
  GmmSpec spec = GmmSpec::ring(classes, weights, sigma, samples_per_class,
                               radius, mode_angle);
  spec.train_fraction = train_fraction;
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  distill.validate();
  const GmmSpec spec = bench.to_spec();
  if (spec.dim() != distill.latent_dim) {
    throw ConfigError("latent_dim must match the benchmark dimension");
  }
  if (eval.steps < 1 || eval.hidden < 1 || !(eval.learning_rate > 0.0)) {
    throw ConfigError("invalid classifier config");
  }
}

namespace {

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const int workers = std::min<int>(jobs, static_cast<int>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

struct TrialContext {
  bool ok = false;
  std::string error_category;
  GmmSpec spec;
  Benchmark bench;
  DenoiserParams pretrained{DenoiserDims{}};
  DistillConfig config;  // seeds shifted for this trial
};

std::string error_category_of(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return err->category();
  }
  return "internal";
}

TrialContext prepare_trial(const ExperimentConfig& base, std::uint64_t trial) {
  TrialContext ctx;
  ctx.config = base.distill;
  ctx.config.seeds = base.distill.seeds.shifted(trial);
  try {
    ctx.spec = base.bench_spec();
    RngStream data_rng(ctx.config.seeds.data, 0);
    ctx.bench = make_benchmark(ctx.spec, data_rng);
    ctx.pretrained = pretrain(ctx.config, ctx.bench.train);
    ctx.ok = true;
  } catch (const std::exception& e) {
    ctx.error_category = error_category_of(e);
  }
  return ctx;
}

SeedMetrics evaluate_distilled(const ExperimentConfig& base,
                               const TrialContext& ctx,
                               const std::vector<LabeledLatent>& distilled,
                               std::uint64_t trial) {
  const EvalReport report = evaluate(distilled, ctx.bench.test, ctx.spec,
                                     base.eval, base.eval_seed + trial);
  return SeedMetrics{trial, report.top1_accuracy, report.mode_coverage,
                     report.mean_nn_distance};
}

}  // namespace

std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::vector<AblationCell>& cells,
                                      const std::vector<int>& ipcs,
                                      int trials, int jobs) {
  base.validate();
  if (cells.empty() || ipcs.empty() || trials < 1) {
    throw ConfigError("ablation grid is empty");
  }

  std::vector<TrialContext> contexts(static_cast<std::size_t>(trials));
  parallel_for(contexts.size(), jobs, [&](std::size_t k) {
    contexts[k] = prepare_trial(base, k);
  });

  // one slot per (cell, trial); each run covers every ipc
  struct CellResult {
    std::vector<RunOutcome> per_ipc;
  };
  std::vector<CellResult> results(cells.size() *
                                  static_cast<std::size_t>(trials));
  parallel_for(results.size(), jobs, [&](std::size_t idx) {
    const std::size_t cell_idx = idx / static_cast<std::size_t>(trials);
    const std::uint64_t trial = idx % static_cast<std::size_t>(trials);
    const TrialContext& ctx = contexts[trial];
    CellResult& slot = results[idx];
    slot.per_ipc.resize(ipcs.size());
    if (!ctx.ok) {
      for (auto& outcome : slot.per_ipc) {
        outcome.error_category = ctx.error_category;
      }
      return;
    }
    try {
      DistillConfig cfg = ctx.config;
      cfg.policy_real = cells[cell_idx].policy_real;
      cfg.policy_gen = cells[cell_idx].policy_gen;
      cfg.ipc = ipcs.front();
      const RunArtifacts artifacts = distill(ctx.pretrained, cfg, ctx.bench.train);
      for (std::size_t j = 0; j < ipcs.size(); ++j) {
        cfg.ipc = ipcs[j];
        const std::vector<LabeledLatent> d =
            generate_distilled(artifacts.params, cfg);
        slot.per_ipc[j] =
            RunOutcome{true, "", evaluate_distilled(base, ctx, d, trial)};
      }
    } catch (const std::exception& e) {
      const std::string category = error_category_of(e);
      for (auto& outcome : slot.per_ipc) {
        if (!outcome.ok) {
          outcome.error_category = category;
        }
      }
    }
  });

  std::vector<AblationRow> rows;
  rows.reserve(results.size() * ipcs.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t j = 0; j < ipcs.size(); ++j) {
      for (int k = 0; k < trials; ++k) {
        const CellResult& slot =
            results[c * static_cast<std::size_t>(trials) +
                    static_cast<std::size_t>(k)];
        rows.push_back(AblationRow{cells[c], ipcs[j],
                                   static_cast<std::uint64_t>(k),
                                   slot.per_ipc[j]});
      }
    }
  }
  return rows;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "lambda_real") return SweepParameter::LambdaReal;
  if (name == "lambda_gen") return SweepParameter::LambdaGen;
  if (name == "capacity") return SweepParameter::Capacity;
  throw UsageError("unknown sweep parameter '" + name +
                   "' (expected lambda_real|lambda_gen|capacity)");
}

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::LambdaReal:
      return "lambda_real";
    case SweepParameter::LambdaGen:
      return "lambda_gen";
    case SweepParameter::Capacity:
      return "capacity";
  }
  return "capacity";
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                SweepParameter parameter,
                                const std::vector<double>& values, int trials,
                                int jobs) {
  base.validate();
  if (values.empty() || trials < 1) {
    throw ConfigError("sweep values are empty");
  }

  std::vector<TrialContext> contexts(static_cast<std::size_t>(trials));
  parallel_for(contexts.size(), jobs, [&](std::size_t k) {
    contexts[k] = prepare_trial(base, k);
  });

  std::vector<SweepRow> rows(values.size() *
                             static_cast<std::size_t>(trials));
  parallel_for(rows.size(), jobs, [&](std::size_t idx) {
    const std::size_t vi = idx / static_cast<std::size_t>(trials);
    const std::uint64_t trial = idx % static_cast<std::size_t>(trials);
    SweepRow& row = rows[idx];
    row.value = values[vi];
    row.trial = trial;
    const TrialContext& ctx = contexts[trial];
    if (!ctx.ok) {
      row.outcome.error_category = ctx.error_category;
      return;
    }
    try {
      DistillConfig cfg = ctx.config;
      switch (parameter) {
        case SweepParameter::LambdaReal:
          cfg.lambda.lambda_real = row.value;
          break;
        case SweepParameter::LambdaGen:
          cfg.lambda.lambda_gen = row.value;
          break;
        case SweepParameter::Capacity: {
          if (row.value < 1.0 || row.value != std::floor(row.value)) {
            throw ConfigError("capacity sweep values must be integers >= 1");
          }
          const auto cap = static_cast<std::size_t>(row.value);
          cfg.capacity_real = cap;
          cfg.capacity_gen = cap;
          break;
        }
      }
      const RunArtifacts artifacts =
          distill(ctx.pretrained, cfg, ctx.bench.train);
      row.outcome = RunOutcome{
          true, "",
          evaluate_distilled(base, ctx, artifacts.distilled, trial)};
    } catch (const std::exception& e) {
      row.outcome.error_category = error_category_of(e);
    }
  });
  return rows;
}

std::vector<SweepSummaryRow> summarize_sweep(
    const std::vector<SweepRow>& rows) {
  std::vector<double> values;
  for (const SweepRow& row : rows) {
    if (std::find(values.begin(), values.end(), row.value) == values.end()) {
      values.push_back(row.value);
    }
  }
  std::vector<SweepSummaryRow> summary;
  for (double v : values) {
    SweepSummaryRow s;
    s.value = v;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const SweepRow& row : rows) {
      if (row.value != v || !row.outcome.ok) continue;
      const double acc = row.outcome.metrics.top1_accuracy;
      s.min = std::min(s.min, acc);
      s.max = std::max(s.max, acc);
      sum += acc;
      s.ok_trials += 1;
    }
    if (s.ok_trials > 0) {
      s.mean = sum / s.ok_trials;
    } else {
      s.min = 0.0;
      s.max = 0.0;
    }
    summary.push_back(s);
  }
  return summary;
}

namespace {

void write_outcome_fields(const RunOutcome& outcome, std::ostream& out) {
  if (outcome.ok) {
    out << "ok," << format_double(outcome.metrics.top1_accuracy) << ","
        << format_double(outcome.metrics.mode_coverage) << ","
        << format_double(outcome.metrics.mean_nn_distance);
  } else {
    out << "error:" << outcome.error_category << ",,,";
  }
}

}  // namespace

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        std::ostream& out) {
  out << "policy_real,policy_gen,ipc,seed,status,top1,mode_coverage,"
         "mean_nn_distance\n";
  for (const AblationRow& row : rows) {
    out << to_string(row.cell.policy_real) << ","
        << to_string(row.cell.policy_gen) << "," << row.ipc << ","
        << row.trial << ",";
    write_outcome_fields(row.outcome, out);
    out << "\n";
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "value,seed,status,top1,mode_coverage,mean_nn_distance\n";
  for (const SweepRow& row : rows) {
    out << format_double(row.value) << "," << row.trial << ",";
    write_outcome_fields(row.outcome, out);
    out << "\n";
  }
}

void write_sweep_summary_csv(const std::vector<SweepSummaryRow>& rows,
                             std::ostream& out) {
  out << "value,accuracy_min,accuracy_mean,accuracy_max,ok_seeds\n";
  for (const SweepSummaryRow& row : rows) {
    out << format_double(row.value) << "," << format_double(row.min) << ","
        << format_double(row.mean) << "," << format_double(row.max) << ","
        << row.ok_trials << "\n";
  }
}

std::vector<FieldPoint> gradient_field(const DenoiserParams& params,
                                       const VarianceSchedule& sched,
                                       const FieldBounds& bounds, int t,
                                       int label) {
  if (params.dims().latent_dim != 2) {
    throw ConfigError("gradient field requires a 2-d latent space");
  }
  std::vector<FieldPoint> field;
  if (bounds.nx <= 0 || bounds.ny <= 0) {
    return field;
  }
  const ConditioningVector c =
      make_conditioning(label, params.dims().num_classes, t,
                        sched.timesteps(), params.dims().time_features);
  auto coord = [](double lo, double hi, int n, int i) {
    return n == 1 ? 0.5 * (lo + hi)
                  : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  };
  for (int iy = 0; iy < bounds.ny; ++iy) {
    for (int ix = 0; ix < bounds.nx; ++ix) {
      const double x = coord(bounds.x_min, bounds.x_max, bounds.nx, ix);
      const double y = coord(bounds.y_min, bounds.y_max, bounds.ny, iy);
      const Latent z = Eigen::Vector2d(x, y);
      const Latent eps_hat = denoiser_forward(params, z, c);
      const Latent z_hat = predict_z0(z, t, eps_hat, sched);
      Latent dir = z_hat - z;
      const double norm = dir.norm();
      if (norm > 0.0) {
        dir /= norm;
      }
      field.push_back(FieldPoint{x, y, dir[0], dir[1]});
    }
  }
  return field;
}

void write_field_csv(const std::vector<FieldPoint>& field,
                     std::ostream& out) {
  out << "x,y,dx,dy\n";
  for (const FieldPoint& p : field) {
    out << format_double(p.x) << "," << format_double(p.y) << ","
        << format_double(p.dx) << "," << format_double(p.dy) << "\n";
  }
}

void write_field_svg(const std::vector<FieldPoint>& field,
                     const FieldBounds& bounds, std::ostream& out) {
  const double width = 640.0;
  const double height = 640.0;
  const double span_x = std::max(bounds.x_max - bounds.x_min, 1e-9);
  const double span_y = std::max(bounds.y_max - bounds.y_min, 1e-9);
  const double margin = 20.0;
  auto px = [&](double x) {
    return margin + (x - bounds.x_min) / span_x * (width - 2 * margin);
  };
  auto py = [&](double y) {
    return height - margin -
           (y - bounds.y_min) / span_y * (height - 2 * margin);
  };
  const double arrow =
      0.4 * std::min(span_x / std::max(bounds.nx, 1),
                     span_y / std::max(bounds.ny, 1));

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const FieldPoint& p : field) {
    const double x1 = px(p.x);
    const double y1 = py(p.y);
    const double x2 = px(p.x + p.dx * arrow);
    const double y2 = py(p.y + p.dy * arrow);
    out << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
        << "\" y2=\"" << y2
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    // arrowhead
    const double ang = std::atan2(y2 - y1, x2 - x1);
    const double head = 3.0;
    for (double rot : {2.5, -2.5}) {
      out << "<line x1=\"" << x2 << "\" y1=\"" << y2 << "\" x2=\""
          << x2 + head * std::cos(ang + rot) << "\" y2=\""
          << y2 + head * std::sin(ang + rot)
          << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace distill
