#include "distill/config.hpp"

#include <functional>
#include <limits>
#include <sstream>

#include "distill/io.hpp"

namespace distill {

namespace {

struct KeyEntry {
  std::string key;
  std::string doc;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_int(long v) { return std::to_string(v); }

int to_positive_int(const std::string& value, const std::string& key) {
  const long v = parse_long(value, key);
  if (v < 0 || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key + " out of range: " + value);
  }
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& value, const std::string& key) {
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    throw ConfigError("expected an unsigned integer for " + key + ", got '" +
                      value + "'");
  }
}

std::vector<double> parse_weights(const std::string& value) {
  std::vector<double> weights;
  for (const std::string& field : split_csv_line(value)) {
    weights.push_back(parse_double(field, "bench_weights"));
  }
  return weights;
}

std::string join_weights(const std::vector<double>& weights) {
  std::string out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(weights[i]);
  }
  return out;
}

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      // distillation loop (paper defaults)
      {"epochs", "fine-tuning epochs (paper: 8)",
       [](const ExperimentConfig& c) { return fmt_int(c.distill.epochs); },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.epochs = to_positive_int(v, "epochs");
       }},
      {"batch_size", "mini-batch size (paper: 8)",
       [](const ExperimentConfig& c) { return fmt_int(c.distill.batch_size); },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.batch_size = to_positive_int(v, "batch_size");
       }},
      {"learning_rate", "optimizer learning rate (paper: 1e-3)",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.learning_rate);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.learning_rate = parse_double(v, "learning_rate");
       }},
      {"weight_decay", "decoupled weight decay",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.weight_decay);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.weight_decay = parse_double(v, "weight_decay");
       }},
      {"lambda_real", "weight of the representativeness term (paper: 0.002)",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.lambda.lambda_real);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.lambda.lambda_real = parse_double(v, "lambda_real");
       }},
      {"lambda_gen", "weight of the diversity term (paper: 0.008)",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.lambda.lambda_gen);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.lambda.lambda_gen = parse_double(v, "lambda_gen");
       }},
      {"capacity_real", "real memory capacity (paper: 64)",
       [](const ExperimentConfig& c) {
         return fmt_int(static_cast<long>(c.distill.capacity_real));
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.capacity_real =
             static_cast<std::size_t>(to_positive_int(v, "capacity_real"));
       }},
      {"capacity_gen", "generative memory capacity (paper: 64)",
       [](const ExperimentConfig& c) {
         return fmt_int(static_cast<long>(c.distill.capacity_gen));
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.capacity_gen =
             static_cast<std::size_t>(to_positive_int(v, "capacity_gen"));
       }},
      {"sampling_steps", "denoising steps when sampling (paper: 50)",
       [](const ExperimentConfig& c) {
         return fmt_int(c.distill.sampling_steps);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.sampling_steps = to_positive_int(v, "sampling_steps");
       }},
      {"ipc", "distilled samples per class",
       [](const ExperimentConfig& c) { return fmt_int(c.distill.ipc); },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.ipc = to_positive_int(v, "ipc");
       }},
      {"policy_real", "real memory eviction policy: oldest|max|min",
       [](const ExperimentConfig& c) {
         return to_string(c.distill.policy_real);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.policy_real = parse_policy(v);
       }},
      {"policy_gen", "generative memory eviction policy: oldest|max|min",
       [](const ExperimentConfig& c) {
         return to_string(c.distill.policy_gen);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.policy_gen = parse_policy(v);
       }},
      {"per_class_memory", "one memory pair per class (true) or global",
       [](const ExperimentConfig& c) {
         return c.distill.per_class_memory ? std::string("true")
                                           : std::string("false");
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.per_class_memory = parse_bool(v, "per_class_memory");
       }},
      // model and schedule
      {"latent_dim", "latent dimension",
       [](const ExperimentConfig& c) { return fmt_int(c.distill.latent_dim); },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.latent_dim = to_positive_int(v, "latent_dim");
       }},
      {"hidden_width", "denoiser hidden width",
       [](const ExperimentConfig& c) {
         return fmt_int(c.distill.hidden_width);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.hidden_width = to_positive_int(v, "hidden_width");
       }},
      {"hidden_layers", "denoiser hidden layer count",
       [](const ExperimentConfig& c) {
         return fmt_int(c.distill.hidden_layers);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.hidden_layers = to_positive_int(v, "hidden_layers");
       }},
      {"time_features", "sinusoidal time features (even)",
       [](const ExperimentConfig& c) {
         return fmt_int(c.distill.time_features);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.time_features = to_positive_int(v, "time_features");
       }},
      {"timesteps", "diffusion training steps T",
       [](const ExperimentConfig& c) { return fmt_int(c.distill.timesteps); },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.timesteps = to_positive_int(v, "timesteps");
       }},
      {"beta_start", "linear beta schedule start",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.beta_start);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.beta_start = parse_double(v, "beta_start");
       }},
      {"beta_end", "linear beta schedule end",
       [](const ExperimentConfig& c) {
         return format_double(c.distill.beta_end);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.beta_end = parse_double(v, "beta_end");
       }},
      {"pretrain_epochs", "pure-diffusion pretraining epochs",
       [](const ExperimentConfig& c) {
         return fmt_int(c.distill.pretrain_epochs);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.pretrain_epochs = to_positive_int(v, "pretrain_epochs");
       }},
      // seeds
      {"seed_data", "seed: dataset draws and shuffles",
       [](const ExperimentConfig& c) {
         return std::to_string(c.distill.seeds.data);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.seeds.data = to_seed(v, "seed_data");
       }},
      {"seed_init", "seed: parameter initialization",
       [](const ExperimentConfig& c) {
         return std::to_string(c.distill.seeds.init);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.seeds.init = to_seed(v, "seed_init");
       }},
      {"seed_noise", "seed: training noise and timesteps",
       [](const ExperimentConfig& c) {
         return std::to_string(c.distill.seeds.noise);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.seeds.noise = to_seed(v, "seed_noise");
       }},
      {"seed_sampling", "seed: distilled-set sampling",
       [](const ExperimentConfig& c) {
         return std::to_string(c.distill.seeds.sampling);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.distill.seeds.sampling = to_seed(v, "seed_sampling");
       }},
      // benchmark
      {"bench_classes", "benchmark class count",
       [](const ExperimentConfig& c) { return fmt_int(c.bench.classes); },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.classes = to_positive_int(v, "bench_classes");
       }},
      {"bench_weights", "per-class component weights (comma list)",
       [](const ExperimentConfig& c) { return join_weights(c.bench.weights); },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.weights = parse_weights(v);
       }},
      {"bench_sigma", "component standard deviation",
       [](const ExperimentConfig& c) { return format_double(c.bench.sigma); },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.sigma = parse_double(v, "bench_sigma");
       }},
      {"bench_samples_per_class", "samples drawn per class",
       [](const ExperimentConfig& c) {
         return fmt_int(c.bench.samples_per_class);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.samples_per_class =
             to_positive_int(v, "bench_samples_per_class");
       }},
      {"bench_train_fraction", "train split fraction",
       [](const ExperimentConfig& c) {
         return format_double(c.bench.train_fraction);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.train_fraction = parse_double(v, "bench_train_fraction");
       }},
      {"bench_radius", "class ring radius",
       [](const ExperimentConfig& c) { return format_double(c.bench.radius); },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.radius = parse_double(v, "bench_radius");
       }},
      {"bench_mode_angle", "angular gap between components (radians)",
       [](const ExperimentConfig& c) {
         return format_double(c.bench.mode_angle);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.bench.mode_angle = parse_double(v, "bench_mode_angle");
       }},
      // downstream evaluation
      {"eval_hidden", "classifier hidden width",
       [](const ExperimentConfig& c) { return fmt_int(c.eval.hidden); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.hidden = to_positive_int(v, "eval_hidden");
       }},
      {"eval_steps", "classifier full-batch steps",
       [](const ExperimentConfig& c) { return fmt_int(c.eval.steps); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.steps = to_positive_int(v, "eval_steps");
       }},
      {"eval_learning_rate", "classifier learning rate (paper: 0.01)",
       [](const ExperimentConfig& c) {
         return format_double(c.eval.learning_rate);
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.learning_rate = parse_double(v, "eval_learning_rate");
       }},
      {"eval_seed", "seed: classifier initialization",
       [](const ExperimentConfig& c) { return std::to_string(c.eval_seed); },
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_seed = to_seed(v, "eval_seed");
       }},
  };
  return table;
}

const KeyEntry& find_key(const std::string& key) {
  for (const KeyEntry& entry : key_table()) {
    if (entry.key == key) {
      return entry;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void apply_assignment(ExperimentConfig& config, const std::string& text,
                      const std::string& where) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) {
    throw UsageError("expected key = value in " + where + ": '" + text + "'");
  }
  const std::string key = trim(text.substr(0, eq));
  const std::string value = trim(text.substr(eq + 1));
  if (key.empty()) {
    throw UsageError("empty config key in " + where);
  }
  find_key(key).set(config, value);
}

}  // namespace

std::vector<ConfigKeyDoc> config_key_docs() {
  std::vector<ConfigKeyDoc> docs;
  const ExperimentConfig defaults;
  for (const KeyEntry& entry : key_table()) {
    docs.push_back(ConfigKeyDoc{entry.key, entry.get(defaults), entry.doc});
  }
  return docs;
}

ExperimentConfig load_experiment_config(
    const std::optional<std::filesystem::path>& file,
    const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  if (file) {
    const std::string body = read_file(*file);
    std::istringstream lines(body);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
      lineno += 1;
      const auto comment = line.find('#');
      if (comment != std::string::npos) {
        line = line.substr(0, comment);
      }
      line = trim(line);
      if (line.empty()) continue;
      apply_assignment(config, line,
                       file->string() + ":" + std::to_string(lineno));
    }
  }
  for (const std::string& text : overrides) {
    apply_assignment(config, text, "override");
  }
  config.validate();
  return config;
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "# resolved run configuration\n";
  for (const KeyEntry& entry : key_table()) {
    out << entry.key << " = " << entry.get(config) << "\n";
  }
  return out.str();
}

}  // namespace distill
