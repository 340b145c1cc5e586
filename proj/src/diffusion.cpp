#include "distill/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "distill/io.hpp"

namespace distill {

double VarianceSchedule::alpha_bar_at(int t) const {
  if (t < 1 || t > timesteps()) {
    throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(timesteps()) + "]");
  }
  return alpha_bar[t - 1];
}

VarianceSchedule VarianceSchedule::from_alpha_bar(Eigen::VectorXd alpha_bar) {
  if (alpha_bar.size() < 1) {
    throw ConfigError("variance schedule needs at least one step");
  }
  for (Eigen::Index i = 0; i < alpha_bar.size(); ++i) {
    if (!(alpha_bar[i] > 0.0 && alpha_bar[i] < 1.0)) {
      throw ConfigError("alpha_bar entries must lie in (0, 1)");
    }
    if (i > 0 && !(alpha_bar[i] < alpha_bar[i - 1])) {
      throw ConfigError("alpha_bar must be strictly decreasing");
    }
  }
  return VarianceSchedule{std::move(alpha_bar)};
}

VarianceSchedule make_schedule(int timesteps, double beta_start,
                               double beta_end) {
  if (timesteps < 2) {
    throw ConfigError("schedule needs timesteps >= 2");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  Eigen::VectorXd alpha_bar(timesteps);
  double product = 1.0;
  for (int t = 1; t <= timesteps; ++t) {
    const double beta =
        beta_start + (beta_end - beta_start) *
                         (static_cast<double>(t - 1) / (timesteps - 1));
    product *= 1.0 - beta;
    alpha_bar[t - 1] = product;
  }
  return VarianceSchedule::from_alpha_bar(std::move(alpha_bar));
}

Eigen::VectorXd one_hot(int label, int num_classes) {
  if (label < 0 || label >= num_classes) {
    throw ConfigError("class label " + std::to_string(label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_classes);
  v[label] = 1.0;
  return v;
}

Eigen::VectorXd time_embedding(int t, int timesteps, int features) {
  if (features < 2 || features % 2 != 0) {
    throw ConfigError("time embedding needs an even feature count >= 2");
  }
  const double tau = static_cast<double>(t) / timesteps;
  Eigen::VectorXd emb(features);
  double freq = M_PI;
  for (int k = 0; k < features / 2; ++k) {
    emb[2 * k] = std::sin(freq * tau);
    emb[2 * k + 1] = std::cos(freq * tau);
    freq *= 2.0;
  }
  return emb;
}

ConditioningVector make_conditioning(int label, int num_classes, int t,
                                     int timesteps, int features) {
  return ConditioningVector{one_hot(label, num_classes),
                            time_embedding(t, timesteps, features)};
}

void DenoiserDims::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (time_features < 2 || time_features % 2 != 0) {
    throw ConfigError("time_features must be even and >= 2");
  }
}

DenoiserParams::DenoiserParams(const DenoiserDims& dims) : dims_(dims) {
  dims.validate();
  int offset = 0;
  for (int l = 0; l < dims.linear_layers(); ++l) {
    weight_offsets_.push_back(offset);
    offset += layer_rows(l) * layer_cols(l);
    bias_offsets_.push_back(offset);
    offset += layer_rows(l);
  }
  theta_ = Eigen::VectorXd::Zero(offset);
}

int DenoiserParams::layer_rows(int layer) const {
  return layer == dims_.hidden_layers ? dims_.latent_dim
                                      : dims_.hidden_width;
}

int DenoiserParams::layer_cols(int layer) const {
  return layer == 0 ? dims_.input_dim() : dims_.hidden_width;
}

Eigen::Map<const Eigen::MatrixXd> DenoiserParams::weight(int layer) const {
  return {theta_.data() + weight_offsets_[layer], layer_rows(layer),
          layer_cols(layer)};
}

Eigen::Map<const Eigen::VectorXd> DenoiserParams::bias(int layer) const {
  return {theta_.data() + bias_offsets_[layer], layer_rows(layer)};
}

Eigen::Map<Eigen::MatrixXd> DenoiserParams::weight(int layer) {
  return {theta_.data() + weight_offsets_[layer], layer_rows(layer),
          layer_cols(layer)};
}

Eigen::Map<Eigen::VectorXd> DenoiserParams::bias(int layer) {
  return {theta_.data() + bias_offsets_[layer], layer_rows(layer)};
}

DenoiserParams DenoiserParams::random_init(const DenoiserDims& dims,
                                           RngStream& rng) {
  DenoiserParams p(dims);
  for (int l = 0; l < dims.linear_layers(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.layer_cols(l)));
    auto w = p.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = scale * rng.gaussian();
      }
    }
    // biases stay zero
  }
  return p;
}

Latent forward_noise(const Latent& z0, int t, const Latent& eps,
                     const VarianceSchedule& sched) {
  const double ab = sched.alpha_bar_at(t);
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

Latent predict_z0(const Latent& z_t, int t, const Latent& eps_hat,
                  const VarianceSchedule& sched) {
  const double ab = sched.alpha_bar_at(t);
  return (z_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

double diffusion_loss(const Latent& eps_hat, const Latent& eps) {
  if (eps_hat.size() != eps.size()) {
    throw ConfigError("diffusion_loss: dimension mismatch");
  }
  return (eps_hat - eps).squaredNorm();
}

namespace {

// Batched MLP evaluation. Rows of X are (z_t (+) time (+) class) inputs;
// hidden activations are tanh, the output layer is linear.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = X
  Eigen::MatrixXd output;
};

void forward_batch(const DenoiserParams& p, const Eigen::MatrixXd& X,
                   ForwardCache& cache) {
  const int L = p.dims().linear_layers();
  cache.activations.assign(1, X);
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd z =
        cache.activations.back() * p.weight(l).transpose();
    z.rowwise() += p.bias(l).transpose();
    if (l + 1 < L) {
      cache.activations.push_back(z.array().tanh().matrix());
    } else {
      cache.output = std::move(z);
    }
  }
}

Eigen::VectorXd backward_batch(const DenoiserParams& p,
                               const ForwardCache& cache,
                               const Eigen::MatrixXd& d_output) {
  const int L = p.dims().linear_layers();
  DenoiserParams grads(p.dims());
  Eigen::MatrixXd g = d_output;
  for (int l = L - 1; l >= 0; --l) {
    grads.weight(l) = g.transpose() * cache.activations[l];
    grads.bias(l) = g.colwise().sum().transpose();
    if (l > 0) {
      const Eigen::MatrixXd& a = cache.activations[l];
      g = (g * p.weight(l)).cwiseProduct(
          (1.0 - a.array().square()).matrix());
    }
  }
  return std::move(grads.flat());
}

Eigen::VectorXd assemble_input(const DenoiserParams& p, const Latent& z_t,
                               const ConditioningVector& c) {
  const DenoiserDims& d = p.dims();
  if (z_t.size() != d.latent_dim) {
    throw ConfigError("denoiser input latent has wrong dimension");
  }
  if (c.time_embedding.size() != d.time_features ||
      c.embedding.size() != d.num_classes) {
    throw ConfigError("conditioning vector shape mismatch");
  }
  Eigen::VectorXd x(d.input_dim());
  x << z_t, c.time_embedding, c.embedding;
  return x;
}

}  // namespace

Latent denoiser_forward(const DenoiserParams& params, const Latent& z_t,
                        const ConditioningVector& c) {
  ForwardCache cache;
  forward_batch(params, assemble_input(params, z_t, c).transpose(), cache);
  return cache.output.row(0).transpose();
}

Latent sample(const DenoiserParams& params, const VarianceSchedule& sched,
              int label, int steps, RngStream& rng) {
  const int T = sched.timesteps();
  if (steps < 1 || steps > T) {
    throw ConfigError("sampling steps must lie in [1, timesteps]");
  }
  const DenoiserDims& dims = params.dims();
  // Evenly strided subsequence of {1..T}; the last stride point is T.
  std::vector<int> stride(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    stride[static_cast<std::size_t>(k - 1)] = static_cast<int>(
        std::llround(static_cast<double>(k) * T / steps));
  }

  Latent z = gaussian_draw(rng, dims.latent_dim);
  for (int k = steps; k >= 1; --k) {
    const int t = stride[static_cast<std::size_t>(k - 1)];
    const ConditioningVector c = make_conditioning(
        label, dims.num_classes, t, T, dims.time_features);
    const Latent eps_hat = denoiser_forward(params, z, c);
    const Latent z0_hat = predict_z0(z, t, eps_hat, sched);
    if (k > 1) {
      // Re-noise the clean estimate analytically to the previous stride
      // point, keeping the predicted noise (no stochastic injection).
      const double ab_prev =
          sched.alpha_bar_at(stride[static_cast<std::size_t>(k - 2)]);
      z = std::sqrt(ab_prev) * z0_hat + std::sqrt(1.0 - ab_prev) * eps_hat;
    } else {
      z = z0_hat;
    }
    if (!z.allFinite()) {
      throw SamplingError("non-finite latent at sampling step " +
                          std::to_string(steps - k + 1));
    }
  }
  return z;
}

StepEval loss_gradient(const DenoiserParams& params,
                       const VarianceSchedule& sched,
                       const std::vector<TrainExample>& batch,
                       const MemoryBank* memories, const LossWeights& w) {
  if (batch.empty()) {
    throw ConfigError("loss_gradient: empty batch");
  }
  const DenoiserDims& dims = params.dims();
  const int T = sched.timesteps();
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = dims.latent_dim;

  Eigen::MatrixXd X(B, dims.input_dim());
  Eigen::MatrixXd Zt(B, d);
  for (Eigen::Index i = 0; i < B; ++i) {
    const TrainExample& ex = batch[static_cast<std::size_t>(i)];
    const Latent z_t = forward_noise(ex.z0, ex.t, ex.eps, sched);
    const ConditioningVector c = make_conditioning(
        ex.label, dims.num_classes, ex.t, T, dims.time_features);
    Zt.row(i) = z_t.transpose();
    X.row(i) = assemble_input(params, z_t, c).transpose();
  }

  ForwardCache cache;
  forward_batch(params, X, cache);

  StepEval eval;
  eval.per_example.reserve(static_cast<std::size_t>(B));
  eval.z_hat.reserve(static_cast<std::size_t>(B));
  Eigen::MatrixXd d_output(B, d);

  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const TrainExample& ex = batch[static_cast<std::size_t>(i)];
    const Latent eps_hat = cache.output.row(i).transpose();
    const Latent z_t = Zt.row(i).transpose();
    const double ab = sched.alpha_bar_at(ex.t);
    const double noise_scale = std::sqrt(1.0 - ab);
    const double signal_scale = std::sqrt(ab);
    const Latent z_hat = (z_t - noise_scale * eps_hat) / signal_scale;

    const double diff = diffusion_loss(eps_hat, ex.eps);
    TermValue rl;
    TermValue gl;
    Latent dz_hat = Latent::Zero(d);
    if (memories != nullptr) {
      const MemorySet& m_real = memories->real(ex.label);
      const MemorySet& m_gen = memories->gen(ex.label);
      rl = real_loss(z_hat, m_real);
      gl = gen_loss(z_hat, m_gen);
      if (rl.index) {
        dz_hat -= w.lambda_real *
                  cosine_similarity_gradient(z_hat, m_real.latent(*rl.index));
      }
      if (gl.index) {
        dz_hat += w.lambda_gen *
                  cosine_similarity_gradient(z_hat, m_gen.latent(*gl.index));
      }
    }
    const LossBreakdown breakdown = combined_loss(diff, rl, gl, w);
    eval.mean_total += breakdown.total * inv_b;
    eval.per_example.push_back(breakdown);
    eval.z_hat.push_back(z_hat);

    // d z_hat / d eps_hat = -(noise_scale / signal_scale) * identity.
    d_output.row(i) =
        inv_b * (2.0 * (eps_hat - ex.eps) -
                 (noise_scale / signal_scale) * dz_hat)
                    .transpose();
  }

  eval.grad = backward_batch(params, cache, d_output);
  if (!eval.grad.allFinite()) {
    throw TrainingError("loss_gradient: non-finite gradient");
  }
  return eval;
}

namespace {
constexpr char kParamsMagic[8] = {'D', 'D', 'L', 'A', 'T', 'N', 'T', '1'};
constexpr std::uint32_t kParamsVersion = 1;
}  // namespace

void save_params(const DenoiserParams& params,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(kParamsMagic, sizeof(kParamsMagic));
  write_u32(out, kParamsVersion);
  const DenoiserDims& d = params.dims();
  write_u32(out, static_cast<std::uint32_t>(d.latent_dim));
  write_u32(out, static_cast<std::uint32_t>(d.time_features));
  write_u32(out, static_cast<std::uint32_t>(d.num_classes));
  write_u32(out, static_cast<std::uint32_t>(d.hidden_width));
  write_u32(out, static_cast<std::uint32_t>(d.hidden_layers));
  write_u64(out, static_cast<std::uint64_t>(params.flat().size()));
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) {
    write_f64(out, params.flat()[i]);
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

DenoiserParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0) {
    throw IoError("not a parameter file: " + path.string());
  }
  const std::uint32_t version = read_u32(in);
  if (version != kParamsVersion) {
    throw IoError("unsupported parameter file version " +
                  std::to_string(version));
  }
  DenoiserDims d;
  d.latent_dim = static_cast<int>(read_u32(in));
  d.time_features = static_cast<int>(read_u32(in));
  d.num_classes = static_cast<int>(read_u32(in));
  d.hidden_width = static_cast<int>(read_u32(in));
  d.hidden_layers = static_cast<int>(read_u32(in));
  DenoiserParams params(d);
  const std::uint64_t count = read_u64(in);
  if (count != static_cast<std::uint64_t>(params.flat().size())) {
    throw IoError("parameter count mismatch in " + path.string());
  }
  for (Eigen::Index i = 0; i < params.flat().size(); ++i) {
    params.flat()[i] = read_f64(in);
  }
  return params;
}

}  // namespace distill
