#include "pift/operator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pift/fft.hpp"
#include "pift/rng.hpp"

namespace pift {

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

/// Retained mode pairs per layer: two corner blocks of m x m.
std::size_t retained_modes(const OperatorConfig& cfg) {
  return 2ull * cfg.modes * cfg.modes;
}

/// Lifting fan-in: the task channels plus the fixed x/y coordinate channels.
int lifted_channels(const OperatorConfig& cfg) { return cfg.in_channels + 2; }

/// FFT bin (row, col) of retained mode index k on an n x n spectrum.
/// Indices [0, m^2) are the non-negative row block, [m^2, 2 m^2) the
/// negative row block.
inline std::pair<int, int> mode_bin(std::size_t k, int m, int n) {
  const int a = static_cast<int>(k) / m;
  const int q = static_cast<int>(k) % m;
  const int p = a < m ? a : n - 2 * m + a;
  return {p, q};
}

struct Offsets {
  std::size_t lifting_w = 0;
  std::size_t lifting_b = 0;
  std::vector<std::size_t> spectral;
  std::vector<std::size_t> bypass_w;
  std::vector<std::size_t> bypass_b;
  std::size_t projection_w = 0;
  std::size_t projection_b = 0;
  std::size_t total = 0;
};

Offsets offsets_for(const OperatorConfig& cfg) {
  const std::size_t w = cfg.width;
  const std::size_t mk = retained_modes(cfg);
  Offsets off;
  std::size_t cursor = 0;
  off.lifting_w = cursor;
  cursor += w * lifted_channels(cfg);
  off.lifting_b = cursor;
  cursor += w;
  for (int l = 0; l < cfg.layers; ++l) {
    off.spectral.push_back(cursor);
    cursor += mk * w * w * 2;
    off.bypass_w.push_back(cursor);
    cursor += w * w;
    off.bypass_b.push_back(cursor);
    cursor += w;
  }
  off.projection_w = cursor;
  cursor += w;
  off.projection_b = cursor;
  cursor += 1;
  off.total = cursor;
  return off;
}

}  // namespace

std::vector<ParamBlock> param_layout(const OperatorConfig& config) {
  config.validate();
  const Offsets off = offsets_for(config);
  const std::size_t w = config.width;
  const std::size_t mk = retained_modes(config);
  std::vector<ParamBlock> blocks;
  blocks.push_back({"lifting_weight", ParamSubset::EmbedRecovery, off.lifting_w,
                    w * lifted_channels(config)});
  blocks.push_back({"lifting_bias", ParamSubset::EmbedRecovery, off.lifting_b, w});
  for (int l = 0; l < config.layers; ++l) {
    const std::string suffix = std::to_string(l);
    blocks.push_back({"spectral_" + suffix, ParamSubset::Backbone, off.spectral[l],
                      mk * w * w * 2});
    blocks.push_back({"bypass_weight_" + suffix, ParamSubset::Backbone, off.bypass_w[l],
                      w * w});
    blocks.push_back({"bypass_bias_" + suffix, ParamSubset::Backbone, off.bypass_b[l], w});
  }
  blocks.push_back({"projection_weight", ParamSubset::EmbedRecovery, off.projection_w, w});
  blocks.push_back({"projection_bias", ParamSubset::EmbedRecovery, off.projection_b, 1});
  return blocks;
}

std::size_t param_count(const OperatorConfig& config) {
  config.validate();
  return offsets_for(config).total;
}

ModelParams init_params(const OperatorConfig& config, std::uint64_t seed) {
  config.validate();
  const Offsets off = offsets_for(config);
  ModelParams params;
  params.config = config;
  params.values.assign(off.total, 0.0);
  Rng rng(seed);

  const double lift_scale =
      1.0 / std::sqrt(static_cast<double>(lifted_channels(config)));
  for (std::size_t k = 0;
       k < static_cast<std::size_t>(config.width) * lifted_channels(config); ++k) {
    params.values[off.lifting_w + k] = rng.uniform(-lift_scale, lift_scale);
  }
  const double spectral_scale =
      1.0 / (static_cast<double>(config.width) * config.modes);
  const double bypass_scale = 1.0 / std::sqrt(static_cast<double>(config.width));
  const std::size_t mk = retained_modes(config);
  for (int l = 0; l < config.layers; ++l) {
    for (std::size_t k = 0; k < mk * config.width * config.width * 2; ++k) {
      params.values[off.spectral[l] + k] =
          spectral_scale * rng.uniform(-1.0, 1.0);
    }
    for (std::size_t k = 0; k < static_cast<std::size_t>(config.width) * config.width;
         ++k) {
      params.values[off.bypass_w[l] + k] = rng.uniform(-bypass_scale, bypass_scale);
    }
  }
  for (int c = 0; c < config.width; ++c) {
    params.values[off.projection_w + c] = rng.uniform(-bypass_scale, bypass_scale);
  }
  return params;
}

ScalarField2D forward(const ModelParams& params,
                      const std::vector<ScalarField2D>& input, Workspace* ws) {
  const OperatorConfig& cfg = params.config;
  cfg.validate();
  if (params.values.size() != param_count(cfg)) {
    throw std::invalid_argument("forward: parameter vector does not match config");
  }
  if (static_cast<int>(input.size()) != cfg.in_channels) {
    throw std::invalid_argument("forward: input channel count mismatch");
  }
  const Grid grid = input[0].grid();
  for (const auto& ch : input) {
    if (!(ch.grid() == grid)) {
      throw std::invalid_argument("forward: input channels on different grids");
    }
  }
  const int n = grid.n;
  if (2 * cfg.modes > n) {
    throw std::invalid_argument("forward: retained modes exceed n/2");
  }

  thread_local Workspace fallback;
  Workspace& w = ws ? *ws : fallback;

  const std::size_t n2 = static_cast<std::size_t>(n) * n;
  const int width = cfg.width;
  const int m = cfg.modes;
  const std::size_t mk = retained_modes(cfg);
  const Offsets off = offsets_for(cfg);
  const double* P = params.values.data();

  w.n = n;
  const int lifted = lifted_channels(cfg);
  w.input.resize(n2 * lifted);
  for (int c = 0; c < cfg.in_channels; ++c) {
    std::memcpy(w.input.data() + c * n2, input[c].values().data(), n2 * sizeof(double));
  }
  {
    // fixed coordinate channels
    double* xs = w.input.data() + static_cast<std::size_t>(cfg.in_channels) * n2;
    double* ys = w.input.data() + static_cast<std::size_t>(cfg.in_channels + 1) * n2;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        xs[static_cast<std::size_t>(i) * n + j] = grid.x(j);
        ys[static_cast<std::size_t>(i) * n + j] = grid.y(i);
      }
    }
  }
  w.layer_in.resize(cfg.layers);
  w.layer_vhat.resize(cfg.layers);
  w.layer_z.resize(cfg.layers);
  w.scratch.resize(n2);

  // Lifting: per-node affine map of input channels into the hidden width.
  std::vector<double> v(static_cast<std::size_t>(width) * n2);
  for (int c = 0; c < width; ++c) {
    const double bias = P[off.lifting_b + c];
    double* vc = v.data() + static_cast<std::size_t>(c) * n2;
    for (std::size_t x = 0; x < n2; ++x) vc[x] = bias;
    for (int ci = 0; ci < lifted; ++ci) {
      const double weight =
          P[off.lifting_w + static_cast<std::size_t>(c) * lifted + ci];
      const double* in = w.input.data() + static_cast<std::size_t>(ci) * n2;
      for (std::size_t x = 0; x < n2; ++x) vc[x] += weight * in[x];
    }
  }

  const double inv_n2 = 1.0 / static_cast<double>(n2);
  std::vector<double> z(static_cast<std::size_t>(width) * n2);
  for (int l = 0; l < cfg.layers; ++l) {
    w.layer_in[l] = v;

    // Retained spectrum of every channel, stored as [mode][channel].
    auto& vhat = w.layer_vhat[l];
    vhat.assign(mk * width, {0.0, 0.0});
    for (int c = 0; c < width; ++c) {
      const double* vc = v.data() + static_cast<std::size_t>(c) * n2;
      for (std::size_t x = 0; x < n2; ++x) w.scratch[x] = {vc[x], 0.0};
      fft2_forward(w.scratch.data(), n);
      for (std::size_t k = 0; k < mk; ++k) {
        const auto [p, q] = mode_bin(k, m, n);
        vhat[k * width + c] = w.scratch[static_cast<std::size_t>(p) * n + q];
      }
    }

    const double* R = P + off.spectral[l];
    const double* B = P + off.bypass_w[l];
    const double* bias = P + off.bypass_b[l];
    for (int o = 0; o < width; ++o) {
      // Spectral path: mix retained modes, inverse transform, take Re.
      std::fill(w.scratch.begin(), w.scratch.end(), std::complex<double>{0.0, 0.0});
      for (std::size_t k = 0; k < mk; ++k) {
        const double* rk = R + (k * width + o) * width * 2;
        const std::complex<double>* vk = vhat.data() + k * width;
        double re = 0.0;
        double im = 0.0;
        for (int c = 0; c < width; ++c) {
          const double wr = rk[2 * c];
          const double wi = rk[2 * c + 1];
          re += wr * vk[c].real() - wi * vk[c].imag();
          im += wr * vk[c].imag() + wi * vk[c].real();
        }
        const auto [p, q] = mode_bin(k, m, n);
        w.scratch[static_cast<std::size_t>(p) * n + q] = {re, im};
      }
      fft2_inverse_unnorm(w.scratch.data(), n);

      double* zo = z.data() + static_cast<std::size_t>(o) * n2;
      const double ob = bias[o];
      for (std::size_t x = 0; x < n2; ++x) {
        zo[x] = w.scratch[x].real() * inv_n2 + ob;
      }
      // Pointwise affine bypass.
      for (int c = 0; c < width; ++c) {
        const double weight = B[static_cast<std::size_t>(o) * width + c];
        const double* vc = v.data() + static_cast<std::size_t>(c) * n2;
        for (std::size_t x = 0; x < n2; ++x) zo[x] += weight * vc[x];
      }
    }

    w.layer_z[l] = z;
    for (std::size_t k = 0; k < z.size(); ++k) v[k] = silu(z[k]);
  }
  w.final_act = v;

  ScalarField2D out(grid);
  double* o = out.values().data();
  const double pb = P[off.projection_b];
  for (std::size_t x = 0; x < n2; ++x) o[x] = pb;
  for (int c = 0; c < width; ++c) {
    const double weight = P[off.projection_w + c];
    const double* vc = v.data() + static_cast<std::size_t>(c) * n2;
    for (std::size_t x = 0; x < n2; ++x) o[x] += weight * vc[x];
  }
  return out;
}

std::vector<double> backward(const ModelParams& params, const Workspace& ws,
                             const ScalarField2D& dout) {
  const OperatorConfig& cfg = params.config;
  const int n = ws.n;
  if (n == 0 || dout.n() != n) {
    throw std::invalid_argument("backward: workspace does not match dout");
  }
  const std::size_t n2 = static_cast<std::size_t>(n) * n;
  const int width = cfg.width;
  const int m = cfg.modes;
  const std::size_t mk = retained_modes(cfg);
  const Offsets off = offsets_for(cfg);
  const double* P = params.values.data();
  const double inv_n2 = 1.0 / static_cast<double>(n2);

  std::vector<double> grad(params.values.size(), 0.0);
  double* G = grad.data();

  // Projection.
  const double* g_out = dout.values().data();
  std::vector<double> g_v(static_cast<std::size_t>(width) * n2);
  for (int c = 0; c < width; ++c) {
    const double* vc = ws.final_act.data() + static_cast<std::size_t>(c) * n2;
    double acc = 0.0;
    const double weight = P[off.projection_w + c];
    double* gvc = g_v.data() + static_cast<std::size_t>(c) * n2;
    for (std::size_t x = 0; x < n2; ++x) {
      acc += g_out[x] * vc[x];
      gvc[x] = weight * g_out[x];
    }
    G[off.projection_w + c] = acc;
  }
  {
    double acc = 0.0;
    for (std::size_t x = 0; x < n2; ++x) acc += g_out[x];
    G[off.projection_b] = acc;
  }

  std::vector<double> g_z(static_cast<std::size_t>(width) * n2);
  std::vector<double> g_prev(static_cast<std::size_t>(width) * n2);
  std::vector<std::complex<double>> ghat(mk);
  std::vector<std::complex<double>> tmix(mk * width);
  std::vector<std::complex<double>> scratch(n2);

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& z = ws.layer_z[l];
    const auto& v_in = ws.layer_in[l];
    const auto& vhat = ws.layer_vhat[l];
    const double* R = P + off.spectral[l];
    const double* B = P + off.bypass_w[l];

    for (std::size_t k = 0; k < g_z.size(); ++k) {
      g_z[k] = g_v[k] * silu_derivative(z[k]);
    }
    std::fill(g_prev.begin(), g_prev.end(), 0.0);
    std::fill(tmix.begin(), tmix.end(), std::complex<double>{0.0, 0.0});

    for (int o = 0; o < width; ++o) {
      const double* gzo = g_z.data() + static_cast<std::size_t>(o) * n2;

      // Bias and bypass.
      double bias_acc = 0.0;
      for (std::size_t x = 0; x < n2; ++x) bias_acc += gzo[x];
      G[off.bypass_b[l] + o] = bias_acc;
      for (int c = 0; c < width; ++c) {
        const double* vc = v_in.data() + static_cast<std::size_t>(c) * n2;
        double acc = 0.0;
        const double weight = B[static_cast<std::size_t>(o) * width + c];
        double* gpc = g_prev.data() + static_cast<std::size_t>(c) * n2;
        for (std::size_t x = 0; x < n2; ++x) {
          acc += gzo[x] * vc[x];
          gpc[x] += weight * gzo[x];
        }
        G[off.bypass_w[l] + static_cast<std::size_t>(o) * width + c] = acc;
      }

      // Spectral path: dL/dYhat = FFT(g_z) / n^2 on the retained modes.
      for (std::size_t x = 0; x < n2; ++x) scratch[x] = {gzo[x], 0.0};
      fft2_forward(scratch.data(), n);
      for (std::size_t k = 0; k < mk; ++k) {
        const auto [p, q] = mode_bin(k, m, n);
        ghat[k] = scratch[static_cast<std::size_t>(p) * n + q] * inv_n2;
      }
      for (std::size_t k = 0; k < mk; ++k) {
        const std::complex<double> gk = ghat[k];
        const std::complex<double>* vk = vhat.data() + k * width;
        const double* rk = R + (k * width + o) * width * 2;
        double* grk = G + off.spectral[l] + (k * width + o) * width * 2;
        std::complex<double>* tk = tmix.data() + k * width;
        for (int c = 0; c < width; ++c) {
          // dR = G_Y * conj(Vhat); G_Vhat += conj(R) * G_Y.
          const std::complex<double> vcj = std::conj(vk[c]);
          grk[2 * c] = gk.real() * vcj.real() - gk.imag() * vcj.imag();
          grk[2 * c + 1] = gk.real() * vcj.imag() + gk.imag() * vcj.real();
          const std::complex<double> rcj{rk[2 * c], -rk[2 * c + 1]};
          tk[c] += rcj * gk;
        }
      }
    }

    // Input gradient of the spectral path: Re of the unnormalized adjoint
    // transform of the mixed spectrum gradient.
    for (int c = 0; c < width; ++c) {
      std::fill(scratch.begin(), scratch.end(), std::complex<double>{0.0, 0.0});
      for (std::size_t k = 0; k < mk; ++k) {
        const auto [p, q] = mode_bin(k, m, n);
        scratch[static_cast<std::size_t>(p) * n + q] = tmix[k * width + c];
      }
      fft2_inverse_unnorm(scratch.data(), n);
      double* gpc = g_prev.data() + static_cast<std::size_t>(c) * n2;
      for (std::size_t x = 0; x < n2; ++x) gpc[x] += scratch[x].real();
    }
    g_v.swap(g_prev);
  }

  // Lifting.
  for (int c = 0; c < width; ++c) {
    const double* gvc = g_v.data() + static_cast<std::size_t>(c) * n2;
    double bias_acc = 0.0;
    for (std::size_t x = 0; x < n2; ++x) bias_acc += gvc[x];
    G[off.lifting_b + c] = bias_acc;
    const int lifted = lifted_channels(cfg);
    for (int ci = 0; ci < lifted; ++ci) {
      const double* in = ws.input.data() + static_cast<std::size_t>(ci) * n2;
      double acc = 0.0;
      for (std::size_t x = 0; x < n2; ++x) acc += gvc[x] * in[x];
      G[off.lifting_w + static_cast<std::size_t>(c) * lifted + ci] = acc;
    }
  }
  return grad;
}

BatchGradient gradient(const ModelParams& params,
                       const std::vector<std::vector<ScalarField2D>>& batch,
                       const std::function<LossGrad(int, const ScalarField2D&)>& loss) {
  if (batch.empty()) {
    throw std::invalid_argument("gradient: empty batch");
  }
  BatchGradient out;
  out.grad.assign(params.values.size(), 0.0);
  Workspace ws;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const ScalarField2D pred = forward(params, batch[s], &ws);
    const LossGrad lg = loss(static_cast<int>(s), pred);
    if (!std::isfinite(lg.value)) {
      throw std::runtime_error("gradient: non-finite loss at sample " + std::to_string(s));
    }
    out.loss += lg.value;
    const std::vector<double> g = backward(params, ws, lg.dpred);
    for (std::size_t k = 0; k < g.size(); ++k) out.grad[k] += g[k];
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  checkpoint.config.validate();
  if (checkpoint.values.size() != param_count(checkpoint.config)) {
    throw CheckpointError("save_checkpoint: parameter vector does not match config");
  }
  nlohmann::json subsets = nlohmann::json::array();
  for (const auto& block : param_layout(checkpoint.config)) {
    subsets.push_back(
        {{"name", block.name},
         {"subset", block.subset == ParamSubset::Backbone ? "backbone" : "embed_recovery"},
         {"offset", block.offset},
         {"size", block.size}});
  }
  nlohmann::json header = {
      {"format_version", 1},
      {"config",
       {{"in_channels", checkpoint.config.in_channels},
        {"width", checkpoint.config.width},
        {"layers", checkpoint.config.layers},
        {"modes", checkpoint.config.modes}}},
      {"param_count", checkpoint.values.size()},
      {"subsets", subsets},
      {"metadata", checkpoint.metadata},
  };
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("save_checkpoint: cannot open " + path.string());
  }
  out << header.dump() << "\n";
  out.write(reinterpret_cast<const char*>(checkpoint.values.data()),
            static_cast<std::streamsize>(checkpoint.values.size() * sizeof(double)));
  if (!out.good()) {
    throw CheckpointError("save_checkpoint: write failed for " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("load_checkpoint: cannot open " + path.string());
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw CheckpointError("load_checkpoint: missing header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& exc) {
    throw CheckpointError(std::string("load_checkpoint: malformed header: ") + exc.what());
  }

  Checkpoint ck;
  try {
    if (header.at("format_version").get<int>() != 1) {
      throw CheckpointError("load_checkpoint: unsupported format_version");
    }
    const auto& cfg = header.at("config");
    ck.config.in_channels = cfg.at("in_channels").get<int>();
    ck.config.width = cfg.at("width").get<int>();
    ck.config.layers = cfg.at("layers").get<int>();
    ck.config.modes = cfg.at("modes").get<int>();
    ck.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& exc) {
    throw CheckpointError(std::string("load_checkpoint: header field error: ") + exc.what());
  }
  ck.config.validate();

  const std::size_t expected = header.at("param_count").get<std::size_t>();
  if (expected != param_count(ck.config)) {
    throw CheckpointError("load_checkpoint: param_count does not match config");
  }
  ck.values.resize(expected);
  in.read(reinterpret_cast<char*>(ck.values.data()),
          static_cast<std::streamsize>(expected * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(expected * sizeof(double))) {
    throw CheckpointError("load_checkpoint: truncated parameter blob in " + path.string());
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw CheckpointError("load_checkpoint: trailing bytes in " + path.string());
  }
  return ck;
}

ModelParams transfer_init(const Checkpoint& pretrained, const OperatorConfig& new_config,
                          std::uint64_t seed) {
  new_config.validate();
  if (pretrained.config.width != new_config.width ||
      pretrained.config.layers != new_config.layers ||
      pretrained.config.modes != new_config.modes) {
    throw CheckpointError("transfer_init: incompatible backbone shapes");
  }
  if (pretrained.values.size() != param_count(pretrained.config)) {
    throw CheckpointError("transfer_init: checkpoint parameter vector is malformed");
  }

  ModelParams params = init_params(new_config, seed);
  const auto old_blocks = param_layout(pretrained.config);
  const auto new_blocks = param_layout(new_config);
  for (const auto& nb : new_blocks) {
    if (nb.subset != ParamSubset::Backbone) continue;
    for (const auto& ob : old_blocks) {
      if (ob.name == nb.name) {
        if (ob.size != nb.size) {
          throw CheckpointError("transfer_init: block size mismatch for " + nb.name);
        }
        std::memcpy(params.values.data() + nb.offset,
                    pretrained.values.data() + ob.offset, nb.size * sizeof(double));
        break;
      }
    }
  }
  return params;
}

}  // namespace pift
