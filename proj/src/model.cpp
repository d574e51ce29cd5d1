#include "latpred/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latpred/kernels.hpp"
#include "latpred/rng.hpp"

namespace latpred {

std::string ModelConfig::invariant_violation() const {
  if (input_dim != kNumFeatures) return "input_dim must be 13";
  if (proj_dim == 0 || hidden == 0 || cls_hidden == 0) return "dimensions must be positive";
  if (layers < 1 || layers > 3) return "layers must be 1, 2 or 3";
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) return "dropout_p must be in [0, 1)";
  if (!(lambda_cls >= 0.0)) return "lambda_cls must be non-negative";
  return {};
}

template <typename T>
ModelParameters<T>::ModelParameters(const ModelConfig& config) : config_(config) {
  if (auto why = config.invariant_violation(); !why.empty()) {
    throw std::invalid_argument("model config: " + why);
  }
  auto add = [this](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    tensors_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0))});
    return tensors_.size() - 1;
  };
  const std::size_t H = config.hidden;
  const std::size_t D = config.state_dim();
  proj_w = add("input_proj.weight", {config.proj_dim, config.input_dim});
  proj_b = add("input_proj.bias", {config.proj_dim});
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.proj_dim : D;
    for (std::size_t dir = 0; dir < config.directions(); ++dir) {
      const std::string suffix = std::to_string(l) + (dir == 1 ? "_reverse" : "");
      RnnIndex idx{};
      idx.w_ih = add("rnn.weight_ih_l" + suffix, {4 * H, in});
      idx.w_hh = add("rnn.weight_hh_l" + suffix, {4 * H, H});
      idx.b_ih = add("rnn.bias_ih_l" + suffix, {4 * H});
      idx.b_hh = add("rnn.bias_hh_l" + suffix, {4 * H});
      rnn_.push_back(idx);
    }
  }
  fc1_w = add("cls_fc1.weight", {config.cls_hidden, D});
  fc1_b = add("cls_fc1.bias", {config.cls_hidden});
  fc2_w = add("cls_fc2.weight", {2, config.cls_hidden});
  fc2_b = add("cls_fc2.bias", {2});
  short_w = add("output_layer_short.weight", {1, D});
  short_b = add("output_layer_short.bias", {1});
  long_w = add("output_layer_long.weight", {1, D});
  long_b = add("output_layer_long.bias", {1});
}

template <typename T>
std::size_t ModelParameters<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

template <typename T>
Tensor<T>* ModelParameters<T>::find(std::string_view name) {
  for (auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
const Tensor<T>* ModelParameters<T>::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
void ModelParameters<T>::set_zero() {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), T(0));
}

template <typename T>
ModelParameters<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParameters<T> p(config);
  Rng rng(seed);
  const std::size_t H = config.hidden;
  for (auto& t : p.tensors()) {
    if (t.shape.size() == 2) {
      const double k = 1.0 / std::sqrt(static_cast<double>(t.shape[1]));
      for (auto& v : t.data) v = static_cast<T>(rng.uniform(-k, k));
    } else if (t.name.starts_with("rnn.bias_ih")) {
      for (std::size_t j = H; j < 2 * H; ++j) t.data[j] = T(1);
    }
  }
  return p;
}

namespace {

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, std::vector<T>& dst) {
  dst.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

template <typename T>
void add_bias(T* rows, std::size_t m, std::size_t n, std::size_t ld, const T* bias) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = rows + i * ld;
    for (std::size_t j = 0; j < n; ++j) row[j] += bias[j];
  }
}

template <typename T>
void add_col_sums(const T* rows, std::size_t m, std::size_t n, std::size_t ld, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = rows + i * ld;
    for (std::size_t j = 0; j < n; ++j) out[j] += row[j];
  }
}

// y = x * W^T + b for W stored [out, in].
template <typename T>
void linear(const T* x, std::size_t m, std::size_t in, std::size_t ldx, const Tensor<T>& w,
            const Tensor<T>& b, T* y, std::vector<T>& wt) {
  const std::size_t out = w.shape[0];
  transpose(w.data.data(), out, in, wt);
  kernels::gemm(false, m, out, in, x, ldx, wt.data(), out, y, out, false);
  add_bias(y, m, out, out, b.data.data());
}

}  // namespace

template <typename T>
const HeadOutputs<T>& forward(const ModelParameters<T>& params, std::span<const T> x,
                              std::size_t batch, std::size_t n, std::size_t r,
                              ForwardCache<T>& cache, const ForwardOptions& opts) {
  const auto& cfg = params.config();
  const std::size_t F = cfg.input_dim;
  if (r == 0 || r > n) throw std::invalid_argument("forward: need 1 <= R <= N");
  if (x.size() != batch * n * F) throw std::invalid_argument("forward: input shape mismatch");
  const std::size_t B = batch;
  const std::size_t s = (n - r) / 2;
  const std::size_t steps = cfg.bidirectional ? n : s + r;
  const std::size_t H = cfg.hidden;
  const std::size_t D = cfg.state_dim();
  const std::size_t P = cfg.proj_dim;
  const std::size_t rows = steps * B;
  const bool dropout = opts.training && cfg.dropout_p > 0.0;

  cache.batch = B;
  cache.steps = steps;
  cache.n = n;
  cache.r = r;
  cache.s = s;

  // Time-major copy of the inputs.
  cache.x.resize(rows * F);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      std::copy_n(x.data() + (b * n + t) * F, F, cache.x.data() + (t * B + b) * F);
    }
  }

  const auto& ts = params.tensors();
  cache.proj.resize(rows * P);
  linear(cache.x.data(), rows, F, F, ts[params.proj_w], ts[params.proj_b], cache.proj.data(),
         cache.wt);

  Rng drop_rng(opts.dropout_seed);
  cache.layers.resize(cfg.layers);
  const T* input = cache.proj.data();
  std::size_t in_dim = P;
  std::vector<T> bias_sum(4 * H);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto& layer = cache.layers[l];
    layer.dirs.resize(cfg.directions());
    layer.out.resize(rows * D);
    for (std::size_t dir = 0; dir < cfg.directions(); ++dir) {
      const auto& idx = params.rnn(l, dir);
      auto& d = layer.dirs[dir];
      d.gates.resize(rows * 4 * H);
      d.c.resize(rows * H);
      d.tanh_c.resize(rows * H);
      transpose(ts[idx.w_ih].data.data(), 4 * H, in_dim, cache.wt);
      kernels::gemm(false, rows, 4 * H, in_dim, input, in_dim, cache.wt.data(), 4 * H,
                    d.gates.data(), 4 * H, false);
      for (std::size_t j = 0; j < 4 * H; ++j) {
        bias_sum[j] = ts[idx.b_ih].data[j] + ts[idx.b_hh].data[j];
      }
      add_bias(d.gates.data(), rows, 4 * H, 4 * H, bias_sum.data());
      transpose(ts[idx.w_hh].data.data(), 4 * H, H, cache.wt);
      const std::size_t off = dir * H;
      for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = dir == 0 ? k : steps - 1 - k;
        const std::size_t tp = dir == 0 ? t - 1 : t + 1;
        T* g = d.gates.data() + t * B * 4 * H;
        const T* c_prev = nullptr;
        if (k > 0) {
          kernels::gemm(false, B, 4 * H, H, layer.out.data() + tp * B * D + off, D,
                        cache.wt.data(), 4 * H, g, 4 * H, true);
          c_prev = d.c.data() + tp * B * H;
        }
        kernels::lstm_cell_forward(B, H, g, c_prev, d.c.data() + t * B * H,
                                   d.tanh_c.data() + t * B * H,
                                   layer.out.data() + t * B * D + off, D);
      }
    }
    if (dropout) {
      const T keep = T(1) / T(1 - cfg.dropout_p);
      layer.mask.resize(rows * D);
      layer.dropped.resize(rows * D);
      for (std::size_t i = 0; i < rows * D; ++i) {
        layer.mask[i] = drop_rng.uniform() < cfg.dropout_p ? T(0) : keep;
        layer.dropped[i] = layer.out[i] * layer.mask[i];
      }
      input = layer.dropped.data();
    } else {
      layer.mask.clear();
      layer.dropped.clear();
      input = layer.out.data();
    }
    in_dim = D;
  }

  // Heads over the centered target rows [s*B, (s+R)*B).
  const std::size_t m = r * B;
  const T* S = input + s * B * D;
  const std::size_t C = cfg.cls_hidden;
  cache.z1.resize(m * C);
  cache.a1.resize(m * C);
  linear(S, m, D, D, ts[params.fc1_w], ts[params.fc1_b], cache.z1.data(), cache.wt);
  for (std::size_t i = 0; i < m * C; ++i) cache.a1[i] = std::max(cache.z1[i], T(0));
  std::vector<T> logits_tm(m * 2), short_tm(m), long_tm(m);
  linear(cache.a1.data(), m, C, C, ts[params.fc2_w], ts[params.fc2_b], logits_tm.data(),
         cache.wt);
  linear(S, m, D, D, ts[params.short_w], ts[params.short_b], short_tm.data(), cache.wt);
  linear(S, m, D, D, ts[params.long_w], ts[params.long_b], long_tm.data(), cache.wt);

  auto& h = cache.heads;
  h.batch = B;
  h.r = r;
  h.z_short.resize(m);
  h.z_long.resize(m);
  h.logits.resize(m * 2);
  for (std::size_t t = 0; t < r; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t tm = t * B + b;
      const std::size_t wm = b * r + t;
      h.z_short[wm] = short_tm[tm];
      h.z_long[wm] = long_tm[tm];
      h.logits[2 * wm] = logits_tm[2 * tm];
      h.logits[2 * wm + 1] = logits_tm[2 * tm + 1];
    }
  }
  return h;
}

template <typename T>
PredictionBatch predict(const ModelParameters<T>& params, std::span<const T> x,
                        std::size_t batch, std::size_t n, std::size_t r, ForwardCache<T>& cache,
                        const TargetConfig& tcfg) {
  const auto& h = forward(params, x, batch, n, r, cache, ForwardOptions{});
  PredictionBatch p;
  p.batch = batch;
  p.r = r;
  const std::size_t m = batch * r;
  p.z_hat.resize(m);
  p.logits.resize(2 * m);
  p.c_hat.resize(m);
  p.y_hat.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T l0 = h.logits[2 * i], l1 = h.logits[2 * i + 1];
    const std::uint8_t c = l1 > l0 ? 1 : 0;
    const T z = c ? h.z_long[i] : h.z_short[i];
    p.c_hat[i] = c;
    p.z_hat[i] = static_cast<float>(z);
    p.logits[2 * i] = static_cast<float>(l0);
    p.logits[2 * i + 1] = static_cast<float>(l1);
    p.y_hat[i] = invert_target(static_cast<double>(z), tcfg);
  }
  return p;
}

namespace {

// Per-position loss terms and their derivatives. Returns (reg, cls) sums.
template <typename T>
LossParts loss_terms(const HeadOutputs<T>& out, std::span<const float> targets_z,
                     std::span<const std::uint8_t> targets_c, HeadMask mask, double lambda,
                     std::vector<T>* d_short, std::vector<T>* d_long, std::vector<T>* d_logits) {
  const std::size_t m = out.batch * out.r;
  if (targets_z.size() != m || targets_c.size() != m) {
    throw std::invalid_argument("loss: target shape mismatch");
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  if (d_short) {
    d_short->assign(m, T(0));
    d_long->assign(m, T(0));
    d_logits->assign(2 * m, T(0));
  }
  double reg = 0.0, cls = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double l0 = static_cast<double>(out.logits[2 * i]);
    const double l1 = static_cast<double>(out.logits[2 * i + 1]);
    const std::uint8_t sel = mask == HeadMask::Teacher ? targets_c[i] : (l1 > l0 ? 1 : 0);
    const double zh = static_cast<double>(sel ? out.z_long[i] : out.z_short[i]);
    const double d = zh - static_cast<double>(targets_z[i]);
    const double ad = std::abs(d);
    reg += ad < 1.0 ? 0.5 * d * d : ad - 0.5;

    const double mx = std::max(l0, l1);
    const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
    const std::uint8_t c = targets_c[i];
    cls += lse - (c ? l1 : l0);

    if (d_short) {
      const double gd = (ad < 1.0 ? d : (d > 0 ? 1.0 : -1.0)) * inv_m;
      (sel ? (*d_long)[i] : (*d_short)[i]) = static_cast<T>(gd);
      const double p0 = std::exp(l0 - lse), p1 = std::exp(l1 - lse);
      (*d_logits)[2 * i] = static_cast<T>(lambda * (p0 - (c == 0 ? 1.0 : 0.0)) * inv_m);
      (*d_logits)[2 * i + 1] = static_cast<T>(lambda * (p1 - (c == 1 ? 1.0 : 0.0)) * inv_m);
    }
  }
  LossParts parts;
  parts.reg = reg * inv_m;
  parts.cls = cls * inv_m;
  parts.total = parts.reg + lambda * parts.cls;
  return parts;
}

}  // namespace

template <typename T>
LossParts loss(const HeadOutputs<T>& out, std::span<const float> targets_z,
               std::span<const std::uint8_t> targets_c, HeadMask mask, double lambda) {
  return loss_terms<T>(out, targets_z, targets_c, mask, lambda, nullptr, nullptr, nullptr);
}

template <typename T>
LossParts backward(const ModelParameters<T>& params, ForwardCache<T>& cache,
                   std::span<const float> targets_z, std::span<const std::uint8_t> targets_c,
                   double lambda, ModelParameters<T>& grads) {
  const auto& cfg = params.config();
  if (!(grads.config() == cfg)) grads = ModelParameters<T>(cfg);
  grads.set_zero();
  auto& gs = grads.tensors();
  const auto& ts = params.tensors();

  std::vector<T> d_short_wm, d_long_wm, d_logits_wm;
  const LossParts parts = loss_terms<T>(cache.heads, targets_z, targets_c, HeadMask::Teacher,
                                        lambda, &d_short_wm, &d_long_wm, &d_logits_wm);

  const std::size_t B = cache.batch, R = cache.r, s = cache.s, steps = cache.steps;
  const std::size_t H = cfg.hidden, D = cfg.state_dim(), P = cfg.proj_dim, F = cfg.input_dim;
  const std::size_t C = cfg.cls_hidden;
  const std::size_t m = R * B;
  const std::size_t rows = steps * B;

  // Head gradients in time-major row order.
  std::vector<T> d_short(m), d_long(m), d_logits(2 * m);
  for (std::size_t t = 0; t < R; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t tm = t * B + b, wm = b * R + t;
      d_short[tm] = d_short_wm[wm];
      d_long[tm] = d_long_wm[wm];
      d_logits[2 * tm] = d_logits_wm[2 * wm];
      d_logits[2 * tm + 1] = d_logits_wm[2 * wm + 1];
    }
  }

  auto& last = cache.layers.back();
  const T* top = last.dropped.empty() ? last.out.data() : last.dropped.data();
  const T* S = top + s * B * D;

  // cls_fc2
  kernels::gemm(true, 2, C, m, d_logits.data(), 2, cache.a1.data(), C,
                gs[params.fc2_w].data.data(), C, true);
  add_col_sums(d_logits.data(), m, 2, 2, gs[params.fc2_b].data.data());
  std::vector<T> dz1(m * C);
  kernels::gemm(false, m, C, 2, d_logits.data(), 2, ts[params.fc2_w].data.data(), C,
                dz1.data(), C, false);
  for (std::size_t i = 0; i < m * C; ++i) {
    if (!(cache.z1[i] > T(0))) dz1[i] = T(0);
  }
  // cls_fc1
  kernels::gemm(true, C, D, m, dz1.data(), C, S, D, gs[params.fc1_w].data.data(), D, true);
  add_col_sums(dz1.data(), m, C, C, gs[params.fc1_b].data.data());

  // Gradient wrt the top layer's (dropped) output, all rows.
  cache.d_out.assign(rows * D, T(0));
  T* dS = cache.d_out.data() + s * B * D;
  kernels::gemm(false, m, D, C, dz1.data(), C, ts[params.fc1_w].data.data(), D, dS, D, true);
  // Regression heads.
  kernels::gemm(true, 1, D, m, d_short.data(), 1, S, D, gs[params.short_w].data.data(), D, true);
  kernels::gemm(true, 1, D, m, d_long.data(), 1, S, D, gs[params.long_w].data.data(), D, true);
  for (std::size_t i = 0; i < m; ++i) {
    gs[params.short_b].data[0] += d_short[i];
    gs[params.long_b].data[0] += d_long[i];
  }
  kernels::gemm(false, m, D, 1, d_short.data(), 1, ts[params.short_w].data.data(), D, dS, D, true);
  kernels::gemm(false, m, D, 1, d_long.data(), 1, ts[params.long_w].data.data(), D, dS, D, true);

  // Back through the LSTM stack.
  for (std::size_t li = cfg.layers; li-- > 0;) {
    auto& layer = cache.layers[li];
    if (!layer.mask.empty()) {
      for (std::size_t i = 0; i < rows * D; ++i) cache.d_out[i] *= layer.mask[i];
    }
    const std::size_t in_dim = li == 0 ? P : D;
    const T* input;
    if (li == 0) {
      input = cache.proj.data();
    } else {
      const auto& below = cache.layers[li - 1];
      input = below.dropped.empty() ? below.out.data() : below.dropped.data();
    }
    cache.d_in.assign(rows * in_dim, T(0));
    for (std::size_t dir = 0; dir < cfg.directions(); ++dir) {
      const auto& idx = params.rnn(li, dir);
      auto& d = layer.dirs[dir];
      const std::size_t off = dir * H;
      cache.dgates.resize(rows * 4 * H);
      cache.dh.assign(B * H, T(0));
      cache.dc.assign(B * H, T(0));
      cache.dh_total.resize(B * H);
      for (std::size_t k = steps; k-- > 0;) {
        const std::size_t t = dir == 0 ? k : steps - 1 - k;
        const std::size_t tp = dir == 0 ? t - 1 : t + 1;
        for (std::size_t b = 0; b < B; ++b) {
          const T* src = cache.d_out.data() + (t * B + b) * D + off;
          T* dst = cache.dh_total.data() + b * H;
          const T* rec = cache.dh.data() + b * H;
          for (std::size_t j = 0; j < H; ++j) dst[j] = src[j] + rec[j];
        }
        T* dg = cache.dgates.data() + t * B * 4 * H;
        kernels::lstm_cell_backward(B, H, d.gates.data() + t * B * 4 * H,
                                    k > 0 ? d.c.data() + tp * B * H : nullptr,
                                    d.tanh_c.data() + t * B * H, cache.dh_total.data(),
                                    cache.dc.data(), dg);
        if (k > 0) {
          kernels::gemm(false, B, H, 4 * H, dg, 4 * H, ts[idx.w_hh].data.data(), H,
                        cache.dh.data(), H, false);
        }
      }
      if (steps > 1) {
        // dW_hh += sum_t dG_t^T h_{prev(t)}
        const T* dg_rows = cache.dgates.data() + (dir == 0 ? B * 4 * H : 0);
        const T* h_rows = layer.out.data() + (dir == 0 ? 0 : B * D) + off;
        kernels::gemm(true, 4 * H, H, (steps - 1) * B, dg_rows, 4 * H, h_rows, D,
                      gs[idx.w_hh].data.data(), H, true);
      }
      kernels::gemm(true, 4 * H, in_dim, rows, cache.dgates.data(), 4 * H, input, in_dim,
                    gs[idx.w_ih].data.data(), in_dim, true);
      add_col_sums(cache.dgates.data(), rows, 4 * H, 4 * H, gs[idx.b_ih].data.data());
      add_col_sums(cache.dgates.data(), rows, 4 * H, 4 * H, gs[idx.b_hh].data.data());
      kernels::gemm(false, rows, in_dim, 4 * H, cache.dgates.data(), 4 * H,
                    ts[idx.w_ih].data.data(), in_dim, cache.d_in.data(), in_dim, true);
    }
    std::swap(cache.d_out, cache.d_in);
  }

  // Input projection; d_out now holds the gradient at proj.
  kernels::gemm(true, P, F, rows, cache.d_out.data(), P, cache.x.data(), F,
                gs[params.proj_w].data.data(), F, true);
  add_col_sums(cache.d_out.data(), rows, P, P, gs[params.proj_b].data.data());
  return parts;
}

template class ModelParameters<float>;
template class ModelParameters<double>;
template ModelParameters<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParameters<double> init_params<double>(const ModelConfig&, std::uint64_t);
template const HeadOutputs<float>& forward<float>(const ModelParameters<float>&,
                                                  std::span<const float>, std::size_t,
                                                  std::size_t, std::size_t, ForwardCache<float>&,
                                                  const ForwardOptions&);
template const HeadOutputs<double>& forward<double>(const ModelParameters<double>&,
                                                    std::span<const double>, std::size_t,
                                                    std::size_t, std::size_t,
                                                    ForwardCache<double>&, const ForwardOptions&);
template PredictionBatch predict<float>(const ModelParameters<float>&, std::span<const float>,
                                        std::size_t, std::size_t, std::size_t,
                                        ForwardCache<float>&, const TargetConfig&);
template PredictionBatch predict<double>(const ModelParameters<double>&, std::span<const double>,
                                         std::size_t, std::size_t, std::size_t,
                                         ForwardCache<double>&, const TargetConfig&);
template LossParts loss<float>(const HeadOutputs<float>&, std::span<const float>,
                               std::span<const std::uint8_t>, HeadMask, double);
template LossParts loss<double>(const HeadOutputs<double>&, std::span<const float>,
                                std::span<const std::uint8_t>, HeadMask, double);
template LossParts backward<float>(const ModelParameters<float>&, ForwardCache<float>&,
                                   std::span<const float>, std::span<const std::uint8_t>,
                                   double, ModelParameters<float>&);
template LossParts backward<double>(const ModelParameters<double>&, ForwardCache<double>&,
                                    std::span<const float>, std::span<const std::uint8_t>,
                                    double, ModelParameters<double>&);

}  // namespace latpred
