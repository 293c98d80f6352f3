#include "heliofarm/gridcast/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace heliofarm::gridcast {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int ModelConfig::max_horizon() const { return horizons.empty() ? 0 : *std::max_element(horizons.begin(), horizons.end()); }

void ModelConfig::validate() const {
  if (cells < 1) throw std::invalid_argument("model needs at least one recurrent cell");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (filters < 1) throw std::invalid_argument("filters must be positive");
  if (dense < 1) throw std::invalid_argument("model needs at least one dense stage");
  if (n_x < 1) throw std::invalid_argument("n_x must be positive");
  if (horizons.empty()) throw std::invalid_argument("at least one horizon is required");
  for (int h : horizons) {
    if (h < 1) throw std::invalid_argument(fmt::format("horizon {} must be at least one minute", h));
  }
  if (height < 1 || width < 1) throw std::invalid_argument("grid must have positive dimensions");
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t F = c.filters, k2 = static_cast<std::size_t>(c.kernel) * c.kernel;
  std::size_t n = 0;
  for (int cell = 0; cell < c.cells; ++cell) {
    const std::size_t in = cell == 0 ? 1 : F;
    n += 4 * F * (in + F) * k2 + 4 * F;
  }
  const std::size_t out = c.output_size();
  std::size_t in = F * c.pixels();
  for (int d = 0; d < c.dense; ++d) {
    n += in * out + out;
    in = out;
  }
  return n;
}

Network::Network(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const int F = config_.filters, k2 = config_.kernel * config_.kernel;
  std::size_t off = 0;
  for (int c = 0; c < config_.cells; ++c) {
    CellLayout l;
    l.in_ch = c == 0 ? 1 : F;
    l.wx = off;
    off += static_cast<std::size_t>(4 * F) * l.in_ch * k2;
    l.wh = off;
    off += static_cast<std::size_t>(4 * F) * F * k2;
    l.b = off;
    off += 4 * F;
    cells_.push_back(l);
  }
  int in = F * config_.pixels();
  for (int d = 0; d < config_.dense; ++d) {
    DenseLayout l{in, config_.output_size(), off, 0};
    off += static_cast<std::size_t>(l.in) * l.out;
    l.b = off;
    off += l.out;
    dense_.push_back(l);
    in = l.out;
  }
  count_ = off;
}

std::vector<double> glorot_init(const ModelConfig& c, std::uint64_t seed) {
  const Network net(c);
  std::vector<double> p(net.parameters(), 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < n; ++i) p[off + i] = u(rng);
  };
  const int F = c.filters, k2 = c.kernel * c.kernel;
  std::size_t off = 0;
  for (int cell = 0; cell < c.cells; ++cell) {
    const int in = cell == 0 ? 1 : F;
    const std::size_t nx = static_cast<std::size_t>(4 * F) * in * k2, nh = static_cast<std::size_t>(4 * F) * F * k2;
    fill(off, nx, in * k2, 4 * F * k2);
    off += nx;
    fill(off, nh, F * k2, 4 * F * k2);
    off += nh + 4 * F;
  }
  int in = F * c.pixels();
  for (int d = 0; d < c.dense; ++d) {
    const std::size_t n = static_cast<std::size_t>(in) * c.output_size();
    fill(off, n, in, c.output_size());
    off += n + c.output_size();
    in = c.output_size();
  }
  return p;
}

// dst[o] += Σ_ci W[o][ci] ⋆ src[ci], 'same' zero padding.
void Network::conv_add(std::span<const double> w, int out_ch, int in_ch, const double* src, double* dst) const {
  const int H = config_.height, W = config_.width, k = config_.kernel, r = k / 2, P = H * W;
  for (int o = 0; o < out_ch; ++o) {
    double* out = dst + static_cast<std::size_t>(o) * P;
    for (int ci = 0; ci < in_ch; ++ci) {
      const double* in = src + static_cast<std::size_t>(ci) * P;
      const double* wk = w.data() + (static_cast<std::size_t>(o) * in_ch + ci) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        const int y0 = std::max(0, r - dy), y1 = std::min(H, H + r - dy);
        for (int dx = 0; dx < k; ++dx) {
          const double wv = wk[dy * k + dx];
          if (wv == 0.0) continue;
          const int x0 = std::max(0, r - dx), x1 = std::min(W, W + r - dx);
          for (int y = y0; y < y1; ++y) {
            const double* srow = in + (y + dy - r) * W + (dx - r);
            double* drow = out + y * W;
            for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

namespace {

// Gradient of dst = W ⋆ src: accumulates dW and, when dsrc is given, dsrc.
void conv_backward(const double* w, double* dw, int out_ch, int in_ch, int H, int W, int k, const double* src,
                   const double* dz, double* dsrc) {
  const int r = k / 2, P = H * W;
  for (int o = 0; o < out_ch; ++o) {
    const double* g = dz + static_cast<std::size_t>(o) * P;
    for (int ci = 0; ci < in_ch; ++ci) {
      const double* in = src + static_cast<std::size_t>(ci) * P;
      double* din = dsrc ? dsrc + static_cast<std::size_t>(ci) * P : nullptr;
      const std::size_t base = (static_cast<std::size_t>(o) * in_ch + ci) * k * k;
      for (int dy = 0; dy < k; ++dy) {
        const int y0 = std::max(0, r - dy), y1 = std::min(H, H + r - dy);
        for (int dx = 0; dx < k; ++dx) {
          const int x0 = std::max(0, r - dx), x1 = std::min(W, W + r - dx);
          const double wv = w[base + dy * k + dx];
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* srow = in + (y + dy - r) * W + (dx - r);
            const double* grow = g + y * W;
            for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (din) {
              double* drow = din + (y + dy - r) * W + (dx - r);
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
          dw[base + dy * k + dx] += acc;
        }
      }
    }
  }
}

void resize_all(std::vector<std::vector<double>>& v, std::size_t n, std::size_t size) {
  v.resize(n);
  for (auto& e : v) e.assign(size, 0.0);
}

}  // namespace

void Network::check_sizes(std::span<const double> params, std::span<const double> x, std::size_t y_size) const {
  if (params.size() != count_) {
    throw ContractError(fmt::format("parameter vector has {} entries, model needs {}", params.size(), count_));
  }
  if (x.size() != static_cast<std::size_t>(config_.input_size())) {
    throw ContractError(fmt::format("input has {} values, model expects {}", x.size(), config_.input_size()));
  }
  if (y_size != static_cast<std::size_t>(config_.output_size())) {
    throw ContractError(fmt::format("output has {} values, model produces {}", y_size, config_.output_size()));
  }
}

void Network::forward(std::span<const double> params, std::span<const double> x, std::span<double> y,
                      Workspace& ws) const {
  check_sizes(params, x, y.size());
  const int C = config_.cells, T = config_.n_x, F = config_.filters, P = config_.pixels();
  const std::size_t steps = static_cast<std::size_t>(C) * T;
  ws.x_in.resize(steps);
  resize_all(ws.gates, steps, static_cast<std::size_t>(4 * F) * P);
  resize_all(ws.cstate, steps, static_cast<std::size_t>(F) * P);
  resize_all(ws.tanh_c, steps, static_cast<std::size_t>(F) * P);
  resize_all(ws.hidden, steps, static_cast<std::size_t>(F) * P);

  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < C; ++c) {
      const CellLayout& l = cells_[c];
      const std::size_t s = static_cast<std::size_t>(c) * T + t;
      if (c == 0) {
        ws.x_in[s].assign(x.begin() + static_cast<std::ptrdiff_t>(t) * P, x.begin() + static_cast<std::ptrdiff_t>(t + 1) * P);
      } else {
        ws.x_in[s] = ws.hidden[s - T];
      }
      auto& z = ws.gates[s];
      for (int q = 0; q < 4 * F; ++q) std::fill_n(z.begin() + static_cast<std::ptrdiff_t>(q) * P, P, params[l.b + q]);
      conv_add(params.subspan(l.wx), 4 * F, l.in_ch, ws.x_in[s].data(), z.data());
      if (t > 0) conv_add(params.subspan(l.wh), 4 * F, F, ws.hidden[s - 1].data(), z.data());
      const std::size_t FP = static_cast<std::size_t>(F) * P;
      double* zi = z.data();
      double* zf = zi + FP;
      double* zo = zf + FP;
      double* zg = zo + FP;
      const double* c_prev = t > 0 ? ws.cstate[s - 1].data() : nullptr;
      for (std::size_t j = 0; j < FP; ++j) {
        zi[j] = sigmoid(zi[j]);
        zf[j] = sigmoid(zf[j]);
        zo[j] = sigmoid(zo[j]);
        zg[j] = std::tanh(zg[j]);
        const double cs = (c_prev ? zf[j] * c_prev[j] : 0.0) + zi[j] * zg[j];
        ws.cstate[s][j] = cs;
        ws.tanh_c[s][j] = std::tanh(cs);
        ws.hidden[s][j] = zo[j] * ws.tanh_c[s][j];
      }
    }
  }

  const std::size_t last = static_cast<std::size_t>(C) * T - 1;
  ws.dense_in.resize(dense_.size());
  ws.dense_out.resize(dense_.size());
  const std::vector<double>* in = &ws.hidden[last];
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    const DenseLayout& l = dense_[d];
    ws.dense_in[d] = *in;
    auto& out = ws.dense_out[d];
    out.assign(params.begin() + static_cast<std::ptrdiff_t>(l.b), params.begin() + static_cast<std::ptrdiff_t>(l.b + l.out));
    const double* a = ws.dense_in[d].data();
    for (int o = 0; o < l.out; ++o) {
      const double* row = params.data() + l.w + static_cast<std::size_t>(o) * l.in;
      double acc = 0.0;
      for (int i = 0; i < l.in; ++i) acc += row[i] * a[i];
      out[o] += acc;
    }
    if (d + 1 < dense_.size()) {
      for (double& v : out) v = std::tanh(v);
    }
    in = &out;
  }
  std::copy(in->begin(), in->end(), y.begin());
}

double Network::loss_and_grad(std::span<const double> params, std::span<const double> x,
                              std::span<const double> y_true, std::span<double> grad, Workspace& ws,
                              double* abs_err) const {
  if (grad.size() != count_) throw ContractError("gradient buffer size differs from parameter count");
  const std::size_t M = config_.output_size();
  ws.dy.resize(M);
  forward(params, x, ws.dy, ws);
  if (y_true.size() != M) throw ContractError("target size differs from model output");

  double loss = 0.0, mae = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    const double r = ws.dy[j] - y_true[j];
    loss += r * r;
    mae += std::abs(r);
    ws.dy[j] = 2.0 * r / static_cast<double>(M);
  }
  loss /= static_cast<double>(M);
  if (abs_err) *abs_err = mae / static_cast<double>(M);

  // Dense stages, last to first. ws.dy holds dL/d(stage output).
  for (std::size_t d = dense_.size(); d-- > 0;) {
    const DenseLayout& l = dense_[d];
    if (d + 1 < dense_.size()) {
      const auto& a = ws.dense_out[d];
      for (int o = 0; o < l.out; ++o) ws.dy[o] *= 1.0 - a[o] * a[o];
    }
    const double* in = ws.dense_in[d].data();
    ws.dx.assign(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double g = ws.dy[o];
      grad[l.b + o] += g;
      if (g == 0.0) continue;
      double* grow = grad.data() + l.w + static_cast<std::size_t>(o) * l.in;
      const double* prow = params.data() + l.w + static_cast<std::size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) {
        grow[i] += g * in[i];
        ws.dx[i] += g * prow[i];
      }
    }
    std::swap(ws.dy, ws.dx);
  }

  // Recurrent cells. dh_above[c] collects gradient reaching hidden[c][t] from the cell above (or the dense head).
  const int C = config_.cells, T = config_.n_x, F = config_.filters, P = config_.pixels();
  const int H = config_.height, W = config_.width, k = config_.kernel;
  const std::size_t FP = static_cast<std::size_t>(F) * P;
  std::vector<std::vector<double>> dh_next(C, std::vector<double>(FP, 0.0)), dc_next(C, std::vector<double>(FP, 0.0));
  std::vector<double> dh_above = ws.dy;  // gradient on hidden[C-1][T-1]
  std::vector<double> dh(FP), dxin;
  ws.dz.resize(4 * FP);

  for (int t = T - 1; t >= 0; --t) {
    for (int c = C - 1; c >= 0; --c) {
      const CellLayout& l = cells_[c];
      const std::size_t s = static_cast<std::size_t>(c) * T + t;
      for (std::size_t j = 0; j < FP; ++j) dh[j] = dh_next[c][j];
      if (c == C - 1) {
        if (t == T - 1) {
          for (std::size_t j = 0; j < FP; ++j) dh[j] += dh_above[j];
        }
      } else {
        for (std::size_t j = 0; j < FP; ++j) dh[j] += dh_above[j];
      }
      const double* gi = ws.gates[s].data();
      const double* gf = gi + FP;
      const double* go = gf + FP;
      const double* gg = go + FP;
      const double* tc = ws.tanh_c[s].data();
      const double* c_prev = t > 0 ? ws.cstate[s - 1].data() : nullptr;
      double* dzi = ws.dz.data();
      double* dzf = dzi + FP;
      double* dzo = dzf + FP;
      double* dzg = dzo + FP;
      for (std::size_t j = 0; j < FP; ++j) {
        const double dc = dc_next[c][j] + dh[j] * go[j] * (1.0 - tc[j] * tc[j]);
        const double d_o = dh[j] * tc[j];
        const double d_i = dc * gg[j];
        const double d_g = dc * gi[j];
        const double d_f = c_prev ? dc * c_prev[j] : 0.0;
        dc_next[c][j] = dc * gf[j];
        dzi[j] = d_i * gi[j] * (1.0 - gi[j]);
        dzf[j] = d_f * gf[j] * (1.0 - gf[j]);
        dzo[j] = d_o * go[j] * (1.0 - go[j]);
        dzg[j] = d_g * (1.0 - gg[j] * gg[j]);
      }
      for (int q = 0; q < 4 * F; ++q) {
        double acc = 0.0;
        const double* g = ws.dz.data() + static_cast<std::size_t>(q) * P;
        for (int p = 0; p < P; ++p) acc += g[p];
        grad[l.b + q] += acc;
      }
      // Input-to-state weights; gradient flows to the cell below when there is one.
      dxin.assign(static_cast<std::size_t>(l.in_ch) * P, 0.0);
      conv_backward(params.data() + l.wx, grad.data() + l.wx, 4 * F, l.in_ch, H, W, k, ws.x_in[s].data(),
                    ws.dz.data(), c > 0 ? dxin.data() : nullptr);
      // State-to-state weights.
      std::fill(dh_next[c].begin(), dh_next[c].end(), 0.0);
      if (t > 0) {
        conv_backward(params.data() + l.wh, grad.data() + l.wh, 4 * F, F, H, W, k, ws.hidden[s - 1].data(),
                      ws.dz.data(), dh_next[c].data());
      }
      if (c > 0) {
        dh_above = dxin;
      }
    }
  }
  return loss;
}

}  // namespace heliofarm::gridcast
