#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "magnav/rng.hpp"
#include "magnav/threadpool.hpp"

#include <json.hpp>

namespace magnav::net {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Topology: strided stem convolution, three residual blocks with
// stride-2 downsampling between them, then a shared noisy linear
// feeding noisy value and advantage heads combined per quantile.
struct NetDescriptor {
  int input_channels = 2;
  int input_size = 84;
  int stem_channels = 32;  // also the width of block 1
  int stem_kernel = 5;
  int block2_channels = 64;
  int block3_channels = 64;
  int shared_dim = 512;
  int actions = 4;
  int quantiles = 32;

  bool operator==(const NetDescriptor&) const = default;
};

inline void to_json(nlohmann::json& j, const NetDescriptor& d) {
  j = {{"input_channels", d.input_channels},
       {"input_size", d.input_size},
       {"stem_channels", d.stem_channels},
       {"stem_kernel", d.stem_kernel},
       {"block2_channels", d.block2_channels},
       {"block3_channels", d.block3_channels},
       {"shared_dim", d.shared_dim},
       {"actions", d.actions},
       {"quantiles", d.quantiles}};
}

inline void from_json(const nlohmann::json& j, NetDescriptor& d) {
  j.at("input_channels").get_to(d.input_channels);
  j.at("input_size").get_to(d.input_size);
  j.at("stem_channels").get_to(d.stem_channels);
  j.at("stem_kernel").get_to(d.stem_kernel);
  j.at("block2_channels").get_to(d.block2_channels);
  j.at("block3_channels").get_to(d.block3_channels);
  j.at("shared_dim").get_to(d.shared_dim);
  j.at("actions").get_to(d.actions);
  j.at("quantiles").get_to(d.quantiles);
}

struct ConvPlan {
  int in_c, out_c, kernel, stride, pad, in_hw, out_hw;
  size_t w_off, b_off;
  size_t col_rows() const {
    return static_cast<size_t>(in_c) * kernel * kernel;
  }
  size_t w_count() const { return col_rows() * out_c; }
  size_t in_dim() const { return static_cast<size_t>(in_c) * in_hw * in_hw; }
  size_t out_dim() const {
    return static_cast<size_t>(out_c) * out_hw * out_hw;
  }
};

struct NoisyPlan {
  int in_dim, out_dim;
  size_t mu_w_off, sg_w_off, mu_b_off, sg_b_off;
  size_t w_count() const { return static_cast<size_t>(in_dim) * out_dim; }
};

struct NetPlan {
  NetDescriptor desc;
  // stem, res1a, res1b, down1, res2a, res2b, down2, res3a, res3b
  std::vector<ConvPlan> convs;
  NoisyPlan shared, value, advantage;
  int flat_dim = 0;
  size_t param_count = 0;

  static NetPlan build(const NetDescriptor& d) {
    NetPlan p;
    p.desc = d;
    size_t off = 0;
    auto conv = [&off](int in_c, int out_c, int k, int stride, int in_hw) {
      ConvPlan c;
      c.in_c = in_c;
      c.out_c = out_c;
      c.kernel = k;
      c.stride = stride;
      c.pad = k / 2;
      c.in_hw = in_hw;
      c.out_hw = (in_hw + 2 * c.pad - k) / stride + 1;
      c.w_off = off;
      off += c.w_count();
      c.b_off = off;
      off += out_c;
      return c;
    };
    auto noisy = [&off](int in_dim, int out_dim) {
      NoisyPlan n;
      n.in_dim = in_dim;
      n.out_dim = out_dim;
      n.mu_w_off = off;
      off += n.w_count();
      n.sg_w_off = off;
      off += n.w_count();
      n.mu_b_off = off;
      off += out_dim;
      n.sg_b_off = off;
      off += out_dim;
      return n;
    };

    const int c1 = d.stem_channels, c2 = d.block2_channels,
              c3 = d.block3_channels;
    p.convs.push_back(conv(d.input_channels, c1, d.stem_kernel, 2, d.input_size));
    int s = p.convs[0].out_hw;
    p.convs.push_back(conv(c1, c1, 3, 1, s));
    p.convs.push_back(conv(c1, c1, 3, 1, s));
    p.convs.push_back(conv(c1, c2, 3, 2, s));
    s = p.convs[3].out_hw;
    p.convs.push_back(conv(c2, c2, 3, 1, s));
    p.convs.push_back(conv(c2, c2, 3, 1, s));
    p.convs.push_back(conv(c2, c3, 3, 2, s));
    s = p.convs[6].out_hw;
    p.convs.push_back(conv(c3, c3, 3, 1, s));
    p.convs.push_back(conv(c3, c3, 3, 1, s));
    p.flat_dim = c3 * s * s;
    p.shared = noisy(p.flat_dim, d.shared_dim);
    p.value = noisy(d.shared_dim, d.quantiles);
    p.advantage = noisy(d.shared_dim, d.actions * d.quantiles);
    p.param_count = off;
    return p;
  }
};

// Factorized noise, stored after the sign-sqrt shaping.
template <typename T>
struct NoiseState {
  VecX<T> shared_in, shared_out, value_in, value_out, adv_in, adv_out;

  static T shape(double v) {
    return static_cast<T>(v < 0 ? -std::sqrt(-v) : std::sqrt(v));
  }

  static NoiseState zeros(const NetPlan& p) {
    NoiseState n;
    n.shared_in = VecX<T>::Zero(p.shared.in_dim);
    n.shared_out = VecX<T>::Zero(p.shared.out_dim);
    n.value_in = VecX<T>::Zero(p.value.in_dim);
    n.value_out = VecX<T>::Zero(p.value.out_dim);
    n.adv_in = VecX<T>::Zero(p.advantage.in_dim);
    n.adv_out = VecX<T>::Zero(p.advantage.out_dim);
    return n;
  }

  static NoiseState sample(const NetPlan& p, Rng& rng) {
    NoiseState n = zeros(p);
    for (auto* v : {&n.shared_in, &n.shared_out, &n.value_in, &n.value_out,
                    &n.adv_in, &n.adv_out})
      for (Eigen::Index i = 0; i < v->size(); ++i)
        (*v)[i] = shape(rng.normal());
    return n;
  }
};

// col holds an (out_hw^2) x (in_c*k*k) column-major matrix: one row per
// output pixel, one column per kernel tap.
template <typename T>
void im2col(const T* x, const ConvPlan& c, T* col) {
  const int k = c.kernel, hw = c.in_hw, ohw = c.out_hw, stride = c.stride,
            pad = c.pad;
  const int out_area = ohw * ohw;
  for (int ch = 0; ch < c.in_c; ++ch) {
    const T* plane = x + static_cast<size_t>(ch) * hw * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + static_cast<size_t>((ch * k + ky) * k + kx) * out_area;
        for (int oy = 0; oy < ohw; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* drow = dst + static_cast<size_t>(oy) * ohw;
          if (iy < 0 || iy >= hw) {
            for (int ox = 0; ox < ohw; ++ox) drow[ox] = T(0);
            continue;
          }
          const T* srow = plane + static_cast<size_t>(iy) * hw;
          for (int ox = 0; ox < ohw; ++ox) {
            const int ix = ox * stride - pad + kx;
            drow[ox] = (ix < 0 || ix >= hw) ? T(0) : srow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvPlan& c, T* dx) {
  const int k = c.kernel, hw = c.in_hw, ohw = c.out_hw, stride = c.stride,
            pad = c.pad;
  const int out_area = ohw * ohw;
  for (int ch = 0; ch < c.in_c; ++ch) {
    T* plane = dx + static_cast<size_t>(ch) * hw * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + static_cast<size_t>((ch * k + ky) * k + kx) * out_area;
        for (int oy = 0; oy < ohw; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= hw) continue;
          const T* srow = src + static_cast<size_t>(oy) * ohw;
          T* drow = plane + static_cast<size_t>(iy) * hw;
          for (int ox = 0; ox < ohw; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < hw) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

// y = mu_w x + f(eps_out) ⊙ (sg_w (f(eps_in) ⊙ x)) + mu_b + sg_b ⊙ f(eps_out),
// algebraically identical to perturbing the weights by the rank-one
// factorized noise without materializing them.
template <typename T>
void noisy_forward(const NoisyPlan& n, const T* params, const VecX<T>& f_in,
                   const VecX<T>& f_out, const MatX<T>& x, MatX<T>& y) {
  using Eigen::Map;
  Map<const MatX<T>> mu_w(params + n.mu_w_off, n.out_dim, n.in_dim);
  Map<const MatX<T>> sg_w(params + n.sg_w_off, n.out_dim, n.in_dim);
  Map<const VecX<T>> mu_b(params + n.mu_b_off, n.out_dim);
  Map<const VecX<T>> sg_b(params + n.sg_b_off, n.out_dim);
  y.resize(n.out_dim, x.cols());
  y.noalias() = mu_w * x;
  MatX<T> xn = f_in.asDiagonal() * x;
  MatX<T> t = sg_w * xn;
  y.noalias() += f_out.asDiagonal() * t;
  y.colwise() += mu_b + sg_b.cwiseProduct(f_out);
}

template <typename T>
void noisy_backward(const NoisyPlan& n, const T* params, const VecX<T>& f_in,
                    const VecX<T>& f_out, const MatX<T>& x, const MatX<T>& dy,
                    T* grads, MatX<T>* dx) {
  using Eigen::Map;
  Map<const MatX<T>> mu_w(params + n.mu_w_off, n.out_dim, n.in_dim);
  Map<const MatX<T>> sg_w(params + n.sg_w_off, n.out_dim, n.in_dim);
  Map<MatX<T>> d_mu_w(grads + n.mu_w_off, n.out_dim, n.in_dim);
  Map<MatX<T>> d_sg_w(grads + n.sg_w_off, n.out_dim, n.in_dim);
  Map<VecX<T>> d_mu_b(grads + n.mu_b_off, n.out_dim);
  Map<VecX<T>> d_sg_b(grads + n.sg_b_off, n.out_dim);

  MatX<T> dy_scaled = f_out.asDiagonal() * dy;
  d_mu_w.noalias() += dy * x.transpose();
  MatX<T> xn = f_in.asDiagonal() * x;
  d_sg_w.noalias() += dy_scaled * xn.transpose();
  VecX<T> row_sum = dy.rowwise().sum();
  d_mu_b += row_sum;
  d_sg_b += row_sum.cwiseProduct(f_out);
  if (dx) {
    dx->resize(n.in_dim, x.cols());
    dx->noalias() = mu_w.transpose() * dy;
    dx->noalias() += f_in.asDiagonal() * (sg_w.transpose() * dy_scaled);
  }
}

// q_{a,τ} = v_τ + adv_{a,τ} − mean_a' adv_{a',τ}
template <typename T>
void dueling_combine(const MatX<T>& value, const MatX<T>& advantage,
                     int actions, MatX<T>& q) {
  const int K = static_cast<int>(value.rows());
  const auto B = value.cols();
  q.resize(advantage.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int j = 0; j < K; ++j) {
      T mean = T(0);
      for (int a = 0; a < actions; ++a) mean += advantage(a * K + j, b);
      mean /= static_cast<T>(actions);
      for (int a = 0; a < actions; ++a)
        q(a * K + j, b) = value(j, b) + advantage(a * K + j, b) - mean;
    }
  }
}

template <typename T>
void dueling_backward(const MatX<T>& dq, int actions, MatX<T>& dvalue,
                      MatX<T>& dadv) {
  const int K = static_cast<int>(dq.rows()) / actions;
  const auto B = dq.cols();
  dvalue.resize(K, B);
  dadv.resize(dq.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int j = 0; j < K; ++j) {
      T sum = T(0);
      for (int a = 0; a < actions; ++a) sum += dq(a * K + j, b);
      dvalue(j, b) = sum;
      const T mean = sum / static_cast<T>(actions);
      for (int a = 0; a < actions; ++a)
        dadv(a * K + j, b) = dq(a * K + j, b) - mean;
    }
  }
}

template <typename T>
struct Workspace {
  int batch = 0;
  // forward activations, one column per sample
  MatX<T> s0, a1, o1, d1o, a2, o2, d2o, a3, o3, h, val, adv, q;
  const T* input = nullptr;
  // backward buffers
  MatX<T> g_s0, g_a1, g_o1, g_d1o, g_a2, g_o2, g_d2o, g_a3, g_o3, g_h, g_flat,
      g_val, g_adv;
  // per-slot im2col scratch, mapped with per-layer geometry
  std::vector<std::vector<T>> col_scratch;
  std::vector<std::vector<T>> dcol_scratch;
  // per-group weight-gradient partials
  std::vector<VecX<T>> partials;
};

constexpr int kGradGroups = 4;

template <typename T>
class QuantileNetwork {
 public:
  explicit QuantileNetwork(const NetDescriptor& desc)
      : plan_(NetPlan::build(desc)), params_(plan_.param_count, T(0)) {}

  const NetPlan& plan() const { return plan_; }
  const NetDescriptor& descriptor() const { return plan_.desc; }
  size_t param_count() const { return plan_.param_count; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  void init(Rng& rng) {
    for (const auto& c : plan_.convs) {
      const double bound = std::sqrt(6.0 / static_cast<double>(c.col_rows()));
      for (size_t i = 0; i < c.w_count(); ++i)
        params_[c.w_off + i] = static_cast<T>(rng.uniform(-bound, bound));
      for (int i = 0; i < c.out_c; ++i) params_[c.b_off + i] = T(0);
    }
    for (const auto* n : {&plan_.shared, &plan_.value, &plan_.advantage}) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(n->in_dim));
      const T sigma = static_cast<T>(0.5 / std::sqrt(static_cast<double>(n->in_dim)));
      for (size_t i = 0; i < n->w_count(); ++i)
        params_[n->mu_w_off + i] = static_cast<T>(rng.uniform(-bound, bound));
      for (size_t i = 0; i < n->w_count(); ++i)
        params_[n->sg_w_off + i] = sigma;
      for (int i = 0; i < n->out_dim; ++i)
        params_[n->mu_b_off + i] = static_cast<T>(rng.uniform(-bound, bound));
      for (int i = 0; i < n->out_dim; ++i) params_[n->sg_b_off + i] = sigma;
    }
  }

  // obs: column-major batch, one sample of size input_dim per column.
  // Returns ws.q of shape (actions*quantiles) x B.  The input pointer
  // must stay valid until backward() finishes.
  const MatX<T>& forward(const T* obs, int batch, const NoiseState<T>& noise,
                         Workspace<T>& ws, ThreadPool& pool) const {
    ws.batch = batch;
    ws.input = obs;
    ensure_scratch(ws, pool.size());

    conv_apply(plan_.convs[0], obs, ws.s0, batch, pool, ws, true);
    res_block(plan_.convs[1], plan_.convs[2], ws.s0, ws.a1, ws.o1, batch, pool,
              ws);
    conv_apply(plan_.convs[3], ws.o1.data(), ws.d1o, batch, pool, ws, true);
    res_block(plan_.convs[4], plan_.convs[5], ws.d1o, ws.a2, ws.o2, batch, pool,
              ws);
    conv_apply(plan_.convs[6], ws.o2.data(), ws.d2o, batch, pool, ws, true);
    res_block(plan_.convs[7], plan_.convs[8], ws.d2o, ws.a3, ws.o3, batch, pool,
              ws);

    noisy_forward(plan_.shared, params_.data(), noise.shared_in,
                  noise.shared_out, ws.o3, ws.h);
    ws.h = ws.h.cwiseMax(T(0));
    noisy_forward(plan_.value, params_.data(), noise.value_in, noise.value_out,
                  ws.h, ws.val);
    noisy_forward(plan_.advantage, params_.data(), noise.adv_in, noise.adv_out,
                  ws.h, ws.adv);
    dueling_combine(ws.val, ws.adv, plan_.desc.actions, ws.q);
    return ws.q;
  }

  // dq is the loss gradient w.r.t. ws.q; parameter gradients accumulate
  // into grads (size param_count).
  void backward(const MatX<T>& dq, const NoiseState<T>& noise, Workspace<T>& ws,
                std::vector<T>& grads, ThreadPool& pool) const {
    if (grads.size() != plan_.param_count)
      throw std::invalid_argument("backward: gradient size mismatch");
    const int batch = ws.batch;

    dueling_backward(dq, plan_.desc.actions, ws.g_val, ws.g_adv);
    MatX<T> dh_v, dh_a;
    noisy_backward(plan_.value, params_.data(), noise.value_in, noise.value_out,
                   ws.h, ws.g_val, grads.data(), &dh_v);
    noisy_backward(plan_.advantage, params_.data(), noise.adv_in, noise.adv_out,
                   ws.h, ws.g_adv, grads.data(), &dh_a);
    ws.g_h = dh_v + dh_a;
    ws.g_h.array() *= (ws.h.array() > T(0)).template cast<T>();
    noisy_backward(plan_.shared, params_.data(), noise.shared_in,
                   noise.shared_out, ws.o3, ws.g_h, grads.data(), &ws.g_flat);

    ws.g_o3 = ws.g_flat;
    res_block_backward(plan_.convs[7], plan_.convs[8], ws.d2o, ws.a3, ws.o3,
                       ws.g_o3, ws.g_a3, ws.g_d2o, batch, grads, pool, ws);
    relu_mask(ws.g_d2o, ws.d2o);
    conv_backward(plan_.convs[6], ws.o2.data(), ws.g_d2o, &ws.g_o2, batch,
                  grads, pool, ws);
    res_block_backward(plan_.convs[4], plan_.convs[5], ws.d1o, ws.a2, ws.o2,
                       ws.g_o2, ws.g_a2, ws.g_d1o, batch, grads, pool, ws);
    relu_mask(ws.g_d1o, ws.d1o);
    conv_backward(plan_.convs[3], ws.o1.data(), ws.g_d1o, &ws.g_o1, batch,
                  grads, pool, ws);
    res_block_backward(plan_.convs[1], plan_.convs[2], ws.s0, ws.a1, ws.o1,
                       ws.g_o1, ws.g_a1, ws.g_s0, batch, grads, pool, ws);
    relu_mask(ws.g_s0, ws.s0);
    conv_backward(plan_.convs[0], ws.input, ws.g_s0, nullptr, batch, grads,
                  pool, ws);
  }

 private:
  void ensure_scratch(Workspace<T>& ws, int slots) const {
    size_t max_elems = 0, max_layer = 0;
    for (const auto& c : plan_.convs) {
      max_elems = std::max(
          max_elems, c.col_rows() * static_cast<size_t>(c.out_hw) * c.out_hw);
      max_layer = std::max(max_layer, c.w_count() + c.out_c);
    }
    if (static_cast<int>(ws.col_scratch.size()) < slots) {
      ws.col_scratch.resize(slots);
      ws.dcol_scratch.resize(slots);
    }
    for (auto& m : ws.col_scratch)
      if (m.size() < max_elems) m.resize(max_elems);
    for (auto& m : ws.dcol_scratch)
      if (m.size() < max_elems) m.resize(max_elems);
    if (ws.partials.size() < static_cast<size_t>(kGradGroups))
      ws.partials.resize(kGradGroups);
    for (auto& p : ws.partials)
      if (p.size() < static_cast<Eigen::Index>(max_layer))
        p.resize(static_cast<Eigen::Index>(max_layer));
  }

  static void relu_mask(MatX<T>& grad, const MatX<T>& activation) {
    grad.array() *= (activation.array() > T(0)).template cast<T>();
  }

  void conv_apply(const ConvPlan& c, const T* x, MatX<T>& y, int batch,
                  ThreadPool& pool, Workspace<T>& ws, bool relu) const {
    y.resize(static_cast<Eigen::Index>(c.out_dim()), batch);
    using Eigen::Map;
    Map<const MatX<T>> w(params_.data() + c.w_off, c.out_c,
                         static_cast<Eigen::Index>(c.col_rows()));
    Map<const VecX<T>> b(params_.data() + c.b_off, c.out_c);
    const int out_area = c.out_hw * c.out_hw;
    pool.run_slotted(batch, [&](int j, int slot) {
      im2col(x + static_cast<size_t>(j) * c.in_dim(), c,
             ws.col_scratch[slot].data());
      Map<const MatX<T>> col(ws.col_scratch[slot].data(), out_area,
                             static_cast<Eigen::Index>(c.col_rows()));
      Map<MatX<T>> yj(y.data() + static_cast<size_t>(j) * c.out_dim(), out_area,
                      c.out_c);
      yj.noalias() = col * w.transpose();
      yj.rowwise() += b.transpose();
      if (relu) yj = yj.cwiseMax(T(0));
    });
  }

  // Residual block: relu(conv_b(relu(conv_a(x))) + x)
  void res_block(const ConvPlan& ca, const ConvPlan& cb, const MatX<T>& x,
                 MatX<T>& mid, MatX<T>& out, int batch, ThreadPool& pool,
                 Workspace<T>& ws) const {
    conv_apply(ca, x.data(), mid, batch, pool, ws, true);
    conv_apply(cb, mid.data(), out, batch, pool, ws, false);
    out += x;
    out = out.cwiseMax(T(0));
  }

  void conv_backward(const ConvPlan& c, const T* x, const MatX<T>& dy,
                     MatX<T>* dx, int batch, std::vector<T>& grads,
                     ThreadPool& pool, Workspace<T>& ws_ref) const {
    Workspace<T>* ws = &ws_ref;
    using Eigen::Map;
    Map<const MatX<T>> w(params_.data() + c.w_off, c.out_c,
                         static_cast<Eigen::Index>(c.col_rows()));
    const int out_area = c.out_hw * c.out_hw;

    if (dx) {
      dx->resize(static_cast<Eigen::Index>(c.in_dim()), batch);
      pool.run_slotted(batch, [&](int j, int slot) {
        Map<const MatX<T>> dyj(dy.data() + static_cast<size_t>(j) * c.out_dim(),
                               out_area, c.out_c);
        Map<MatX<T>> dcol(ws->dcol_scratch[slot].data(), out_area,
                          static_cast<Eigen::Index>(c.col_rows()));
        dcol.noalias() = dyj * w;
        dx->col(j).setZero();
        col2im_add(ws->dcol_scratch[slot].data(), c,
                   dx->data() + static_cast<size_t>(j) * c.in_dim());
      });
    }

    // Weight gradients: fixed sample groups with per-group partials,
    // reduced in group order so the thread count never changes results.
    const size_t layer_size = c.w_count() + c.out_c;
    const int groups = std::min(kGradGroups, batch);
    pool.run_slotted(groups, [&](int g, int slot) {
      VecX<T>& part = ws->partials[g];
      part.head(static_cast<Eigen::Index>(layer_size)).setZero();
      Map<MatX<T>> dw(part.data(), c.out_c,
                      static_cast<Eigen::Index>(c.col_rows()));
      Map<VecX<T>> db(part.data() + c.w_count(), c.out_c);
      const int lo = g * batch / groups, hi = (g + 1) * batch / groups;
      for (int j = lo; j < hi; ++j) {
        Map<const MatX<T>> dyj(dy.data() + static_cast<size_t>(j) * c.out_dim(),
                               out_area, c.out_c);
        im2col(x + static_cast<size_t>(j) * c.in_dim(), c,
               ws->col_scratch[slot].data());
        Map<const MatX<T>> col(ws->col_scratch[slot].data(), out_area,
                               static_cast<Eigen::Index>(c.col_rows()));
        dw.noalias() += dyj.transpose() * col;
        db += dyj.colwise().sum().transpose();
      }
    });
    Map<VecX<T>> gw(grads.data() + c.w_off,
                    static_cast<Eigen::Index>(layer_size));
    for (int g = 0; g < groups; ++g)
      gw += ws->partials[g].head(static_cast<Eigen::Index>(layer_size));
  }

  void res_block_backward(const ConvPlan& ca, const ConvPlan& cb,
                          const MatX<T>& x, const MatX<T>& mid,
                          const MatX<T>& out, MatX<T>& dout, MatX<T>& dmid,
                          MatX<T>& dx, int batch, std::vector<T>& grads,
                          ThreadPool& pool, Workspace<T>& ws) const {
    relu_mask(dout, out);  // dout becomes the gradient at the pre-relu sum
    conv_backward(cb, mid.data(), dout, &dmid, batch, grads, pool, ws);
    relu_mask(dmid, mid);
    conv_backward(ca, x.data(), dmid, &dx, batch, grads, pool, ws);
    dx += dout;  // skip connection
  }

  NetPlan plan_;
  std::vector<T> params_;
};

}  // namespace magnav::net
