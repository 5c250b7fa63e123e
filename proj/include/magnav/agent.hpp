#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "magnav/net.hpp"
#include "magnav/rng.hpp"
#include "magnav/threadpool.hpp"

namespace magnav::agent {

using net::MatX;
using net::VecX;

struct AgentConfig {
  double gamma = 0.99;
  int n_step = 3;
  int quantiles = 32;
  double kappa = 1.0;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int target_sync_interval = 2000;  // optimizer steps between target copies
  int warmup_steps = 5000;          // replay entries required before updates
  long total_steps = 300000;
  uint64_t seed = 1;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("agent: gamma must be in (0,1]");
    if (!(kappa > 0.0)) throw std::invalid_argument("agent: kappa must be > 0");
    if (n_step < 1 || quantiles < 1 || batch_size < 1 ||
        target_sync_interval < 1 || warmup_steps < 1 || total_steps < 0)
      throw std::invalid_argument("agent: counts must be positive");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("agent: learning_rate must be > 0");
  }
};

// Midpoint quantile fractions (2i-1)/(2K), i = 1..K.
template <typename T>
std::vector<T> quantile_fractions(int k) {
  std::vector<T> taus(k);
  for (int i = 1; i <= k; ++i)
    taus[i - 1] = static_cast<T>(2 * i - 1) / static_cast<T>(2 * k);
  return taus;
}

template <typename T>
struct LossResult {
  T loss;
  T td_magnitude;
};

// loss = (1/K') Σ_j Σ_i |τ_i − 1{u<0}| · L_κ(u_ij)/κ with u_ij = target_j − pred_i
template <typename T>
LossResult<T> quantile_huber_loss(const T* pred, int k, const T* target,
                                  int kp, const T* taus, T kappa) {
  T loss = T(0);
  T pred_mean = T(0), target_mean = T(0);
  for (int j = 0; j < kp; ++j) {
    target_mean += target[j];
    for (int i = 0; i < k; ++i) {
      const T u = target[j] - pred[i];
      const T au = u < T(0) ? -u : u;
      const T huber =
          au <= kappa ? T(0.5) * u * u : kappa * (au - T(0.5) * kappa);
      const T w = u < T(0) ? T(1) - taus[i] : taus[i];
      loss += w * huber / kappa;
    }
  }
  loss /= static_cast<T>(kp);
  for (int i = 0; i < k; ++i) pred_mean += pred[i];
  pred_mean /= static_cast<T>(k);
  target_mean /= static_cast<T>(kp);
  const T td = target_mean - pred_mean;
  return {loss, td < T(0) ? -td : td};
}

// Accumulates scale * dloss/dpred into dpred.
template <typename T>
void quantile_huber_backward(const T* pred, int k, const T* target, int kp,
                             const T* taus, T kappa, T scale, T* dpred) {
  for (int i = 0; i < k; ++i) {
    T g = T(0);
    for (int j = 0; j < kp; ++j) {
      const T u = target[j] - pred[i];
      const T clipped = u > kappa ? kappa : (u < -kappa ? -kappa : u);
      const T w = u < T(0) ? T(1) - taus[i] : taus[i];
      g += w * (-clipped) / kappa;
    }
    dpred[i] += scale * g / static_cast<T>(kp);
  }
}

// Adam with bias correction; state is part of the checkpoint.
template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(size_t n) : m_(n, T(0)), v_(n, T(0)) {}

  void step(std::vector<T>& params, const std::vector<T>& grads, T lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("adam: size mismatch");
    ++t_;
    const T b1 = T(0.9), b2 = T(0.999), eps = T(1e-8);
    const T c1 = T(1) - static_cast<T>(std::pow(0.9, static_cast<double>(t_)));
    const T c2 = T(1) - static_cast<T>(std::pow(0.999, static_cast<double>(t_)));
    for (size_t i = 0; i < params.size(); ++i) {
      const T g = grads[i];
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
      const T mh = m_[i] / c1;
      const T vh = v_[i] / c2;
      params[i] -= lr * mh / (static_cast<T>(std::sqrt(static_cast<double>(vh))) + eps);
    }
  }

  std::vector<T>& m() { return m_; }
  std::vector<T>& v() { return v_; }
  const std::vector<T>& m() const { return m_; }
  const std::vector<T>& v() const { return v_; }
  uint64_t steps() const { return t_; }
  void set_steps(uint64_t t) { t_ = t; }

 private:
  std::vector<T> m_, v_;
  uint64_t t_ = 0;
};

enum class ActMode { kTrain, kEval };

// One materialized minibatch, one sample per column.
struct TrainBatch {
  MatX<float> obs;       // input_dim x B
  MatX<float> next_obs;  // input_dim x B
  std::vector<int> actions;
  std::vector<float> n_returns;
  std::vector<uint8_t> done;
  std::vector<int> effective_n;
  std::vector<float> weights;
  int size() const { return static_cast<int>(actions.size()); }
};

struct StepResult {
  float total_loss = 0.0f;
  std::vector<float> td_magnitudes;
  bool synced_target = false;
};

class Agent {
 public:
  Agent(const net::NetDescriptor& desc, const AgentConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        online_(desc),
        target_(desc),
        taus_(quantile_fractions<float>(desc.quantiles)),
        opt_(online_.param_count()) {
    cfg_.validate();
    if (desc.quantiles != cfg.quantiles)
      throw std::invalid_argument("agent: quantile count disagrees with network");
    online_.init(init_rng);
    target_.params() = online_.params();
    grads_.resize(online_.param_count());
  }

  const net::QuantileNetwork<float>& online() const { return online_; }
  net::QuantileNetwork<float>& online() { return online_; }
  net::QuantileNetwork<float>& target() { return target_; }
  const net::QuantileNetwork<float>& target() const { return target_; }
  const AgentConfig& config() const { return cfg_; }
  Adam<float>& optimizer() { return opt_; }
  const Adam<float>& optimizer() const { return opt_; }
  uint64_t opt_steps() const { return opt_steps_; }
  void set_opt_steps(uint64_t s) { opt_steps_ = s; }

  void sync_target() { target_.params() = online_.params(); }

  // Greedy action from quantile means; ties go to the lowest index.
  int act(const float* obs, ActMode mode, Rng& noise_rng, ThreadPool& pool) {
    const auto& plan = online_.plan();
    net::NoiseState<float> noise =
        mode == ActMode::kTrain ? net::NoiseState<float>::sample(plan, noise_rng)
                                : net::NoiseState<float>::zeros(plan);
    const MatX<float>& q = online_.forward(obs, 1, noise, ws_act_, pool);
    return greedy_from_quantiles(q.col(0));
  }

  int greedy_from_quantiles(const Eigen::Ref<const VecX<float>>& q) const {
    const int K = cfg_.quantiles;
    const int actions = online_.descriptor().actions;
    int best = 0;
    float best_mean = 0.0f;
    for (int a = 0; a < actions; ++a) {
      float mean = 0.0f;
      for (int j = 0; j < K; ++j) mean += q[a * K + j];
      mean /= static_cast<float>(K);
      if (a == 0 || mean > best_mean) {
        best = a;
        best_mean = mean;
      }
    }
    return best;
  }

  // Double targets: action chosen by the online net, value taken from the
  // target net, bootstrapped through the truncated n-step return.
  MatX<float> compute_targets(const TrainBatch& batch,
                              const net::NoiseState<float>& online_noise,
                              const net::NoiseState<float>& target_noise,
                              ThreadPool& pool) {
    const int B = batch.size();
    const int K = cfg_.quantiles;
    const MatX<float>& q_sel =
        online_.forward(batch.next_obs.data(), B, online_noise, ws_next_, pool);
    std::vector<int> a_star(B);
    for (int b = 0; b < B; ++b) a_star[b] = greedy_from_quantiles(q_sel.col(b));
    const MatX<float>& q_tgt = target_.forward(batch.next_obs.data(), B,
                                               target_noise, ws_target_, pool);
    MatX<float> targets(K, B);
    for (int b = 0; b < B; ++b) {
      const float scale =
          batch.done[b]
              ? 0.0f
              : static_cast<float>(std::pow(cfg_.gamma, batch.effective_n[b]));
      for (int j = 0; j < K; ++j)
        targets(j, b) = batch.n_returns[b] + scale * q_tgt(a_star[b] * K + j, b);
    }
    return targets;
  }

  StepResult train_step(const TrainBatch& batch, Rng& noise_rng,
                        ThreadPool& pool) {
    const int B = batch.size();
    const int K = cfg_.quantiles;
    const auto& plan = online_.plan();

    net::NoiseState<float> online_noise =
        net::NoiseState<float>::sample(plan, noise_rng);
    net::NoiseState<float> target_noise =
        net::NoiseState<float>::sample(plan, noise_rng);

    MatX<float> targets = compute_targets(batch, online_noise, target_noise, pool);
    const MatX<float>& q =
        online_.forward(batch.obs.data(), B, online_noise, ws_train_, pool);

    StepResult result;
    result.td_magnitudes.resize(B);
    MatX<float> dq = MatX<float>::Zero(q.rows(), B);
    const float inv_b = 1.0f / static_cast<float>(B);
    float total = 0.0f;
    for (int b = 0; b < B; ++b) {
      const float* pred = q.data() + static_cast<size_t>(b) * q.rows() +
                          static_cast<size_t>(batch.actions[b]) * K;
      auto lr = quantile_huber_loss(pred, K, targets.col(b).data(), K,
                                    taus_.data(), static_cast<float>(cfg_.kappa));
      result.td_magnitudes[b] = lr.td_magnitude;
      total += batch.weights[b] * lr.loss;
      quantile_huber_backward(pred, K, targets.col(b).data(), K, taus_.data(),
                              static_cast<float>(cfg_.kappa),
                              inv_b * batch.weights[b],
                              dq.data() + static_cast<size_t>(b) * q.rows() +
                                  static_cast<size_t>(batch.actions[b]) * K);
    }
    result.total_loss = total * inv_b;
    if (!std::isfinite(result.total_loss))
      throw std::runtime_error(
          "train_step: non-finite loss at optimizer step " +
          std::to_string(opt_steps_) + " (value " +
          std::to_string(result.total_loss) + ")");

    std::fill(grads_.begin(), grads_.end(), 0.0f);
    online_.backward(dq, online_noise, ws_train_, grads_, pool);
    opt_.step(online_.params(), grads_, static_cast<float>(cfg_.learning_rate));
    ++opt_steps_;
    if (opt_steps_ % static_cast<uint64_t>(cfg_.target_sync_interval) == 0) {
      sync_target();
      result.synced_target = true;
    }
    return result;
  }

 private:
  AgentConfig cfg_;
  net::QuantileNetwork<float> online_, target_;
  std::vector<float> taus_;
  Adam<float> opt_;
  std::vector<float> grads_;
  uint64_t opt_steps_ = 0;
  net::Workspace<float> ws_act_, ws_train_, ws_next_, ws_target_;
};

}  // namespace magnav::agent
