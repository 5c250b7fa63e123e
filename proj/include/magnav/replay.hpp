#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "magnav/rng.hpp"

namespace magnav::replay {

// Binary indexed sum tree over leaf priorities.  Internal nodes are
// recomputed from both children on every update, so the root tracks the
// exact leaf sum up to rounding of the summation tree itself.
class SumTree {
 public:
  explicit SumTree(size_t capacity) {
    size_t n = 1;
    while (n < capacity) n <<= 1;
    leaves_ = n;
    nodes_.assign(2 * n, 0.0);
  }

  size_t capacity() const { return leaves_; }
  double total() const { return nodes_[1]; }
  double get(size_t i) const { return nodes_[leaves_ + i]; }

  void set(size_t i, double value) {
    if (i >= leaves_) throw std::out_of_range("sumtree: leaf index");
    if (!(value >= 0.0) || !std::isfinite(value))
      throw std::invalid_argument("sumtree: priority must be finite and >= 0");
    size_t node = leaves_ + i;
    nodes_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1)
      nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
  }

  // Prefix-sum descent: returns the leaf whose cumulative interval
  // contains u.  Precondition: 0 <= u < total().
  size_t find(double u) const {
    if (!(u >= 0.0) || u >= total())
      throw std::out_of_range("sumtree: target outside [0, total)");
    size_t node = 1;
    while (node < leaves_) {
      double left = nodes_[2 * node];
      if (u < left) {
        node = 2 * node;
      } else {
        u -= left;
        node = 2 * node + 1;
      }
    }
    return node - leaves_;
  }

 private:
  size_t leaves_;
  std::vector<double> nodes_;
};

// Mirror structure tracking the max leaf priority, so inserts can use
// the current max rather than a stale historic one.
class MaxTree {
 public:
  explicit MaxTree(size_t leaves) : leaves_(leaves), nodes_(2 * leaves, 0.0) {}

  double root() const { return nodes_[1]; }

  void set(size_t i, double value) {
    size_t node = leaves_ + i;
    nodes_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1)
      nodes_[node] = std::max(nodes_[2 * node], nodes_[2 * node + 1]);
  }

 private:
  size_t leaves_;
  std::vector<double> nodes_;
};

template <class Obs>
struct Transition {
  Obs obs;
  Obs next_obs;
  int action = 0;
  double n_return = 0.0;
  uint8_t done = 0;
  uint8_t effective_n = 0;  // >= 1; shorter than N at episode ends
};

template <class Obs>
struct SampledBatch {
  std::vector<Transition<Obs>> transitions;
  std::vector<size_t> indices;  // buffer slots, for priority updates
  std::vector<double> weights;  // normalized so max == 1
};

struct ReplayParams {
  size_t capacity = 1u << 17;
  int n_step = 3;
  double gamma = 0.99;
  double alpha = 0.5;
  double epsilon = 1e-6;
};

// Proportional prioritized replay with n-step folding at the door.
template <class Obs>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(const ReplayParams& params)
      : params_(params), tree_(params.capacity), max_tree_(tree_.capacity()) {
    if (params.capacity == 0 || (params.capacity & (params.capacity - 1)))
      throw std::invalid_argument("replay: capacity must be a power of two");
    if (params.n_step < 1) throw std::invalid_argument("replay: n_step >= 1");
    data_.resize(params.capacity);
  }

  const ReplayParams& params() const { return params_; }
  size_t size() const { return size_; }
  size_t capacity() const { return params_.capacity; }
  double total_mass() const { return tree_.total(); }

  // One environment step.  next_obs is the observation after the step;
  // on done the pending window is flushed with truncated horizons.
  void push_step(const Obs& obs, int action, double reward,
                 const Obs& next_obs, bool done) {
    window_.push_back({obs, action, reward});
    if (done) {
      while (!window_.empty()) {
        emit(next_obs, true);
        window_.pop_front();
      }
    } else if (static_cast<int>(window_.size()) == params_.n_step) {
      emit(next_obs, false);
      window_.pop_front();
    }
  }

  int pending() const { return static_cast<int>(window_.size()); }

  SampledBatch<Obs> sample(size_t batch, double beta, Rng& rng) {
    if (batch == 0) throw std::invalid_argument("replay: empty batch");
    if (size_ < batch)
      throw std::logic_error("replay: fewer stored transitions than batch");
    SampledBatch<Obs> out;
    out.transitions.reserve(batch);
    out.indices.reserve(batch);
    out.weights.reserve(batch);
    const double total = tree_.total();
    const double segment = total / static_cast<double>(batch);
    double max_w = 0.0;
    for (size_t k = 0; k < batch; ++k) {
      double u = (static_cast<double>(k) + rng.uniform()) * segment;
      if (u >= total) u = std::nextafter(total, 0.0);
      size_t slot = tree_.find(u);
      if (slot >= size_) slot = size_ - 1;  // only at fp segment edges
      double prob = tree_.get(slot) / total;
      double w = std::pow(static_cast<double>(size_) * prob, -beta);
      out.transitions.push_back(data_[slot]);
      out.indices.push_back(slot);
      out.weights.push_back(w);
      max_w = std::max(max_w, w);
    }
    for (auto& w : out.weights) w /= max_w;
    return out;
  }

  // Priorities are (|td| + epsilon)^alpha.
  void update_priorities(const std::vector<size_t>& indices,
                         const std::vector<double>& td_errors) {
    if (indices.size() != td_errors.size())
      throw std::invalid_argument("replay: index/td size mismatch");
    for (size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= size_)
        throw std::out_of_range("replay: priority index");
      double p = std::pow(std::abs(td_errors[k]) + params_.epsilon,
                          params_.alpha);
      tree_.set(indices[k], p);
      max_tree_.set(indices[k], p);
    }
  }

  const Transition<Obs>& at(size_t i) const { return data_[i]; }

  void save(const std::string& path) const
    requires std::is_trivially_copyable_v<Obs>
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("replay: cannot write " + path);
    const char magic[8] = {'M', 'G', 'N', 'R', 'P', 'L', '0', '1'};
    out.write(magic, 8);
    auto put = [&out](const auto& v) {
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put(params_.capacity);
    put(params_.n_step);
    put(params_.gamma);
    put(params_.alpha);
    put(params_.epsilon);
    put(size_);
    put(head_);
    uint64_t obs_bytes = sizeof(Obs);
    put(obs_bytes);
    for (size_t i = 0; i < size_; ++i) {
      out.write(reinterpret_cast<const char*>(&data_[i]), sizeof(data_[i]));
      double p = tree_.get(i);
      put(p);
    }
    uint64_t pending = window_.size();
    put(pending);
    for (const auto& w : window_)
      out.write(reinterpret_cast<const char*>(&w), sizeof(w));
    if (!out) throw std::runtime_error("replay: write failed for " + path);
  }

  static ReplayBuffer load(const std::string& path)
    requires std::is_trivially_copyable_v<Obs>
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("replay: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "MGNRPL01", 8) != 0)
      throw std::runtime_error("replay: bad magic in " + path);
    auto get = [&in](auto& v) {
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
    };
    ReplayParams params;
    get(params.capacity);
    get(params.n_step);
    get(params.gamma);
    get(params.alpha);
    get(params.epsilon);
    ReplayBuffer buf(params);
    get(buf.size_);
    get(buf.head_);
    uint64_t obs_bytes = 0;
    get(obs_bytes);
    if (obs_bytes != sizeof(Obs))
      throw std::runtime_error("replay: observation size mismatch");
    if (buf.size_ > params.capacity)
      throw std::runtime_error("replay: corrupt count");
    for (size_t i = 0; i < buf.size_; ++i) {
      in.read(reinterpret_cast<char*>(&buf.data_[i]), sizeof(buf.data_[i]));
      double p;
      get(p);
      buf.tree_.set(i, p);
      buf.max_tree_.set(i, p);
    }
    uint64_t pending = 0;
    get(pending);
    for (uint64_t i = 0; i < pending; ++i) {
      PendingStep w;
      in.read(reinterpret_cast<char*>(&w), sizeof(w));
      buf.window_.push_back(w);
    }
    if (!in) throw std::runtime_error("replay: truncated file " + path);
    return buf;
  }

 private:
  struct PendingStep {
    Obs obs;
    int action;
    double reward;
  };

  void emit(const Obs& next_obs, bool done) {
    Transition<Obs> t;
    t.obs = window_.front().obs;
    t.next_obs = next_obs;
    t.action = window_.front().action;
    t.done = done ? 1 : 0;
    t.effective_n = static_cast<uint8_t>(window_.size());
    double acc = 0.0, discount = 1.0;
    for (const auto& w : window_) {
      acc += discount * w.reward;
      discount *= params_.gamma;
    }
    t.n_return = acc;
    insert(t);
  }

  void insert(const Transition<Obs>& t) {
    double p = size_ == 0 ? 1.0 : max_tree_.root();
    data_[head_] = t;
    tree_.set(head_, p);
    max_tree_.set(head_, p);
    head_ = (head_ + 1) % params_.capacity;
    size_ = std::min(size_ + 1, params_.capacity);
  }

  ReplayParams params_;
  SumTree tree_;
  MaxTree max_tree_;
  std::vector<Transition<Obs>> data_;
  std::deque<PendingStep> window_;
  size_t head_ = 0;
  size_t size_ = 0;
};

}  // namespace magnav::replay

namespace magnav {
using replay::ReplayBuffer;
using replay::ReplayParams;
using replay::SampledBatch;
using replay::Transition;
}  // namespace magnav
