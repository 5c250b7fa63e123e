#pragma once

#include <memory>
#include <string>
#include <vector>

#include "magnav/agent.hpp"
#include "magnav/checkpoint.hpp"
#include "magnav/config.hpp"
#include "magnav/env.hpp"
#include "magnav/replay.hpp"
#include "magnav/threadpool.hpp"

namespace magnav {

// Environment wired exactly as a run would see it: map, lattice camera,
// arm model, and working plane all from one config.
Environment make_environment(const AppConfig& cfg);

struct EpisodeStats {
  long episode = 0;  // 1-based
  int steps = 0;
  double reward = 0.0;
  double loss_mean = 0.0;
  int success = 0;
};

struct TrainOutcome {
  uint64_t env_steps = 0;
  uint64_t episodes = 0;
  uint64_t opt_steps = 0;
  bool stopped_early = false;
  double last_probe_success = -1.0;
};

// Owns the learning loop: acting, replay, optimization, target syncs,
// stats logging, checkpointing, and optional greedy probes for early
// stopping.  Training runs the bare environment with the particle
// coupled throughout; the switching controller only matters under
// disturbances, which evaluation injects.
class Trainer {
 public:
  Trainer(const AppConfig& cfg, std::string run_dir);

  TrainOutcome run();

  agent::Agent& learner() { return *agent_; }
  Environment& environment() { return *env_; }
  const std::vector<EpisodeStats>& stats() const { return stats_; }
  std::string stats_csv_path() const;
  std::string checkpoint_path() const;

  // Greedy success rate over n fresh episodes on the probe environment.
  double greedy_probe(int n);

  void write_checkpoint(const std::string& path) const;

 private:
  void materialize_batch(const SampledBatch<CompactObs>& batch);
  void append_stats_row(const EpisodeStats& row);

  AppConfig cfg_;
  std::string run_dir_;
  std::unique_ptr<ThreadPool> pool_;
  std::unique_ptr<Environment> env_;
  std::unique_ptr<Environment> probe_env_;
  std::unique_ptr<agent::Agent> agent_;
  std::unique_ptr<ReplayBuffer<CompactObs>> replay_;
  Rng episode_rng_, act_rng_, train_rng_, probe_rng_;
  agent::TrainBatch batch_;
  std::vector<EpisodeStats> stats_;
  uint64_t env_steps_ = 0;
  uint64_t episodes_ = 0;
};

}  // namespace magnav
