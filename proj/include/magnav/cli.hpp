#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magnav/checkpoint.hpp"
#include "magnav/config.hpp"
#include "magnav/switcher.hpp"

namespace magnav {

struct EvalOptions {
  int episodes = 30;
  bool disturb = false;
  bool via_link = false;
  std::string address;  // via-link bind address; empty falls back to
                        // MAGNAV_ROBOT_ADDR, then the config
};

struct EvalReport {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double delivered_rate = 0.0;
  std::vector<uint64_t> seeds;
  std::vector<EpisodeLog> logs;
  std::vector<double> link_deviation;  // per-episode max, -1 without link

  nlohmann::json to_json() const;
};

// Runs seeded episodes through the switching controller and writes
// report.json, per-episode CSVs, and a config snapshot into out_dir.
EvalReport run_evaluation(const AppConfig& cfg, const Checkpoint& ckpt,
                          const EvalOptions& opt, const std::string& out_dir);

// Displacement for a disturbance injected at state s, or nothing when
// no direction passes the landing checks.  Valid landings are inside
// the extent, on free ground, strictly beyond the switching threshold
// from the EE, and reachable from the EE along an unobstructed straight
// segment, because that segment is exactly the retrieval chase path.
std::optional<Vec2> sample_disturbance(const Environment& env,
                                       const SwitchParams& params,
                                       double magnitude, const EnvState& s,
                                       Rng& rng);

int run_cli(int argc, char** argv);

}  // namespace magnav
