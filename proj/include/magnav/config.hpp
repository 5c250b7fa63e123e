#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "magnav/agent.hpp"
#include "magnav/env.hpp"
#include "magnav/net.hpp"
#include "magnav/replay.hpp"

namespace magnav {

struct SwitchParams {
  double threshold = 0.10;
  double retrieve_step_size = 0.05;
};

struct LinkParams {
  std::string address = "127.0.0.1:30002";
};

struct EvalParams {
  int episodes = 30;
  int disturb_min_step = 20;
  int disturb_max_step = 80;
  double disturb_magnitude = 0.15;
};

struct TrainerParams {
  int update_every = 4;          // env steps per optimizer step
  long checkpoint_interval = 20000;  // env steps between checkpoint writes
  long eval_interval = 10000;    // env steps between greedy probes (0 = off)
  int eval_episodes = 20;        // episodes per greedy probe
  double stop_success = 0.0;     // early stop threshold on probe rate (0 = off)
  double beta_start = 0.4;
  double beta_end = 1.0;
  int threads = 1;
};

struct AppConfig {
  uint64_t seed = 1;
  std::string map_path = "assets/corridor_maze.pgm";
  Extent extent{-0.295, 0.305, -0.655, -0.155};
  EnvParams env;
  double plane_z = 0.10;
  double plane_yaw = 0.0;
  agent::AgentConfig agent;
  net::NetDescriptor network;
  ReplayParams replay;
  TrainerParams trainer;
  SwitchParams switcher;
  LinkParams link;
  EvalParams eval;

  // Parses strictly: unknown keys anywhere are an error.  Relative map
  // paths resolve against base_dir.
  static AppConfig from_json(const nlohmann::json& j,
                             const std::string& base_dir);
  static AppConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

}  // namespace magnav
