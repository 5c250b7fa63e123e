#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "magnav/net.hpp"

namespace magnav {

// Everything needed for bitwise resume: both parameter sets, optimizer
// moments, counters, the named RNG stream states, and the exact config
// the run was started with.
struct Checkpoint {
  net::NetDescriptor descriptor;
  nlohmann::json config;
  std::vector<float> online_params;
  std::vector<float> target_params;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  uint64_t adam_steps = 0;
  uint64_t opt_steps = 0;
  uint64_t env_steps = 0;
  uint64_t episodes = 0;
  std::map<std::string, std::array<uint64_t, 6>> rng_states;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);

// Throws on bad magic, truncation, or descriptor mismatch when
// `expected` is non-null.
Checkpoint load_checkpoint(const std::string& path,
                           const net::NetDescriptor* expected = nullptr);

}  // namespace magnav
