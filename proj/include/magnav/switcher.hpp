#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "magnav/config.hpp"
#include "magnav/env.hpp"
#include "magnav/kinematics.hpp"

namespace magnav {

enum class Mode { Transport, Retrieve };
const char* mode_name(Mode m);

struct TrackerReading {
  Vec2 particle = Vec2::Zero();
  bool valid = false;
};

// Retrieve iff the EE-particle distance strictly exceeds the threshold;
// an invalid reading fails safe into Retrieve.
Mode decide(const Vec2& ee, const TrackerReading& reading, double threshold);

// Thrown when the retrieval pursuit cannot reach the particle; this is
// an episode abort, not a learning terminal.
struct RetrievalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One straight-line pursuit increment of at most step_size toward the
// particle; the command is validated through inverse kinematics.
// Returns the new EE position and updates joints to the chosen branch.
Vec2 retrieve_step(const Vec2& ee, const TrackerReading& reading,
                   const kin::PlaneConstraint& plane,
                   const kin::DhParameters& dh, double step_size,
                   kin::JointVector& joints);

struct EpisodeRow {
  int index = 0;  // row number within the episode
  Mode mode = Mode::Transport;
  Vec2 ee = Vec2::Zero();        // positions the switching law saw
  Vec2 particle = Vec2::Zero();
  int action = -1;  // -1 on retrieve rows
  double reward = 0.0;
  Cause cause = Cause::none;
  bool aborted = false;
};

struct EpisodeLog {
  std::vector<EpisodeRow> rows;
  Cause terminal_cause = Cause::none;
  double total_reward = 0.0;
  bool aborted = false;
  std::string abort_reason;
  int disturbance_row = -1;  // row after which the disturbance landed
  bool delivered = false;    // final particle within goal radius
  std::vector<Vec2> link_positions;  // confirmed positions when mirrored

  bool success() const { return terminal_cause == Cause::goal; }
  void write_csv(const std::string& path) const;
};

// Confirms each commanded EE position on an external actuator and
// returns the position the actuator reports.
using MirrorFn = std::function<Vec2(const Vec2&)>;

struct EpisodeDriver {
  Environment& env;
  std::function<int(const Observation&)> policy;
  const kin::DhParameters& dh;
  const kin::PlaneConstraint& plane;
  SwitchParams params;
  std::vector<DisturbanceSpec> disturbances;
  MirrorFn mirror;  // optional
  // When set, each due disturbance draws its displacement from the
  // state at the trigger and the spec's displacement field is ignored;
  // an empty result skips that disturbance entirely.
  std::function<std::optional<Vec2>(const EnvState&)> disturb_sampler;
};

// Cycle: read tracker -> decide -> retrieve or transport -> apply due
// disturbances.  A Retrieve activation latches until the particle is
// coupled again, because positions between the coupling radius and the
// threshold would otherwise strand a decoupled particle under a policy
// that cannot see it.
EpisodeLog run_episode(EpisodeDriver& driver);

}  // namespace magnav
