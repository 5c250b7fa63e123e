#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "magnav/image.hpp"
#include "magnav/kinematics.hpp"
#include "magnav/workspace.hpp"

namespace magnav::env {

using kin::Vec2;

struct EnvParams {
  double coupling_radius = 0.05;  // inclusive
  double step_size = 0.01;
  double goal_radius = 0.02;  // inclusive
  int step_limit = 150;
  double camera_fov = 0.20;
  int camera_pixels = 480;
  int obs_pixels = 84;
  int free_level = 230;      // >= 200
  int obstacle_level = 25;   // <= 60
  int obstacle_patch = 15;
  double obstacle_threshold = 150.0;  // patch mean strictly below => obstacle
  double spawn_separation = 0.05;
  double lattice_spacing = 0.01;
};

// Camera views on the centimeter lattice.  Lattice points sit at cell
// centers: x = x_min + (i + 0.5) * spacing, so a 0.60 m span yields 60
// points.  iy increases with world y.
class ImageGrid {
 public:
  ImageGrid(const WorkspaceMap* map, const EnvParams& params);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  Vec2 point(int ix, int iy) const {
    return {x0_ + ix * spacing_, y0_ + iy * spacing_};
  }
  std::pair<int, int> nearest(const Vec2& p) const;

  Image8 render(int ix, int iy) const { return render_at(point(ix, iy)); }
  Image8 render_at(const Vec2& center) const;

  double spacing() const { return spacing_; }

 private:
  const WorkspaceMap* map_;
  EnvParams params_;
  double spacing_;
  int nx_, ny_;
  double x0_, y0_;
};

// Two channels, 84x84, channel-major float in [0,1].
struct Observation {
  int hw = 0;
  std::vector<float> data;

  Observation() = default;
  explicit Observation(int size)
      : hw(size), data(static_cast<size_t>(2) * size * size, 0.f) {}

  float* channel(int c) { return data.data() + static_cast<size_t>(c) * hw * hw; }
  const float* channel(int c) const {
    return data.data() + static_cast<size_t>(c) * hw * hw;
  }
  float at(int c, int r, int col) const {
    return data[(static_cast<size_t>(c) * hw + r) * hw + col];
  }
};

// Block-mean downsample with exact strip bounds: source pixel k belongs
// to output cell floor(k * dst / src).
void downsample_channel(const Image8& src, int dst_size, float* dst);

// Goal block on top, EE block below; left half x, right half y, both
// normalized to the extent.
void encode_position_channel(const Vec2& goal, const Vec2& ee,
                             const Extent& extent, int hw, float* dst);

bool detect_obstacle(const Image8& view, const EnvParams& params);

enum class Cause { none, goal, obstacle, ik_failure, step_limit };
const char* cause_name(Cause c);

struct EnvState {
  Vec2 ee = Vec2::Zero();
  Vec2 particle = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  bool coupled = true;
  int step_count = 0;
  uint64_t rng_seed = 0;
};

// coupled tracks overlap within coupling_radius; while coupled the
// particle rides with the EE.
void update_coupling(EnvState& state, double coupling_radius);

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;
  Cause cause = Cause::none;
};

struct DisturbanceSpec {
  int trigger_step = 0;
  Vec2 displacement = Vec2::Zero();
};

// Observations are fully determined by the EE and goal lattice indices,
// which is what makes replay storage cheap.
struct CompactObs {
  uint16_t ee_ix = 0, ee_iy = 0, goal_ix = 0, goal_iy = 0;
};

class Environment {
 public:
  Environment(WorkspaceMap map, EnvParams params, kin::DhParameters dh,
              kin::PlaneConstraint plane);

  Observation reset(uint64_t seed,
                    std::optional<Vec2> start = std::nullopt,
                    std::optional<Vec2> goal = std::nullopt);

  // Candidate checks in order: IK feasibility, obstacle view, then the
  // move itself; goal test before the step-count cutoff.
  StepOutcome step(int action);

  // Applies when live and the trigger matches the current step count.
  bool apply_disturbance(const DisturbanceSpec& spec);

  // Direct EE positioning used by the retrieval controller and the link
  // mirror; refreshes coupling, does not advance the step counter.
  void place_ee(const Vec2& xy);

  const EnvState& state() const { return state_; }
  bool terminal() const { return terminal_; }
  Cause cause() const { return cause_; }

  Observation observation() const;
  CompactObs compact_observation() const;
  Observation materialize(const CompactObs& c) const;

  const ImageGrid& grid() const { return grid_; }
  const WorkspaceMap& map() const { return map_; }
  const EnvParams& params() const { return params_; }
  const kin::PlaneConstraint& plane() const { return plane_; }
  const kin::DhParameters& dh() const { return dh_; }

  bool lattice_obstacle(int ix, int iy) const {
    return obstacle_flag_[idx(ix, iy)] != 0;
  }
  // Spawn-eligible: free map cell, clean camera view, IK-solvable.
  const std::vector<std::pair<int, int>>& spawn_cells() const {
    return spawn_cells_;
  }

  int episodes_started() const { return episodes_started_; }

 private:
  size_t idx(int ix, int iy) const {
    return static_cast<size_t>(iy) * grid_.nx() + ix;
  }
  void fill_observation(Observation& obs, const Vec2& ee,
                        const Vec2& goal) const;
  bool ik_reachable(const Vec2& xy) const;

  WorkspaceMap map_;
  EnvParams params_;
  kin::DhParameters dh_;
  kin::PlaneConstraint plane_;
  ImageGrid grid_;

  std::vector<float> channel0_cache_;   // nx*ny views, downsampled
  std::vector<uint8_t> obstacle_flag_;  // per lattice point
  std::vector<uint8_t> reachable_flag_;
  std::vector<std::pair<int, int>> spawn_cells_;

  EnvState state_;
  bool terminal_ = true;
  Cause cause_ = Cause::none;
  int episodes_started_ = 0;
};

}  // namespace magnav::env

// Short names for the types that cross module boundaries.
namespace magnav {
using env::Cause;
using env::cause_name;
using env::CompactObs;
using env::DisturbanceSpec;
using env::Environment;
using env::EnvParams;
using env::EnvState;
using env::ImageGrid;
using env::Observation;
using env::StepOutcome;
using kin::Vec2;
}  // namespace magnav
