#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "magnav/kinematics.hpp"

namespace magnav::link {

using kin::Vec3;

struct MovelCommand {
  double x = 0, y = 0, z = 0;     // meters
  double rx = 0, ry = 0, rz = 0;  // axis-angle radians
  double a = 0.5;                  // parsed but unused by the simulator
  double v = 0.25;                 // m/s
};

// `movel(p[<x>,<y>,<z>,<rx>,<ry>,<rz>],a=<a>,v=<v>)\n`
std::string encode_movel(const MovelCommand& cmd);

struct ParseError : std::runtime_error {
  size_t offset;
  ParseError(size_t off, const std::string& what)
      : std::runtime_error(what), offset(off) {}
};

// Accepts exactly one line, newline optional; throws ParseError with
// the byte offset of the first violation.
MovelCommand parse_movel(const std::string& line);

struct StatePacket {
  double t = 0;
  kin::JointVector q = kin::JointVector::Zero();
  double x = 0, y = 0, z = 0;
};

std::string encode_state(const StatePacket& p);
std::optional<StatePacket> parse_state(const std::string& line);

// Loopback motion state: straight-line constant-speed pursuit of the
// latest target with exact arrival.
struct MotionState {
  Vec3 position = Vec3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  bool has_target = false;
  MovelCommand target;
};

// Advances one tick of dt seconds; returns false and leaves the state
// in place when the new pose has no IK solution.
bool server_tick(MotionState& state, double dt, const kin::DhParameters& dh,
                 kin::JointVector& joints);

struct ServerOptions {
  std::string address = "127.0.0.1:30002";
  double tick_seconds = 0.008;  // 125 Hz
  Vec3 initial_position = Vec3(0.0, -0.4, 0.1);
  Eigen::Matrix3d initial_rotation = Eigen::Matrix3d::Identity();
};

// One client at a time; spawns its own service thread on start().
class RobotServer {
 public:
  explicit RobotServer(ServerOptions opts, kin::DhParameters dh);
  ~RobotServer();

  void start();
  void stop();
  int port() const { return port_; }  // resolved after start()
  bool running() const { return running_.load(); }

  // Runs the accept/serve loop in the calling thread until stop().
  void serve();

 private:
  void session(int fd);

  ServerOptions opts_;
  kin::DhParameters dh_;
  std::thread thread_;
  std::atomic<bool> stop_flag_{false};
  std::atomic<bool> running_{false};
  std::atomic<bool> failed_{false};
  std::string failure_;
  int listen_fd_ = -1;
  int port_ = 0;
};

struct LinkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Blocking client; detects a dead stream after one second of silence.
class LinkClient {
 public:
  explicit LinkClient(const std::string& address);
  ~LinkClient();

  void send_movel(const MovelCommand& cmd);
  // Reads packets until the reported position is within tol of (x,y,z);
  // returns the first such packet.
  StatePacket await_position(const Vec3& target, double tol,
                             double timeout_seconds);
  // Reads one line (state or error) with the silence timeout.
  std::string read_line();
  std::vector<StatePacket> collect_states(double seconds);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace magnav::link
