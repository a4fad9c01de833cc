// Copyright 2026 The MuJAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// One-second microscopic traffic simulation with signal controllers.

#ifndef MUJAM_SIM_HPP_
#define MUJAM_SIM_HPP_

#include <deque>
#include <map>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

#include "mujam/network.hpp"

namespace mujam {

inline constexpr double kAcceleration = 2.6;     // m/s^2
inline constexpr double kVehicleLength = 5.0;    // m
inline constexpr double kMinGap = 2.5;           // m
inline constexpr double kVehicleMaxSpeed = 50.0; // m/s, above every lane limit
inline constexpr double kStoppedSpeed = 0.1;     // m/s
inline constexpr double kQueueReach = 50.0;      // m upstream of the stop line

// Runtime color of a connection; yellow only exists during a switch.
enum class SignalColor : std::uint8_t { kRed = 0, kYellow = 1, kGreenYield = 2, kGreenPriority = 3 };

inline bool is_open(SignalColor c) { return c == SignalColor::kGreenYield || c == SignalColor::kGreenPriority; }

struct ControllerState {
  int intersection = 0;
  int current_phase = 0;
  int target_phase = -1;
  bool in_yellow = false;
  int yellow_remaining = 0;
  int time_since_switch = 0;

  bool operator==(const ControllerState&) const = default;
};

// Controller transition rules, shared by the simulator and the latent
// model's connectivity update.
namespace signal {

ControllerState initial_state(const RoadNetwork& net, int intersection);

// Legal phase ids in cycle order (current first for the hold options).
std::vector<int> legal_phases(const RoadNetwork& net, const ControllerState& cs);

bool is_legal(const RoadNetwork& net, const ControllerState& cs, int phase);

// True when some connection green under `from` is red under `to`.
bool needs_yellow(const RoadNetwork& net, int from, int to);

// Applies a phase choice; throws IllegalAction.
void apply_choice(const RoadNetwork& net, ControllerState& cs, int phase);

// Advances timers by one second, activating the target when yellow ends.
void tick(ControllerState& cs);

SignalColor color(const RoadNetwork& net, const ControllerState& cs, int connection);

// Phase whose connectivity follows the switch in progress (target while
// yellow, otherwise the current phase).
inline int effective_phase(const ControllerState& cs) { return cs.in_yellow ? cs.target_phase : cs.current_phase; }

// Action that keeps the controller where it is: the current phase, or the
// locked target during yellow.
inline int hold_phase(const ControllerState& cs) { return effective_phase(cs); }

}  // namespace signal

struct JointAction {
  std::vector<int> phases;  // one phase id per intersection

  bool operator==(const JointAction&) const = default;
  auto operator<=>(const JointAction&) const = default;
};

// Ids of vehicles placed by place_vehicle() start here; trip vehicles reuse
// their trip id.
inline constexpr int kPlacedVehicleBase = 1 << 24;

struct Vehicle {
  int id = 0;
  std::vector<int> route;
  int route_pos = 0;
  double position = 0.0;
  double speed = 0.0;
  int insertion_time = 0;
  double delay = 0.0;
  int last_moved = -1;

  int lane() const { return route[route_pos]; }
};

struct CompletedTrip {
  int vehicle_id = 0;
  int insertion_time = 0;
  int completion_time = 0;
  double total_delay = 0.0;
};

struct StepOutcome {
  std::vector<double> lane_rewards;
  double global_reward = 0.0;
  double delay = 0.0;  // instantaneous delay d_t
  std::vector<std::pair<int, double>> trip_delay_increments;
};

class SimState {
 public:
  SimState(std::shared_ptr<const RoadNetwork> net, std::vector<Trip> trips);

  const RoadNetwork& network() const { return *net_; }
  const std::shared_ptr<const RoadNetwork>& network_ptr() const { return net_; }

  int clock() const { return clock_; }
  const std::vector<ControllerState>& controllers() const { return controllers_; }
  const ControllerState& controller(int intersection) const { return controllers_.at(intersection); }

  const std::map<int, Vehicle>& vehicles() const { return vehicles_; }
  // Vehicle ids on a lane, front (closest to the stop line) first.
  const std::vector<int>& lane_vehicles(int lane) const { return lane_queue_[lane]; }
  const std::vector<CompletedTrip>& completed() const { return completed_; }
  const std::vector<Trip>& trips() const { return trips_; }

  int inserted() const { return inserted_; }
  int pending() const;
  bool all_trips_done() const;

  // Applies the joint action, advances one second and measures the outcome.
  StepOutcome step(const JointAction& action);

  // Controller updates only (no time advance). Exposed for tests.
  void apply_action(const JointAction& action);

  // Drops a vehicle onto a lane without a trip. Test fixture helper.
  int place_vehicle(std::vector<int> route, double position, double speed);

  // Overrides a controller. Test fixture helper.
  void set_controller(const ControllerState& cs) { controllers_.at(cs.intersection) = cs; }

 private:
  void move_vehicles();
  void insert_vehicles();
  double entry_capacity(int lane) const;
  bool yield_clear(int connection) const;
  const std::vector<int>& route_for(int origin, int destination);

  std::shared_ptr<const RoadNetwork> net_;
  std::vector<Trip> trips_;
  std::size_t next_trip_ = 0;
  int clock_ = 0;
  std::vector<ControllerState> controllers_;
  std::map<int, Vehicle> vehicles_;
  std::vector<std::vector<int>> lane_queue_;
  std::vector<std::deque<Trip>> pending_;
  std::vector<CompletedTrip> completed_;
  std::map<std::pair<int, int>, std::vector<int>> routes_;
  int inserted_ = 0;
  int next_vehicle_id_ = 0;
};

std::vector<int> legal_phases(const SimState& state, int intersection);

int queue_count(const SimState& state, int lane);

double instantaneous_delay(const SimState& state);

// Shortest lane path by length, empty when unreachable.
std::vector<int> shortest_route(const RoadNetwork& net, int origin, int destination);

// Rollout trace CSV: t, intersection, phase, global_reward, d_t.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out);
  void record(int t, const SimState& state, const StepOutcome& outcome);

 private:
  std::ostream& out_;
};

void write_trip_csv(std::ostream& out, const std::vector<CompletedTrip>& trips);

}  // namespace mujam

#endif  // MUJAM_SIM_HPP_
