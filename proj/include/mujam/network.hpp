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

// Static road-network model: topology, signal programs, random generation
// and the trip process that feeds the simulator.

#ifndef MUJAM_NETWORK_HPP_
#define MUJAM_NETWORK_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mujam/common.hpp"

namespace mujam {

inline constexpr double kSpeedLimit = 13.89;  // 50 km/h
inline constexpr int kNetworkFormatVersion = 1;
inline constexpr int kTripFormatVersion = 1;

// Static state a phase assigns to a connection.
enum class LinkState : std::uint8_t { kRed = 0, kGreenYield = 1, kGreenPriority = 2 };

inline bool is_green(LinkState s) { return s != LinkState::kRed; }

enum class ConstraintType : std::uint8_t { kCyclic = 0, kAcyclic = 1 };

enum class Turn : std::uint8_t { kRight = 0, kStraight = 1, kLeft = 2 };

// Compass side of an intersection. Clockwise order.
enum class Side : std::uint8_t { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

struct Node {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  int intersection = -1;  // -1 for a network-boundary terminal
};

struct Road {
  int id = 0;
  int from_node = 0;
  int to_node = 0;
  double length = 0.0;
  std::vector<int> lanes;  // index 0 is the rightmost lane
};

struct Lane {
  int id = 0;
  int road = 0;
  int index = 0;  // position on the road, 0 = rightmost
  double length = 0.0;
  double speed_limit = kSpeedLimit;
};

struct Connection {
  int id = 0;
  int in_lane = 0;
  int out_lane = 0;
  int intersection = 0;
  Turn turn = Turn::kStraight;
  // Inbound lanes whose queue a yielding movement must respect.
  std::vector<int> foe_lanes;
};

struct Phase {
  int id = 0;
  int intersection = 0;
  // One entry per connection of the owning intersection, in the order of
  // Intersection::connections.
  std::vector<LinkState> states;
  int cycle_index = 0;
};

struct SignalProgram {
  int intersection = 0;
  ConstraintType constraint = ConstraintType::kCyclic;
  std::vector<int> cycle;  // phase ids in cycle order
  int min_phase_duration = 5;
  int yellow_duration = 3;
};

struct Intersection {
  int id = 0;
  int node = 0;
  std::vector<int> connections;
  std::vector<int> phases;
  std::vector<int> inbound_lanes;
  SignalProgram program;
};

struct NetworkGenConfig {
  int min_intersections = 2;
  int max_intersections = 6;
  double min_length = 100.0;
  double max_length = 200.0;
  int min_lanes = 1;
  int max_lanes = 4;
  std::uint64_t seed = 0;
  int max_retries = 64;
};

class RoadNetwork {
 public:
  std::vector<Node> nodes;
  std::vector<Road> roads;
  std::vector<Lane> lanes;
  std::vector<Intersection> intersections;
  std::vector<Connection> connections;
  std::vector<Phase> phases;

  // Derived adjacency, rebuilt by build_indices().
  std::vector<std::vector<int>> lane_out_connections;
  std::vector<std::vector<int>> lane_in_connections;
  std::vector<int> connection_local_index;  // position inside its intersection
  std::vector<int> origin_lanes;            // lanes entering from the boundary
  std::vector<int> destination_lanes;       // lanes leaving to the boundary

  int num_lanes() const { return static_cast<int>(lanes.size()); }
  int num_intersections() const { return static_cast<int>(intersections.size()); }

  const SignalProgram& program(int intersection) const {
    return intersections.at(intersection).program;
  }

  // Connection joining two consecutive lanes of a route, or -1.
  int connection_between(int in_lane, int out_lane) const;

  LinkState link_state(int phase, int connection) const {
    return phases[phase].states[connection_local_index[connection]];
  }

  // Recomputes every derived index from the primary lists.
  void build_indices();

  // Cross-checks references and signal-program invariants; throws Error.
  void validate() const;

  void set_constraint(int intersection, ConstraintType type);
  void set_all_constraints(ConstraintType type);
};

// Random planar-ish network of signalized intersections with boundary
// terminals. Deterministic for a given cfg.seed.
RoadNetwork generate_network(const NetworkGenConfig& cfg);

// Regular rows x cols grid, every intersection four-way, boundary
// terminals on the outer sides.
RoadNetwork generate_grid(int rows, int cols, std::uint64_t seed,
                          double min_length = 100.0, double max_length = 200.0,
                          int min_lanes = 1, int max_lanes = 2);

// Cyclic for the first half of a seeded shuffle of intersections, acyclic
// for the rest.
void assign_hybrid_constraints(RoadNetwork& net, Rng& rng);

// Phase at cycle position (current + 1) mod cycle length. Throws Error when
// `current` does not belong to the program.
int next_cycle_phase(const SignalProgram& prog, int current);
int cycle_position(const SignalProgram& prog, int phase);

std::string network_to_json(const RoadNetwork& net);
RoadNetwork network_from_json(const std::string& text);
void save_network(const RoadNetwork& net, const std::string& path);
RoadNetwork load_network(const std::string& path);

// Lanes reachable from `origin` through connections (origin included).
std::vector<char> reachable_lanes(const RoadNetwork& net, int origin);

// ---------------------------------------------------------------------------
// Trips

struct Trip {
  int id = 0;
  int time = 0;  // insertion second
  int origin = 0;
  int destination = 0;
};

struct TripProcess {
  std::vector<int> origin_lanes;
  std::vector<int> destination_lanes;
  std::vector<double> origin_probs;
  std::vector<double> destination_probs;
  int period = 120;
  double rate = 0.25;
  std::uint64_t seed = 0;
};

TripProcess make_trip_process(const RoadNetwork& net, std::uint64_t seed,
                              double rate = 0.25, int period = 120);

// Fresh origin/destination vectors from a flat Dirichlet over the eligible
// lanes.
TripProcess resample_od(const TripProcess& tp, Rng& rng);

// Bernoulli insertions for `duration` seconds. OD vectors are redrawn at
// every multiple of tp.period; `windows` receives the vectors in force for
// each period when given.
std::vector<Trip> generate_trips(const RoadNetwork& net, const TripProcess& tp,
                                 int duration, std::vector<TripProcess>* windows = nullptr);

std::string trips_to_json(const std::vector<Trip>& trips);
std::vector<Trip> trips_from_json(const std::string& text);
void save_trips(const std::vector<Trip>& trips, const std::string& path);
std::vector<Trip> load_trips(const std::string& path);

// Order-sensitive FNV-1a hash of a trip set, used to refuse pairing runs
// that did not share their demand.
std::uint64_t trip_set_hash(const std::vector<Trip>& trips);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace mujam

#endif  // MUJAM_NETWORK_HPP_
