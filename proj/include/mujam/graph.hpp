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

// Typed feature graph built from a road network and a simulator state.
//
// Node types: vehicles (V), lanes (L), connections (C), phases (P).
// Edge types: V->L, L->L, L->C, C->P. Connection features live on the C
// nodes and are copied onto every L->L and L->C edge that crosses the
// connection, behind an is-inbound flag.

#ifndef MUJAM_GRAPH_HPP_
#define MUJAM_GRAPH_HPP_

#include <memory>
#include <vector>

#include "mujam/sim.hpp"
#include "mujam/tape.hpp"

namespace mujam {

inline constexpr int kVehicleFeatures = 2;     // speed, position on lane
inline constexpr int kLaneFeatures = 1;        // length
inline constexpr int kConnectionFeatures = 8;
inline constexpr int kLaneEdgeFeatures = 1 + kConnectionFeatures;
inline constexpr int kPhaseEdgeFeatures = 2;   // opens connection, is legal

inline constexpr double kLengthNorm = 200.0;
inline constexpr double kSwitchTimeNorm = 60.0;

// Connection feature columns.
enum ConnectionFeature : int {
  kFeatConstraint = 0,  // 1 cyclic, 0 acyclic
  kFeatTimeSinceSwitch,
  kFeatIsOpen,
  kFeatIsYellow,
  kFeatHasPriority,
  kFeatNextSwitchOpen,
  kFeatSwitchesToOpen,
  kFeatNextOpeningPriority,
};

// Static edge lists of a network; shared by every observation of it.
struct GraphTopology {
  int num_lanes = 0;
  int num_connections = 0;
  int num_phases = 0;
  int num_intersections = 0;

  Matrix lane_features;  // num_lanes x 1

  // L->L: two edges per connection, along and against traffic.
  Index ll_src, ll_dst;
  std::vector<int> ll_connection;
  std::vector<double> ll_inbound;

  // L->C: the inbound lane (along traffic) and the outbound lane.
  Index lc_src, lc_dst;
  std::vector<double> lc_inbound;

  // C->P: every connection of an intersection to every phase of it.
  Index cp_src, cp_dst;
  std::vector<int> cp_local;  // local connection index, for the phase state

  std::vector<int> phase_intersection;
};

GraphTopology build_topology(const RoadNetwork& net);

// Cached per network instance.
std::shared_ptr<const GraphTopology> topology_for(const std::shared_ptr<const RoadNetwork>& net);

// Everything that changes with the controllers.
struct ConnectivityFeatures {
  Matrix connection;   // num_connections x 8
  Matrix lane_edges;   // L->L edges x 9
  Matrix conn_edges;   // L->C edges x 9
  Matrix phase_edges;  // C->P edges x 2
  std::vector<std::vector<int>> legal;  // legal phase ids per intersection

  bool operator==(const ConnectivityFeatures& o) const {
    return connection == o.connection && lane_edges == o.lane_edges && conn_edges == o.conn_edges &&
           phase_edges == o.phase_edges && legal == o.legal;
  }
};

// One row of connection features for the given controller state.
std::vector<double> connection_features(const RoadNetwork& net, const ControllerState& cs, int connection);

std::shared_ptr<const ConnectivityFeatures> connectivity_features(const RoadNetwork& net, const GraphTopology& topo,
                                                                  const std::vector<ControllerState>& controllers);

struct GraphObservation {
  std::shared_ptr<const RoadNetwork> net;
  std::shared_ptr<const GraphTopology> topo;
  std::vector<int> vehicle_lane;  // V->L edge targets
  Matrix vehicle_features;        // vehicles x 2
  std::vector<ControllerState> controllers;
  // May be left empty to save memory; consumers rebuild it from controllers.
  std::shared_ptr<const ConnectivityFeatures> connectivity;
};

GraphObservation encode_observation(const SimState& state);

// Fills in obs.connectivity when it was dropped.
const ConnectivityFeatures& ensure_connectivity(GraphObservation& obs);

}  // namespace mujam

#endif  // MUJAM_GRAPH_HPP_
