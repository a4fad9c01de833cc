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

#include "mujam/graph.hpp"

#include <algorithm>
#include <map>
#include <mutex>

namespace mujam {

GraphTopology build_topology(const RoadNetwork& net) {
  GraphTopology t;
  t.num_lanes = net.num_lanes();
  t.num_connections = static_cast<int>(net.connections.size());
  t.num_phases = static_cast<int>(net.phases.size());
  t.num_intersections = net.num_intersections();

  t.lane_features.resize(t.num_lanes, kLaneFeatures);
  for (int l = 0; l < t.num_lanes; ++l) t.lane_features(l, 0) = net.lanes[l].length / kLengthNorm;

  std::vector<int> ll_src, ll_dst, lc_src, lc_dst;
  for (const Connection& c : net.connections) {
    ll_src.push_back(c.in_lane);
    ll_dst.push_back(c.out_lane);
    t.ll_connection.push_back(c.id);
    t.ll_inbound.push_back(1.0);
    ll_src.push_back(c.out_lane);
    ll_dst.push_back(c.in_lane);
    t.ll_connection.push_back(c.id);
    t.ll_inbound.push_back(0.0);

    lc_src.push_back(c.in_lane);
    lc_dst.push_back(c.id);
    t.lc_inbound.push_back(1.0);
    lc_src.push_back(c.out_lane);
    lc_dst.push_back(c.id);
    t.lc_inbound.push_back(0.0);
  }
  std::vector<int> cp_src, cp_dst;
  for (const Intersection& x : net.intersections) {
    for (int p : x.phases) {
      for (std::size_t i = 0; i < x.connections.size(); ++i) {
        cp_src.push_back(x.connections[i]);
        cp_dst.push_back(p);
        t.cp_local.push_back(static_cast<int>(i));
      }
    }
  }
  for (const Phase& p : net.phases) t.phase_intersection.push_back(p.intersection);
  t.ll_src = make_index(std::move(ll_src));
  t.ll_dst = make_index(std::move(ll_dst));
  t.lc_src = make_index(std::move(lc_src));
  t.lc_dst = make_index(std::move(lc_dst));
  t.cp_src = make_index(std::move(cp_src));
  t.cp_dst = make_index(std::move(cp_dst));
  return t;
}

std::shared_ptr<const GraphTopology> topology_for(const std::shared_ptr<const RoadNetwork>& net) {
  static std::mutex mu;
  static std::map<const RoadNetwork*, std::pair<std::weak_ptr<const RoadNetwork>, std::shared_ptr<const GraphTopology>>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(net.get());
  if (it != cache.end() && !it->second.first.expired() && it->second.first.lock() == net) return it->second.second;
  for (auto e = cache.begin(); e != cache.end();) e = e->second.first.expired() ? cache.erase(e) : std::next(e);
  auto topo = std::make_shared<const GraphTopology>(build_topology(*net));
  cache[net.get()] = {net, topo};
  return topo;
}

std::vector<double> connection_features(const RoadNetwork& net, const ControllerState& cs, int connection) {
  const SignalProgram& prog = net.program(cs.intersection);
  const bool cyclic = prog.constraint == ConstraintType::kCyclic;
  const SignalColor color = signal::color(net, cs, connection);
  std::vector<double> f(kConnectionFeatures, 0.0);
  f[kFeatConstraint] = cyclic ? 1.0 : 0.0;
  f[kFeatTimeSinceSwitch] = std::min(1.0, cs.time_since_switch / kSwitchTimeNorm);
  f[kFeatIsOpen] = is_open(color) ? 1.0 : 0.0;
  f[kFeatIsYellow] = color == SignalColor::kYellow ? 1.0 : 0.0;
  f[kFeatHasPriority] = color == SignalColor::kGreenPriority ? 1.0 : 0.0;
  if (!cyclic) {
    f[kFeatNextSwitchOpen] = f[kFeatSwitchesToOpen] = f[kFeatNextOpeningPriority] = -1.0;
    return f;
  }
  // Phases still to come, in order: the locked target first when a switch is
  // under way, otherwise the next phase of the cycle.
  const int len = static_cast<int>(prog.cycle.size());
  int phase = cs.in_yellow ? cs.target_phase : next_cycle_phase(prog, cs.current_phase);
  int first_open = -1;
  LinkState first_state = LinkState::kRed;
  for (int k = 1; k <= len; ++k) {
    const LinkState s = net.link_state(phase, connection);
    if (k == 1) f[kFeatNextSwitchOpen] = is_green(s) ? 1.0 : 0.0;
    if (is_green(s)) {
      first_open = k;
      first_state = s;
      break;
    }
    phase = next_cycle_phase(prog, phase);
  }
  if (is_open(color)) {
    f[kFeatSwitchesToOpen] = 0.0;
  } else {
    f[kFeatSwitchesToOpen] = first_open < 0 ? 1.0 : static_cast<double>(first_open) / len;
  }
  f[kFeatNextOpeningPriority] = first_state == LinkState::kGreenPriority ? 1.0 : 0.0;
  return f;
}

std::shared_ptr<const ConnectivityFeatures> connectivity_features(const RoadNetwork& net, const GraphTopology& topo,
                                                                  const std::vector<ControllerState>& controllers) {
  auto cf = std::make_shared<ConnectivityFeatures>();
  cf->connection.resize(topo.num_connections, kConnectionFeatures);
  for (const Connection& c : net.connections) {
    const std::vector<double> f = connection_features(net, controllers.at(c.intersection), c.id);
    for (int k = 0; k < kConnectionFeatures; ++k) cf->connection(c.id, k) = f[k];
  }
  auto lane_edges = [&](const std::vector<double>& inbound, const std::vector<int>& conn) {
    Matrix m(static_cast<Eigen::Index>(inbound.size()), kLaneEdgeFeatures);
    for (std::size_t e = 0; e < inbound.size(); ++e) {
      m(e, 0) = inbound[e];
      m.row(e).tail(kConnectionFeatures) = cf->connection.row(conn[e]);
    }
    return m;
  };
  cf->lane_edges = lane_edges(topo.ll_inbound, topo.ll_connection);
  cf->conn_edges = lane_edges(topo.lc_inbound, *topo.lc_dst);

  cf->legal.resize(topo.num_intersections);
  for (int x = 0; x < topo.num_intersections; ++x) cf->legal[x] = signal::legal_phases(net, controllers.at(x));
  cf->phase_edges.resize(static_cast<Eigen::Index>(topo.cp_src->size()), kPhaseEdgeFeatures);
  for (std::size_t e = 0; e < topo.cp_src->size(); ++e) {
    const int p = (*topo.cp_dst)[e];
    const auto& legal = cf->legal[topo.phase_intersection[p]];
    cf->phase_edges(e, 0) = is_green(net.phases[p].states[topo.cp_local[e]]) ? 1.0 : 0.0;
    cf->phase_edges(e, 1) = std::find(legal.begin(), legal.end(), p) != legal.end() ? 1.0 : 0.0;
  }
  return cf;
}

GraphObservation encode_observation(const SimState& state) {
  GraphObservation obs;
  obs.net = state.network_ptr();
  obs.topo = topology_for(obs.net);
  const RoadNetwork& net = *obs.net;
  obs.vehicle_features.resize(static_cast<Eigen::Index>(state.vehicles().size()), kVehicleFeatures);
  int row = 0;
  // Lane order then front-first, so the encoding is independent of vehicle ids.
  for (int l = 0; l < net.num_lanes(); ++l) {
    for (int id : state.lane_vehicles(l)) {
      const Vehicle& v = state.vehicles().at(id);
      obs.vehicle_lane.push_back(l);
      obs.vehicle_features(row, 0) = v.speed / kSpeedLimit;
      obs.vehicle_features(row, 1) = v.position / net.lanes[l].length;
      ++row;
    }
  }
  obs.controllers = state.controllers();
  obs.connectivity = connectivity_features(net, *obs.topo, obs.controllers);
  return obs;
}

const ConnectivityFeatures& ensure_connectivity(GraphObservation& obs) {
  if (!obs.topo) obs.topo = topology_for(obs.net);
  if (!obs.connectivity) obs.connectivity = connectivity_features(*obs.net, *obs.topo, obs.controllers);
  return *obs.connectivity;
}

}  // namespace mujam
