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

#include "mujam/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace mujam {

namespace signal {

ControllerState initial_state(const RoadNetwork& net, int intersection) {
  ControllerState cs;
  cs.intersection = intersection;
  cs.current_phase = net.program(intersection).cycle.front();
  // Start unlocked so every policy may act from the first second.
  cs.time_since_switch = net.program(intersection).min_phase_duration;
  return cs;
}

std::vector<int> legal_phases(const RoadNetwork& net, const ControllerState& cs) {
  const SignalProgram& prog = net.program(cs.intersection);
  if (cs.in_yellow) return {cs.target_phase};
  if (cs.time_since_switch < prog.min_phase_duration) return {cs.current_phase};
  if (prog.constraint == ConstraintType::kCyclic) {
    const int next = next_cycle_phase(prog, cs.current_phase);
    if (next == cs.current_phase) return {cs.current_phase};
    return {cs.current_phase, next};
  }
  return prog.cycle;
}

bool is_legal(const RoadNetwork& net, const ControllerState& cs, int phase) {
  const std::vector<int> legal = legal_phases(net, cs);
  return std::find(legal.begin(), legal.end(), phase) != legal.end();
}

bool needs_yellow(const RoadNetwork& net, int from, int to) {
  const Phase& a = net.phases[from];
  const Phase& b = net.phases[to];
  for (std::size_t i = 0; i < a.states.size(); ++i)
    if (is_green(a.states[i]) && !is_green(b.states[i])) return true;
  return false;
}

void apply_choice(const RoadNetwork& net, ControllerState& cs, int phase) {
  if (!is_legal(net, cs, phase)) throw IllegalAction(cs.intersection, phase);
  if (cs.in_yellow || phase == cs.current_phase) return;
  cs.time_since_switch = 0;
  if (needs_yellow(net, cs.current_phase, phase)) {
    cs.in_yellow = true;
    cs.target_phase = phase;
    cs.yellow_remaining = net.program(cs.intersection).yellow_duration;
  } else {
    cs.current_phase = phase;
  }
}

void tick(ControllerState& cs) {
  ++cs.time_since_switch;
  if (cs.in_yellow && --cs.yellow_remaining <= 0) {
    cs.current_phase = cs.target_phase;
    cs.target_phase = -1;
    cs.in_yellow = false;
    cs.yellow_remaining = 0;
  }
}

SignalColor color(const RoadNetwork& net, const ControllerState& cs, int connection) {
  const LinkState now = net.link_state(cs.current_phase, connection);
  if (cs.in_yellow) {
    const LinkState next = net.link_state(cs.target_phase, connection);
    if (is_green(now) && !is_green(next)) return SignalColor::kYellow;
    if (!is_green(now)) return SignalColor::kRed;
  }
  switch (now) {
    case LinkState::kGreenPriority:
      return SignalColor::kGreenPriority;
    case LinkState::kGreenYield:
      return SignalColor::kGreenYield;
    default:
      return SignalColor::kRed;
  }
}

}  // namespace signal

std::vector<int> shortest_route(const RoadNetwork& net, int origin, int destination) {
  const int n = net.num_lanes();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[origin] = net.lanes[origin].length;
  pq.push({dist[origin], origin});
  while (!pq.empty()) {
    auto [d, l] = pq.top();
    pq.pop();
    if (d > dist[l]) continue;
    if (l == destination) break;
    for (int c : net.lane_out_connections[l]) {
      const int o = net.connections[c].out_lane;
      const double nd = d + net.lanes[o].length;
      if (nd < dist[o]) {
        dist[o] = nd;
        prev[o] = l;
        pq.push({nd, o});
      }
    }
  }
  if (!std::isfinite(dist[destination])) return {};
  std::vector<int> route;
  for (int l = destination; l != -1; l = prev[l]) route.push_back(l);
  std::reverse(route.begin(), route.end());
  return route;
}

SimState::SimState(std::shared_ptr<const RoadNetwork> net, std::vector<Trip> trips)
    : net_(std::move(net)), trips_(std::move(trips)) {
  std::stable_sort(trips_.begin(), trips_.end(), [](const Trip& a, const Trip& b) { return a.time < b.time; });
  for (int x = 0; x < net_->num_intersections(); ++x) controllers_.push_back(signal::initial_state(*net_, x));
  lane_queue_.assign(net_->lanes.size(), {});
  pending_.assign(net_->lanes.size(), {});
}

int SimState::pending() const {
  int n = static_cast<int>(trips_.size() - next_trip_);
  for (const auto& q : pending_) n += static_cast<int>(q.size());
  return n;
}

bool SimState::all_trips_done() const { return vehicles_.empty() && pending() == 0; }

const std::vector<int>& SimState::route_for(int origin, int destination) {
  auto key = std::make_pair(origin, destination);
  auto it = routes_.find(key);
  if (it != routes_.end()) return it->second;
  return routes_.emplace(key, shortest_route(*net_, origin, destination)).first->second;
}

int SimState::place_vehicle(std::vector<int> route, double position, double speed) {
  Vehicle v;
  v.id = kPlacedVehicleBase + next_vehicle_id_++;
  v.route = std::move(route);
  v.position = position;
  v.speed = speed;
  v.insertion_time = clock_;
  auto& q = lane_queue_[v.lane()];
  // Keep the lane ordered front first.
  auto pos = std::find_if(q.begin(), q.end(), [&](int id) { return vehicles_.at(id).position < position; });
  q.insert(pos, v.id);
  vehicles_.emplace(v.id, std::move(v));
  ++inserted_;
  return kPlacedVehicleBase + next_vehicle_id_ - 1;
}

void SimState::apply_action(const JointAction& action) {
  if (action.phases.size() != controllers_.size())
    throw Error("joint action covers " + std::to_string(action.phases.size()) + " intersections, network has " +
                std::to_string(controllers_.size()));
  // Validate everything before mutating so a rejected action leaves no trace.
  for (std::size_t x = 0; x < controllers_.size(); ++x)
    if (!signal::is_legal(*net_, controllers_[x], action.phases[x]))
      throw IllegalAction(static_cast<int>(x), action.phases[x]);
  for (std::size_t x = 0; x < controllers_.size(); ++x) signal::apply_choice(*net_, controllers_[x], action.phases[x]);
}

double SimState::entry_capacity(int lane) const {
  const auto& q = lane_queue_[lane];
  if (q.empty()) return net_->lanes[lane].length;
  return vehicles_.at(q.back()).position - kVehicleLength - kMinGap;
}

bool SimState::yield_clear(int connection) const {
  for (int foe : net_->connections[connection].foe_lanes) {
    const double length = net_->lanes[foe].length;
    for (int id : lane_queue_[foe])
      if (length - vehicles_.at(id).position <= kQueueReach) return false;
  }
  return true;
}

void SimState::move_vehicles() {
  std::vector<int> finished;
  for (int lane = 0; lane < net_->num_lanes(); ++lane) {
    const double length = net_->lanes[lane].length;
    const double vmax = std::min(net_->lanes[lane].speed_limit, kVehicleMaxSpeed);
    std::vector<int>& q = lane_queue_[lane];
    std::size_t k = 0;
    while (k < q.size()) {
      const int id = q[k];
      Vehicle& v = vehicles_.at(id);
      if (v.last_moved == clock_) {
        ++k;
        continue;
      }
      v.last_moved = clock_;
      const double desired = std::min(v.speed + kAcceleration, vmax);
      if (k > 0) {
        const Vehicle& leader = vehicles_.at(q[k - 1]);
        const double room = std::max(0.0, leader.position - kVehicleLength - kMinGap - v.position);
        const double travel = std::min(desired, room);
        v.position += travel;
        v.speed = travel;
        ++k;
        continue;
      }
      const double to_end = length - v.position;
      const bool last_lane = v.route_pos + 1 >= static_cast<int>(v.route.size());
      if (last_lane) {
        if (desired >= to_end) {
          v.speed = desired;
          finished.push_back(id);
          q.erase(q.begin() + static_cast<std::ptrdiff_t>(k));
          continue;
        }
        v.position += desired;
        v.speed = desired;
        ++k;
        continue;
      }
      const int next = v.route[v.route_pos + 1];
      const int conn = net_->connection_between(lane, next);
      bool open = false;
      if (conn >= 0) {
        const SignalColor c = signal::color(*net_, controllers_[net_->connections[conn].intersection], conn);
        open = c == SignalColor::kGreenPriority || (c == SignalColor::kGreenYield && yield_clear(conn));
      }
      if (open && desired > to_end) {
        const double cap = entry_capacity(next);
        if (cap >= 0.0) {
          const double beyond = std::min(desired - to_end, cap);
          v.route_pos += 1;
          v.position = beyond;
          v.speed = to_end + beyond;
          lane_queue_[next].push_back(id);
          q.erase(q.begin() + static_cast<std::ptrdiff_t>(k));
          continue;
        }
      }
      const double travel = std::min(desired, to_end);
      v.position += travel;
      v.speed = travel;
      ++k;
    }
  }
  for (int id : finished) {
    const Vehicle& v = vehicles_.at(id);
    completed_.push_back({v.id, v.insertion_time, clock_ + 1, v.delay});
    vehicles_.erase(id);
  }
}

void SimState::insert_vehicles() {
  while (next_trip_ < trips_.size() && trips_[next_trip_].time <= clock_) {
    const Trip& t = trips_[next_trip_++];
    pending_[t.origin].push_back(t);
  }
  for (int lane = 0; lane < net_->num_lanes(); ++lane) {
    auto& q = pending_[lane];
    while (!q.empty() && entry_capacity(lane) >= 0.0) {
      const Trip t = q.front();
      q.pop_front();
      std::vector<int> route = route_for(t.origin, t.destination);
      if (route.empty()) throw Error("trip " + std::to_string(t.id) + " has no route");
      Vehicle v;
      v.id = t.id;
      v.route = std::move(route);
      v.insertion_time = clock_;
      lane_queue_[lane].push_back(v.id);
      vehicles_.emplace(v.id, std::move(v));
      ++inserted_;
    }
  }
}

StepOutcome SimState::step(const JointAction& action) {
  apply_action(action);
  move_vehicles();
  insert_vehicles();

  StepOutcome out;
  out.lane_rewards.assign(net_->lanes.size(), 0.0);
  for (int l = 0; l < net_->num_lanes(); ++l) {
    out.lane_rewards[l] = -static_cast<double>(queue_count(*this, l));
    out.global_reward += out.lane_rewards[l];
  }
  for (auto& [id, v] : vehicles_) {
    const double target = std::min(kVehicleMaxSpeed, net_->lanes[v.lane()].speed_limit);
    const double inc = (target - v.speed) / target;
    v.delay += inc;
    out.delay += inc;
    out.trip_delay_increments.emplace_back(id, inc);
  }
  for (ControllerState& cs : controllers_) signal::tick(cs);
  ++clock_;
  return out;
}

std::vector<int> legal_phases(const SimState& state, int intersection) {
  return signal::legal_phases(state.network(), state.controller(intersection));
}

int queue_count(const SimState& state, int lane) {
  const double length = state.network().lanes.at(lane).length;
  int n = 0;
  for (int id : state.lane_vehicles(lane)) {
    const Vehicle& v = state.vehicles().at(id);
    if (v.speed < kStoppedSpeed && length - v.position <= kQueueReach) ++n;
  }
  return n;
}

double instantaneous_delay(const SimState& state) {
  double d = 0.0;
  for (const auto& [id, v] : state.vehicles()) {
    const double target = std::min(kVehicleMaxSpeed, state.network().lanes[v.lane()].speed_limit);
    d += (target - v.speed) / target;
  }
  return d;
}

TraceWriter::TraceWriter(std::ostream& out) : out_(out) { out_ << "t,intersection,phase,global_reward,d_t\n"; }

void TraceWriter::record(int t, const SimState& state, const StepOutcome& outcome) {
  for (const ControllerState& cs : state.controllers())
    out_ << t << ',' << cs.intersection << ',' << cs.current_phase << ',' << outcome.global_reward << ','
         << outcome.delay << '\n';
}

void write_trip_csv(std::ostream& out, const std::vector<CompletedTrip>& trips) {
  out << "vehicle_id,insertion_t,completion_t,total_delay\n";
  for (const CompletedTrip& t : trips)
    out << t.vehicle_id << ',' << t.insertion_time << ',' << t.completion_time << ',' << t.total_delay << '\n';
}

}  // namespace mujam
