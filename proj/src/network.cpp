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

#include "mujam/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mujam {

using nlohmann::json;

namespace {

Side opposite(Side s) { return static_cast<Side>((static_cast<int>(s) + 2) % 4); }

bool on_ns_axis(Side s) { return s == Side::kNorth || s == Side::kSouth; }

// Turn made by a vehicle arriving from side `from` and leaving by side `to`.
// Returns false for a U-turn.
bool classify_turn(Side from, Side to, Turn* turn) {
  const int a = static_cast<int>(from);
  const int b = static_cast<int>(to);
  if (b == a) return false;
  if (b == (a + 2) % 4) {
    *turn = Turn::kStraight;
  } else if (b == (a + 3) % 4) {
    *turn = Turn::kRight;
  } else {
    *turn = Turn::kLeft;
  }
  return true;
}

struct RoadSpec {
  int from = 0;
  int to = 0;
  Side side_at_from = Side::kNorth;  // side of `from` where the road leaves
  Side side_at_to = Side::kNorth;    // side of `to` where the road arrives
  double length = 0.0;
  int num_lanes = 1;
};

struct NodeSpec {
  double x = 0.0;
  double y = 0.0;
  bool signalized = false;
};

class DegenerateDraw : public Error {
 public:
  using Error::Error;
};

// Builds lanes, connections, phases and programs from nodes and roads.
RoadNetwork assemble(const std::vector<NodeSpec>& node_specs,
                     const std::vector<RoadSpec>& road_specs) {
  RoadNetwork net;
  for (std::size_t i = 0; i < node_specs.size(); ++i) {
    Node n;
    n.id = static_cast<int>(i);
    n.x = node_specs[i].x;
    n.y = node_specs[i].y;
    if (node_specs[i].signalized) {
      n.intersection = static_cast<int>(net.intersections.size());
      Intersection x;
      x.id = n.intersection;
      x.node = n.id;
      net.intersections.push_back(x);
    }
    net.nodes.push_back(n);
  }
  for (const RoadSpec& rs : road_specs) {
    Road r;
    r.id = static_cast<int>(net.roads.size());
    r.from_node = rs.from;
    r.to_node = rs.to;
    r.length = rs.length;
    for (int k = 0; k < rs.num_lanes; ++k) {
      Lane l;
      l.id = static_cast<int>(net.lanes.size());
      l.road = r.id;
      l.index = k;
      l.length = rs.length;
      l.speed_limit = kSpeedLimit;
      r.lanes.push_back(l.id);
      net.lanes.push_back(l);
    }
    net.roads.push_back(r);
  }

  for (Intersection& x : net.intersections) {
    struct Approach {
      int road;
      Side side;
    };
    std::vector<Approach> incoming;
    std::vector<Approach> outgoing;
    for (std::size_t r = 0; r < road_specs.size(); ++r) {
      if (road_specs[r].to == x.node) incoming.push_back({static_cast<int>(r), road_specs[r].side_at_to});
      if (road_specs[r].from == x.node) outgoing.push_back({static_cast<int>(r), road_specs[r].side_at_from});
    }
    auto by_side = [](const Approach& a, const Approach& b) { return a.side < b.side; };
    std::sort(incoming.begin(), incoming.end(), by_side);
    std::sort(outgoing.begin(), outgoing.end(), by_side);

    // Connections per approach, lanes split across movements right to left.
    std::map<int, std::vector<int>> straight_lanes_by_road;
    std::map<int, Side> side_of_road;
    for (const Approach& in : incoming) {
      side_of_road[in.road] = in.side;
      struct Movement {
        Turn turn;
        int out_road;
      };
      std::vector<Movement> moves;
      for (const Approach& out : outgoing) {
        Turn t;
        if (classify_turn(in.side, out.side, &t)) moves.push_back({t, out.road});
      }
      if (moves.empty()) throw DegenerateDraw("approach without movements");
      std::stable_sort(moves.begin(), moves.end(),
                       [](const Movement& a, const Movement& b) { return a.turn < b.turn; });
      const std::vector<int>& in_lanes = net.roads[in.road].lanes;
      const int k = static_cast<int>(in_lanes.size());
      const int m = static_cast<int>(moves.size());
      for (int i = 0; i < m; ++i) {
        std::vector<int> allowed;
        for (int j = 0; j < k; ++j) {
          if (j == (i * k) / m || i == (j * m) / k) allowed.push_back(in_lanes[j]);
        }
        const std::vector<int>& out_lanes = net.roads[moves[i].out_road].lanes;
        const int n = std::max<int>(static_cast<int>(allowed.size()), static_cast<int>(out_lanes.size()));
        std::set<std::pair<int, int>> seen;
        for (int t = 0; t < n; ++t) {
          const int a = allowed[std::min<int>(t, static_cast<int>(allowed.size()) - 1)];
          const int b = out_lanes[std::min<int>(t, static_cast<int>(out_lanes.size()) - 1)];
          if (!seen.insert({a, b}).second) continue;
          Connection c;
          c.id = static_cast<int>(net.connections.size());
          c.in_lane = a;
          c.out_lane = b;
          c.intersection = x.id;
          c.turn = moves[i].turn;
          x.connections.push_back(c.id);
          net.connections.push_back(c);
          if (c.turn == Turn::kStraight) straight_lanes_by_road[in.road].push_back(a);
        }
      }
    }

    auto side_of_conn = [&](int c) { return side_of_road.at(net.lanes[net.connections[c].in_lane].road); };
    auto road_on_side = [&](Side s) {
      for (const Approach& in : incoming)
        if (in.side == s) return in.road;
      return -1;
    };

    // Phases: per used axis a through phase and, when left turns have to
    // yield to opposing traffic, a protected-left phase.
    const int nc = static_cast<int>(x.connections.size());
    for (bool ns : {true, false}) {
      bool axis_used = false;
      for (const Approach& in : incoming) axis_used |= (on_ns_axis(in.side) == ns);
      if (!axis_used) continue;
      Phase through;
      through.intersection = x.id;
      through.states.assign(nc, LinkState::kRed);
      bool has_yield_left = false;
      for (int li = 0; li < nc; ++li) {
        const int c = x.connections[li];
        const Side s = side_of_conn(c);
        if (on_ns_axis(s) != ns) continue;
        Connection& conn = net.connections[c];
        through.states[li] = LinkState::kGreenPriority;
        if (conn.turn == Turn::kLeft) {
          const int opp = road_on_side(opposite(s));
          if (opp >= 0 && straight_lanes_by_road.count(opp)) {
            std::vector<int> foes = straight_lanes_by_road[opp];
            std::sort(foes.begin(), foes.end());
            foes.erase(std::unique(foes.begin(), foes.end()), foes.end());
            conn.foe_lanes = foes;
            through.states[li] = LinkState::kGreenYield;
            has_yield_left = true;
          }
        }
      }
      through.id = static_cast<int>(net.phases.size());
      x.phases.push_back(through.id);
      net.phases.push_back(through);
      if (has_yield_left) {
        Phase left;
        left.intersection = x.id;
        left.states.assign(nc, LinkState::kRed);
        for (int li = 0; li < nc; ++li) {
          const int c = x.connections[li];
          if (on_ns_axis(side_of_conn(c)) == ns && net.connections[c].turn == Turn::kLeft)
            left.states[li] = LinkState::kGreenPriority;
        }
        left.id = static_cast<int>(net.phases.size());
        x.phases.push_back(left.id);
        net.phases.push_back(left);
      }
    }
    if (x.phases.size() < 2) throw DegenerateDraw("intersection with fewer than two phases");
    x.program.intersection = x.id;
    x.program.constraint = ConstraintType::kCyclic;
    x.program.cycle = x.phases;
    for (std::size_t p = 0; p < x.phases.size(); ++p) net.phases[x.phases[p]].cycle_index = static_cast<int>(p);
  }
  net.build_indices();
  return net;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

RoadNetwork draw_random_network(const NetworkGenConfig& cfg, Rng& rng) {
  constexpr double kSpacing = 150.0;
  const int n = uniform_int(rng, cfg.min_intersections, cfg.max_intersections);
  const int dx[4] = {0, 1, 0, -1};
  const int dy[4] = {1, 0, -1, 0};

  std::vector<std::pair<int, int>> cells = {{0, 0}};
  std::map<std::pair<int, int>, int> cell_index = {{{0, 0}, 0}};
  std::set<std::pair<int, int>> links;  // (a, b) with a < b
  while (static_cast<int>(cells.size()) < n) {
    const int i = uniform_int(rng, 0, static_cast<int>(cells.size()) - 1);
    const int d = uniform_int(rng, 0, 3);
    std::pair<int, int> c = {cells[i].first + dx[d], cells[i].second + dy[d]};
    if (cell_index.count(c)) continue;
    const int j = static_cast<int>(cells.size());
    cell_index[c] = j;
    cells.push_back(c);
    links.insert({i, j});
  }
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 2; ++d) {
      std::pair<int, int> c = {cells[i].first + dx[d], cells[i].second + dy[d]};
      auto it = cell_index.find(c);
      if (it == cell_index.end()) continue;
      std::pair<int, int> key = {std::min(i, it->second), std::max(i, it->second)};
      if (links.count(key)) continue;
      if (uniform01(rng) < 0.3) links.insert(key);
    }
  }

  std::vector<NodeSpec> nodes;
  for (const auto& c : cells) {
    nodes.push_back({c.first * kSpacing + uniform_real(rng, -20.0, 20.0),
                     c.second * kSpacing + uniform_real(rng, -20.0, 20.0), true});
  }
  auto side_between = [&](int a, int b) {
    const int ddx = cells[b].first - cells[a].first;
    const int ddy = cells[b].second - cells[a].second;
    for (int d = 0; d < 4; ++d)
      if (dx[d] == ddx && dy[d] == ddy) return static_cast<Side>(d);
    throw Error("non-adjacent link");
  };

  struct Link {
    int a, b;
    Side side_a, side_b;
  };
  std::vector<Link> all_links;
  std::vector<std::array<bool, 4>> used(n, {false, false, false, false});
  for (const auto& [a, b] : links) {
    const Side sa = side_between(a, b);
    all_links.push_back({a, b, sa, opposite(sa)});
    used[a][static_cast<int>(sa)] = true;
    used[b][static_cast<int>(opposite(sa))] = true;
  }
  for (int i = 0; i < n; ++i) {
    std::vector<int> free_sides;
    for (int d = 0; d < 4; ++d)
      if (!used[i][d]) free_sides.push_back(d);
    std::vector<int> chosen;
    for (int d : free_sides)
      if (uniform01(rng) < 0.5) chosen.push_back(d);
    int degree = 4 - static_cast<int>(free_sides.size()) + static_cast<int>(chosen.size());
    while (degree < 3) {
      std::vector<int> rest;
      for (int d : free_sides)
        if (std::find(chosen.begin(), chosen.end(), d) == chosen.end()) rest.push_back(d);
      chosen.push_back(rest[uniform_int(rng, 0, static_cast<int>(rest.size()) - 1)]);
      ++degree;
    }
    std::sort(chosen.begin(), chosen.end());
    for (int d : chosen) {
      const int t = static_cast<int>(nodes.size());
      nodes.push_back({(cells[i].first + dx[d]) * kSpacing, (cells[i].second + dy[d]) * kSpacing, false});
      all_links.push_back({i, t, static_cast<Side>(d), opposite(static_cast<Side>(d))});
    }
  }

  std::vector<RoadSpec> roads;
  for (const Link& l : all_links) {
    const double length = uniform_real(rng, cfg.min_length, cfg.max_length);
    RoadSpec ab{l.a, l.b, l.side_a, l.side_b, length, uniform_int(rng, cfg.min_lanes, cfg.max_lanes)};
    RoadSpec ba{l.b, l.a, l.side_b, l.side_a, length, uniform_int(rng, cfg.min_lanes, cfg.max_lanes)};
    roads.push_back(ab);
    roads.push_back(ba);
  }
  return assemble(nodes, roads);
}

char state_char(LinkState s) {
  switch (s) {
    case LinkState::kGreenPriority:
      return 'G';
    case LinkState::kGreenYield:
      return 'g';
    default:
      return 'r';
  }
}

LinkState state_from_char(char c) {
  switch (c) {
    case 'G':
      return LinkState::kGreenPriority;
    case 'g':
      return LinkState::kGreenYield;
    case 'r':
      return LinkState::kRed;
    default:
      throw Error(std::string("unknown link state '") + c + "'");
  }
}

}  // namespace

int RoadNetwork::connection_between(int in_lane, int out_lane) const {
  for (int c : lane_out_connections[in_lane])
    if (connections[c].out_lane == out_lane) return c;
  return -1;
}

void RoadNetwork::build_indices() {
  const std::size_t nl = lanes.size();
  lane_out_connections.assign(nl, {});
  lane_in_connections.assign(nl, {});
  connection_local_index.assign(connections.size(), -1);
  for (const Connection& c : connections) {
    lane_out_connections.at(c.in_lane).push_back(c.id);
    lane_in_connections.at(c.out_lane).push_back(c.id);
  }
  for (Intersection& x : intersections) {
    std::set<int> inbound;
    for (std::size_t li = 0; li < x.connections.size(); ++li) {
      connection_local_index.at(x.connections[li]) = static_cast<int>(li);
      inbound.insert(connections.at(x.connections[li]).in_lane);
    }
    x.inbound_lanes.assign(inbound.begin(), inbound.end());
  }
  origin_lanes.clear();
  destination_lanes.clear();
  for (const Road& r : roads) {
    if (nodes.at(r.from_node).intersection < 0)
      origin_lanes.insert(origin_lanes.end(), r.lanes.begin(), r.lanes.end());
    if (nodes.at(r.to_node).intersection < 0)
      destination_lanes.insert(destination_lanes.end(), r.lanes.begin(), r.lanes.end());
  }
}

void RoadNetwork::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid network: " + what); };
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id != static_cast<int>(i)) fail("node ids out of order");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Lane& l = lanes[i];
    if (l.id != static_cast<int>(i)) fail("lane ids out of order");
    if (l.road < 0 || l.road >= static_cast<int>(roads.size())) fail("lane road out of range");
    if (!(l.length > 0.0) || !(l.speed_limit > 0.0)) fail("lane length/speed must be positive");
  }
  for (std::size_t i = 0; i < roads.size(); ++i) {
    const Road& r = roads[i];
    if (r.id != static_cast<int>(i)) fail("road ids out of order");
    if (r.from_node < 0 || r.from_node >= static_cast<int>(nodes.size()) || r.to_node < 0 ||
        r.to_node >= static_cast<int>(nodes.size()))
      fail("road node out of range");
    for (int l : r.lanes)
      if (l < 0 || l >= static_cast<int>(lanes.size()) || lanes[l].road != r.id) fail("road lane mismatch");
  }
  for (std::size_t i = 0; i < connections.size(); ++i) {
    const Connection& c = connections[i];
    if (c.id != static_cast<int>(i)) fail("connection ids out of order");
    if (c.in_lane < 0 || c.in_lane >= static_cast<int>(lanes.size()) || c.out_lane < 0 ||
        c.out_lane >= static_cast<int>(lanes.size()))
      fail("connection lane out of range");
    if (c.intersection < 0 || c.intersection >= static_cast<int>(intersections.size()))
      fail("connection intersection out of range");
    const int node = intersections[c.intersection].node;
    if (roads[lanes[c.in_lane].road].to_node != node || roads[lanes[c.out_lane].road].from_node != node)
      fail("connection " + std::to_string(c.id) + " does not meet at its intersection");
  }
  std::vector<int> owner(connections.size(), -1);
  for (std::size_t i = 0; i < intersections.size(); ++i) {
    const Intersection& x = intersections[i];
    if (x.id != static_cast<int>(i)) fail("intersection ids out of order");
    if (nodes.at(x.node).intersection != x.id) fail("intersection node mismatch");
    for (int c : x.connections) {
      if (c < 0 || c >= static_cast<int>(connections.size()) || connections[c].intersection != x.id)
        fail("intersection connection mismatch");
      if (owner[c] >= 0) fail("connection owned twice");
      owner[c] = x.id;
    }
    if (x.phases.empty()) fail("intersection without phases");
    std::set<std::vector<LinkState>> distinct;
    for (int p : x.phases) {
      if (p < 0 || p >= static_cast<int>(phases.size()) || phases[p].intersection != x.id)
        fail("phase ownership mismatch");
      const Phase& ph = phases[p];
      if (ph.states.size() != x.connections.size()) fail("phase does not cover every connection");
      if (std::none_of(ph.states.begin(), ph.states.end(), is_green)) fail("phase without green");
      if (!distinct.insert(ph.states).second) fail("duplicate phase at intersection " + std::to_string(x.id));
    }
    const SignalProgram& prog = x.program;
    if (prog.intersection != x.id) fail("program intersection mismatch");
    if (prog.min_phase_duration < 1 || prog.yellow_duration < 1) fail("durations must be >= 1 s");
    std::vector<int> a = prog.cycle, b = x.phases;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) fail("cycle is not a permutation of the intersection's phases");
    for (std::size_t k = 0; k < prog.cycle.size(); ++k)
      if (phases[prog.cycle[k]].cycle_index != static_cast<int>(k)) fail("phase cycle index mismatch");
  }
  for (std::size_t c = 0; c < connections.size(); ++c)
    if (owner[c] < 0) fail("orphan connection");
  for (std::size_t i = 0; i < phases.size(); ++i)
    if (phases[i].id != static_cast<int>(i)) fail("phase ids out of order");

  RoadNetwork copy = *this;
  copy.build_indices();
  if (copy.lane_out_connections != lane_out_connections || copy.lane_in_connections != lane_in_connections ||
      copy.connection_local_index != connection_local_index || copy.origin_lanes != origin_lanes ||
      copy.destination_lanes != destination_lanes)
    fail("adjacency indices inconsistent with primary lists");
  for (std::size_t i = 0; i < intersections.size(); ++i)
    if (copy.intersections[i].inbound_lanes != intersections[i].inbound_lanes) fail("inbound lane index mismatch");
}

void RoadNetwork::set_constraint(int intersection, ConstraintType type) {
  intersections.at(intersection).program.constraint = type;
}

void RoadNetwork::set_all_constraints(ConstraintType type) {
  for (Intersection& x : intersections) x.program.constraint = type;
}

RoadNetwork generate_network(const NetworkGenConfig& cfg) {
  if (cfg.min_intersections < 1 || cfg.max_intersections < cfg.min_intersections)
    throw ConfigError("intersection count range is empty");
  if (!(cfg.min_length > 0.0) || cfg.max_length < cfg.min_length) throw ConfigError("edge length range is empty");
  if (cfg.min_lanes < 1 || cfg.max_lanes < cfg.min_lanes) throw ConfigError("lanes-per-road range is empty");
  Rng rng(cfg.seed);
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    try {
      RoadNetwork net = draw_random_network(cfg, rng);
      net.validate();
      return net;
    } catch (const DegenerateDraw&) {
      continue;
    }
  }
  throw Error("network generation failed after " + std::to_string(cfg.max_retries) + " retries");
}

RoadNetwork generate_grid(int rows, int cols, std::uint64_t seed, double min_length, double max_length,
                          int min_lanes, int max_lanes) {
  if (rows < 1 || cols < 1) throw ConfigError("grid needs at least one row and column");
  constexpr double kSpacing = 150.0;
  Rng rng(seed);
  std::vector<NodeSpec> nodes;
  auto at = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) nodes.push_back({c * kSpacing, r * kSpacing, true});
  std::vector<RoadSpec> roads;
  auto link = [&](int a, int b, Side side_a) {
    const double length = uniform_real(rng, min_length, max_length);
    roads.push_back({a, b, side_a, opposite(side_a), length, uniform_int(rng, min_lanes, max_lanes)});
    roads.push_back({b, a, opposite(side_a), side_a, length, uniform_int(rng, min_lanes, max_lanes)});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) link(at(r, c), at(r, c + 1), Side::kEast);
      if (r + 1 < rows) link(at(r, c), at(r + 1, c), Side::kNorth);
    }
  }
  auto terminal = [&](int r, int c, Side side, double x, double y) {
    const int t = static_cast<int>(nodes.size());
    nodes.push_back({x, y, false});
    link(at(r, c), t, side);
  };
  for (int c = 0; c < cols; ++c) {
    terminal(0, c, Side::kSouth, c * kSpacing, -kSpacing);
    terminal(rows - 1, c, Side::kNorth, c * kSpacing, rows * kSpacing);
  }
  for (int r = 0; r < rows; ++r) {
    terminal(r, 0, Side::kWest, -kSpacing, r * kSpacing);
    terminal(r, cols - 1, Side::kEast, cols * kSpacing, r * kSpacing);
  }
  RoadNetwork net = assemble(nodes, roads);
  net.validate();
  return net;
}

void assign_hybrid_constraints(RoadNetwork& net, Rng& rng) {
  std::vector<int> order(net.intersections.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = order.size() / 2;
  for (std::size_t k = 0; k < order.size(); ++k)
    net.set_constraint(order[k], k < half ? ConstraintType::kCyclic : ConstraintType::kAcyclic);
}

int cycle_position(const SignalProgram& prog, int phase) {
  for (std::size_t k = 0; k < prog.cycle.size(); ++k)
    if (prog.cycle[k] == phase) return static_cast<int>(k);
  throw Error("phase " + std::to_string(phase) + " is not part of the program of intersection " +
              std::to_string(prog.intersection));
}

int next_cycle_phase(const SignalProgram& prog, int current) {
  const int pos = cycle_position(prog, current);
  return prog.cycle[(pos + 1) % prog.cycle.size()];
}

std::vector<char> reachable_lanes(const RoadNetwork& net, int origin) {
  std::vector<char> seen(net.lanes.size(), 0);
  std::vector<int> stack = {origin};
  seen[origin] = 1;
  while (!stack.empty()) {
    const int l = stack.back();
    stack.pop_back();
    for (int c : net.lane_out_connections[l]) {
      const int o = net.connections[c].out_lane;
      if (!seen[o]) {
        seen[o] = 1;
        stack.push_back(o);
      }
    }
  }
  return seen;
}

// ---------------------------------------------------------------------------
// Serialization

std::string network_to_json(const RoadNetwork& net) {
  json j;
  j["version"] = kNetworkFormatVersion;
  json nodes = json::array();
  for (const Node& n : net.nodes) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"intersection", n.intersection}});
  j["nodes"] = nodes;
  json roads = json::array();
  for (const Road& r : net.roads)
    roads.push_back({{"id", r.id}, {"from", r.from_node}, {"to", r.to_node}, {"length", r.length}, {"lanes", r.lanes}});
  j["roads"] = roads;
  json lanes = json::array();
  for (const Lane& l : net.lanes)
    lanes.push_back({{"id", l.id}, {"road", l.road}, {"index", l.index}, {"length", l.length}, {"speed_limit", l.speed_limit}});
  j["lanes"] = lanes;
  json xs = json::array();
  for (const Intersection& x : net.intersections)
    xs.push_back({{"id", x.id}, {"node", x.node}, {"connections", x.connections}, {"phases", x.phases}});
  j["intersections"] = xs;
  json conns = json::array();
  for (const Connection& c : net.connections)
    conns.push_back({{"id", c.id},
                     {"in", c.in_lane},
                     {"out", c.out_lane},
                     {"intersection", c.intersection},
                     {"turn", static_cast<int>(c.turn)},
                     {"foes", c.foe_lanes}});
  j["connections"] = conns;
  json phases = json::array();
  for (const Phase& p : net.phases) {
    std::string s;
    for (LinkState st : p.states) s.push_back(state_char(st));
    phases.push_back({{"id", p.id}, {"intersection", p.intersection}, {"states", s}, {"cycle_index", p.cycle_index}});
  }
  j["phases"] = phases;
  json programs = json::array();
  for (const Intersection& x : net.intersections) {
    const SignalProgram& pr = x.program;
    programs.push_back({{"intersection", pr.intersection},
                        {"constraint", pr.constraint == ConstraintType::kCyclic ? "cyclic" : "acyclic"},
                        {"cycle", pr.cycle},
                        {"min_phase_duration", pr.min_phase_duration},
                        {"yellow_duration", pr.yellow_duration}});
  }
  j["programs"] = programs;
  return j.dump(1) + "\n";
}

RoadNetwork network_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("network file is not valid JSON: ") + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != kNetworkFormatVersion)
    throw Error("unsupported network file version");
  RoadNetwork net;
  try {
    for (const json& n : j.at("nodes"))
      net.nodes.push_back({n.at("id").get<int>(), n.at("x").get<double>(), n.at("y").get<double>(),
                           n.at("intersection").get<int>()});
    for (const json& r : j.at("roads")) {
      Road road;
      road.id = r.at("id").get<int>();
      road.from_node = r.at("from").get<int>();
      road.to_node = r.at("to").get<int>();
      road.length = r.at("length").get<double>();
      road.lanes = r.at("lanes").get<std::vector<int>>();
      net.roads.push_back(road);
    }
    for (const json& l : j.at("lanes"))
      net.lanes.push_back({l.at("id").get<int>(), l.at("road").get<int>(), l.at("index").get<int>(),
                           l.at("length").get<double>(), l.at("speed_limit").get<double>()});
    for (const json& x : j.at("intersections")) {
      Intersection in;
      in.id = x.at("id").get<int>();
      in.node = x.at("node").get<int>();
      in.connections = x.at("connections").get<std::vector<int>>();
      in.phases = x.at("phases").get<std::vector<int>>();
      net.intersections.push_back(in);
    }
    for (const json& c : j.at("connections")) {
      Connection conn;
      conn.id = c.at("id").get<int>();
      conn.in_lane = c.at("in").get<int>();
      conn.out_lane = c.at("out").get<int>();
      conn.intersection = c.at("intersection").get<int>();
      conn.turn = static_cast<Turn>(c.at("turn").get<int>());
      conn.foe_lanes = c.at("foes").get<std::vector<int>>();
      net.connections.push_back(conn);
    }
    for (const json& p : j.at("phases")) {
      Phase ph;
      ph.id = p.at("id").get<int>();
      ph.intersection = p.at("intersection").get<int>();
      for (char ch : p.at("states").get<std::string>()) ph.states.push_back(state_from_char(ch));
      ph.cycle_index = p.at("cycle_index").get<int>();
      net.phases.push_back(ph);
    }
    for (const json& p : j.at("programs")) {
      const int x = p.at("intersection").get<int>();
      if (x < 0 || x >= static_cast<int>(net.intersections.size())) throw Error("program for unknown intersection");
      SignalProgram& pr = net.intersections[x].program;
      pr.intersection = x;
      const std::string kind = p.at("constraint").get<std::string>();
      if (kind == "cyclic") {
        pr.constraint = ConstraintType::kCyclic;
      } else if (kind == "acyclic") {
        pr.constraint = ConstraintType::kAcyclic;
      } else {
        throw Error("unknown constraint type '" + kind + "'");
      }
      pr.cycle = p.at("cycle").get<std::vector<int>>();
      pr.min_phase_duration = p.at("min_phase_duration").get<int>();
      pr.yellow_duration = p.at("yellow_duration").get<int>();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed network file: ") + e.what());
  }
  for (const Connection& c : net.connections) {
    if (c.in_lane < 0 || c.in_lane >= net.num_lanes() || c.out_lane < 0 || c.out_lane >= net.num_lanes())
      throw Error("invalid network: connection lane out of range");
  }
  for (const Intersection& x : net.intersections)
    for (int c : x.connections)
      if (c < 0 || c >= static_cast<int>(net.connections.size()))
        throw Error("invalid network: intersection connection out of range");
  net.build_indices();
  net.validate();
  return net;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void save_network(const RoadNetwork& net, const std::string& path) { write_file(path, network_to_json(net)); }

RoadNetwork load_network(const std::string& path) { return network_from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Trips

TripProcess make_trip_process(const RoadNetwork& net, std::uint64_t seed, double rate, int period) {
  if (net.origin_lanes.empty() || net.destination_lanes.empty())
    throw Error("network has no boundary lanes for trips");
  if (period <= 0) throw ConfigError("trip resample period must be positive");
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("insertion rate must be a per-second probability");
  TripProcess tp;
  tp.origin_lanes = net.origin_lanes;
  tp.destination_lanes = net.destination_lanes;
  tp.origin_probs.assign(tp.origin_lanes.size(), 1.0 / tp.origin_lanes.size());
  tp.destination_probs.assign(tp.destination_lanes.size(), 1.0 / tp.destination_lanes.size());
  tp.period = period;
  tp.rate = rate;
  tp.seed = seed;
  return tp;
}

namespace {

std::vector<double> flat_dirichlet(std::size_t n, Rng& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

int sample_index(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return -1;
}

}  // namespace

TripProcess resample_od(const TripProcess& tp, Rng& rng) {
  TripProcess out = tp;
  out.origin_probs = flat_dirichlet(tp.origin_lanes.size(), rng);
  out.destination_probs = flat_dirichlet(tp.destination_lanes.size(), rng);
  return out;
}

std::vector<Trip> generate_trips(const RoadNetwork& net, const TripProcess& tp_in, int duration,
                                 std::vector<TripProcess>* windows) {
  Rng rng(tp_in.seed);
  TripProcess tp = tp_in;
  std::vector<std::vector<char>> reach(tp.origin_lanes.size());
  for (std::size_t i = 0; i < tp.origin_lanes.size(); ++i) reach[i] = reachable_lanes(net, tp.origin_lanes[i]);
  std::vector<Trip> trips;
  for (int t = 0; t < duration; ++t) {
    if (t % tp.period == 0) {
      tp = resample_od(tp, rng);
      if (windows) windows->push_back(tp);
    }
    if (uniform01(rng) >= tp.rate) continue;
    for (int attempt = 0; attempt < 16; ++attempt) {
      const int o = sample_index(tp.origin_probs, rng);
      std::vector<double> w(tp.destination_lanes.size(), 0.0);
      for (std::size_t k = 0; k < w.size(); ++k)
        if (reach[o][tp.destination_lanes[k]]) w[k] = tp.destination_probs[k];
      const int d = sample_index(w, rng);
      if (d < 0) continue;
      trips.push_back({static_cast<int>(trips.size()), t, tp.origin_lanes[o], tp.destination_lanes[d]});
      break;
    }
  }
  return trips;
}

std::string trips_to_json(const std::vector<Trip>& trips) {
  json list = json::array();
  for (const Trip& t : trips)
    list.push_back({{"id", t.id}, {"time", t.time}, {"origin", t.origin}, {"destination", t.destination}});
  json j;
  j["version"] = kTripFormatVersion;
  j["trips"] = list;
  return j.dump(1) + "\n";
}

std::vector<Trip> trips_from_json(const std::string& text) {
  std::vector<Trip> trips;
  try {
    json j = json::parse(text);
    if (j.at("version").get<int>() != kTripFormatVersion) throw Error("unsupported trip file version");
    for (const json& t : j.at("trips"))
      trips.push_back({t.at("id").get<int>(), t.at("time").get<int>(), t.at("origin").get<int>(),
                       t.at("destination").get<int>()});
  } catch (const json::exception& e) {
    throw Error(std::string("malformed trip file: ") + e.what());
  }
  std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) { return a.time < b.time; });
  return trips;
}

void save_trips(const std::vector<Trip>& trips, const std::string& path) { write_file(path, trips_to_json(trips)); }

std::vector<Trip> load_trips(const std::string& path) { return trips_from_json(read_file(path)); }

std::uint64_t trip_set_hash(const std::vector<Trip>& trips) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>((v >> (8 * b)) & 0xff);
      h *= 1099511628211ULL;
    }
  };
  for (const Trip& t : trips) {
    mix(t.id);
    mix(t.time);
    mix(t.origin);
    mix(t.destination);
  }
  return h;
}

}  // namespace mujam
