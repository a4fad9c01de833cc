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

#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "mujam/network.hpp"

namespace mujam {
namespace {

NetworkGenConfig seeded(std::uint64_t seed) {
  NetworkGenConfig cfg;
  cfg.seed = seed;
  return cfg;
}

TEST(GenerateNetwork, DefaultsRespectRanges) {
  RoadNetwork net = generate_network(seeded(7));
  EXPECT_GE(net.num_intersections(), 2);
  EXPECT_LE(net.num_intersections(), 6);
  for (const Lane& l : net.lanes) {
    EXPECT_GE(l.length, 100.0);
    EXPECT_LE(l.length, 200.0);
    EXPECT_GT(l.speed_limit, 0.0);
  }
  for (const Road& r : net.roads) {
    EXPECT_GE(r.lanes.size(), 1u);
    EXPECT_LE(r.lanes.size(), 4u);
  }
  EXPECT_NO_THROW(net.validate());
}

TEST(GenerateNetwork, SingleIntersection) {
  NetworkGenConfig cfg = seeded(3);
  cfg.min_intersections = cfg.max_intersections = 1;
  RoadNetwork net = generate_network(cfg);
  ASSERT_EQ(net.num_intersections(), 1);
  EXPECT_GE(net.intersections[0].phases.size(), 2u);
  EXPECT_NO_THROW(net.validate());
}

TEST(GenerateNetwork, Deterministic) {
  EXPECT_EQ(network_to_json(generate_network(seeded(11))), network_to_json(generate_network(seeded(11))));
  EXPECT_NE(network_to_json(generate_network(seeded(11))), network_to_json(generate_network(seeded(12))));
}

TEST(GenerateNetwork, RejectsEmptyRanges) {
  NetworkGenConfig cfg = seeded(1);
  cfg.min_intersections = 4;
  cfg.max_intersections = 3;
  EXPECT_THROW(generate_network(cfg), ConfigError);
}

class NetworkProperties : public ::testing::TestWithParam<int> {};

TEST_P(NetworkProperties, StructuralInvariants) {
  RoadNetwork net = generate_network(seeded(static_cast<std::uint64_t>(GetParam())));
  ASSERT_NO_THROW(net.validate());

  for (const Intersection& x : net.intersections) {
    int incident = 0;
    for (const Road& r : net.roads)
      if (r.from_node == x.node || r.to_node == x.node) ++incident;
    EXPECT_GE(incident, 2);

    EXPECT_GE(x.phases.size(), 2u);
    EXPECT_LE(x.phases.size(), 4u);
    std::set<std::vector<LinkState>> distinct;
    std::vector<char> covered(x.connections.size(), 0);
    for (int p : x.phases) {
      const Phase& ph = net.phases[p];
      ASSERT_EQ(ph.states.size(), x.connections.size());
      EXPECT_TRUE(std::any_of(ph.states.begin(), ph.states.end(), is_green));
      distinct.insert(ph.states);
      for (std::size_t i = 0; i < ph.states.size(); ++i)
        if (is_green(ph.states[i])) covered[i] = 1;
    }
    EXPECT_EQ(distinct.size(), x.phases.size());
    EXPECT_TRUE(std::all_of(covered.begin(), covered.end(), [](char c) { return c != 0; }));

    std::vector<int> cycle = x.program.cycle;
    std::vector<int> phases = x.phases;
    std::sort(cycle.begin(), cycle.end());
    std::sort(phases.begin(), phases.end());
    EXPECT_EQ(cycle, phases);
  }

  std::vector<char> reached(net.lanes.size(), 0);
  for (int o : net.origin_lanes) {
    std::vector<char> r = reachable_lanes(net, o);
    for (std::size_t i = 0; i < r.size(); ++i) reached[i] |= r[i];
  }
  for (std::size_t i = 0; i < reached.size(); ++i) EXPECT_TRUE(reached[i]) << "lane " << i;

  for (const Connection& c : net.connections) {
    const Node& node = net.nodes[net.intersections[c.intersection].node];
    EXPECT_EQ(net.roads[net.lanes[c.in_lane].road].to_node, node.id);
    EXPECT_EQ(net.roads[net.lanes[c.out_lane].road].from_node, node.id);
  }
}

TEST_P(NetworkProperties, JsonRoundTrip) {
  RoadNetwork net = generate_network(seeded(static_cast<std::uint64_t>(GetParam())));
  const std::string text = network_to_json(net);
  RoadNetwork back = network_from_json(text);
  EXPECT_EQ(network_to_json(back), text);
  EXPECT_EQ(back.lane_out_connections, net.lane_out_connections);
  EXPECT_EQ(back.origin_lanes, net.origin_lanes);
}

INSTANTIATE_TEST_SUITE_P(Seeds, NetworkProperties, ::testing::Range(0, 25));

TEST(NetworkJson, RejectsInconsistentFile) {
  RoadNetwork net = generate_network(seeded(5));
  std::string text = network_to_json(net);
  EXPECT_THROW(network_from_json("{\"version\": 99}"), Error);
  EXPECT_THROW(network_from_json("not json"), Error);
  net.connections[0].out_lane = net.num_lanes() + 3;
  EXPECT_THROW(network_from_json(network_to_json(net)), Error);
}

TEST(NetworkFiles, MissingFileIsMissingArtifact) {
  EXPECT_THROW(load_network("/nonexistent/net.json"), MissingArtifact);
}

TEST(GenerateGrid, AllFourWay) {
  RoadNetwork net = generate_grid(3, 4, 9);
  EXPECT_EQ(net.num_intersections(), 12);
  EXPECT_NO_THROW(net.validate());
}

TEST(Hybrid, HalfCyclic) {
  NetworkGenConfig cfg = seeded(2);
  cfg.min_intersections = cfg.max_intersections = 6;
  RoadNetwork net = generate_network(cfg);
  Rng rng(4);
  assign_hybrid_constraints(net, rng);
  int cyclic = 0;
  for (const Intersection& x : net.intersections) cyclic += x.program.constraint == ConstraintType::kCyclic;
  EXPECT_EQ(cyclic, 3);
}

TEST(NextCyclePhase, Examples) {
  SignalProgram prog;
  prog.cycle = {10, 11, 12, 13};
  EXPECT_EQ(next_cycle_phase(prog, 12), 13);
  EXPECT_EQ(next_cycle_phase(prog, 13), 10);
  SignalProgram single;
  single.cycle = {4};
  EXPECT_EQ(next_cycle_phase(single, 4), 4);
  EXPECT_THROW(next_cycle_phase(prog, 7), Error);
}

TEST(ResampleOd, SingleEligibleLane) {
  TripProcess tp;
  tp.origin_lanes = {5};
  tp.destination_lanes = {1, 2};
  tp.origin_probs = {1.0};
  tp.destination_probs = {0.5, 0.5};
  Rng rng(1);
  TripProcess out = resample_od(tp, rng);
  ASSERT_EQ(out.origin_probs.size(), 1u);
  EXPECT_DOUBLE_EQ(out.origin_probs[0], 1.0);
}

TEST(ResampleOd, FlatDirichletMean) {
  TripProcess tp;
  tp.origin_lanes = {0, 1, 2, 3};
  tp.destination_lanes = {4, 5, 6, 7};
  tp.origin_probs.assign(4, 0.25);
  tp.destination_probs.assign(4, 0.25);
  Rng rng(2024);
  std::vector<double> mean(4, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    TripProcess out = resample_od(tp, rng);
    EXPECT_NEAR(std::accumulate(out.origin_probs.begin(), out.origin_probs.end(), 0.0), 1.0, 1e-9);
    EXPECT_NEAR(std::accumulate(out.destination_probs.begin(), out.destination_probs.end(), 0.0), 1.0, 1e-9);
    for (int k = 0; k < 4; ++k) mean[k] += out.origin_probs[k] / n;
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(mean[k], 0.25, 0.02);
}

TEST(GenerateTrips, OdConstantWithinPeriod) {
  RoadNetwork net = generate_network(seeded(8));
  TripProcess tp = make_trip_process(net, 99, 1.0, 2000);
  std::vector<TripProcess> windows;
  std::vector<Trip> trips = generate_trips(net, tp, 6000, &windows);
  ASSERT_EQ(windows.size(), 3u);
  // With long windows the empirical origin mix must track the vectors in
  // force for that window.
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::vector<double> freq(tp.origin_lanes.size(), 0.0);
    int count = 0;
    for (const Trip& t : trips) {
      if (t.time / 2000 != static_cast<int>(w)) continue;
      const auto it = std::find(tp.origin_lanes.begin(), tp.origin_lanes.end(), t.origin);
      freq[it - tp.origin_lanes.begin()] += 1.0;
      ++count;
    }
    ASSERT_GT(count, 1500);
    for (std::size_t k = 0; k < freq.size(); ++k) EXPECT_NEAR(freq[k] / count, windows[w].origin_probs[k], 0.05);
  }
}

TEST(GenerateTrips, RateAndReachability) {
  RoadNetwork net = generate_network(seeded(9));
  TripProcess tp = make_trip_process(net, 5);
  std::vector<Trip> trips = generate_trips(net, tp, 8000);
  EXPECT_NEAR(static_cast<double>(trips.size()) / 8000.0, 0.25, 0.02);
  for (std::size_t i = 1; i < trips.size(); ++i) EXPECT_LE(trips[i - 1].time, trips[i].time);
  for (const Trip& t : trips) EXPECT_TRUE(reachable_lanes(net, t.origin)[t.destination]);
  EXPECT_EQ(trips_to_json(trips_from_json(trips_to_json(trips))), trips_to_json(trips));
  EXPECT_EQ(trip_set_hash(trips), trip_set_hash(generate_trips(net, tp, 8000)));
}

}  // namespace
}  // namespace mujam
