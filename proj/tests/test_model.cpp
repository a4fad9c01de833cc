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

#include <cmath>
#include <cstdio>
#include <numeric>

#include <gtest/gtest.h>

#include "mujam/model.hpp"

namespace mujam {
namespace {

JointAction random_legal(const RoadNetwork& net, const std::vector<ControllerState>& cs, Rng& rng) {
  JointAction a;
  for (const ControllerState& c : cs) {
    const std::vector<int> legal = signal::legal_phases(net, c);
    a.phases.push_back(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
  }
  return a;
}

// A small network with traffic on it after `warmup` random-policy seconds.
SimState busy_state(std::uint64_t seed, int intersections = 2, int warmup = 90, bool acyclic = false) {
  NetworkGenConfig cfg;
  cfg.seed = seed;
  cfg.min_intersections = cfg.max_intersections = intersections;
  auto net = std::make_shared<RoadNetwork>(generate_network(cfg));
  if (acyclic) net->set_all_constraints(ConstraintType::kAcyclic);
  TripProcess tp = make_trip_process(*net, seed + 1, 0.6);
  SimState s(net, generate_trips(*net, tp, warmup + 10));
  Rng rng(seed);
  for (int t = 0; t < warmup; ++t) s.step(random_legal(*net, s.controllers(), rng));
  return s;
}

ModelParams small_params(std::uint64_t seed, int embed = 8) {
  ModelDims dims;
  dims.embed = embed;
  dims.hidden = embed;
  Rng rng(seed);
  return ModelParams(dims, rng);
}

TEST(Tape, LinearSquaredErrorClosedForm) {
  Matrix w(1, 3);
  w << 0.5, -1.0, 2.0;
  Matrix b(1, 1);
  b << 0.25;
  Tape tape;
  Matrix x(1, 3);
  x << 1.0, 2.0, 3.0;
  const auto xv = tape.input(x);
  const auto y = tape.linear(xv, tape.param(0, &w), tape.param(1, &b));
  const auto loss = tape.squared_error(y, 1.0);
  Gradients g{Matrix::Zero(1, 3), Matrix::Zero(1, 1)};
  tape.backward(loss, g);
  const double yhat = 0.5 - 2.0 + 6.0 + 0.25;
  EXPECT_DOUBLE_EQ(tape.scalar(y), yhat);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(g[0](0, k), 2.0 * (yhat - 1.0) * x(0, k));
  EXPECT_DOUBLE_EQ(g[1](0, 0), 2.0 * (yhat - 1.0));
}

TEST(Tape, SoftmaxXentMatchesOracle) {
  Matrix z(3, 1);
  z << 1.0, 0.0, 5.0;
  Tape tape;
  auto groups = std::make_shared<SoftmaxGroups>();
  groups->rows = {{0, 1}};
  groups->targets = {0};
  Matrix zz = z;
  const auto loss = tape.softmax_xent(tape.param(0, &zz), groups);
  EXPECT_NEAR(tape.scalar(loss), std::log(1.0 + std::exp(-1.0)), 1e-15);
  Gradients g{Matrix::Zero(3, 1)};
  tape.backward(loss, g);
  const double p0 = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(g[0](0, 0), p0 - 1.0, 1e-15);
  EXPECT_NEAR(g[0](1, 0), 1.0 - p0, 1e-15);
  EXPECT_EQ(g[0](2, 0), 0.0);
}

// Identity weights over two-dimensional embeddings.
struct IdentityPropagation {
  ModelParams params;
  IdentityPropagation() {
    ModelDims dims;
    dims.embed = 2;
    dims.hidden = 2;
    params = ModelParams::zeros(dims);
    params.tensors[params.vehicle_lane.w] = Matrix::Identity(2, 2);
  }
  Matrix run(const Matrix& src, std::vector<int> dst, int n) {
    Tape tape;
    GraphNet g(params, tape);
    std::vector<int> rows(dst.size());
    std::iota(rows.begin(), rows.end(), 0);
    const auto out = g.propagate(tape.input(src), -1, make_index(rows), make_index(dst), n, params.vehicle_lane);
    return tape.value(out);
  }
};

TEST(Propagate, IdentitySum) {
  IdentityPropagation p;
  Matrix src(2, 2);
  src << 1, 2, 3, -1;
  Matrix out = p.run(src, {0, 0}, 2);
  EXPECT_EQ(out(0, 0), 4.0);
  EXPECT_EQ(out(0, 1), 1.0);
  // Second target has no neighbors.
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(out(1, 1), 0.0);
}

TEST(Propagate, ReluClamp) {
  IdentityPropagation p;
  Matrix src(2, 2);
  src << -1, 1, -1, 2;
  Matrix out = p.run(src, {0, 0}, 1);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 3.0);
}

TEST(EncodeObservation, SpeedNormalization) {
  NetworkGenConfig cfg;
  cfg.seed = 4;
  cfg.min_intersections = cfg.max_intersections = 1;
  auto net = std::make_shared<const RoadNetwork>(generate_network(cfg));
  SimState s(net, {});
  const int lane = net->destination_lanes.front();
  s.place_vehicle({lane}, net->lanes[lane].length / 4.0, 25.0 / 3.6);
  GraphObservation obs = encode_observation(s);
  ASSERT_EQ(obs.vehicle_features.rows(), 1);
  EXPECT_NEAR(obs.vehicle_features(0, 0), 0.5, 1e-3);
  EXPECT_NEAR(obs.vehicle_features(0, 1), 0.25, 1e-12);
  EXPECT_EQ(obs.vehicle_lane, std::vector<int>{lane});
  for (int l = 0; l < net->num_lanes(); ++l)
    if (l != lane) EXPECT_EQ(std::count(obs.vehicle_lane.begin(), obs.vehicle_lane.end(), l), 0);
}

TEST(EncodeObservation, AcyclicSetsCycleFeaturesNegative) {
  SimState s = busy_state(5, 2, 10, true);
  GraphObservation obs = encode_observation(s);
  const Matrix& c = obs.connectivity->connection;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    EXPECT_EQ(c(i, kFeatConstraint), 0.0);
    EXPECT_EQ(c(i, kFeatNextSwitchOpen), -1.0);
    EXPECT_EQ(c(i, kFeatSwitchesToOpen), -1.0);
    EXPECT_EQ(c(i, kFeatNextOpeningPriority), -1.0);
  }
}

TEST(EncodeObservation, LegalityMatchesSimulator) {
  SimState s = busy_state(6);
  GraphObservation obs = encode_observation(s);
  const RoadNetwork& net = s.network();
  for (int x = 0; x < net.num_intersections(); ++x) EXPECT_EQ(obs.connectivity->legal[x], legal_phases(s, x));
  for (std::size_t e = 0; e < obs.topo->cp_dst->size(); ++e) {
    const int p = (*obs.topo->cp_dst)[e];
    const auto legal = legal_phases(s, net.phases[p].intersection);
    const bool is_legal = std::find(legal.begin(), legal.end(), p) != legal.end();
    EXPECT_EQ(obs.connectivity->phase_edges(e, 1), is_legal ? 1.0 : 0.0);
  }
}

TEST(CycleFeatures, SwitchesToOpenCountsAlongCycle) {
  NetworkGenConfig cfg;
  cfg.seed = 12;
  cfg.min_intersections = cfg.max_intersections = 1;
  RoadNetwork net = generate_network(cfg);
  net.set_all_constraints(ConstraintType::kCyclic);
  const SignalProgram& prog = net.program(0);
  const int len = static_cast<int>(prog.cycle.size());
  ControllerState cs;
  cs.current_phase = prog.cycle[0];
  cs.time_since_switch = 30;
  for (int c : net.intersections[0].connections) {
    const std::vector<double> f = connection_features(net, cs, c);
    EXPECT_DOUBLE_EQ(f[kFeatTimeSinceSwitch], 0.5);
    if (is_green(net.link_state(cs.current_phase, c))) {
      EXPECT_EQ(f[kFeatSwitchesToOpen], 0.0);
      continue;
    }
    int k = 1;
    while (!is_green(net.link_state(prog.cycle[k % len], c))) ++k;
    EXPECT_DOUBLE_EQ(f[kFeatSwitchesToOpen], static_cast<double>(k) / len);
    EXPECT_EQ(f[kFeatNextSwitchOpen], k == 1 ? 1.0 : 0.0);
    EXPECT_EQ(f[kFeatNextOpeningPriority],
              net.link_state(prog.cycle[k % len], c) == LinkState::kGreenPriority ? 1.0 : 0.0);
  }
}

TEST(InitialRepresentation, RoundCounts) {
  SimState s = busy_state(7);
  ModelParams params = small_params(1);
  GraphObservation obs = encode_observation(s);
  Tape tape;
  GraphNet g(params, tape);
  const auto lanes = g.represent(obs);
  EXPECT_EQ(g.propagation_rounds(), 4);
  g.dynamics(lanes, *obs.topo, *obs.connectivity);
  EXPECT_EQ(g.propagation_rounds(), 7);
}

TEST(InitialRepresentation, NoVehiclesGivesZeroDemand) {
  NetworkGenConfig cfg;
  cfg.seed = 9;
  auto net = std::make_shared<const RoadNetwork>(generate_network(cfg));
  SimState empty(net, {});
  ModelDims dims;
  dims.embed = 8;
  dims.hidden = 8;
  dims.repr_rounds = 0;
  Rng rng(2);
  ModelParams params(dims, rng);
  LatentState l = initial_representation(encode_observation(empty), params);
  EXPECT_TRUE(l.lanes.isZero(0.0));
  // With L->L rounds the result only reflects lane and connection features,
  // so two empty states with equal controllers embed identically.
  ModelParams full = small_params(3);
  SimState other(net, {});
  EXPECT_EQ(initial_representation(encode_observation(empty), full).lanes,
            initial_representation(encode_observation(other), full).lanes);
}

TEST(InitialRepresentation, VehiclePermutationInvariant) {
  SimState s = busy_state(10);
  GraphObservation obs = encode_observation(s);
  ASSERT_GT(obs.vehicle_lane.size(), 3u);
  GraphObservation perm = obs;
  std::vector<int> order(obs.vehicle_lane.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) {
    perm.vehicle_lane[i] = obs.vehicle_lane[order[i]];
    perm.vehicle_features.row(i) = obs.vehicle_features.row(order[i]);
  }
  ModelParams params = small_params(4);
  const Matrix a = initial_representation(obs, params).lanes;
  const Matrix b = initial_representation(perm, params).lanes;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdvanceConnectivity, HoldOnlyAdvancesTimer) {
  SimState s = busy_state(11);
  ModelParams params = small_params(5);
  LatentState l = initial_representation(encode_observation(s), params);
  JointAction hold;
  for (const ControllerState& cs : l.controllers) hold.phases.push_back(signal::hold_phase(cs));
  bool any_yellow = false;
  for (const ControllerState& cs : l.controllers) any_yellow |= cs.in_yellow;
  if (any_yellow) GTEST_SKIP() << "state mid-switch";
  LatentState n = advance_connectivity(l, hold);
  const Matrix& a = l.connectivity->connection;
  const Matrix& b = n.connectivity->connection;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      if (k == kFeatTimeSinceSwitch) {
        EXPECT_GE(b(i, k), a(i, k));
      } else {
        EXPECT_EQ(a(i, k), b(i, k)) << "feature " << k;
      }
    }
  }
}

TEST(AdvanceConnectivity, GreenToRedSetsYellow) {
  NetworkGenConfig cfg;
  cfg.seed = 13;
  cfg.min_intersections = cfg.max_intersections = 1;
  auto net = std::make_shared<RoadNetwork>(generate_network(cfg));
  net->set_all_constraints(ConstraintType::kAcyclic);
  SimState s(net, {});
  ModelParams params = small_params(6);
  LatentState l = initial_representation(encode_observation(s), params);
  const int cur = l.controllers[0].current_phase;
  int other = -1;
  for (int p : net->intersections[0].phases)
    if (p != cur && signal::needs_yellow(*net, cur, p)) other = p;
  ASSERT_GE(other, 0);
  LatentState n = advance_connectivity(l, JointAction{{other}});
  for (int c : net->intersections[0].connections) {
    const bool closes = is_green(net->link_state(cur, c)) && !is_green(net->link_state(other, c));
    EXPECT_EQ(n.connectivity->connection(c, kFeatIsYellow), closes ? 1.0 : 0.0);
  }
  EXPECT_THROW(advance_connectivity(n, JointAction{{cur}}), IllegalAction);
}

// The simulator is the oracle for connectivity dynamics.
TEST(AdvanceConnectivity, AgreesWithSimulator) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 1000; ++seed) {
    SimState s = busy_state(seed, 2 + static_cast<int>(seed % 3), 5, seed % 2 == 1);
    ModelParams params = small_params(seed, 4);
    Rng rng(seed * 31 + 7);
    LatentState l = initial_representation(encode_observation(s), params);
    for (int t = 0; t < 100; ++t, ++checked) {
      const JointAction a = random_legal(s.network(), s.controllers(), rng);
      l = advance_connectivity(l, a);
      s.step(a);
      ASSERT_TRUE(*l.connectivity == *encode_observation(s).connectivity) << "seed " << seed << " t " << t;
      ASSERT_EQ(l.controllers, s.controllers());
    }
  }
}

TEST(DynamicsStep, ZeroWeightsGiveZeroLanes) {
  SimState s = busy_state(14);
  ModelParams params = small_params(7);
  LatentState l = initial_representation(encode_observation(s), params);
  for (const DenseLayer& d : params.dyn) {
    params.tensors[d.w].setZero();
    params.tensors[d.b].setZero();
  }
  Rng rng(1);
  LatentState n = dynamics_step(l, random_legal(s.network(), l.controllers, rng), params);
  EXPECT_TRUE(n.lanes.isZero(0.0));
}

TEST(DynamicsStep, UnrollTwice) {
  SimState s = busy_state(15);
  ModelParams params = small_params(8);
  Rng rng(2);
  LatentState l = initial_representation(encode_observation(s), params);
  LatentState a = dynamics_step(l, random_legal(s.network(), l.controllers, rng), params);
  LatentState b = dynamics_step(a, random_legal(s.network(), a.controllers, rng), params);
  EXPECT_EQ(b.lanes.rows(), s.network().num_lanes());
  EXPECT_TRUE(b.lanes.allFinite());
}

TEST(Heads, ZeroWeightsGiveZero) {
  SimState s = busy_state(16);
  ModelParams params = small_params(9);
  for (const DenseLayer* d : {&params.reward0, &params.reward1, &params.value0, &params.value1}) {
    params.tensors[d->w].setZero();
    params.tensors[d->b].setZero();
  }
  LaneEstimates e = predict_value_reward(initial_representation(encode_observation(s), params), params);
  EXPECT_EQ(e.reward_total, 0.0);
  EXPECT_EQ(e.value_total, 0.0);
}

TEST(Heads, TotalsAreExactSums) {
  SimState s = busy_state(17);
  ModelParams params = small_params(10);
  LaneEstimates e = predict_value_reward(initial_representation(encode_observation(s), params), params);
  double r = 0.0, v = 0.0;
  for (double x : e.reward) r += x;
  for (double x : e.value) v += x;
  EXPECT_EQ(e.reward_total, r);
  EXPECT_EQ(e.value_total, v);
  EXPECT_EQ(static_cast<int>(e.value.size()), s.network().num_lanes());
}

// Two disconnected copies of one network, with the same traffic on each.
std::pair<std::shared_ptr<const RoadNetwork>, GraphObservation> doubled(const GraphObservation& obs) {
  const RoadNetwork& a = *obs.net;
  RoadNetwork u = a;
  const int nn = static_cast<int>(a.nodes.size()), nr = static_cast<int>(a.roads.size()), nl = a.num_lanes(),
            nx = a.num_intersections(), nc = static_cast<int>(a.connections.size()),
            np = static_cast<int>(a.phases.size());
  for (Node n : a.nodes) {
    n.id += nn;
    if (n.intersection >= 0) n.intersection += nx;
    u.nodes.push_back(n);
  }
  for (Road r : a.roads) {
    r.id += nr;
    r.from_node += nn;
    r.to_node += nn;
    for (int& l : r.lanes) l += nl;
    u.roads.push_back(r);
  }
  for (Lane l : a.lanes) {
    l.id += nl;
    l.road += nr;
    u.lanes.push_back(l);
  }
  for (Connection c : a.connections) {
    c.id += nc;
    c.in_lane += nl;
    c.out_lane += nl;
    c.intersection += nx;
    for (int& f : c.foe_lanes) f += nl;
    u.connections.push_back(c);
  }
  for (Phase p : a.phases) {
    p.id += np;
    p.intersection += nx;
    u.phases.push_back(p);
  }
  for (Intersection x : a.intersections) {
    x.id += nx;
    x.node += nn;
    for (int& c : x.connections) c += nc;
    for (int& p : x.phases) p += np;
    for (int& l : x.inbound_lanes) l += nl;
    x.program.intersection += nx;
    for (int& p : x.program.cycle) p += np;
    u.intersections.push_back(x);
  }
  u.build_indices();
  u.validate();
  auto net = std::make_shared<const RoadNetwork>(std::move(u));
  GraphObservation o;
  o.net = net;
  o.topo = topology_for(net);
  o.vehicle_lane = obs.vehicle_lane;
  for (int l : obs.vehicle_lane) o.vehicle_lane.push_back(l + nl);
  o.vehicle_features.resize(obs.vehicle_features.rows() * 2, kVehicleFeatures);
  o.vehicle_features << obs.vehicle_features, obs.vehicle_features;
  o.controllers = obs.controllers;
  for (ControllerState cs : obs.controllers) {
    cs.intersection += nx;
    cs.current_phase += np;
    if (cs.target_phase >= 0) cs.target_phase += np;
    o.controllers.push_back(cs);
  }
  ensure_connectivity(o);
  return {net, o};
}

TEST(Heads, DisconnectedCopiesDoubleTotals) {
  SimState s = busy_state(18);
  GraphObservation obs = encode_observation(s);
  auto [net, twice] = doubled(obs);
  ModelParams params = small_params(11);
  const LatentState one = initial_representation(obs, params);
  const LatentState two = initial_representation(twice, params);
  const LaneEstimates e1 = predict_value_reward(one, params);
  const LaneEstimates e2 = predict_value_reward(two, params);
  EXPECT_NEAR(e2.reward_total, 2.0 * e1.reward_total, 1e-9 * (1.0 + std::abs(e1.reward_total)));
  EXPECT_NEAR(e2.value_total, 2.0 * e1.value_total, 1e-9 * (1.0 + std::abs(e1.value_total)));
  // Priors factorize: each copy sees the same distribution.
  const PriorDistribution p1 = predict_priors(one, params);
  const PriorDistribution p2 = predict_priors(two, params);
  ASSERT_EQ(p2.size(), 2 * p1.size());
  for (std::size_t x = 0; x < p1.size(); ++x) {
    for (std::size_t k = 0; k < p1[x].probs.size(); ++k) {
      EXPECT_NEAR(p2[x].probs[k], p1[x].probs[k], 1e-12);
      EXPECT_NEAR(p2[x + p1.size()].probs[k], p1[x].probs[k], 1e-12);
    }
  }
}

TEST(Priors, SoftmaxExamples) {
  const std::vector<double> even = softmax({0.3, 0.3});
  EXPECT_DOUBLE_EQ(even[0], 0.5);
  EXPECT_DOUBLE_EQ(even[1], 0.5);
  EXPECT_EQ(softmax({-4.0}), std::vector<double>{1.0});
  const std::vector<double> p = softmax({1.0, 0.0});
  // Oracle: 1 / (1 + e^-1) = 0.7310585786300049.
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
}

TEST(Priors, LegalOnlyAndNormalized) {
  SimState s = busy_state(19, 3);
  ModelParams params = small_params(12);
  LatentState l = initial_representation(encode_observation(s), params);
  const PriorDistribution pd = predict_priors(l, params);
  for (int x = 0; x < s.network().num_intersections(); ++x) {
    EXPECT_EQ(pd[x].phases, legal_phases(s, x));
    EXPECT_NEAR(std::accumulate(pd[x].probs.begin(), pd[x].probs.end(), 0.0), 1.0, 1e-9);
    if (pd[x].phases.size() == 1) EXPECT_EQ(pd[x].probs[0], 1.0);
  }
}

TEST(Noise, ZeroSigmaIsDeterministic) {
  SimState s = busy_state(20);
  ModelParams params = small_params(13);
  for (const NoisyLayer* n : {&params.prior0, &params.prior1}) {
    params.tensors[n->sigma_w].setZero();
    params.tensors[n->sigma_b].setZero();
  }
  LatentState l = initial_representation(encode_observation(s), params);
  const PriorDistribution a = predict_priors(l, params);
  Rng rng(77);
  resample_noise(params, rng);
  const PriorDistribution b = predict_priors(l, params);
  for (std::size_t x = 0; x < a.size(); ++x) EXPECT_EQ(a[x].logits, b[x].logits);
}

TEST(Noise, ResampleChangesLogitsCoherently) {
  SimState s = busy_state(21);
  ModelParams params = small_params(14);
  LatentState l = initial_representation(encode_observation(s), params);
  const PriorDistribution a = predict_priors(l, params);
  const PriorDistribution a2 = predict_priors(l, params);
  for (std::size_t x = 0; x < a.size(); ++x) EXPECT_EQ(a[x].logits, a2[x].logits);
  const ModelParams before = params;
  Rng rng(78);
  resample_noise(params, rng);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) EXPECT_EQ(params.tensors[i], before.tensors[i]);
  const PriorDistribution b = predict_priors(l, params);
  bool differs = false;
  for (std::size_t x = 0; x < a.size(); ++x) differs |= a[x].logits != b[x].logits;
  EXPECT_TRUE(differs);
}

// Composite loss touching every parameter: representation, two dynamics
// steps, both heads and the prior cross-entropy.
Tape::Var composite_loss(GraphNet& g, const GraphObservation& obs, const std::vector<LatentState>& steps) {
  Tape& tape = g.tape();
  auto lanes = g.represent(obs);
  Tape::Var total = -1;
  auto accumulate = [&](Tape::Var v) { total = total < 0 ? v : tape.add(total, v); };
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (k > 0) lanes = g.dynamics(lanes, *steps[k].topo, *steps[k].connectivity);
    const auto h = g.heads(lanes);
    accumulate(tape.squared_error(h.value_total, 0.3 * static_cast<double>(k) - 0.5));
    if (k > 0) accumulate(tape.squared_error(h.reward_total, -0.2));
    auto groups = std::make_shared<SoftmaxGroups>();
    for (const auto& legal : steps[k].connectivity->legal) {
      groups->rows.push_back(legal);
      groups->targets.push_back(legal.back());
    }
    accumulate(tape.softmax_xent(g.phase_logits(lanes, *steps[k].topo, *steps[k].connectivity), groups));
  }
  return total;
}

TEST(Backward, FiniteDifferencesOnRandomGraphs) {
  int graphs = 0;
  for (std::uint64_t seed = 100; graphs < 20; ++seed, ++graphs) {
    SimState s = busy_state(seed, 2, 40, seed % 2 == 0);
    ModelParams params = small_params(seed, 4);
    Rng rng(seed);
    // Nonzero biases keep pre-activations off the ReLU kink at exactly 0,
    // where a central difference is not a derivative.
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params.names[i].ends_with(".b") && !params.names[i].ends_with(".b_mu")) continue;
      for (Eigen::Index k = 0; k < params.tensors[i].size(); ++k)
        params.tensors[i].data()[k] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
    GraphObservation obs = encode_observation(s);
    std::vector<LatentState> steps;
    steps.push_back(initial_representation(obs, params));
    for (int k = 0; k < 2; ++k)
      steps.push_back(advance_connectivity(steps.back(), random_legal(s.network(), steps.back().controllers, rng)));

    Tape tape;
    GraphNet g(params, tape);
    const auto loss = composite_loss(g, obs, steps);
    Gradients grad = params.zero_gradients();
    tape.backward(loss, grad);

    const double h = 1e-5;
    std::uniform_int_distribution<int> pick_tensor(0, static_cast<int>(params.size()) - 1);
    int bad = 0, tried = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const int t = pick_tensor(rng);
      Matrix& m = params.tensors[t];
      const Eigen::Index k = std::uniform_int_distribution<Eigen::Index>(0, m.size() - 1)(rng);
      const double orig = m.data()[k];
      m.data()[k] = orig + h;
      tape.replay();
      const double up = tape.scalar(loss);
      m.data()[k] = orig - h;
      tape.replay();
      const double down = tape.scalar(loss);
      m.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad[t].data()[k];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      ++tried;
      if (std::abs(numeric - analytic) / scale >= 1e-4) {
        ++bad;
        ADD_FAILURE() << "seed " << seed << " " << params.names[t] << "[" << k << "] analytic " << analytic
                      << " numeric " << numeric;
      }
    }
    tape.replay();
    EXPECT_EQ(bad, 0) << tried;
  }
}

TEST(Backward, ReplayIsBitExact) {
  SimState s = busy_state(30);
  ModelParams params = small_params(15);
  GraphObservation obs = encode_observation(s);
  std::vector<LatentState> steps{initial_representation(obs, params)};
  Tape tape;
  GraphNet g(params, tape);
  const auto loss = composite_loss(g, obs, steps);
  const double first = tape.scalar(loss);
  tape.replay();
  EXPECT_EQ(tape.scalar(loss), first);
}

TEST(Backward, UnusedParametersGetZeroGradient) {
  SimState s = busy_state(31);
  ModelParams params = small_params(16);
  GraphObservation obs = encode_observation(s);
  Tape tape;
  GraphNet g(params, tape);
  const auto h = g.heads(g.represent(obs));
  const auto loss = tape.squared_error(h.value_total, 1.0);
  Gradients grad = params.zero_gradients();
  tape.backward(loss, grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& n = params.names[i];
    const bool used = n.starts_with("vl.") || n.starts_with("repr.") || n.starts_with("value.");
    if (!used) EXPECT_TRUE(grad[i].isZero(0.0)) << n;
    EXPECT_EQ(grad[i].rows(), params.tensors[i].rows());
    EXPECT_EQ(grad[i].cols(), params.tensors[i].cols());
  }
}

TEST(Backward, EdgeTypeIsolation) {
  SimState s = busy_state(32);
  GraphObservation obs = encode_observation(s);
  auto value_grads = [&](ModelParams params) {
    Tape tape;
    GraphNet g(params, tape);
    const auto lanes = g.represent(obs);
    const auto h = g.heads(lanes);
    auto loss = tape.squared_error(h.value_total, 1.0);
    // The prior path shares the lanes but none of the V/L weights below.
    loss = tape.add(loss, tape.sum_all(g.phase_logits(lanes, *obs.topo, *obs.connectivity)));
    Gradients grad = params.zero_gradients();
    tape.backward(loss, grad);
    return grad;
  };
  ModelParams params = small_params(17);
  const Gradients a = value_grads(params);
  params.tensors[params.lane_conn.w].setZero();
  params.tensors[params.lane_conn.b].setZero();
  const Gradients b = value_grads(params);
  for (const std::string& n : {"value.0.w", "value.1.w", "value.0.b"}) {
    const int i = params.index(n);
    EXPECT_EQ(a[i], b[i]) << n;
  }
}

TEST(Checkpoint, RoundTrip) {
  ModelParams params = small_params(18);
  const std::string bytes = checkpoint_bytes(params);
  ModelParams back = checkpoint_from_bytes(bytes);
  ASSERT_EQ(back.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(back.tensors[i], params.tensors[i]);
  for (std::size_t i = 0; i < params.noise.size(); ++i) EXPECT_EQ(back.noise[i], params.noise[i]);
  EXPECT_EQ(checkpoint_bytes(back), bytes);
  EXPECT_EQ(bytes.substr(0, 4), "MJCK");
  EXPECT_THROW(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(checkpoint_from_bytes("XXXX" + bytes.substr(4)), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), MissingArtifact);
}

TEST(Params, EveryEdgeTypeOwnsItsWeights) {
  Rng rng(1);
  ModelParams params(ModelDims{}, rng);
  EXPECT_EQ(params.repr.size(), 3u);
  EXPECT_EQ(params.dyn.size(), 3u);
  std::vector<int> ws{params.vehicle_lane.w, params.lane_conn.w, params.conn_phase.w};
  for (const DenseLayer& d : params.repr) ws.push_back(d.w);
  for (const DenseLayer& d : params.dyn) ws.push_back(d.w);
  std::sort(ws.begin(), ws.end());
  EXPECT_EQ(std::unique(ws.begin(), ws.end()), ws.end());
  const double fan_in = params.tensors[params.prior0.mu_w].cols();
  EXPECT_DOUBLE_EQ(params.tensors[params.prior0.sigma_w](0, 0), 0.5 / std::sqrt(fan_in));
}

}  // namespace
}  // namespace mujam
