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

#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "mujam/bench.hpp"

namespace mujam {
namespace {

std::shared_ptr<RoadNetwork> single_intersection(std::uint64_t seed = 3) {
  NetworkGenConfig cfg;
  cfg.seed = seed;
  cfg.min_intersections = cfg.max_intersections = 1;
  auto net = std::make_shared<RoadNetwork>(generate_network(cfg));
  net->set_all_constraints(ConstraintType::kCyclic);
  return net;
}

ControllerState steady(int phase, int since) {
  ControllerState cs;
  cs.intersection = 0;
  cs.current_phase = phase;
  cs.time_since_switch = since;
  return cs;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mujam_bench_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// ---------------------------------------------------------------------------
// Fixed time

TEST(FixedTime, SwitchesAtThirtySeconds) {
  auto net = single_intersection();
  const SignalProgram& prog = net->program(0);
  SimState s(net, {});
  s.set_controller(steady(prog.cycle[0], 29));
  EXPECT_EQ(fixed_time_policy(s).phases[0], prog.cycle[0]);
  s.set_controller(steady(prog.cycle[0], 30));
  EXPECT_EQ(fixed_time_policy(s).phases[0], prog.cycle[1]);
}

TEST(FixedTime, WrapsAroundTheCycle) {
  auto net = single_intersection();
  const SignalProgram& prog = net->program(0);
  SimState s(net, {});
  s.set_controller(steady(prog.cycle.back(), 45));
  EXPECT_EQ(fixed_time_policy(s).phases[0], prog.cycle.front());
}

TEST(FixedTime, OpenLoopUnderTraffic) {
  // The phase sequence does not depend on traffic.
  auto net = single_intersection();
  const auto busy = generate_trips(*net, make_trip_process(*net, 1, 0.8), 300);
  SimState a(net, {}), b(net, busy);
  for (int t = 0; t < 300; ++t) {
    const JointAction x = fixed_time_policy(a), y = fixed_time_policy(b);
    ASSERT_EQ(x.phases, y.phases) << "t=" << t;
    a.step(x);
    b.step(y);
  }
}

TEST(FixedTime, CyclePeriodIncludesYellow) {
  auto net = single_intersection();
  SimState s(net, {});
  std::vector<int> switches;
  int last = signal::effective_phase(s.controller(0));
  for (int t = 0; t < 400; ++t) {
    s.step(fixed_time_policy(s));
    const int now = signal::effective_phase(s.controller(0));
    if (now != last) switches.push_back(t);
    last = now;
  }
  ASSERT_GE(switches.size(), 3u);
  for (std::size_t i = 1; i < switches.size(); ++i) EXPECT_EQ(switches[i] - switches[i - 1], kFixedGreenSeconds);
}

// ---------------------------------------------------------------------------
// Greedy

struct GreedyCase {
  int stopped, moving;
  bool switches;
};

class GreedyTest : public ::testing::TestWithParam<GreedyCase> {};

TEST_P(GreedyTest, ComparesStoppedAndMoving) {
  const GreedyCase c = GetParam();
  auto net = single_intersection();
  const SignalProgram& prog = net->program(0);
  SimState s(net, {});
  s.set_controller(steady(prog.cycle[0], 100));
  const auto& inbound = net->intersections[0].inbound_lanes;
  ASSERT_GE(inbound.size(), 2u);
  const double len0 = net->lanes[inbound[0]].length;
  const double len1 = net->lanes[inbound[1]].length;
  for (int i = 0; i < c.stopped; ++i) s.place_vehicle({inbound[0]}, len0 - 1.0 - 8.0 * i, 0.0);
  for (int i = 0; i < c.moving; ++i) s.place_vehicle({inbound[1]}, len1 - 1.0 - 8.0 * i, 10.0);
  const InboundCounts n = inbound_counts(s, 0);
  EXPECT_EQ(n.stopped, c.stopped);
  EXPECT_EQ(n.moving, c.moving);
  EXPECT_EQ(greedy_policy(s).phases[0], c.switches ? prog.cycle[1] : prog.cycle[0]);
}

INSTANTIATE_TEST_SUITE_P(Examples, GreedyTest,
                         ::testing::Values(GreedyCase{5, 3, true}, GreedyCase{2, 4, false}, GreedyCase{3, 3, false},
                                           GreedyCase{0, 0, false}));

TEST(Greedy, HoldsWhenNextPhaseIsIllegal) {
  auto net = single_intersection();
  const SignalProgram& prog = net->program(0);
  SimState s(net, {});
  s.set_controller(steady(prog.cycle[0], 1));  // under the minimum duration
  const int in = net->intersections[0].inbound_lanes[0];
  for (int i = 0; i < 4; ++i) s.place_vehicle({in}, net->lanes[in].length - 1.0 - 8.0 * i, 0.0);
  EXPECT_EQ(greedy_policy(s).phases[0], prog.cycle[0]);
}

// ---------------------------------------------------------------------------
// mfgrl

HyperParams small_hp() {
  HyperParams hp;
  hp.dims.embed = 8;
  hp.dims.hidden = 8;
  hp.episode_seconds = 40;
  hp.batch_size = 4;
  return hp;
}

TEST(Mfgrl, ZeroQTieGoesToFirstLegalPhase) {
  const HyperParams hp = small_hp();
  Rng rng(1);
  ModelParams p = initial_params(hp, rng);
  for (Matrix& t : p.tensors) t.setZero();
  for (Matrix& n : p.noise) n.setZero();
  NetworkGenConfig g;
  g.seed = 11;
  auto net = std::make_shared<RoadNetwork>(generate_network(g));
  net->set_all_constraints(ConstraintType::kAcyclic);
  SimState s(net, {});
  GraphObservation obs = encode_observation(s);
  const Matrix q = mfgrl_q_values(obs, p);
  EXPECT_DOUBLE_EQ(q.cwiseAbs().maxCoeff(), 0.0);
  const JointAction a = mfgrl_act(obs, p);
  for (int x = 0; x < net->num_intersections(); ++x)
    EXPECT_EQ(a.phases[x], legal_phases(s, x).front()) << "intersection " << x;
}

TEST(Mfgrl, ActsLegallyAndPicksTheLargestQ) {
  const HyperParams hp = small_hp();
  Rng rng(2);
  ModelParams p = initial_params(hp, rng);
  auto net = make_training_network(hp, 5);
  SimState s(net, generate_trips(*net, make_trip_process(*net, 3, 0.5), 60));
  for (int t = 0; t < 60; ++t) {
    const GraphObservation obs = encode_observation(s);
    const Matrix q = mfgrl_q_values(obs, p);
    const JointAction a = mfgrl_act(obs, p);
    for (int x = 0; x < net->num_intersections(); ++x) {
      const auto legal = legal_phases(s, x);
      ASSERT_TRUE(std::find(legal.begin(), legal.end(), a.phases[x]) != legal.end());
      for (int l : legal) EXPECT_LE(q(l, 0), q(a.phases[x], 0));
    }
    s.step(a);
  }
}

TEST(Mfgrl, LocalRewardsSumInboundLanes) {
  NetworkGenConfig g;
  g.seed = 4;
  const RoadNetwork net = generate_network(g);
  std::vector<double> lane(net.lanes.size());
  for (std::size_t i = 0; i < lane.size(); ++i) lane[i] = -static_cast<double>(i);
  const auto r = local_rewards(net, lane);
  ASSERT_EQ(static_cast<int>(r.size()), net.num_intersections());
  for (int x = 0; x < net.num_intersections(); ++x) {
    double want = 0.0;
    for (int l : net.intersections[x].inbound_lanes) want += lane[l];
    EXPECT_DOUBLE_EQ(r[x], want);
  }
}

TEST(Mfgrl, CollectStoresSuccessorObservation) {
  const HyperParams hp = small_hp();
  Rng rng(3);
  ModelParams p = initial_params(hp, rng);
  auto net = make_training_network(hp, 7);
  const EpisodeRecord ep = mfgrl_collect_episode(net, p, hp, rng);
  ASSERT_EQ(static_cast<int>(ep.steps.size()), hp.episode_seconds + 1);
  EXPECT_TRUE(ep.steps.back().action.phases.empty());
  EXPECT_EQ(static_cast<int>(ep.steps.front().action.phases.size()), net->num_intersections());
}

// Without exploration the mean-weight greedy action is taken every step; with
// epsilon = 1 the actions are random yet always legal.
TEST(Mfgrl, EpsilonExploration) {
  HyperParams hp = small_hp();
  hp.noisy_layers = false;
  auto net = make_training_network(hp, 11);
  auto count_greedy = [&](double eps) {
    hp.mfgrl_epsilon = eps;
    Rng rng(5);
    ModelParams p = initial_params(hp, rng);
    const EpisodeRecord ep = mfgrl_collect_episode(net, p, hp, rng);
    SimState sim(net, {});
    int greedy = 0, total = 0;
    for (std::size_t t = 0; t + 1 < ep.steps.size(); ++t) {
      GraphObservation obs = ep.steps[t].obs;
      const JointAction best = mfgrl_act(obs, p);
      const ConnectivityFeatures& cf = ensure_connectivity(obs);
      for (std::size_t x = 0; x < best.phases.size(); ++x) {
        const auto& legal = cf.legal[x];
        EXPECT_NE(std::find(legal.begin(), legal.end(), ep.steps[t].action.phases[x]), legal.end());
        if (legal.size() < 2) continue;
        ++total;
        greedy += ep.steps[t].action.phases[x] == best.phases[x];
      }
    }
    return std::make_pair(greedy, total);
  };
  const auto off = count_greedy(0.0);
  EXPECT_EQ(off.first, off.second);
  const auto on = count_greedy(1.0);
  ASSERT_GT(on.second, 20);
  EXPECT_LT(on.first, on.second);
}

TEST(Mfgrl, TdLossFitsAFixedBatch) {
  HyperParams hp = small_hp();
  Rng rng(4);
  ModelParams p = initial_params(hp, rng);
  auto net = make_training_network(hp, 9);
  const EpisodeRecord ep = mfgrl_collect_episode(net, p, hp, rng);
  std::vector<TdItem> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({&ep, 5 + 7 * i});
  ModelParams target = p;
  for (Matrix& n : target.noise) n.setZero();
  for (Matrix& n : p.noise) n.setZero();
  Adam adam(p, hp);
  const auto frozen = frozen_tensors(p, hp);
  const double initial = mfgrl_td_loss(p, target, batch, hp, nullptr);
  double last = initial;
  for (int i = 0; i < 300; ++i) {
    Gradients g = p.zero_gradients();
    last = mfgrl_td_loss(p, target, batch, hp, &g);
    adam.step(p, g, frozen);
  }
  EXPECT_LT(last, 0.1 * initial);
}

TEST(Mfgrl, TrainingRunsTheSharedSchedule) {
  HyperParams hp = small_hp();
  hp.max_train_steps = 8;
  hp.eval_interval = 4;
  hp.validation_networks = 1;
  hp.validation_seconds = 30;
  hp.train_ratio = 0.1;
  const TrainResult r = mfgrl_train(hp);
  EXPECT_EQ(r.steps, 8);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_LT(r.history.back().validation_reward, 0.0 + 1e-12);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultsMatchTheTable) {
  const ExperimentConfig c;
  EXPECT_EQ(c.seeds, 5);
  EXPECT_EQ(c.test_networks, 10);
  EXPECT_EQ(c.trip_minutes, 10);
  EXPECT_EQ(c.smoke_rows, 10);
  EXPECT_EQ(c.smoke_cols, 10);
  EXPECT_EQ(c.smoke_warm_start, 1800);
  EXPECT_EQ(c.smoke_horizon, 3600);
  EXPECT_EQ(c.hp.search.budget, 50);
}

TEST(Config, TextRoundTrip) {
  ExperimentConfig c;
  c.hp.learning_rate = 3.25e-4;
  c.hp.search.budget = 17;
  c.hp.constraints = ConstraintMode::kAcyclic;
  c.methods = {Method::kGreedy, Method::kMuim};
  c.reference = Method::kGreedy;
  c.seed = 12345678901234ull;
  c.out_dir = "results/a";
  const std::string text = config_to_text(c);
  const ExperimentConfig d = parse_config(text);
  EXPECT_EQ(config_to_text(d), text);
  EXPECT_EQ(d.hp.search.budget, 17);
  EXPECT_EQ(d.hp.learning_rate, 3.25e-4);
  EXPECT_EQ(d.methods, c.methods);
}

TEST(Config, EveryKeyIsListed) {
  const std::string text = config_to_text(ExperimentConfig{});
  for (const std::string& k : config_keys()) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
  const std::vector<std::string> keys = config_keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
}

TEST(Config, CommentsAndBlankLines) {
  const ExperimentConfig c = parse_config("# header\n\nbeta = 8  # budget\nmethods = greedy, mujam-c\n");
  EXPECT_EQ(c.hp.search.budget, 8);
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::kGreedy, Method::kMujamC}));
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("nope = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("beta = x\n"), ConfigError);
  EXPECT_THROW(parse_config("beta = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("seeds = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("methods = mujam-z\n"), ConfigError);
  EXPECT_THROW(parse_config("constraints = sideways\n"), ConfigError);
  EXPECT_THROW(parse_config("noisy_layers = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("just text\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/mujam.cfg"), MissingArtifact);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(all_methods().size(), 9u);
}

TEST(Methods, VariantSettings) {
  ExperimentConfig c;
  c.ablation_constraints = ConstraintMode::kAcyclic;
  EXPECT_EQ(hyperparams_for(Method::kMujam, c, 0).constraints, ConstraintMode::kHybrid);
  EXPECT_EQ(hyperparams_for(Method::kMujamC, c, 0).constraints, ConstraintMode::kCyclic);
  EXPECT_EQ(hyperparams_for(Method::kMujamA, c, 0).constraints, ConstraintMode::kAcyclic);
  EXPECT_TRUE(hyperparams_for(Method::kMuim, c, 0).independent_search);
  EXPECT_FALSE(hyperparams_for(Method::kMujamNnl, c, 0).noisy_layers);
  EXPECT_FALSE(hyperparams_for(Method::kMujamNr, c, 0).reanalyze);
  EXPECT_EQ(hyperparams_for(Method::kMujamNr, c, 0).constraints, ConstraintMode::kAcyclic);
  EXPECT_NE(hyperparams_for(Method::kMujam, c, 0).seed, hyperparams_for(Method::kMujam, c, 1).seed);
  EXPECT_EQ(eval_constraints(Method::kMujam, c).size(), 2u);
  EXPECT_EQ(run_label(Method::kMujam, ConstraintMode::kAcyclic, c), "mujam@acyclic");
  EXPECT_EQ(run_label(Method::kGreedy, ConstraintMode::kCyclic, c), "greedy");
  EXPECT_THROW(train_method(Method::kGreedy, c.hp), ConfigError);
}

TEST(Methods, TestNetworksDifferFromTrainingAndValidation) {
  ExperimentConfig c;
  std::set<std::string> seen;
  for (int i = 0; i < 10; ++i) seen.insert(network_to_json(*make_training_network(c.hp, derive_seed(c.hp.seed, i))));
  for (const auto& n : make_validation_set(c.hp).nets) seen.insert(network_to_json(*n));
  for (int i = 0; i < c.test_networks; ++i) {
    const auto n = make_test_network(c, i);
    EXPECT_EQ(seen.count(network_to_json(*n)), 0u) << i;
    EXPECT_GE(n->num_intersections(), c.test_min_intersections);
    EXPECT_LE(n->num_intersections(), c.test_max_intersections);
  }
}

TEST(Methods, LearnedPolicyNeedsAModel) {
  ExperimentConfig c;
  Rng rng(0);
  EXPECT_THROW(make_policy(Method::kMujamC, nullptr, c, rng), MissingArtifact);
  EXPECT_NO_THROW(make_policy(Method::kGreedy, nullptr, c, rng));
}

// ---------------------------------------------------------------------------
// Statistics and reports

TEST(Stats, QuantileInterpolates) {
  EXPECT_DOUBLE_EQ(quantile({}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
}

RunRecord fake_run(const std::string& label, int seed, int network, std::vector<double> delays,
                   std::uint64_t hash = 7) {
  RunRecord r;
  r.label = r.method = label;
  r.constraints = "cyclic";
  r.seed = seed;
  r.network = network;
  r.metrics.trip_hash = hash;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    r.metrics.trips.push_back({static_cast<int>(i), static_cast<int>(i), static_cast<int>(i) + 60, delays[i]});
    r.metrics.total_delay += delays[i];
  }
  r.metrics.steps = 100;
  r.metrics.all_completed = true;
  r.metrics.mean_reward = -1.5;
  return r;
}

TEST(Stats, PairedDifferencesMatchByVehicle) {
  const RunRecord a = fake_run("a", 0, 0, {10, 20, 30});
  RunRecord b = fake_run("b", 0, 0, {12, 15});
  const auto d = paired_differences(b, a);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0].second, 2.0);
  EXPECT_DOUBLE_EQ(d[1].second, -5.0);
  b.metrics.trip_hash = 8;
  EXPECT_THROW(paired_differences(b, a), Error);
}

TEST(Stats, IdenticalMethodsGiveZeroPairedDifferences) {
  // Two labels for the same policy over the same test networks.
  ExperimentConfig c;
  c.methods = {Method::kGreedy};
  c.seeds = 1;
  c.test_networks = 2;
  c.test_max_intersections = 3;
  c.trip_minutes = 1;
  c.max_episode_seconds = 600;
  MetricsReport a = run_experiment1(c, {});
  MetricsReport b = a;
  for (RunRecord& r : b.runs) r.label = "greedy-copy";
  b.labels = {"greedy-copy"};
  const MetricsReport m = combine_reports({a, b}, "greedy");
  ASSERT_EQ(m.summary.size(), 2u);
  EXPECT_GT(m.summary[1].paired, 0);
  EXPECT_EQ(m.summary[1].paired_mean, 0.0);
  EXPECT_EQ(m.summary[1].paired_q1, 0.0);
  EXPECT_EQ(m.summary[1].paired_q3, 0.0);
}

TEST(Stats, SummaryOverRuns) {
  MetricsReport r;
  r.labels = {"ref", "x"};
  r.reference = "ref";
  r.runs = {fake_run("ref", 0, 0, {10, 20}), fake_run("x", 0, 0, {11, 18}), fake_run("ref", 1, 0, {30, 40}),
            fake_run("x", 1, 0, {35, 40})};
  summarize(r);
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_EQ(r.summary[0].trips, 4);
  EXPECT_DOUBLE_EQ(r.summary[0].mean, 25.0);
  EXPECT_EQ(r.summary[0].paired, 0);
  EXPECT_EQ(r.summary[1].paired, 4);
  EXPECT_DOUBLE_EQ(r.summary[1].paired_mean, (1.0 - 2.0 + 5.0 + 0.0) / 4.0);
  EXPECT_EQ(r.summary[1].seed_total_delay, (std::vector<double>{29.0, 75.0}));
}

TEST(Report, EmptyReportWritesHeadersOnly) {
  const auto dir = temp_dir("empty");
  export_report(MetricsReport{}, dir.string());
  EXPECT_EQ(read_file((dir / "runs.csv").string()),
            "label,method,constraints,seed,network,trip_hash,total_delay,steps,all_completed,mean_reward\n");
  EXPECT_EQ(read_file((dir / "trips.csv").string()),
            "label,seed,network,vehicle_id,insertion_time,completion_time,total_delay\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "delay_boxplot.svg"));
  const MetricsReport back = load_report(dir.string());
  EXPECT_TRUE(back.runs.empty());
}

TEST(Report, ReExportIsByteIdentical) {
  MetricsReport r;
  r.labels = {"ref", "x"};
  r.reference = "ref";
  r.runs = {fake_run("ref", 0, 0, {10.125, 20}), fake_run("x", 0, 0, {11, 18.000000001})};
  r.cumulative_difference = {1, -2, 0.5};
  r.training["x"] = {EvalPoint{100, -3.5, {}, 0.0}, EvalPoint{200, -3.25, {}, 0.0}};
  summarize(r);
  const auto d1 = temp_dir("a"), d2 = temp_dir("b"), d3 = temp_dir("c");
  export_report(r, d1.string());
  export_report(r, d2.string());
  for (const char* f : {"runs.csv", "trips.csv", "summary.csv", "paired.csv", "smoke.csv", "training.csv",
                        "delay_boxplot.svg", "cumulative_difference.svg", "training_curves.svg"})
    EXPECT_EQ(read_file((d1 / f).string()), read_file((d2 / f).string())) << f;
  // Runs and trips survive a load and re-export.
  export_report(load_report(d1.string()), d3.string());
  for (const char* f : {"runs.csv", "trips.csv", "summary.csv", "paired.csv"})
    EXPECT_EQ(read_file((d1 / f).string()), read_file((d3 / f).string())) << f;
}

TEST(Report, LoadMissingDirectory) { EXPECT_THROW(load_report("/nonexistent/mujam"), MissingArtifact); }

TEST(Report, CombineRejectsUnknownReference) {
  MetricsReport r;
  r.labels = {"a"};
  r.runs = {fake_run("a", 0, 0, {1})};
  EXPECT_THROW(combine_reports({r}, "b"), ConfigError);
}

// ---------------------------------------------------------------------------
// Experiments

TEST(Experiment, SharedTripsAcrossMethods) {
  ExperimentConfig c;
  c.methods = {Method::kFixedTime, Method::kGreedy, Method::kMujam};
  c.reference = Method::kGreedy;
  c.seeds = 2;
  c.test_networks = 2;
  c.test_max_intersections = 3;
  c.trip_minutes = 1;
  c.max_episode_seconds = 900;
  c.hp.dims.embed = c.hp.dims.hidden = 8;
  c.hp.search.budget = 4;
  Rng rng(5);
  std::map<Method, std::vector<ModelParams>> models;
  models[Method::kMujam].push_back(initial_params(c.hp, rng));
  const MetricsReport r = run_experiment1(c, models);
  EXPECT_EQ(r.labels, (std::vector<std::string>{"fixed-time", "greedy", "mujam@cyclic", "mujam@acyclic"}));
  ASSERT_EQ(r.runs.size(), 2u * 2u * 4u);
  std::map<std::pair<int, int>, std::uint64_t> hashes;
  for (const RunRecord& run : r.runs) {
    auto it = hashes.emplace(std::make_pair(run.seed, run.network), run.metrics.trip_hash).first;
    EXPECT_EQ(it->second, run.metrics.trip_hash);
  }
  // Different repetitions see different demand on the same network.
  EXPECT_NE(hashes[std::make_pair(0, 0)], hashes[std::make_pair(1, 0)]);
  EXPECT_EQ(r.summary.size(), 4u);
  EXPECT_THROW(run_experiment1(c, {}), MissingArtifact);
}

TEST(Experiment, SmokeScaleShortHorizon) {
  ExperimentConfig c;
  c.smoke_rows = c.smoke_cols = 3;
  c.smoke_warm_start = 60;
  c.smoke_horizon = 30;
  c.hp.dims.embed = c.hp.dims.hidden = 8;
  Rng rng(6);
  const ModelParams p = initial_params(c.hp, rng);
  const MetricsReport r = run_smoke_scale(c, p);
  ASSERT_EQ(r.cumulative_difference.size(), 30u);
  ASSERT_EQ(r.step_latency_ms.size(), 30u);
  ASSERT_EQ(r.runs.size(), 2u);
  double diff = 0.0;
  for (int t = 0; t < 30; ++t) diff += r.runs[1].metrics.delay_series[t] - r.runs[0].metrics.delay_series[t];
  EXPECT_NEAR(r.cumulative_difference.back(), diff, 1e-9);
}

}  // namespace
}  // namespace mujam
