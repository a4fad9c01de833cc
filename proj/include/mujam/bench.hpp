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

// Method registry, experiment configuration, the zero-shot transfer
// protocol, the grid smoke test and report export.

#ifndef MUJAM_BENCH_HPP_
#define MUJAM_BENCH_HPP_

#include <map>
#include <string>
#include <vector>

#include "mujam/baselines.hpp"

namespace mujam {

enum class Method { kFixedTime, kGreedy, kMfgrl, kMujam, kMujamC, kMujamA, kMuim, kMujamNnl, kMujamNr };

const std::vector<Method>& all_methods();
const char* method_name(Method m);
Method parse_method(const std::string& s);  // throws ConfigError
std::vector<Method> parse_method_list(const std::string& csv);
bool is_learned(Method m);

struct ExperimentConfig {
  std::string mode = "eval";
  HyperParams hp;
  std::vector<Method> methods{Method::kFixedTime, Method::kGreedy, Method::kMujamC, Method::kMujamA};
  Method reference = Method::kMujamA;
  int seeds = 5;
  int test_networks = 10;
  int test_min_intersections = 2;
  int test_max_intersections = 6;
  int trip_minutes = 10;
  int max_episode_seconds = 7200;  // cap on "until every trip is done"
  int fixed_green_seconds = kFixedGreenSeconds;
  ConstraintMode ablation_constraints = ConstraintMode::kCyclic;
  int smoke_rows = 10;
  int smoke_cols = 10;
  int smoke_warm_start = 1800;
  int smoke_horizon = 3600;
  double smoke_trip_rate = 1.0;
  ConstraintMode smoke_constraints = ConstraintMode::kAcyclic;
  std::uint64_t seed = 0;
  bool record_wall_time = true;  // false writes 0 in the training log
  std::string out_dir = "out";

  void validate() const;
};

// Flat "key = value" text; '#' starts a comment.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);  // MissingArtifact when absent
// Every key with its current value, in a fixed order.
std::string config_to_text(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

// Training settings of a method for one repetition.
HyperParams hyperparams_for(Method m, const ExperimentConfig& cfg, int seed_index);

TrainResult train_method(Method m, const HyperParams& hp, const TrainOptions& opts = {});

// Constraint regimes a method is evaluated under.
std::vector<ConstraintMode> eval_constraints(Method m, const ExperimentConfig& cfg);
std::string run_label(Method m, ConstraintMode c, const ExperimentConfig& cfg);

// params is required for learned methods. rng must outlive the policy.
Policy make_policy(Method m, const ModelParams* params, const ExperimentConfig& cfg, Rng& rng);

// Test network i, shared by every method and repetition. Never produced by
// the training or validation generators.
std::shared_ptr<RoadNetwork> make_test_network(const ExperimentConfig& cfg, int index);
std::vector<Trip> make_test_trips(const ExperimentConfig& cfg, const RoadNetwork& net, int seed_index, int index);

struct RunRecord {
  std::string label;
  std::string method;
  std::string constraints;
  int seed = 0;
  int network = 0;
  EpisodeMetrics metrics;
};

struct Summary {
  std::string label;
  int trips = 0;
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0;  // per-trip delay
  double mean_total_delay = 0.0;                       // per episode
  std::vector<double> seed_total_delay;                // mean per repetition
  int paired = 0;
  double paired_mean = 0.0, paired_median = 0.0, paired_q1 = 0.0, paired_q3 = 0.0;
};

struct MetricsReport {
  std::vector<std::string> labels;
  std::string reference;
  std::vector<RunRecord> runs;
  std::vector<Summary> summary;
  // Grid smoke test.
  std::vector<double> cumulative_difference;
  std::vector<double> step_latency_ms;
  // Validation curves per label.
  std::map<std::string, std::vector<EvalPoint>> training;
};

// Per-trip delay differences (run - reference) over trips both completed.
// Throws Error when the runs did not share a trip set.
std::vector<std::pair<int, double>> paired_differences(const RunRecord& run, const RunRecord& reference);

// Linear-interpolation quantile of unsorted data; 0 for empty input.
double quantile(std::vector<double> v, double q);

// Fills report.summary from report.runs.
void summarize(MetricsReport& report);

struct TestSet {
  std::vector<std::shared_ptr<RoadNetwork>> nets;
  std::vector<std::vector<std::vector<Trip>>> trips;  // [repetition][network]
};

// The generated test networks with demand for cfg.seeds repetitions.
TestSet make_test_set(const ExperimentConfig& cfg);

// models[m][s] holds the checkpoint of method m for repetition s; a single
// entry is shared by every repetition.
MetricsReport run_experiment1(const ExperimentConfig& cfg, const std::map<Method, std::vector<ModelParams>>& models);
MetricsReport run_experiment1(const ExperimentConfig& cfg, const std::map<Method, std::vector<ModelParams>>& models,
                              const TestSet& tests);

// Warm start under fixed time, then the same horizon under fixed time and
// under the model acting from its priors alone.
MetricsReport run_smoke_scale(const ExperimentConfig& cfg, const ModelParams& params);

// CSV tables and SVG plots into dir. Deterministic for a given report.
void export_report(const MetricsReport& report, const std::string& dir);

// Reads runs, trips and training curves written by export_report back.
// Per-step series are not restored.
MetricsReport load_report(const std::string& dir);

// Parses the CSV log written during training.
std::vector<EvalPoint> load_training_log(const std::string& path);

// Merges runs of several reports under a new reference and re-summarizes.
MetricsReport combine_reports(const std::vector<MetricsReport>& reports, const std::string& reference);

}  // namespace mujam

#endif  // MUJAM_BENCH_HPP_
