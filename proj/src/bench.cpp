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

#include "mujam/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

namespace mujam {

namespace {

struct MethodInfo {
  Method method;
  const char* name;
};

constexpr MethodInfo kMethods[] = {
    {Method::kFixedTime, "fixed-time"}, {Method::kGreedy, "greedy"},   {Method::kMfgrl, "mfgrl"},
    {Method::kMujam, "mujam"},          {Method::kMujamC, "mujam-c"},  {Method::kMujamA, "mujam-a"},
    {Method::kMuim, "muim"},            {Method::kMujamNnl, "mujam-nnl"}, {Method::kMujamNr, "mujam-nr"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<Method>& all_methods() {
  static const std::vector<Method> v = [] {
    std::vector<Method> out;
    for (const MethodInfo& m : kMethods) out.push_back(m.method);
    return out;
  }();
  return v;
}

const char* method_name(Method m) {
  for (const MethodInfo& i : kMethods)
    if (i.method == m) return i.name;
  return "?";
}

Method parse_method(const std::string& s) {
  for (const MethodInfo& i : kMethods)
    if (s == i.name) return i.method;
  throw ConfigError("unknown method '" + s + "'");
}

std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

bool is_learned(Method m) { return m != Method::kFixedTime && m != Method::kGreedy; }

void ExperimentConfig::validate() const {
  hp.validate();
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (test_networks < 1) throw ConfigError("test_networks must be >= 1");
  if (test_min_intersections < 1 || test_max_intersections < test_min_intersections)
    throw ConfigError("invalid test intersection range");
  if (trip_minutes < 1 || max_episode_seconds < 1) throw ConfigError("episode lengths must be >= 1");
  if (fixed_green_seconds < 1) throw ConfigError("fixed_green_seconds must be >= 1");
  if (smoke_rows < 1 || smoke_cols < 1 || smoke_warm_start < 0 || smoke_horizon < 1)
    throw ConfigError("invalid smoke settings");
  if (!(smoke_trip_rate > 0 && smoke_trip_rate <= 1)) throw ConfigError("smoke_trip_rate must lie in (0, 1]");
  if (methods.empty()) throw ConfigError("no methods selected");
}

// ---------------------------------------------------------------------------
// Flat config

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + v + "' for " + key);
}

std::string format_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MUJAM_INT(K, EXPR)                                                                            \
  Field {                                                                                             \
    K, [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_number<int>(K, v); },           \
        [](const ExperimentConfig& c) { return std::to_string(c.EXPR); }                              \
  }
#define MUJAM_U64(K, EXPR)                                                                            \
  Field {                                                                                             \
    K, [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_number<std::uint64_t>(K, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.EXPR); }                              \
  }
#define MUJAM_DBL(K, EXPR)                                                                            \
  Field {                                                                                             \
    K, [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_number<double>(K, v); },        \
        [](const ExperimentConfig& c) { return format_double(c.EXPR); }                               \
  }
#define MUJAM_BOOL(K, EXPR)                                                                           \
  Field {                                                                                             \
    K, [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_bool(K, v); },                  \
        [](const ExperimentConfig& c) { return std::string(c.EXPR ? "true" : "false"); }              \
  }
#define MUJAM_MODE(K, EXPR)                                                                           \
  Field {                                                                                             \
    K, [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_constraint_mode(v); },          \
        [](const ExperimentConfig& c) { return std::string(constraint_mode_name(c.EXPR)); }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      // Optimization and model.
      MUJAM_DBL("learning_rate", hp.learning_rate),
      MUJAM_INT("batch_size", hp.batch_size),
      MUJAM_DBL("adam_beta1", hp.adam_beta1),
      MUJAM_DBL("adam_beta2", hp.adam_beta2),
      MUJAM_DBL("adam_epsilon", hp.adam_epsilon),
      MUJAM_INT("embed", hp.dims.embed),
      MUJAM_INT("hidden", hp.dims.hidden),
      MUJAM_INT("K", hp.dims.repr_rounds),
      MUJAM_INT("K_prime", hp.dims.dynamics_rounds),
      MUJAM_DBL("value_scale", hp.dims.value_scale),
      MUJAM_DBL("reward_scale", hp.dims.reward_scale),
      // Search.
      MUJAM_INT("beta", hp.search.budget),
      MUJAM_INT("delta", hp.search.depth),
      MUJAM_DBL("C1", hp.search.c1),
      MUJAM_DBL("C2", hp.search.c2),
      MUJAM_DBL("C3", hp.search.c3),
      MUJAM_DBL("C_base", hp.search.c_base),
      MUJAM_DBL("C_init", hp.search.c_init),
      MUJAM_DBL("gamma", hp.search.gamma),
      MUJAM_DBL("dirichlet_alpha", hp.search.dirichlet_alpha),
      MUJAM_DBL("dirichlet_fraction", hp.search.dirichlet_fraction),
      MUJAM_BOOL("visit_targets", hp.search.visit_targets),
      // Training schedule.
      MUJAM_INT("omega", hp.patience),
      MUJAM_INT("unroll", hp.unroll),
      MUJAM_INT("n_step", hp.n_step),
      MUJAM_INT("replay_capacity", hp.replay_capacity),
      MUJAM_INT("reanalyze_period", hp.reanalyze_period),
      MUJAM_DBL("reanalyze_fraction", hp.reanalyze_fraction),
      MUJAM_DBL("train_ratio", hp.train_ratio),
      MUJAM_INT("episode_seconds", hp.episode_seconds),
      MUJAM_INT("max_train_steps", hp.max_train_steps),
      MUJAM_INT("eval_interval", hp.eval_interval),
      MUJAM_INT("checkpoint_interval", hp.checkpoint_interval),
      MUJAM_INT("validation_networks", hp.validation_networks),
      MUJAM_INT("validation_seconds", hp.validation_seconds),
      MUJAM_INT("eval_budget", hp.eval_budget),
      MUJAM_INT("train_networks", hp.train_networks),
      MUJAM_INT("min_intersections", hp.min_intersections),
      MUJAM_INT("max_intersections", hp.max_intersections),
      MUJAM_DBL("trip_rate", hp.trip_rate),
      MUJAM_MODE("constraints", hp.constraints),
      MUJAM_BOOL("noisy_layers", hp.noisy_layers),
      MUJAM_BOOL("reanalyze", hp.reanalyze),
      MUJAM_BOOL("independent_search", hp.independent_search),
      MUJAM_DBL("mfgrl_gamma", hp.mfgrl_gamma),
      MUJAM_DBL("mfgrl_epsilon", hp.mfgrl_epsilon),
      MUJAM_U64("train_seed", hp.seed),
      // Experiment.
      Field{"mode", [](ExperimentConfig& c, const std::string& v) { c.mode = v; },
            [](const ExperimentConfig& c) { return c.mode; }},
      Field{"methods", [](ExperimentConfig& c, const std::string& v) { c.methods = parse_method_list(v); },
            [](const ExperimentConfig& c) {
              std::string s;
              for (Method m : c.methods) s += (s.empty() ? "" : ",") + std::string(method_name(m));
              return s;
            }},
      Field{"reference", [](ExperimentConfig& c, const std::string& v) { c.reference = parse_method(v); },
            [](const ExperimentConfig& c) { return std::string(method_name(c.reference)); }},
      MUJAM_INT("seeds", seeds),
      MUJAM_INT("test_networks", test_networks),
      MUJAM_INT("test_min_intersections", test_min_intersections),
      MUJAM_INT("test_max_intersections", test_max_intersections),
      MUJAM_INT("trip_minutes", trip_minutes),
      MUJAM_INT("max_episode_seconds", max_episode_seconds),
      MUJAM_INT("fixed_green_seconds", fixed_green_seconds),
      MUJAM_MODE("ablation_constraints", ablation_constraints),
      MUJAM_INT("smoke_rows", smoke_rows),
      MUJAM_INT("smoke_cols", smoke_cols),
      MUJAM_INT("smoke_warm_start", smoke_warm_start),
      MUJAM_INT("smoke_horizon", smoke_horizon),
      MUJAM_DBL("smoke_trip_rate", smoke_trip_rate),
      MUJAM_MODE("smoke_constraints", smoke_constraints),
      MUJAM_U64("seed", seed),
      MUJAM_BOOL("record_wall_time", record_wall_time),
      Field{"out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
            [](const ExperimentConfig& c) { return c.out_dir; }},
  };
  return f;
}

#undef MUJAM_INT
#undef MUJAM_U64
#undef MUJAM_DBL
#undef MUJAM_BOOL
#undef MUJAM_MODE

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifact("config file not found: " + path);
  return parse_config(read_file(path));
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

// ---------------------------------------------------------------------------
// Methods

HyperParams hyperparams_for(Method m, const ExperimentConfig& cfg, int seed_index) {
  HyperParams hp = cfg.hp;
  hp.seed = derive_seed(derive_seed(cfg.hp.seed, "repetition"), static_cast<std::uint64_t>(seed_index));
  switch (m) {
    case Method::kMujam:
      hp.constraints = ConstraintMode::kHybrid;
      break;
    case Method::kMujamC:
      hp.constraints = ConstraintMode::kCyclic;
      break;
    case Method::kMujamA:
      hp.constraints = ConstraintMode::kAcyclic;
      break;
    case Method::kMuim:
      hp.constraints = cfg.ablation_constraints;
      hp.independent_search = true;
      break;
    case Method::kMujamNnl:
      hp.constraints = cfg.ablation_constraints;
      hp.noisy_layers = false;
      break;
    case Method::kMujamNr:
      hp.constraints = cfg.ablation_constraints;
      hp.reanalyze = false;
      break;
    case Method::kMfgrl:
      hp.constraints = ConstraintMode::kCyclic;
      break;
    case Method::kFixedTime:
    case Method::kGreedy:
      break;
  }
  return hp;
}

TrainResult train_method(Method m, const HyperParams& hp, const TrainOptions& opts) {
  if (!is_learned(m)) throw ConfigError(std::string(method_name(m)) + " is not trained");
  if (m == Method::kMfgrl) return mfgrl_train(hp, opts);
  return train(hp, opts);
}

std::vector<ConstraintMode> eval_constraints(Method m, const ExperimentConfig& cfg) {
  switch (m) {
    case Method::kMujam:
      return {ConstraintMode::kCyclic, ConstraintMode::kAcyclic};
    case Method::kMujamA:
      return {ConstraintMode::kAcyclic};
    case Method::kMuim:
    case Method::kMujamNnl:
    case Method::kMujamNr:
      return {cfg.ablation_constraints == ConstraintMode::kHybrid ? ConstraintMode::kCyclic
                                                                  : cfg.ablation_constraints};
    default:
      return {ConstraintMode::kCyclic};
  }
}

std::string run_label(Method m, ConstraintMode c, const ExperimentConfig& cfg) {
  if (eval_constraints(m, cfg).size() == 1) return method_name(m);
  return std::string(method_name(m)) + "@" + constraint_mode_name(c);
}

Policy make_policy(Method m, const ModelParams* params, const ExperimentConfig& cfg, Rng& rng) {
  switch (m) {
    case Method::kFixedTime: {
      const int green = cfg.fixed_green_seconds;
      return [green](const SimState& s) { return fixed_time_policy(s, green); };
    }
    case Method::kGreedy:
      return [](const SimState& s) { return greedy_policy(s); };
    default:
      break;
  }
  if (!params) throw MissingArtifact(std::string("no checkpoint for ") + method_name(m));
  if (m == Method::kMfgrl) return mfgrl_policy(*params);
  SearchConfig sc = cfg.hp.search;
  if (cfg.hp.eval_budget >= 0) sc.budget = cfg.hp.eval_budget;
  return search_policy(*params, sc, m == Method::kMuim, rng);
}

std::shared_ptr<RoadNetwork> make_test_network(const ExperimentConfig& cfg, int index) {
  NetworkGenConfig g;
  g.seed = derive_seed(derive_seed(cfg.seed, "test-network"), static_cast<std::uint64_t>(index));
  g.min_intersections = cfg.test_min_intersections;
  g.max_intersections = cfg.test_max_intersections;
  return std::make_shared<RoadNetwork>(generate_network(g));
}

std::vector<Trip> make_test_trips(const ExperimentConfig& cfg, const RoadNetwork& net, int seed_index, int index) {
  const std::uint64_t s = derive_seed(derive_seed(derive_seed(cfg.seed, "test-trips"), seed_index), index);
  return generate_trips(net, make_trip_process(net, s, cfg.hp.trip_rate), cfg.trip_minutes * 60);
}

// ---------------------------------------------------------------------------
// Experiments

TestSet make_test_set(const ExperimentConfig& cfg) {
  TestSet t;
  for (int i = 0; i < cfg.test_networks; ++i) t.nets.push_back(make_test_network(cfg, i));
  for (int s = 0; s < cfg.seeds; ++s) {
    t.trips.emplace_back();
    for (int i = 0; i < cfg.test_networks; ++i) t.trips.back().push_back(make_test_trips(cfg, *t.nets[i], s, i));
  }
  return t;
}

MetricsReport run_experiment1(const ExperimentConfig& cfg, const std::map<Method, std::vector<ModelParams>>& models) {
  cfg.validate();
  return run_experiment1(cfg, models, make_test_set(cfg));
}

MetricsReport run_experiment1(const ExperimentConfig& cfg, const std::map<Method, std::vector<ModelParams>>& models,
                              const TestSet& tests) {
  cfg.validate();
  const int seeds = static_cast<int>(tests.trips.size());
  for (const auto& per_seed : tests.trips)
    if (per_seed.size() != tests.nets.size()) throw ConfigError("test trips do not match the test networks");
  if (tests.nets.empty() || seeds == 0) throw ConfigError("empty test set");
  MetricsReport report;
  report.reference = method_name(cfg.reference);
  for (Method m : cfg.methods) {
    if (!is_learned(m)) continue;
    auto it = models.find(m);
    if (it == models.end() || it->second.empty())
      throw MissingArtifact(std::string("no checkpoint for ") + method_name(m));
    if (it->second.size() != 1 && static_cast<int>(it->second.size()) < seeds)
      throw MissingArtifact(std::string("not enough checkpoints for ") + method_name(m));
  }
  for (Method m : cfg.methods)
    for (ConstraintMode c : eval_constraints(m, cfg)) report.labels.push_back(run_label(m, c, cfg));
  if (std::find(report.labels.begin(), report.labels.end(), report.reference) == report.labels.end())
    report.reference = report.labels.front();

  for (int s = 0; s < seeds; ++s) {
    for (std::size_t i = 0; i < tests.nets.size(); ++i) {
      const std::vector<Trip>& trips = tests.trips[s][i];
      for (Method m : cfg.methods) {
        const ModelParams* params = nullptr;
        if (is_learned(m)) {
          const auto& v = models.at(m);
          params = &v[v.size() == 1 ? 0 : s];
        }
        for (ConstraintMode c : eval_constraints(m, cfg)) {
          auto net = std::make_shared<RoadNetwork>(*tests.nets[i]);
          Rng constraint_rng(derive_seed(cfg.seed, "test-constraints"));
          apply_constraint_mode(*net, c, constraint_rng);
          RunRecord run;
          run.label = run_label(m, c, cfg);
          run.method = method_name(m);
          run.constraints = constraint_mode_name(c);
          run.seed = s;
          run.network = static_cast<int>(i);
          Rng rng(derive_seed(derive_seed(derive_seed(cfg.seed, run.label), s), i));
          const Policy policy = make_policy(m, params, cfg, rng);
          run.metrics = run_episode(net, trips, policy, cfg.max_episode_seconds, true);
          report.runs.push_back(std::move(run));
        }
      }
    }
  }
  summarize(report);
  return report;
}

MetricsReport run_smoke_scale(const ExperimentConfig& cfg, const ModelParams& params) {
  cfg.validate();
  auto net = std::make_shared<RoadNetwork>(generate_grid(cfg.smoke_rows, cfg.smoke_cols, derive_seed(cfg.seed, "grid")));
  Rng constraint_rng(derive_seed(cfg.seed, "grid-constraints"));
  apply_constraint_mode(*net, cfg.smoke_constraints, constraint_rng);
  const int duration = cfg.smoke_warm_start + cfg.smoke_horizon;
  const std::vector<Trip> trips =
      generate_trips(*net, make_trip_process(*net, derive_seed(cfg.seed, "grid-trips"), cfg.smoke_trip_rate), duration);

  SimState warm(net, trips);
  for (int t = 0; t < cfg.smoke_warm_start; ++t) warm.step(fixed_time_policy(warm, cfg.fixed_green_seconds));

  SimState fixed = warm;
  SimState learned = warm;
  ModelParams mean = params;
  for (Matrix& n : mean.noise) n.setZero();
  SearchConfig sc = cfg.hp.search;
  sc.budget = 0;
  sc.root_noise = false;
  Rng rng(derive_seed(cfg.seed, "smoke-policy"));

  MetricsReport report;
  report.labels = {"fixed-time", "mujam"};
  report.reference = "fixed-time";
  RunRecord fr, lr;
  fr.label = fr.method = "fixed-time";
  lr.label = lr.method = "mujam";
  fr.constraints = lr.constraints = constraint_mode_name(cfg.smoke_constraints);
  fr.metrics.trip_hash = lr.metrics.trip_hash = trip_set_hash(trips);
  double cumulative = 0.0;
  for (int t = 0; t < cfg.smoke_horizon; ++t) {
    const StepOutcome a = fixed.step(fixed_time_policy(fixed, cfg.fixed_green_seconds));
    const auto t0 = std::chrono::steady_clock::now();
    const JointAction act = plan(encode_observation(learned), mean, sc, rng).action;
    const StepOutcome b = learned.step(act);
    report.step_latency_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    cumulative += b.delay - a.delay;
    report.cumulative_difference.push_back(cumulative);
    fr.metrics.delay_series.push_back(a.delay);
    lr.metrics.delay_series.push_back(b.delay);
    fr.metrics.reward_series.push_back(a.global_reward);
    lr.metrics.reward_series.push_back(b.global_reward);
    fr.metrics.total_delay += a.delay;
    lr.metrics.total_delay += b.delay;
  }
  for (RunRecord* r : {&fr, &lr}) {
    r->metrics.steps = cfg.smoke_horizon;
    double sum = 0.0;
    for (double x : r->metrics.reward_series) sum += x;
    r->metrics.mean_reward = sum / cfg.smoke_horizon;
  }
  fr.metrics.trips = fixed.completed();
  lr.metrics.trips = learned.completed();
  fr.metrics.all_completed = fixed.all_trips_done();
  lr.metrics.all_completed = learned.all_trips_done();
  report.runs = {std::move(fr), std::move(lr)};
  summarize(report);
  return report;
}

}  // namespace mujam
