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

#include "mujam/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace mujam {

const char* constraint_mode_name(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::kCyclic:
      return "cyclic";
    case ConstraintMode::kAcyclic:
      return "acyclic";
    case ConstraintMode::kHybrid:
      return "hybrid";
  }
  return "?";
}

ConstraintMode parse_constraint_mode(const std::string& s) {
  if (s == "cyclic") return ConstraintMode::kCyclic;
  if (s == "acyclic") return ConstraintMode::kAcyclic;
  if (s == "hybrid") return ConstraintMode::kHybrid;
  throw ConfigError("unknown constraint mode '" + s + "'");
}

void HyperParams::validate() const {
  search.validate();
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0))
    throw ConfigError("invalid Adam settings");
  if (dims.embed < 1 || dims.hidden < 1 || dims.repr_rounds < 0 || dims.dynamics_rounds < 0)
    throw ConfigError("invalid model dimensions");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (unroll < 0) throw ConfigError("unroll must be >= 0");
  if (n_step < 1) throw ConfigError("n_step must be >= 1");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (reanalyze_period < 1 || reanalyze_fraction < 0 || reanalyze_fraction > 1)
    throw ConfigError("invalid reanalyze schedule");
  if (!(train_ratio > 0)) throw ConfigError("train_ratio must be positive");
  if (episode_seconds < 1 || validation_seconds < 1) throw ConfigError("episode lengths must be >= 1");
  if (max_train_steps < 0) throw ConfigError("max_train_steps must be >= 0");
  if (eval_interval < 1 || checkpoint_interval < 1) throw ConfigError("intervals must be >= 1");
  if (validation_networks < 1) throw ConfigError("validation_networks must be >= 1");
  if (eval_budget < -1) throw ConfigError("eval_budget must be >= -1");
  if (train_networks < 0) throw ConfigError("train_networks must be >= 0");
  if (min_intersections < 1 || max_intersections < min_intersections)
    throw ConfigError("invalid intersection range");
  if (!(trip_rate > 0 && trip_rate <= 1)) throw ConfigError("trip_rate must lie in (0, 1]");
  if (!(mfgrl_gamma >= 0 && mfgrl_gamma < 1)) throw ConfigError("mfgrl_gamma must lie in [0, 1)");
  if (!(mfgrl_epsilon >= 0 && mfgrl_epsilon <= 1)) throw ConfigError("mfgrl_epsilon must lie in [0, 1]");
}

void apply_constraint_mode(RoadNetwork& net, ConstraintMode mode, Rng& rng) {
  switch (mode) {
    case ConstraintMode::kCyclic:
      net.set_all_constraints(ConstraintType::kCyclic);
      break;
    case ConstraintMode::kAcyclic:
      net.set_all_constraints(ConstraintType::kAcyclic);
      break;
    case ConstraintMode::kHybrid:
      assign_hybrid_constraints(net, rng);
      break;
  }
}

std::shared_ptr<RoadNetwork> make_training_network(const HyperParams& hp, std::uint64_t seed) {
  NetworkGenConfig cfg;
  cfg.seed = seed;
  cfg.min_intersections = hp.min_intersections;
  cfg.max_intersections = hp.max_intersections;
  auto net = std::make_shared<RoadNetwork>(generate_network(cfg));
  Rng rng(derive_seed(seed, "constraints"));
  apply_constraint_mode(*net, hp.constraints, rng);
  return net;
}

EpisodeRecord collect_episode(const std::shared_ptr<const RoadNetwork>& net, ModelParams& params,
                              const HyperParams& hp, Rng& rng, int network_id) {
  EpisodeRecord ep;
  ep.network_id = network_id;
  ep.net = net;
  for (int x = 0; x < net->num_intersections(); ++x) ep.constraints.push_back(net->program(x).constraint);
  if (hp.noisy_layers) resample_noise(params, rng);
  const std::vector<Trip> trips =
      generate_trips(*net, make_trip_process(*net, rng(), hp.trip_rate), hp.episode_seconds);
  SimState sim(net, trips);
  SearchConfig cfg = hp.search;
  cfg.root_noise = true;
  ep.steps.reserve(hp.episode_seconds);
  for (int t = 0; t < hp.episode_seconds; ++t) {
    StepRecord rec;
    rec.obs = encode_observation(sim);
    SearchResult r = hp.independent_search ? plan_independent(rec.obs, params, cfg, rng)
                                           : plan(rec.obs, params, cfg, rng);
    StepOutcome out = sim.step(r.action);
    rec.obs.connectivity.reset();
    rec.action = std::move(r.action);
    rec.lane_rewards = std::move(out.lane_rewards);
    rec.reward = out.global_reward;
    rec.search_value = r.root_value;
    rec.targets = std::move(r.targets);
    ep.steps.push_back(std::move(rec));
  }
  return ep;
}

TrainTargets build_targets(const EpisodeRecord& episode, int position, const HyperParams& hp) {
  const int T = static_cast<int>(episode.steps.size());
  const double gamma = hp.gamma();
  auto z = [&](int i) {
    double g = 0.0, disc = 1.0;
    for (int k = 0; k < hp.n_step && i + k < T; ++k) {
      g += disc * episode.steps[i + k].reward;
      disc *= gamma;
    }
    if (i + hp.n_step < T) g += std::pow(gamma, hp.n_step) * episode.steps[i + hp.n_step].search_value;
    return g;
  };
  TrainTargets out;
  for (int k = 0; k <= hp.unroll; ++k) {
    const int i = position + k;
    out.value.push_back(z(i));
    out.policy.push_back(i < T ? episode.steps[i].targets : std::vector<PriorTarget>{});
    if (k < hp.unroll) {
      out.reward.push_back(i < T ? episode.steps[i].reward : 0.0);
      out.actions.push_back(i < T ? episode.steps[i].action : JointAction{});
    }
  }
  return out;
}

namespace {

JointAction hold_all(const std::vector<ControllerState>& controllers) {
  JointAction a;
  for (const ControllerState& c : controllers) a.phases.push_back(signal::hold_phase(c));
  return a;
}

std::shared_ptr<const SoftmaxGroups> policy_groups(const ConnectivityFeatures& cf,
                                                   const std::vector<PriorTarget>& targets) {
  auto groups = std::make_shared<SoftmaxGroups>();
  for (std::size_t x = 0; x < targets.size() && x < cf.legal.size(); ++x) {
    if (cf.legal[x].size() < 2) continue;
    const PriorTarget& t = targets[x];
    if (t.probs.empty()) continue;
    const std::size_t best = std::max_element(t.probs.begin(), t.probs.end()) - t.probs.begin();
    const int phase = t.phases[best];
    if (std::find(cf.legal[x].begin(), cf.legal[x].end(), phase) == cf.legal[x].end())
      throw Error("prior target names a phase that is not legal");
    groups->rows.push_back(cf.legal[x]);
    groups->targets.push_back(phase);
  }
  return groups;
}

}  // namespace

LossReport sample_loss(const ModelParams& params, const GraphObservation& obs, const TrainTargets& targets,
                       const HyperParams& hp, double weight, Gradients* grads) {
  Tape tape;
  GraphNet g(params, tape);
  GraphObservation local = obs;
  ensure_connectivity(local);
  Tape::Var lanes = g.represent(local);

  LatentState cur;
  cur.net = local.net;
  cur.topo = local.topo;
  cur.controllers = local.controllers;
  cur.connectivity = local.connectivity;

  Tape::Var reward_sum = -1, value_sum = -1, policy_sum = -1;
  auto accumulate = [&](Tape::Var& sum, Tape::Var term) { sum = sum < 0 ? term : tape.add(sum, term); };
  const ModelDims& d = params.dims;
  for (int k = 0; k <= hp.unroll; ++k) {
    const GraphNet::Heads heads = g.heads(lanes);
    accumulate(value_sum, tape.squared_error(heads.value_total, targets.value[k] / d.value_scale));
    if (k >= 1) accumulate(reward_sum, tape.squared_error(heads.reward_total, targets.reward[k - 1] / d.reward_scale));
    if (!targets.policy[k].empty()) {
      auto groups = policy_groups(*cur.connectivity, targets.policy[k]);
      if (!groups->targets.empty())
        accumulate(policy_sum, tape.softmax_xent(g.phase_logits(lanes, *cur.topo, *cur.connectivity), groups));
    }
    if (k < hp.unroll) {
      const JointAction& a = targets.actions[k].phases.empty() ? hold_all(cur.controllers) : targets.actions[k];
      cur = advance_connectivity(cur, a);
      lanes = g.dynamics(lanes, *cur.topo, *cur.connectivity);
    }
  }

  LossReport report;
  Tape::Var total = -1;
  if (reward_sum >= 0) {
    report.reward = weight * tape.scalar(reward_sum);
    accumulate(total, reward_sum);
  }
  report.value = weight * tape.scalar(value_sum);
  accumulate(total, value_sum);
  if (policy_sum >= 0) {
    report.policy = weight * tape.scalar(policy_sum);
    accumulate(total, policy_sum);
  }
  total = tape.scale(total, weight);
  report.total = tape.scalar(total);
  if (grads) tape.backward(total, *grads);
  return report;
}

LossReport batch_loss(const ModelParams& params, const std::vector<BatchItem>& batch, const HyperParams& hp,
                      Gradients* grads) {
  LossReport sum;
  if (batch.empty()) return sum;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const BatchItem& item : batch) {
    const TrainTargets t = build_targets(*item.episode, item.position, hp);
    const LossReport r = sample_loss(params, item.episode->steps.at(item.position).obs, t, hp, w, grads);
    sum.total += r.total;
    sum.reward += r.reward;
    sum.value += r.value;
    sum.policy += r.policy;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::add(EpisodeRecord episode) {
  if (episode.steps.empty()) throw Error("cannot store an empty episode");
  if (size() == capacity_) {
    episodes_.erase(episodes_.begin());
    if (cursor_episode > 0) {
      --cursor_episode;
    } else {
      cursor_position = 0;
    }
  }
  episodes_.push_back(std::move(episode));
}

std::size_t ReplayBuffer::positions() const {
  std::size_t n = 0;
  for (const EpisodeRecord& e : episodes_) n += e.steps.size();
  return n;
}

const EpisodeRecord& ReplayBuffer::episode(int i) const { return episodes_.at(i); }
EpisodeRecord& ReplayBuffer::episode(int i) { return episodes_.at(i); }

BatchItem ReplayBuffer::sample(Rng& rng) const {
  if (episodes_.empty()) throw Error("cannot sample from an empty replay buffer");
  const auto e = std::uniform_int_distribution<std::size_t>(0, episodes_.size() - 1)(rng);
  const EpisodeRecord& ep = episodes_[e];
  const int p = std::uniform_int_distribution<int>(0, static_cast<int>(ep.steps.size()) - 1)(rng);
  return {&ep, p};
}

// ---------------------------------------------------------------------------
// Optimization

Adam::Adam(const ModelParams& params, const HyperParams& hp)
    : lr_(hp.learning_rate), b1_(hp.adam_beta1), b2_(hp.adam_beta2), eps_(hp.adam_epsilon) {
  m_ = params.zero_gradients();
  v_ = params.zero_gradients();
}

void Adam::step(ModelParams& params, const Gradients& grads, const std::vector<char>& frozen) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, t_);
  const double c2 = 1.0 - std::pow(b2_, t_);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i].cwiseProduct(grads[i]);
    Matrix& w = params.tensors[i];
    w.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    if (params.is_sigma(static_cast<int>(i))) w = w.cwiseMax(0.0);
  }
}

std::vector<char> frozen_tensors(const ModelParams& params, const HyperParams& hp) {
  std::vector<char> frozen(params.size(), 0);
  if (!hp.noisy_layers)
    for (std::size_t i = 0; i < params.size(); ++i) frozen[i] = params.is_sigma(static_cast<int>(i));
  return frozen;
}

ModelParams initial_params(const HyperParams& hp, Rng& rng) {
  ModelParams p(hp.dims, rng);
  if (!hp.noisy_layers) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p.is_sigma(static_cast<int>(i))) p.tensors[i].setZero();
    for (Matrix& n : p.noise) n.setZero();
  }
  return p;
}

LossReport train_step(const ReplayBuffer& buffer, ModelParams& params, Adam& adam, const HyperParams& hp, Rng& rng) {
  std::vector<BatchItem> batch;
  batch.reserve(hp.batch_size);
  for (int i = 0; i < hp.batch_size; ++i) batch.push_back(buffer.sample(rng));
  Gradients grads = params.zero_gradients();
  const LossReport r = batch_loss(params, batch, hp, &grads);
  adam.step(params, grads, frozen_tensors(params, hp));
  return r;
}

int reanalyze(ReplayBuffer& buffer, const ModelParams& params, const HyperParams& hp, Rng& rng) {
  if (!hp.reanalyze || buffer.empty()) return 0;
  const int count = static_cast<int>(std::ceil(hp.reanalyze_fraction * static_cast<double>(buffer.positions())));
  SearchConfig cfg = hp.search;
  cfg.root_noise = false;
  for (int i = 0; i < count; ++i) {
    if (buffer.cursor_episode >= buffer.size()) {
      buffer.cursor_episode = 0;
      buffer.cursor_position = 0;
    }
    EpisodeRecord& ep = buffer.episode(buffer.cursor_episode);
    StepRecord& step = ep.steps[buffer.cursor_position];
    SearchResult r = hp.independent_search ? plan_independent(step.obs, params, cfg, rng)
                                           : plan(step.obs, params, cfg, rng);
    step.search_value = r.root_value;
    step.targets = std::move(r.targets);
    if (++buffer.cursor_position >= static_cast<int>(ep.steps.size())) {
      buffer.cursor_position = 0;
      ++buffer.cursor_episode;
    }
  }
  return count;
}

bool early_stopping_check(const std::vector<EvalPoint>& history, int current_step, const HyperParams& hp) {
  if (history.empty()) return false;
  const EvalPoint* best = &history.front();
  for (const EvalPoint& e : history)
    if (e.validation_reward > best->validation_reward) best = &e;
  return current_step - best->step >= hp.patience;
}

// ---------------------------------------------------------------------------
// Rollouts

EpisodeMetrics run_episode(const std::shared_ptr<const RoadNetwork>& net, const std::vector<Trip>& trips,
                           const Policy& policy, int max_seconds, bool until_done) {
  SimState sim(net, trips);
  EpisodeMetrics m;
  m.trip_hash = trip_set_hash(trips);
  for (int t = 0; t < max_seconds; ++t) {
    if (until_done && sim.all_trips_done()) break;
    const StepOutcome out = sim.step(policy(sim));
    m.delay_series.push_back(out.delay);
    m.reward_series.push_back(out.global_reward);
    m.total_delay += out.delay;
    m.mean_reward += out.global_reward;
  }
  m.steps = static_cast<int>(m.delay_series.size());
  if (m.steps > 0) m.mean_reward /= m.steps;
  m.trips = sim.completed();
  m.all_completed = sim.all_trips_done();
  return m;
}

Policy search_policy(const ModelParams& params, SearchConfig cfg, bool independent, Rng& rng) {
  auto p = std::make_shared<ModelParams>(params);
  for (Matrix& n : p->noise) n.setZero();
  cfg.root_noise = false;
  cfg.trace = nullptr;
  return [p, cfg, independent, &rng](const SimState& s) {
    const GraphObservation obs = encode_observation(s);
    return independent ? plan_independent(obs, *p, cfg, rng).action : plan(obs, *p, cfg, rng).action;
  };
}

ValidationSet make_validation_set(const HyperParams& hp) {
  ValidationSet set;
  for (int i = 0; i < hp.validation_networks; ++i) {
    const std::uint64_t seed = derive_seed(derive_seed(hp.seed, "validation"), i);
    auto net = make_training_network(hp, seed);
    set.trips.push_back(
        generate_trips(*net, make_trip_process(*net, derive_seed(seed, "trips"), hp.trip_rate), hp.validation_seconds));
    set.nets.push_back(std::move(net));
  }
  return set;
}

double evaluate_validation(const ModelParams& params, const HyperParams& hp, const ValidationSet& set) {
  SearchConfig cfg = hp.search;
  if (hp.eval_budget >= 0) cfg.budget = hp.eval_budget;
  double total = 0.0;
  for (std::size_t i = 0; i < set.nets.size(); ++i) {
    Rng rng(derive_seed(derive_seed(hp.seed, "validation-policy"), i));
    const Policy policy = search_policy(params, cfg, hp.independent_search, rng);
    total += run_episode(set.nets[i], set.trips[i], policy, hp.validation_seconds, false).mean_reward;
  }
  return total / static_cast<double>(set.nets.size());
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult run_training_loop(const HyperParams& hp, const TrainOptions& opts, ModelParams params,
                              const TrainingHooks& hooks) {
  hp.validate();
  const auto started = std::chrono::steady_clock::now();
  Rng collect_rng(derive_seed(hp.seed, "collect"));
  Rng pool_rng(derive_seed(hp.seed, "pool"));
  ReplayBuffer buffer(hp.replay_capacity);
  const ValidationSet validation = make_validation_set(hp);

  std::vector<std::shared_ptr<const RoadNetwork>> pool;
  for (int i = 0; i < hp.train_networks; ++i)
    pool.push_back(make_training_network(hp, derive_seed(derive_seed(hp.seed, "train-pool"), i)));

  if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);
  if (opts.log) *opts.log << "step,loss_r,loss_v,loss_phi,validation_reward,wall_time\n";

  TrainResult result;
  double best_reward = -std::numeric_limits<double>::infinity();
  LossReport window;
  int window_steps = 0;
  long long transitions = 0;
  int step = 0;
  bool stop = false;
  while (step < hp.max_train_steps && !stop) {
    int id = result.episodes;
    std::shared_ptr<const RoadNetwork> net;
    if (pool.empty()) {
      net = make_training_network(hp, derive_seed(derive_seed(hp.seed, "train-net"), result.episodes));
    } else {
      id = std::uniform_int_distribution<int>(0, static_cast<int>(pool.size()) - 1)(pool_rng);
      net = pool[id];
    }
    EpisodeRecord ep = hooks.collect(net, params, collect_rng, id);
    transitions += static_cast<long long>(ep.steps.size());
    buffer.add(std::move(ep));
    ++result.episodes;

    const long long owed = static_cast<long long>(std::floor(hp.train_ratio * static_cast<double>(transitions)));
    while (step < owed && step < hp.max_train_steps) {
      const LossReport l = hooks.step(buffer, params, step);
      ++step;
      window.reward += l.reward;
      window.value += l.value;
      window.policy += l.policy;
      window.total += l.total;
      ++window_steps;
      if (!opts.checkpoint_dir.empty() && step % hp.checkpoint_interval == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%07d.mjck", step);
        save_checkpoint(params, (std::filesystem::path(opts.checkpoint_dir) / name).string());
      }
      if (step % hp.eval_interval == 0) {
        EvalPoint e;
        e.step = step;
        e.validation_reward = hooks.evaluate(params, validation);
        e.loss.reward = window.reward / window_steps;
        e.loss.value = window.value / window_steps;
        e.loss.policy = window.policy / window_steps;
        e.loss.total = window.total / window_steps;
        if (opts.record_wall_time)
          e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        window = LossReport{};
        window_steps = 0;
        result.history.push_back(e);
        if (e.validation_reward > best_reward) {
          best_reward = e.validation_reward;
          result.best = params;
        }
        if (opts.log) {
          char row[256];
          std::snprintf(row, sizeof row, "%d,%.9g,%.9g,%.9g,%.9g,%.3f\n", e.step, e.loss.reward, e.loss.value,
                        e.loss.policy, e.validation_reward, e.wall_seconds);
          *opts.log << row << std::flush;
        }
        if (early_stopping_check(result.history, step, hp)) {
          result.early_stopped = true;
          stop = true;
          break;
        }
      }
    }
  }
  result.steps = step;
  result.last = params;
  if (result.history.empty()) result.best = params;
  return result;
}

TrainResult train(const HyperParams& hp, const TrainOptions& opts) {
  hp.validate();
  Rng init_rng(derive_seed(hp.seed, "init"));
  auto train_rng = std::make_shared<Rng>(derive_seed(hp.seed, "train"));
  auto reanalyze_rng = std::make_shared<Rng>(derive_seed(hp.seed, "reanalyze"));
  ModelParams params = initial_params(hp, init_rng);
  auto adam = std::make_shared<Adam>(params, hp);

  TrainingHooks hooks;
  hooks.collect = [&hp](const std::shared_ptr<const RoadNetwork>& net, ModelParams& p, Rng& rng, int id) {
    return collect_episode(net, p, hp, rng, id);
  };
  hooks.step = [&](ReplayBuffer& buffer, ModelParams& p, int step) {
    const LossReport l = train_step(buffer, p, *adam, hp, *train_rng);
    if (hp.reanalyze && (step + 1) % hp.reanalyze_period == 0) reanalyze(buffer, p, hp, *reanalyze_rng);
    return l;
  };
  hooks.evaluate = [&hp](const ModelParams& p, const ValidationSet& set) { return evaluate_validation(p, hp, set); };
  return run_training_loop(hp, opts, std::move(params), hooks);
}

}  // namespace mujam
