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

// Episode collection, replay with reanalyze, target construction and the
// end-to-end optimization loop.

#ifndef MUJAM_TRAINER_HPP_
#define MUJAM_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mujam/planner.hpp"

namespace mujam {

enum class ConstraintMode { kCyclic, kAcyclic, kHybrid };

const char* constraint_mode_name(ConstraintMode m);
ConstraintMode parse_constraint_mode(const std::string& s);  // throws ConfigError

struct HyperParams {
  double learning_rate = 1e-3;
  int batch_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  ModelDims dims;       // K, K' and embedding sizes
  SearchConfig search;  // beta, delta, widening, PUCT, gamma
  int patience = 10000;  // omega, in training steps
  int unroll = 1;
  int n_step = 5;
  int replay_capacity = 500;  // episodes
  int reanalyze_period = 500;
  double reanalyze_fraction = 0.05;
  double train_ratio = 0.1;  // training steps per observed transition
  int episode_seconds = 600;
  int max_train_steps = 20000;
  int eval_interval = 1000;
  int checkpoint_interval = 1000;
  int validation_networks = 10;
  int validation_seconds = 600;
  int eval_budget = -1;  // search budget while validating; -1 = search.budget
  int train_networks = 0;  // 0 = a fresh network every episode
  int min_intersections = 2;
  int max_intersections = 6;
  double trip_rate = 0.25;
  ConstraintMode constraints = ConstraintMode::kHybrid;
  bool noisy_layers = true;
  bool reanalyze = true;
  bool independent_search = false;
  double mfgrl_gamma = 0.997;  // discount of the model-free baseline's 1-step TD target
  double mfgrl_epsilon = 0.1;  // its random legal action rate while collecting
  std::uint64_t seed = 0;

  double gamma() const { return search.gamma; }
  void validate() const;
};

struct StepRecord {
  GraphObservation obs;  // connectivity dropped
  JointAction action;
  std::vector<double> lane_rewards;
  double reward = 0.0;
  double search_value = 0.0;
  std::vector<PriorTarget> targets;
};

struct EpisodeRecord {
  int network_id = 0;
  std::shared_ptr<const RoadNetwork> net;
  std::vector<ConstraintType> constraints;  // per intersection
  std::vector<StepRecord> steps;
};

// Targets for one sampled position, in real units. Unroll step k uses
// actions[k] (empty = hold) and is supervised by reward[k], value[k + 1]
// and policy[k + 1]; value[0] and policy[0] supervise the representation.
struct TrainTargets {
  std::vector<double> value;
  std::vector<double> reward;
  std::vector<JointAction> actions;
  std::vector<std::vector<PriorTarget>> policy;  // empty past the episode end
};

struct LossReport {
  double total = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double policy = 0.0;
};

// Network with constraints applied for the given mode. Hybrid splits the
// intersections half and half.
void apply_constraint_mode(RoadNetwork& net, ConstraintMode mode, Rng& rng);

std::shared_ptr<RoadNetwork> make_training_network(const HyperParams& hp, std::uint64_t seed);

EpisodeRecord collect_episode(const std::shared_ptr<const RoadNetwork>& net, ModelParams& params,
                              const HyperParams& hp, Rng& rng, int network_id = 0);

TrainTargets build_targets(const EpisodeRecord& episode, int position, const HyperParams& hp);

// Loss of one position, scaled by weight; gradients are accumulated when
// grads is given.
LossReport sample_loss(const ModelParams& params, const GraphObservation& obs, const TrainTargets& targets,
                       const HyperParams& hp, double weight, Gradients* grads);

struct BatchItem {
  const EpisodeRecord* episode = nullptr;
  int position = 0;
};

// Batch mean of sample_loss.
LossReport batch_loss(const ModelParams& params, const std::vector<BatchItem>& batch, const HyperParams& hp,
                      Gradients* grads);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void add(EpisodeRecord episode);
  int size() const { return static_cast<int>(episodes_.size()); }
  int capacity() const { return capacity_; }
  std::size_t positions() const;
  bool empty() const { return episodes_.empty(); }

  // Oldest first.
  const EpisodeRecord& episode(int i) const;
  EpisodeRecord& episode(int i);

  // Uniform episode, then uniform position inside it.
  BatchItem sample(Rng& rng) const;

  // Reanalyze cursor over (episode, position), oldest first.
  int cursor_episode = 0;
  int cursor_position = 0;

 private:
  int capacity_;
  std::vector<EpisodeRecord> episodes_;  // oldest first
};

class Adam {
 public:
  Adam() = default;
  Adam(const ModelParams& params, const HyperParams& hp);

  // frozen[i] keeps tensor i untouched. Noise scales are clamped at 0.
  void step(ModelParams& params, const Gradients& grads, const std::vector<char>& frozen);
  int steps() const { return t_; }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  Gradients m_, v_;
};

// Tensors that must not move under the given settings (noise scales when
// noisy layers are disabled).
std::vector<char> frozen_tensors(const ModelParams& params, const HyperParams& hp);

// Fresh parameters for a run: sigmas zeroed and noise cleared without
// noisy layers.
ModelParams initial_params(const HyperParams& hp, Rng& rng);

LossReport train_step(const ReplayBuffer& buffer, ModelParams& params, Adam& adam, const HyperParams& hp, Rng& rng);

// Refreshes search values and prior targets of the next slice of stored
// positions. Returns the number of positions refreshed.
int reanalyze(ReplayBuffer& buffer, const ModelParams& params, const HyperParams& hp, Rng& rng);

struct EvalPoint {
  int step = 0;
  double validation_reward = 0.0;
  LossReport loss;
  double wall_seconds = 0.0;
};

// True when the best validation reward is at least patience steps old.
bool early_stopping_check(const std::vector<EvalPoint>& history, int current_step, const HyperParams& hp);

// ---------------------------------------------------------------------------
// Rollouts

using Policy = std::function<JointAction(const SimState&)>;

struct EpisodeMetrics {
  std::vector<CompletedTrip> trips;
  std::vector<double> delay_series;   // d_t
  std::vector<double> reward_series;  // global reward
  double total_delay = 0.0;           // sum of d_t
  double mean_reward = 0.0;
  int steps = 0;
  bool all_completed = false;
  std::uint64_t trip_hash = 0;
};

// Runs until max_seconds, or earlier once every trip is done when
// until_done is set.
EpisodeMetrics run_episode(const std::shared_ptr<const RoadNetwork>& net, const std::vector<Trip>& trips,
                           const Policy& policy, int max_seconds, bool until_done);

// Acts by searching the latent model. Uses mean weights (noise cleared).
// rng must outlive the policy.
Policy search_policy(const ModelParams& params, SearchConfig cfg, bool independent, Rng& rng);

struct ValidationSet {
  std::vector<std::shared_ptr<const RoadNetwork>> nets;
  std::vector<std::vector<Trip>> trips;
};

ValidationSet make_validation_set(const HyperParams& hp);

// Mean per-step global reward over the validation set.
double evaluate_validation(const ModelParams& params, const HyperParams& hp, const ValidationSet& set);

struct TrainResult {
  ModelParams best;  // highest validation reward
  ModelParams last;
  std::vector<EvalPoint> history;
  int steps = 0;
  int episodes = 0;
  bool early_stopped = false;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty = no periodic checkpoints
  std::ostream* log = nullptr;  // CSV training log
  bool record_wall_time = true;
};

TrainResult train(const HyperParams& hp, const TrainOptions& opts = {});

// The schedule shared by every learned method: collect an episode, owe
// train_ratio steps per transition, validate every eval_interval steps,
// checkpoint, stop early.
struct TrainingHooks {
  std::function<EpisodeRecord(const std::shared_ptr<const RoadNetwork>&, ModelParams&, Rng&, int)> collect;
  std::function<LossReport(ReplayBuffer&, ModelParams&, int step)> step;
  std::function<double(const ModelParams&, const ValidationSet&)> evaluate;
};

TrainResult run_training_loop(const HyperParams& hp, const TrainOptions& opts, ModelParams params,
                              const TrainingHooks& hooks);

}  // namespace mujam

#endif  // MUJAM_TRAINER_HPP_
