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

// Reference controllers: fixed-time cycling, a queue-greedy rule and
// "mfgrl", a model-free Q-learner on the same graph encoder.

#ifndef MUJAM_BASELINES_HPP_
#define MUJAM_BASELINES_HPP_

#include "mujam/trainer.hpp"

namespace mujam {

inline constexpr int kFixedGreenSeconds = 30;

// Next phase of the cycle once the controller's timer reaches
// green_seconds, otherwise hold. Never looks at traffic.
JointAction fixed_time_policy(const SimState& state, int green_seconds = kFixedGreenSeconds);

struct InboundCounts {
  int stopped = 0;
  int moving = 0;
};

InboundCounts inbound_counts(const SimState& state, int intersection);

// Next phase of the cycle when strictly more inbound vehicles are stopped
// than moving and a switch is legal, otherwise hold.
JointAction greedy_policy(const SimState& state);

// ---------------------------------------------------------------------------
// mfgrl

// Q-value per phase node, real units (phases x 1).
Matrix mfgrl_q_values(const GraphObservation& obs, const ModelParams& params);

// Greedy over legal phases; ties go to the first legal phase.
JointAction mfgrl_act(const GraphObservation& obs, const ModelParams& params);

// Sum of lane rewards over each intersection's inbound lanes.
std::vector<double> local_rewards(const RoadNetwork& net, const std::vector<double>& lane_rewards);

struct TdItem {
  const EpisodeRecord* episode = nullptr;
  int position = 0;  // must have a successor
};

// Mean over intersections and batch of the squared one-step TD error, in
// scaled units, against a frozen target network.
double mfgrl_td_loss(const ModelParams& params, const ModelParams& target, const std::vector<TdItem>& batch,
                     const HyperParams& hp, Gradients* grads);

EpisodeRecord mfgrl_collect_episode(const std::shared_ptr<const RoadNetwork>& net, ModelParams& params,
                                    const HyperParams& hp, Rng& rng, int network_id = 0);

Policy mfgrl_policy(const ModelParams& params);

double mfgrl_evaluate_validation(const ModelParams& params, const HyperParams& hp, const ValidationSet& set);

inline constexpr int kMfgrlTargetUpdate = 200;

// Same schedule as train(): collection ratio, validation cadence, early
// stopping and checkpoints.
TrainResult mfgrl_train(const HyperParams& hp, const TrainOptions& opts = {});

}  // namespace mujam

#endif  // MUJAM_BASELINES_HPP_
