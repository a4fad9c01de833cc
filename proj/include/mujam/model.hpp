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

// Heterogeneous graph network with a latent dynamics model, lane-level
// reward and value heads and a noisy phase-prior head.

#ifndef MUJAM_MODEL_HPP_
#define MUJAM_MODEL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "mujam/graph.hpp"

namespace mujam {

struct ModelDims {
  int embed = 32;
  int hidden = 32;
  int repr_rounds = 3;      // K
  int dynamics_rounds = 3;  // K'
  // Heads predict in these units; values are returns, rewards are queues.
  double value_scale = 100.0;
  double reward_scale = 1.0;
};

// Parameter tensors per edge type and layer. Each edge type owns its own
// weights; representation and dynamics L->L rounds use separate sets.
struct EdgeTypeInfo {
  std::string name;
  int layers = 0;
};

struct NoisyLayer {
  int mu_w = -1, sigma_w = -1, mu_b = -1, sigma_b = -1;
  int eps_in = -1, eps_out = -1;  // into ModelParams::noise
};

struct DenseLayer {
  int w = -1, b = -1;
};

class ModelParams {
 public:
  ModelParams() = default;
  // Uniform(+-1/sqrt(fan_in)) weights, zero biases, noisy sigmas at
  // 0.5/sqrt(fan_in) and a first noise draw from rng.
  ModelParams(const ModelDims& dims, Rng& rng);
  // Same layout, every tensor and noise entry zero.
  static ModelParams zeros(const ModelDims& dims);

  ModelDims dims;
  std::vector<std::string> names;
  std::vector<Matrix> tensors;
  std::vector<std::string> noise_names;
  std::vector<Matrix> noise;  // current factored noise realization

  DenseLayer vehicle_lane;
  std::vector<DenseLayer> repr;
  std::vector<DenseLayer> dyn;
  DenseLayer lane_conn;
  DenseLayer conn_phase;
  DenseLayer reward0, reward1;
  DenseLayer value0, value1;
  NoisyLayer prior0, prior1;

  std::vector<EdgeTypeInfo> edge_types() const;
  int index(const std::string& name) const;  // throws Error when unknown
  std::size_t size() const { return tensors.size(); }
  // True for tensors holding noise scales.
  bool is_sigma(int index) const;

  Gradients zero_gradients() const;
  std::size_t num_scalars() const;

 private:
  void layout();
  int add(const std::string& name, int rows, int cols);
};

// Fresh factored Gaussian noise for the prior head. Means and sigmas are
// untouched.
void resample_noise(ModelParams& params, Rng& rng);

// Symmetric transform applied to raw Gaussian noise: sign(x) * sqrt(|x|).
double noise_transform(double x);

struct LatentState {
  std::shared_ptr<const RoadNetwork> net;
  std::shared_ptr<const GraphTopology> topo;
  Matrix lanes;  // lanes x embed
  std::vector<ControllerState> controllers;
  std::shared_ptr<const ConnectivityFeatures> connectivity;
};

struct LaneEstimates {
  std::vector<double> reward;
  std::vector<double> value;
  double reward_total = 0.0;
  double value_total = 0.0;
};

struct IntersectionPrior {
  std::vector<int> phases;  // legal phases
  std::vector<double> logits;
  std::vector<double> probs;
};

using PriorDistribution = std::vector<IntersectionPrior>;

std::vector<double> softmax(const std::vector<double>& logits);

// Forward builder recording onto a tape. Parameter leaves are created on
// first use so untouched tensors keep a zero gradient.
class GraphNet {
 public:
  using Var = Tape::Var;

  GraphNet(const ModelParams& params, Tape& tape);

  // Sum over incoming edges of W [src; edge features] + b, then ReLU.
  // edge_features may be -1.
  Var propagate(Var src, Var edge_features, const Index& src_rows, const Index& dst_rows, int num_dst,
                const DenseLayer& layer);

  // V->L once, then K L->L rounds.
  Var represent(const GraphObservation& obs);
  // K' L->L rounds under the given connectivity.
  Var dynamics(Var lanes, const GraphTopology& topo, const ConnectivityFeatures& cf);

  struct Heads {
    Var reward_lanes, value_lanes;  // lanes x 1, scaled units
    Var reward_total, value_total;  // 1 x 1, scaled units
  };
  Heads heads(Var lanes);

  // Logits for every phase node (phases x 1); legality is applied by the
  // caller.
  Var phase_logits(Var lanes, const GraphTopology& topo, const ConnectivityFeatures& cf);

  int propagation_rounds() const { return rounds_; }
  Tape& tape() { return tape_; }

 private:
  Var param(int index);
  Var lane_edge_message_source(Var lanes, const GraphTopology& topo);

  const ModelParams& params_;
  Tape& tape_;
  std::vector<Var> leaves_;
  Var lane_feats_ = -1;
  const GraphTopology* lane_feats_topo_ = nullptr;
  int rounds_ = 0;
};

LatentState initial_representation(const GraphObservation& obs, const ModelParams& params);

// Connection features after the controllers take `action` and one second
// passes, exactly as the simulator would set them. Throws IllegalAction.
LatentState advance_connectivity(const LatentState& latent, const JointAction& action);

LatentState dynamics_step(const LatentState& latent, const JointAction& action, const ModelParams& params);

LaneEstimates predict_value_reward(const LatentState& latent, const ModelParams& params);

PriorDistribution predict_priors(const LatentState& latent, const ModelParams& params);

// Per-intersection softmax over the legal phases of a logit column.
PriorDistribution priors_from_logits(const Matrix& logits, const ConnectivityFeatures& cf);

// Little-endian binary checkpoint: header with dimensions and edge-type
// table, then named tensors and the current noise realization.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
std::string checkpoint_bytes(const ModelParams& params);
ModelParams checkpoint_from_bytes(const std::string& bytes);

}  // namespace mujam

#endif  // MUJAM_MODEL_HPP_
