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

// Joint-action tree search over the latent model. Joint actions are drawn
// from per-intersection priors, the tree widens progressively with the size
// of the local action space, and edges keep the value of the best
// trajectory seen through them.

#ifndef MUJAM_PLANNER_HPP_
#define MUJAM_PLANNER_HPP_

#include <memory>
#include <ostream>
#include <vector>

#include "mujam/model.hpp"

namespace mujam {

struct SearchConfig {
  int budget = 50;  // beta
  int depth = 1;    // delta
  double c1 = 5.0;
  double c2 = 0.5;
  double c3 = 0.5;
  double c_base = 19652.0;
  double c_init = 1.25;
  double gamma = 0.997;
  double dirichlet_alpha = 0.3;
  double dirichlet_fraction = 0.25;
  bool root_noise = true;
  // Prior targets from root visit counts instead of the chosen action.
  bool visit_targets = false;
  // JSON lines per simulated transition when set.
  std::ostream* trace = nullptr;

  void validate() const;
};

struct SearchNode;

struct SearchChild {
  JointAction action;
  double prior = 0.0;   // product of local probabilities
  double reward = 0.0;  // predicted network reward of the transition
  double q = 0.0;       // best backed-up r + gamma * v
  int visits = 0;
  std::unique_ptr<SearchNode> node;
};

struct SearchNode {
  LatentState latent;
  PriorDistribution priors;
  double value = 0.0;  // predicted network value
  double action_count = 1.0;
  int visits = 0;
  int samples = 0;  // draws made here, duplicates included
  std::vector<SearchChild> children;
};

// Local action target for one intersection.
struct PriorTarget {
  std::vector<int> phases;
  std::vector<double> probs;
};

struct SearchResult {
  JointAction action;
  double root_value = 0.0;  // search estimate for the value target
  std::vector<PriorTarget> targets;
  int simulations = 0;
  int dynamics_calls = 0;
  int root_children = 0;
  std::vector<double> root_q;  // Q per root child, in child order
};

double joint_action_count(const PriorDistribution& priors);

bool widening_gate(double samples, double actions, double visits, const SearchConfig& cfg);

double puct_score(double q, double prior, int parent_visits, int child_visits, const SearchConfig& cfg);

// Index of the child with the best PUCT score; lowest index on ties.
int puct_select(const SearchNode& node, const SearchConfig& cfg);

// One draw per intersection. Returns the action and its joint prior.
std::pair<JointAction, double> sample_joint_action(const PriorDistribution& priors, Rng& rng);

// Mixes Dirichlet(alpha) noise into each intersection with more than one
// legal phase.
void add_dirichlet_noise(PriorDistribution& priors, double alpha, double fraction, Rng& rng);

// Max-backup along a path of root-to-leaf child edges. `leaf_value` is the
// predicted value after the last edge.
void backup_best(const std::vector<SearchChild*>& path, double leaf_value, const SearchConfig& cfg);

SearchResult plan(const GraphObservation& obs, const ModelParams& params, const SearchConfig& cfg, Rng& rng);

// Same search from an already computed root representation.
SearchResult plan_from_latent(const LatentState& root, const ModelParams& params, const SearchConfig& cfg, Rng& rng);

// Separate search per intersection, the others repeating their current
// phase. Uses budget simulations for each intersection.
SearchResult plan_independent(const GraphObservation& obs, const ModelParams& params, const SearchConfig& cfg,
                              Rng& rng);

}  // namespace mujam

#endif  // MUJAM_PLANNER_HPP_
