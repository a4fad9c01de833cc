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

#include "mujam/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace mujam {

void SearchConfig::validate() const {
  if (budget < 0) throw ConfigError("search budget must be >= 0");
  if (depth < 1) throw ConfigError("search depth must be >= 1");
  if (!(c1 > 0 && c2 > 0 && c3 > 0 && c_base > 0 && c_init > 0))
    throw ConfigError("search constants must be positive");
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("discount must lie in (0, 1]");
  if (!(dirichlet_alpha > 0) || dirichlet_fraction < 0 || dirichlet_fraction > 1)
    throw ConfigError("invalid Dirichlet noise settings");
}

double joint_action_count(const PriorDistribution& priors) {
  double n = 1.0;
  for (const IntersectionPrior& p : priors) n *= static_cast<double>(p.phases.size());
  return n;
}

bool widening_gate(double samples, double actions, double visits, const SearchConfig& cfg) {
  const double v = std::max(visits, 1.0);
  return samples < std::pow(actions / cfg.c1, cfg.c2) * std::pow(v, cfg.c3);
}

double puct_score(double q, double prior, int parent_visits, int child_visits, const SearchConfig& cfg) {
  const double c = std::log((parent_visits + cfg.c_base + 1.0) / cfg.c_base) + cfg.c_init;
  return q + c * prior * std::sqrt(static_cast<double>(parent_visits)) / (1.0 + child_visits);
}

int puct_select(const SearchNode& node, const SearchConfig& cfg) {
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const SearchChild& c = node.children[i];
    const double s = puct_score(c.q, c.prior, node.visits, c.visits, cfg);
    if (best < 0 || s > best_score) {
      best = static_cast<int>(i);
      best_score = s;
    }
  }
  return best;
}

std::pair<JointAction, double> sample_joint_action(const PriorDistribution& priors, Rng& rng) {
  JointAction a;
  double phi = 1.0;
  for (const IntersectionPrior& p : priors) {
    std::size_t k = 0;
    if (p.phases.size() > 1) {
      const double u = uniform01(rng);
      double acc = 0.0;
      k = p.phases.size() - 1;
      for (std::size_t i = 0; i < p.probs.size(); ++i) {
        acc += p.probs[i];
        if (u < acc) {
          k = i;
          break;
        }
      }
    }
    a.phases.push_back(p.phases[k]);
    phi *= p.probs[k];
  }
  return {a, phi};
}

void add_dirichlet_noise(PriorDistribution& priors, double alpha, double fraction, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (IntersectionPrior& p : priors) {
    if (p.phases.size() < 2) continue;
    std::vector<double> noise(p.phases.size());
    double total = 0.0;
    for (double& x : noise) total += (x = gamma(rng));
    if (!(total > 0.0)) continue;
    for (std::size_t i = 0; i < noise.size(); ++i)
      p.probs[i] = (1.0 - fraction) * p.probs[i] + fraction * noise[i] / total;
  }
}

void backup_best(const std::vector<SearchChild*>& path, double leaf_value, const SearchConfig& cfg) {
  double g = leaf_value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchChild& edge = **it;
    g = edge.reward + cfg.gamma * g;
    if (edge.visits == 0 || g > edge.q) edge.q = g;
    ++edge.visits;
  }
}

namespace {

// Restricts non-free intersections to holding their current phase.
void apply_mask(PriorDistribution& priors, const std::vector<ControllerState>& controllers,
                const std::vector<char>* free) {
  if (!free) return;
  for (std::size_t x = 0; x < priors.size(); ++x) {
    if ((*free)[x]) continue;
    priors[x].phases = {signal::hold_phase(controllers[x])};
    priors[x].logits = {0.0};
    priors[x].probs = {1.0};
  }
}

class Search {
 public:
  Search(const ModelParams& params, const SearchConfig& cfg, Rng& rng, const std::vector<char>* free)
      : params_(params), cfg_(cfg), rng_(rng), free_(free) {}

  SearchResult run(const LatentState& root_latent) {
    root_.latent = root_latent;
    root_.priors = predict_priors(root_.latent, params_);
    apply_mask(root_.priors, root_.latent.controllers, free_);
    clean_root_priors_ = root_.priors;
    root_.action_count = joint_action_count(root_.priors);
    root_.value = predict_value_reward(root_.latent, params_).value_total;
    if (cfg_.root_noise && cfg_.dirichlet_fraction > 0.0)
      add_dirichlet_noise(root_.priors, cfg_.dirichlet_alpha, cfg_.dirichlet_fraction, rng_);

    SearchResult out;
    if (cfg_.budget == 0) {
      out.action = sample_joint_action(root_.priors, rng_).first;
      out.root_value = root_.value;
      out.targets = one_hot(out.action);
      return out;
    }
    for (int s = 0; s < cfg_.budget; ++s) simulate(s);

    int best = 0;
    for (std::size_t i = 0; i < root_.children.size(); ++i) {
      out.root_q.push_back(root_.children[i].q);
      if (root_.children[i].q > root_.children[best].q) best = static_cast<int>(i);
    }
    out.action = root_.children[best].action;
    out.root_value = root_.children[best].q;
    out.targets = cfg_.visit_targets ? visit_distribution() : one_hot(out.action);
    out.simulations = cfg_.budget;
    out.dynamics_calls = dynamics_calls_;
    out.root_children = static_cast<int>(root_.children.size());
    return out;
  }

 private:
  // Evaluates the transition from `parent` under `action`.
  std::unique_ptr<SearchNode> transition(const SearchNode& parent, const JointAction& action, double* reward) {
    auto node = std::make_unique<SearchNode>();
    node->latent = dynamics_step(parent.latent, action, params_);
    ++dynamics_calls_;
    const LaneEstimates e = predict_value_reward(node->latent, params_);
    *reward = e.reward_total;
    node->value = e.value_total;
    return node;
  }

  void ensure_priors(SearchNode& node) {
    if (!node.priors.empty()) return;
    node.priors = predict_priors(node.latent, params_);
    apply_mask(node.priors, node.latent.controllers, free_);
    node.action_count = joint_action_count(node.priors);
  }

  void simulate(int sim) {
    SearchNode* node = &root_;
    std::vector<SearchNode*> nodes{node};
    std::vector<SearchChild*> path;
    for (int depth = 0;; ++depth) {
      ensure_priors(*node);
      int idx = -1;
      double phi = 0.0;
      JointAction sampled;
      if (widening_gate(node->samples, node->action_count, node->visits, cfg_)) {
        std::tie(sampled, phi) = sample_joint_action(node->priors, rng_);
        ++node->samples;
        for (std::size_t i = 0; i < node->children.size(); ++i)
          if (node->children[i].action == sampled) idx = static_cast<int>(i);
        if (idx < 0) {
          SearchChild child;
          child.action = sampled;
          child.prior = phi;
          child.node = transition(*node, sampled, &child.reward);
          node->children.push_back(std::move(child));
          SearchChild* c = &node->children.back();
          path.push_back(c);
          finish(sim, depth, nodes, path, c->node->value);
          return;
        }
      } else {
        idx = puct_select(*node, cfg_);
      }
      SearchChild* c = &node->children[idx];
      path.push_back(c);
      if (depth + 1 >= cfg_.depth) {
        // Leaf at the depth limit: the trajectory still costs one model
        // transition, which reproduces the stored estimates.
        double reward = 0.0;
        std::unique_ptr<SearchNode> again = transition(*node, c->action, &reward);
        c->reward = reward;
        finish(sim, depth, nodes, path, again->value);
        return;
      }
      node = c->node.get();
      nodes.push_back(node);
    }
  }

  void finish(int sim, int depth, const std::vector<SearchNode*>& nodes, const std::vector<SearchChild*>& path,
              double leaf_value) {
    backup_best(path, leaf_value, cfg_);
    for (SearchNode* n : nodes) ++n->visits;
    if (cfg_.trace) {
      const SearchChild& c = *path.back();
      nlohmann::json j = {{"sim", sim},      {"depth", depth},   {"action", c.action.phases},
                          {"r", c.reward},   {"v", leaf_value},  {"q", c.q},
                          {"phi", c.prior},  {"visits", c.visits}};
      *cfg_.trace << j.dump() << '\n';
    }
  }

  std::vector<PriorTarget> one_hot(const JointAction& a) const {
    std::vector<PriorTarget> t(clean_root_priors_.size());
    for (std::size_t x = 0; x < t.size(); ++x) {
      t[x].phases = clean_root_priors_[x].phases;
      t[x].probs.assign(t[x].phases.size(), 0.0);
      for (std::size_t k = 0; k < t[x].phases.size(); ++k)
        if (t[x].phases[k] == a.phases[x]) t[x].probs[k] = 1.0;
    }
    return t;
  }

  std::vector<PriorTarget> visit_distribution() const {
    std::vector<PriorTarget> t(clean_root_priors_.size());
    for (std::size_t x = 0; x < t.size(); ++x) {
      t[x].phases = clean_root_priors_[x].phases;
      t[x].probs.assign(t[x].phases.size(), 0.0);
      double total = 0.0;
      for (const SearchChild& c : root_.children) {
        for (std::size_t k = 0; k < t[x].phases.size(); ++k) {
          if (t[x].phases[k] == c.action.phases[x]) {
            t[x].probs[k] += c.visits;
            total += c.visits;
          }
        }
      }
      for (double& p : t[x].probs) p /= total;
    }
    return t;
  }

  const ModelParams& params_;
  const SearchConfig& cfg_;
  Rng& rng_;
  const std::vector<char>* free_;
  SearchNode root_;
  PriorDistribution clean_root_priors_;
  int dynamics_calls_ = 0;
};

}  // namespace

SearchResult plan_from_latent(const LatentState& root, const ModelParams& params, const SearchConfig& cfg, Rng& rng) {
  cfg.validate();
  return Search(params, cfg, rng, nullptr).run(root);
}

SearchResult plan(const GraphObservation& obs, const ModelParams& params, const SearchConfig& cfg, Rng& rng) {
  cfg.validate();
  return Search(params, cfg, rng, nullptr).run(initial_representation(obs, params));
}

SearchResult plan_independent(const GraphObservation& obs, const ModelParams& params, const SearchConfig& cfg,
                              Rng& rng) {
  cfg.validate();
  const LatentState root = initial_representation(obs, params);
  const std::size_t n = root.controllers.size();
  SearchResult out;
  out.action.phases.resize(n);
  out.targets.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<char> free(n, 0);
    free[x] = 1;
    SearchResult local = Search(params, cfg, rng, &free).run(root);
    out.action.phases[x] = local.action.phases[x];
    out.targets[x] = local.targets[x];
    out.root_value += local.root_value / static_cast<double>(n);
    out.simulations += local.simulations;
    out.dynamics_calls += local.dynamics_calls;
    out.root_children += local.root_children;
  }
  return out;
}

}  // namespace mujam
