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

#include "mujam/baselines.hpp"

#include <algorithm>
#include <limits>

namespace mujam {

JointAction fixed_time_policy(const SimState& state, int green_seconds) {
  const RoadNetwork& net = state.network();
  JointAction a;
  for (const ControllerState& c : state.controllers()) {
    int phase = signal::hold_phase(c);
    if (!c.in_yellow && c.time_since_switch >= green_seconds) {
      const int next = next_cycle_phase(net.program(c.intersection), c.current_phase);
      if (signal::is_legal(net, c, next)) phase = next;
    }
    a.phases.push_back(phase);
  }
  return a;
}

InboundCounts inbound_counts(const SimState& state, int intersection) {
  InboundCounts n;
  for (int lane : state.network().intersections[intersection].inbound_lanes) {
    for (int id : state.lane_vehicles(lane)) {
      if (state.vehicles().at(id).speed < kStoppedSpeed) {
        ++n.stopped;
      } else {
        ++n.moving;
      }
    }
  }
  return n;
}

JointAction greedy_policy(const SimState& state) {
  const RoadNetwork& net = state.network();
  JointAction a;
  for (const ControllerState& c : state.controllers()) {
    int phase = signal::hold_phase(c);
    if (!c.in_yellow) {
      const int next = next_cycle_phase(net.program(c.intersection), c.current_phase);
      const InboundCounts n = inbound_counts(state, c.intersection);
      if (n.stopped > n.moving && next != c.current_phase && signal::is_legal(net, c, next)) phase = next;
    }
    a.phases.push_back(phase);
  }
  return a;
}

// ---------------------------------------------------------------------------
// mfgrl

Matrix mfgrl_q_values(const GraphObservation& obs, const ModelParams& params) {
  GraphObservation local = obs;
  const ConnectivityFeatures& cf = ensure_connectivity(local);
  Tape tape;
  GraphNet g(params, tape);
  const Tape::Var q = g.phase_logits(g.represent(local), *local.topo, cf);
  return tape.value(q) * params.dims.value_scale;
}

namespace {

int best_legal(const Matrix& q, const std::vector<int>& legal) {
  int best = legal.front();
  for (int p : legal)
    if (q(p, 0) > q(best, 0)) best = p;
  return best;
}

}  // namespace

JointAction mfgrl_act(const GraphObservation& obs, const ModelParams& params) {
  GraphObservation local = obs;
  const ConnectivityFeatures& cf = ensure_connectivity(local);
  const Matrix q = mfgrl_q_values(local, params);
  JointAction a;
  for (const std::vector<int>& legal : cf.legal) a.phases.push_back(best_legal(q, legal));
  return a;
}

std::vector<double> local_rewards(const RoadNetwork& net, const std::vector<double>& lane_rewards) {
  std::vector<double> out(net.num_intersections(), 0.0);
  for (int x = 0; x < net.num_intersections(); ++x)
    for (int lane : net.intersections[x].inbound_lanes) out[x] += lane_rewards.at(lane);
  return out;
}

double mfgrl_td_loss(const ModelParams& params, const ModelParams& target, const std::vector<TdItem>& batch,
                     const HyperParams& hp, Gradients* grads) {
  const double scale = params.dims.value_scale;
  double total = 0.0;
  for (const TdItem& item : batch) {
    const StepRecord& now = item.episode->steps.at(item.position);
    const StepRecord& next = item.episode->steps.at(item.position + 1);
    GraphObservation after = next.obs;
    const ConnectivityFeatures& next_cf = ensure_connectivity(after);
    const Matrix q_next = mfgrl_q_values(after, target);
    const std::vector<double> r = local_rewards(*item.episode->net, now.lane_rewards);

    Tape tape;
    GraphNet g(params, tape);
    GraphObservation local = now.obs;
    const ConnectivityFeatures& cf = ensure_connectivity(local);
    const Tape::Var q = g.phase_logits(g.represent(local), *local.topo, cf);
    Tape::Var sum = -1;
    const std::size_t n = now.action.phases.size();
    for (std::size_t x = 0; x < n; ++x) {
      const double y = r[x] + hp.mfgrl_gamma * q_next(best_legal(q_next, next_cf.legal[x]), 0);
      const Tape::Var e = tape.squared_error(tape.gather_rows(q, make_index({now.action.phases[x]})), y / scale);
      sum = sum < 0 ? e : tape.add(sum, e);
    }
    const Tape::Var loss = tape.scale(sum, 1.0 / (static_cast<double>(n) * static_cast<double>(batch.size())));
    total += tape.scalar(loss);
    if (grads) tape.backward(loss, *grads);
  }
  return total;
}

EpisodeRecord mfgrl_collect_episode(const std::shared_ptr<const RoadNetwork>& net, ModelParams& params,
                                    const HyperParams& hp, Rng& rng, int network_id) {
  EpisodeRecord ep;
  ep.network_id = network_id;
  ep.net = net;
  for (int x = 0; x < net->num_intersections(); ++x) ep.constraints.push_back(net->program(x).constraint);
  if (hp.noisy_layers) resample_noise(params, rng);
  const std::vector<Trip> trips =
      generate_trips(*net, make_trip_process(*net, rng(), hp.trip_rate), hp.episode_seconds);
  SimState sim(net, trips);
  // One extra observation so the last transition has a successor.
  for (int t = 0; t <= hp.episode_seconds; ++t) {
    StepRecord rec;
    rec.obs = encode_observation(sim);
    if (t < hp.episode_seconds) {
      rec.action = mfgrl_act(rec.obs, params);
      for (int x = 0; x < net->num_intersections(); ++x) {
        if (uniform01(rng) >= hp.mfgrl_epsilon) continue;
        const std::vector<int> legal = legal_phases(sim, x);
        rec.action.phases[x] = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      }
      StepOutcome out = sim.step(rec.action);
      rec.lane_rewards = std::move(out.lane_rewards);
      rec.reward = out.global_reward;
    }
    rec.obs.connectivity.reset();
    ep.steps.push_back(std::move(rec));
  }
  return ep;
}

Policy mfgrl_policy(const ModelParams& params) {
  auto p = std::make_shared<ModelParams>(params);
  for (Matrix& n : p->noise) n.setZero();
  return [p](const SimState& s) { return mfgrl_act(encode_observation(s), *p); };
}

double mfgrl_evaluate_validation(const ModelParams& params, const HyperParams& hp, const ValidationSet& set) {
  const Policy policy = mfgrl_policy(params);
  double total = 0.0;
  for (std::size_t i = 0; i < set.nets.size(); ++i)
    total += run_episode(set.nets[i], set.trips[i], policy, hp.validation_seconds, false).mean_reward;
  return total / static_cast<double>(set.nets.size());
}

TrainResult mfgrl_train(const HyperParams& hp, const TrainOptions& opts) {
  hp.validate();
  Rng init_rng(derive_seed(hp.seed, "init"));
  ModelParams params = initial_params(hp, init_rng);

  struct State {
    Adam adam;
    ModelParams target;
    Rng rng;
    std::vector<char> frozen;
  };
  auto st = std::make_shared<State>(State{Adam(params, hp), params, Rng(derive_seed(hp.seed, "train")),
                                          frozen_tensors(params, hp)});
  for (Matrix& n : st->target.noise) n.setZero();

  TrainingHooks hooks;
  hooks.collect = [&hp](const std::shared_ptr<const RoadNetwork>& net, ModelParams& p, Rng& rng, int id) {
    return mfgrl_collect_episode(net, p, hp, rng, id);
  };
  hooks.step = [&hp, st](ReplayBuffer& buffer, ModelParams& p, int step) {
    std::vector<TdItem> batch;
    for (int i = 0; i < hp.batch_size; ++i) {
      const BatchItem b = buffer.sample(st->rng);
      // Positions with a successor only.
      const int last = static_cast<int>(b.episode->steps.size()) - 2;
      batch.push_back({b.episode, std::min(b.position, last)});
    }
    Gradients g = p.zero_gradients();
    LossReport l;
    l.value = l.total = mfgrl_td_loss(p, st->target, batch, hp, &g);
    st->adam.step(p, g, st->frozen);
    if ((step + 1) % kMfgrlTargetUpdate == 0) {
      st->target = p;
      for (Matrix& n : st->target.noise) n.setZero();
    }
    return l;
  };
  hooks.evaluate = [&hp](const ModelParams& p, const ValidationSet& set) {
    return mfgrl_evaluate_validation(p, hp, set);
  };
  return run_training_loop(hp, opts, std::move(params), hooks);
}

}  // namespace mujam
