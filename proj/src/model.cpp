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

#include "mujam/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace mujam {

// ---------------------------------------------------------------------------
// Parameters

int ModelParams::add(const std::string& name, int rows, int cols) {
  names.push_back(name);
  tensors.push_back(Matrix::Zero(rows, cols));
  return static_cast<int>(tensors.size()) - 1;
}

void ModelParams::layout() {
  if (dims.embed <= 0 || dims.hidden <= 0 || dims.repr_rounds < 0 || dims.dynamics_rounds < 0)
    throw ConfigError("model dimensions must be positive");
  names.clear();
  tensors.clear();
  noise_names.clear();
  noise.clear();
  const int d = dims.embed;
  const int h = dims.hidden;
  const int lane_in = d + kLaneFeatures + kLaneEdgeFeatures;
  auto dense = [&](const std::string& name, int out, int in) {
    DenseLayer l;
    l.w = add(name + ".w", out, in);
    l.b = add(name + ".b", 1, out);
    return l;
  };
  auto noisy = [&](const std::string& name, int out, int in) {
    NoisyLayer l;
    l.mu_w = add(name + ".w_mu", out, in);
    l.sigma_w = add(name + ".w_sigma", out, in);
    l.mu_b = add(name + ".b_mu", 1, out);
    l.sigma_b = add(name + ".b_sigma", 1, out);
    noise_names.push_back(name + ".eps_in");
    noise.push_back(Matrix::Zero(1, in));
    l.eps_in = static_cast<int>(noise.size()) - 1;
    noise_names.push_back(name + ".eps_out");
    noise.push_back(Matrix::Zero(1, out));
    l.eps_out = static_cast<int>(noise.size()) - 1;
    return l;
  };
  vehicle_lane = dense("vl", d, kVehicleFeatures);
  repr.clear();
  for (int k = 0; k < dims.repr_rounds; ++k) repr.push_back(dense("repr." + std::to_string(k), d, lane_in));
  dyn.clear();
  for (int k = 0; k < dims.dynamics_rounds; ++k) dyn.push_back(dense("dyn." + std::to_string(k), d, lane_in));
  lane_conn = dense("lc", d, lane_in);
  conn_phase = dense("cp", d, d + kPhaseEdgeFeatures);
  reward0 = dense("reward.0", h, d);
  reward1 = dense("reward.1", 1, h);
  value0 = dense("value.0", h, d);
  value1 = dense("value.1", 1, h);
  prior0 = noisy("prior.0", h, d);
  prior1 = noisy("prior.1", 1, h);
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.layout();
  return p;
}

ModelParams::ModelParams(const ModelDims& d, Rng& rng) {
  dims = d;
  layout();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix& t = tensors[i];
    const std::string& n = names[i];
    const bool bias = n.ends_with(".b") || n.ends_with(".b_mu");
    const bool weight = n.ends_with(".w") || n.ends_with(".w_mu");
    if (weight) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = u(rng);
    } else if (bias) {
      t.setZero();
    }
  }
  for (const NoisyLayer* l : {&prior0, &prior1}) {
    const double fan_in = static_cast<double>(tensors[l->mu_w].cols());
    tensors[l->sigma_w].setConstant(0.5 / std::sqrt(fan_in));
    tensors[l->sigma_b].setConstant(0.5 / std::sqrt(fan_in));
  }
  resample_noise(*this, rng);
}

std::vector<EdgeTypeInfo> ModelParams::edge_types() const {
  return {{"V-L", 1}, {"L-L", dims.repr_rounds}, {"L-L-dynamics", dims.dynamics_rounds}, {"L-C", 1}, {"C-P", 1}};
}

int ModelParams::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error("unknown parameter tensor " + name);
  return static_cast<int>(it - names.begin());
}

bool ModelParams::is_sigma(int i) const { return names[i].ends_with("_sigma"); }

Gradients ModelParams::zero_gradients() const {
  Gradients g;
  g.reserve(tensors.size());
  for (const Matrix& t : tensors) g.push_back(Matrix::Zero(t.rows(), t.cols()));
  return g;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const Matrix& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

double noise_transform(double x) { return (x < 0.0 ? -1.0 : 1.0) * std::sqrt(std::abs(x)); }

void resample_noise(ModelParams& params, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Matrix& m : params.noise)
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = noise_transform(normal(rng));
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (double& x : p) x /= s;
  return p;
}

// ---------------------------------------------------------------------------
// Forward builder

GraphNet::GraphNet(const ModelParams& params, Tape& tape)
    : params_(params), tape_(tape), leaves_(params.tensors.size(), -1) {}

GraphNet::Var GraphNet::param(int index) {
  if (leaves_[index] < 0) leaves_[index] = tape_.param(index, &params_.tensors[index]);
  return leaves_[index];
}

GraphNet::Var GraphNet::propagate(Var src, Var edge_features, const Index& src_rows, const Index& dst_rows,
                                  int num_dst, const DenseLayer& layer) {
  Var msg_in = tape_.gather_rows(src, src_rows);
  if (edge_features >= 0) msg_in = tape_.concat_cols(msg_in, edge_features);
  const Var msgs = tape_.linear(msg_in, param(layer.w), param(layer.b));
  ++rounds_;
  return tape_.relu(tape_.segment_sum(msgs, dst_rows, num_dst));
}

GraphNet::Var GraphNet::lane_edge_message_source(Var lanes, const GraphTopology& topo) {
  if (lane_feats_topo_ != &topo) {
    lane_feats_ = tape_.input(topo.lane_features);
    lane_feats_topo_ = &topo;
  }
  return tape_.concat_cols(lanes, lane_feats_);
}

GraphNet::Var GraphNet::represent(const GraphObservation& obs) {
  const GraphTopology& topo = *obs.topo;
  std::shared_ptr<const ConnectivityFeatures> cf = obs.connectivity;
  if (!cf) cf = connectivity_features(*obs.net, topo, obs.controllers);
  const Var vehicles = tape_.input(obs.vehicle_features);
  Index rows;
  {
    std::vector<int> all(obs.vehicle_lane.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    rows = make_index(std::move(all));
  }
  Var lanes = propagate(vehicles, -1, rows, make_index(obs.vehicle_lane), topo.num_lanes, params_.vehicle_lane);
  const Var edges = tape_.input(cf->lane_edges);
  for (const DenseLayer& layer : params_.repr)
    lanes = propagate(lane_edge_message_source(lanes, topo), edges, topo.ll_src, topo.ll_dst, topo.num_lanes, layer);
  return lanes;
}

GraphNet::Var GraphNet::dynamics(Var lanes, const GraphTopology& topo, const ConnectivityFeatures& cf) {
  const Var edges = tape_.input(cf.lane_edges);
  for (const DenseLayer& layer : params_.dyn)
    lanes = propagate(lane_edge_message_source(lanes, topo), edges, topo.ll_src, topo.ll_dst, topo.num_lanes, layer);
  return lanes;
}

GraphNet::Heads GraphNet::heads(Var lanes) {
  auto mlp = [&](const DenseLayer& a, const DenseLayer& b) {
    const Var h = tape_.relu(tape_.linear(lanes, param(a.w), param(a.b)));
    return tape_.linear(h, param(b.w), param(b.b));
  };
  Heads out;
  out.reward_lanes = mlp(params_.reward0, params_.reward1);
  out.value_lanes = mlp(params_.value0, params_.value1);
  out.reward_total = tape_.sum_all(out.reward_lanes);
  out.value_total = tape_.sum_all(out.value_lanes);
  return out;
}

GraphNet::Var GraphNet::phase_logits(Var lanes, const GraphTopology& topo, const ConnectivityFeatures& cf) {
  const Var conn = propagate(lane_edge_message_source(lanes, topo), tape_.input(cf.conn_edges), topo.lc_src,
                             topo.lc_dst, topo.num_connections, params_.lane_conn);
  const Var phases =
      propagate(conn, tape_.input(cf.phase_edges), topo.cp_src, topo.cp_dst, topo.num_phases, params_.conn_phase);
  auto noisy = [&](Var x, const NoisyLayer& l) {
    return tape_.noisy_linear(x, param(l.mu_w), param(l.sigma_w), param(l.mu_b), param(l.sigma_b),
                              params_.noise[l.eps_in], params_.noise[l.eps_out]);
  };
  return noisy(tape_.relu(noisy(phases, params_.prior0)), params_.prior1);
}

// ---------------------------------------------------------------------------
// Inference

LatentState initial_representation(const GraphObservation& obs, const ModelParams& params) {
  GraphObservation local = obs;
  ensure_connectivity(local);
  Tape tape;
  GraphNet net(params, tape);
  const auto lanes = net.represent(local);
  LatentState s;
  s.net = local.net;
  s.topo = local.topo;
  s.lanes = tape.value(lanes);
  s.controllers = local.controllers;
  s.connectivity = local.connectivity;
  return s;
}

LatentState advance_connectivity(const LatentState& latent, const JointAction& action) {
  const RoadNetwork& net = *latent.net;
  if (action.phases.size() != latent.controllers.size()) throw Error("joint action does not cover every intersection");
  for (std::size_t x = 0; x < latent.controllers.size(); ++x)
    if (!signal::is_legal(net, latent.controllers[x], action.phases[x]))
      throw IllegalAction(static_cast<int>(x), action.phases[x]);
  LatentState next;
  next.net = latent.net;
  next.topo = latent.topo;
  next.lanes = latent.lanes;
  next.controllers = latent.controllers;
  for (std::size_t x = 0; x < next.controllers.size(); ++x) {
    signal::apply_choice(net, next.controllers[x], action.phases[x]);
    signal::tick(next.controllers[x]);
  }
  next.connectivity = connectivity_features(net, *next.topo, next.controllers);
  return next;
}

LatentState dynamics_step(const LatentState& latent, const JointAction& action, const ModelParams& params) {
  LatentState next = advance_connectivity(latent, action);
  Tape tape;
  GraphNet net(params, tape);
  const auto lanes = net.dynamics(tape.input(latent.lanes), *next.topo, *next.connectivity);
  next.lanes = tape.value(lanes);
  return next;
}

LaneEstimates predict_value_reward(const LatentState& latent, const ModelParams& params) {
  Tape tape;
  GraphNet net(params, tape);
  const auto heads = net.heads(tape.input(latent.lanes));
  LaneEstimates out;
  const Matrix& r = tape.value(heads.reward_lanes);
  const Matrix& v = tape.value(heads.value_lanes);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    out.reward.push_back(params.dims.reward_scale * r(i, 0));
    out.value.push_back(params.dims.value_scale * v(i, 0));
    out.reward_total += out.reward.back();
    out.value_total += out.value.back();
  }
  return out;
}

PriorDistribution priors_from_logits(const Matrix& logits, const ConnectivityFeatures& cf) {
  PriorDistribution out(cf.legal.size());
  for (std::size_t x = 0; x < cf.legal.size(); ++x) {
    if (cf.legal[x].empty()) throw Error("intersection without a legal phase");
    out[x].phases = cf.legal[x];
    for (int p : cf.legal[x]) out[x].logits.push_back(logits(p, 0));
    out[x].probs = softmax(out[x].logits);
  }
  return out;
}

PriorDistribution predict_priors(const LatentState& latent, const ModelParams& params) {
  Tape tape;
  GraphNet net(params, tape);
  const auto logits = net.phase_logits(tape.input(latent.lanes), *latent.topo, *latent.connectivity);
  return priors_from_logits(tape.value(logits), *latent.connectivity);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'M', 'J', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_tensors(std::string& out, const std::vector<std::string>& names, const std::vector<Matrix>& ts) {
  put_u32(out, static_cast<std::uint32_t>(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    put_str(out, names[i]);
    put_u32(out, static_cast<std::uint32_t>(ts[i].rows()));
    put_u32(out, static_cast<std::uint32_t>(ts[i].cols()));
    for (Eigen::Index k = 0; k < ts[i].size(); ++k) put_f64(out, ts[i].data()[k]);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void bytes(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw Error("truncated checkpoint");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

void read_tensors(Reader& r, const std::vector<std::string>& names, std::vector<Matrix>& ts) {
  const std::uint32_t n = r.u32();
  if (n != ts.size()) throw Error("checkpoint tensor count does not match the model layout");
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    if (name != names[i]) throw Error("checkpoint tensor " + name + " where " + names[i] + " was expected");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != ts[i].rows() || cols != ts[i].cols()) throw Error("checkpoint tensor " + name + " has wrong shape");
    for (Eigen::Index k = 0; k < ts[i].size(); ++k) ts[i].data()[k] = r.f64();
  }
}

}  // namespace

std::string checkpoint_bytes(const ModelParams& params) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.dims.embed));
  put_u32(out, static_cast<std::uint32_t>(params.dims.hidden));
  put_u32(out, static_cast<std::uint32_t>(params.dims.repr_rounds));
  put_u32(out, static_cast<std::uint32_t>(params.dims.dynamics_rounds));
  put_f64(out, params.dims.value_scale);
  put_f64(out, params.dims.reward_scale);
  const std::vector<EdgeTypeInfo> edges = params.edge_types();
  put_u32(out, static_cast<std::uint32_t>(edges.size()));
  for (const EdgeTypeInfo& e : edges) {
    put_str(out, e.name);
    put_u32(out, static_cast<std::uint32_t>(e.layers));
  }
  put_tensors(out, params.names, params.tensors);
  put_tensors(out, params.noise_names, params.noise);
  return out;
}

ModelParams checkpoint_from_bytes(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error("not a model checkpoint");
  if (r.u32() != kCheckpointVersion) throw Error("unsupported checkpoint version");
  ModelDims dims;
  dims.embed = static_cast<int>(r.u32());
  dims.hidden = static_cast<int>(r.u32());
  dims.repr_rounds = static_cast<int>(r.u32());
  dims.dynamics_rounds = static_cast<int>(r.u32());
  dims.value_scale = r.f64();
  dims.reward_scale = r.f64();
  ModelParams params = ModelParams::zeros(dims);
  const std::vector<EdgeTypeInfo> expected = params.edge_types();
  if (r.u32() != expected.size()) throw Error("checkpoint edge-type table does not match");
  for (const EdgeTypeInfo& e : expected) {
    if (r.str() != e.name || static_cast<int>(r.u32()) != e.layers)
      throw Error("checkpoint edge-type table does not match");
  }
  read_tensors(r, params.names, params.tensors);
  read_tensors(r, params.noise_names, params.noise);
  if (!r.done()) throw Error("trailing bytes in checkpoint");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::string& path) { write_file(path, checkpoint_bytes(params)); }

ModelParams load_checkpoint(const std::string& path) { return checkpoint_from_bytes(read_file(path)); }

}  // namespace mujam
