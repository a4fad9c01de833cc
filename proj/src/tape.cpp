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

#include "mujam/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mujam/common.hpp"

namespace mujam {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw Error(std::string("dimension mismatch: ") + what);
}

}  // namespace

Tape::Var Tape::push(Node node) {
  forward(node);
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size()) - 1;
}

Tape::Var Tape::input(Matrix value) {
  Node n;
  n.op = Op::kInput;
  n.aux0 = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::param(int index, const Matrix* value) {
  Node n;
  n.op = Op::kParam;
  n.param_index = index;
  n.param_value = value;
  return push(std::move(n));
}

Tape::Var Tape::linear(Var x, Var w, Var b) {
  check(value(x).cols() == value(w).cols(), "linear input width");
  check(b < 0 || (value(b).rows() == 1 && value(b).cols() == value(w).rows()), "linear bias");
  Node n;
  n.op = Op::kLinear;
  n.a = x;
  n.b = w;
  n.c = b;
  return push(std::move(n));
}

Tape::Var Tape::noisy_linear(Var x, Var mu_w, Var sigma_w, Var mu_b, Var sigma_b, const Matrix& eps_in,
                             const Matrix& eps_out) {
  check(value(x).cols() == value(mu_w).cols(), "noisy linear input width");
  check(eps_in.size() == value(mu_w).cols() && eps_out.size() == value(mu_w).rows(), "noisy linear noise");
  Node n;
  n.op = Op::kNoisyLinear;
  n.a = x;
  n.b = mu_w;
  n.c = sigma_w;
  n.d = mu_b;
  n.e = sigma_b;
  n.aux0 = eps_in;
  n.aux1 = eps_out;
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x;
  return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var x, Index rows) {
  for (int r : *rows) check(r >= 0 && r < value(x).rows(), "gather row");
  Node n;
  n.op = Op::kGather;
  n.a = x;
  n.index = std::move(rows);
  return push(std::move(n));
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  check(value(a).rows() == value(b).rows(), "concat rows");
  Node n;
  n.op = Op::kConcat;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

Tape::Var Tape::segment_sum(Var x, Index segments, int count) {
  check(static_cast<int>(segments->size()) == value(x).rows(), "segment ids");
  for (int s : *segments) check(s >= 0 && s < count, "segment id range");
  Node n;
  n.op = Op::kSegmentSum;
  n.a = x;
  n.index = std::move(segments);
  n.n = count;
  return push(std::move(n));
}

Tape::Var Tape::sum_all(Var x) {
  Node n;
  n.op = Op::kSumAll;
  n.a = x;
  return push(std::move(n));
}

Tape::Var Tape::scale(Var x, double factor) {
  Node n;
  n.op = Op::kScale;
  n.a = x;
  n.scalar = factor;
  return push(std::move(n));
}

Tape::Var Tape::squared_error(Var x, double target) {
  check(value(x).size() == 1, "squared error expects a scalar");
  Node n;
  n.op = Op::kSquaredError;
  n.a = x;
  n.scalar = target;
  return push(std::move(n));
}

Tape::Var Tape::softmax_xent(Var logits, std::shared_ptr<const SoftmaxGroups> groups) {
  check(value(logits).cols() == 1, "logits must be a column");
  check(groups->rows.size() == groups->targets.size(), "one target per group");
  Node n;
  n.op = Op::kSoftmaxXent;
  n.a = logits;
  n.groups = std::move(groups);
  return push(std::move(n));
}

int Tape::count(Op op) const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [op](const Node& n) { return n.op == op; }));
}

void Tape::forward(Node& node) const {
  auto in = [this](int i) -> const Matrix& { return nodes_[i].value; };
  switch (node.op) {
    case Op::kInput:
      node.value = node.aux0;
      break;
    case Op::kParam:
      node.value = *node.param_value;
      break;
    case Op::kLinear:
      node.value.noalias() = in(node.a) * in(node.b).transpose();
      if (node.c >= 0) node.value.rowwise() += in(node.c).row(0);
      break;
    case Op::kNoisyLinear: {
      const Matrix w = in(node.b) + in(node.c).cwiseProduct(node.aux1.reshaped(node.aux1.size(), 1) *
                                                            node.aux0.reshaped(1, node.aux0.size()));
      const Matrix bias = in(node.d) + in(node.e).cwiseProduct(node.aux1.reshaped(1, node.aux1.size()));
      node.value.noalias() = in(node.a) * w.transpose();
      node.value.rowwise() += bias.row(0);
      break;
    }
    case Op::kAdd:
      node.value = in(node.a) + in(node.b);
      break;
    case Op::kRelu:
      node.value = in(node.a).cwiseMax(0.0);
      break;
    case Op::kGather: {
      const Matrix& x = in(node.a);
      node.value.resize(static_cast<Eigen::Index>(node.index->size()), x.cols());
      for (std::size_t i = 0; i < node.index->size(); ++i) node.value.row(i) = x.row((*node.index)[i]);
      break;
    }
    case Op::kConcat: {
      const Matrix& a = in(node.a);
      const Matrix& b = in(node.b);
      node.value.resize(a.rows(), a.cols() + b.cols());
      node.value.leftCols(a.cols()) = a;
      node.value.rightCols(b.cols()) = b;
      break;
    }
    case Op::kSegmentSum: {
      const Matrix& x = in(node.a);
      node.value = Matrix::Zero(node.n, x.cols());
      for (std::size_t i = 0; i < node.index->size(); ++i) node.value.row((*node.index)[i]) += x.row(i);
      break;
    }
    case Op::kSumAll:
      node.value = Matrix::Constant(1, 1, in(node.a).sum());
      break;
    case Op::kScale:
      node.value = in(node.a) * node.scalar;
      break;
    case Op::kSquaredError: {
      const double diff = in(node.a)(0, 0) - node.scalar;
      node.value = Matrix::Constant(1, 1, diff * diff);
      break;
    }
    case Op::kSoftmaxXent: {
      const Matrix& z = in(node.a);
      double total = 0.0;
      const auto& g = *node.groups;
      for (std::size_t k = 0; k < g.rows.size(); ++k) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int r : g.rows[k]) mx = std::max(mx, z(r, 0));
        double s = 0.0;
        for (int r : g.rows[k]) s += std::exp(z(r, 0) - mx);
        total += mx + std::log(s) - z(g.targets[k], 0);
      }
      node.value = Matrix::Constant(1, 1, g.rows.empty() ? 0.0 : total / static_cast<double>(g.rows.size()));
      break;
    }
  }
}

void Tape::replay() {
  for (Node& n : nodes_) forward(n);
}

void Tape::backward(Var loss, Gradients& grads) const {
  std::vector<Matrix> adj(nodes_.size());
  std::vector<char> live(nodes_.size(), 0);
  adj[loss] = Matrix::Ones(nodes_[loss].value.rows(), nodes_[loss].value.cols());
  live[loss] = 1;
  auto accum = [&](int i, const Matrix& g) {
    if (i < 0) return;
    if (!live[i]) {
      adj[i] = g;
      live[i] = 1;
    } else {
      adj[i] += g;
    }
  };
  for (int i = loss; i >= 0; --i) {
    if (!live[i]) continue;
    const Node& n = nodes_[i];
    const Matrix& g = adj[i];
    auto in = [this](int k) -> const Matrix& { return nodes_[k].value; };
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParam: {
        Matrix& dst = grads.at(n.param_index);
        if (dst.rows() != g.rows() || dst.cols() != g.cols()) throw Error("gradient shape mismatch");
        dst += g;
        break;
      }
      case Op::kLinear: {
        accum(n.a, g * in(n.b));
        accum(n.b, g.transpose() * in(n.a));
        if (n.c >= 0) accum(n.c, g.colwise().sum());
        break;
      }
      case Op::kNoisyLinear: {
        const Matrix noise = n.aux1.reshaped(n.aux1.size(), 1) * n.aux0.reshaped(1, n.aux0.size());
        const Matrix w = in(n.b) + in(n.c).cwiseProduct(noise);
        const Matrix dw = g.transpose() * in(n.a);
        const Matrix db = g.colwise().sum();
        accum(n.a, g * w);
        accum(n.b, dw);
        accum(n.c, dw.cwiseProduct(noise));
        accum(n.d, db);
        accum(n.e, db.cwiseProduct(n.aux1.reshaped(1, n.aux1.size())));
        break;
      }
      case Op::kAdd:
        accum(n.a, g);
        accum(n.b, g);
        break;
      case Op::kRelu:
        accum(n.a, g.cwiseProduct((in(n.a).array() > 0.0).cast<double>().matrix()));
        break;
      case Op::kGather: {
        Matrix d = Matrix::Zero(in(n.a).rows(), in(n.a).cols());
        for (std::size_t r = 0; r < n.index->size(); ++r) d.row((*n.index)[r]) += g.row(r);
        accum(n.a, d);
        break;
      }
      case Op::kConcat: {
        const Eigen::Index ca = in(n.a).cols();
        accum(n.a, g.leftCols(ca));
        accum(n.b, g.rightCols(g.cols() - ca));
        break;
      }
      case Op::kSegmentSum: {
        Matrix d(static_cast<Eigen::Index>(n.index->size()), g.cols());
        for (std::size_t r = 0; r < n.index->size(); ++r) d.row(r) = g.row((*n.index)[r]);
        accum(n.a, d);
        break;
      }
      case Op::kSumAll:
        accum(n.a, Matrix::Constant(in(n.a).rows(), in(n.a).cols(), g(0, 0)));
        break;
      case Op::kScale:
        accum(n.a, g * n.scalar);
        break;
      case Op::kSquaredError:
        accum(n.a, Matrix::Constant(1, 1, 2.0 * (in(n.a)(0, 0) - n.scalar) * g(0, 0)));
        break;
      case Op::kSoftmaxXent: {
        const Matrix& z = in(n.a);
        Matrix d = Matrix::Zero(z.rows(), 1);
        const auto& groups = *n.groups;
        if (!groups.rows.empty()) {
          const double w = g(0, 0) / static_cast<double>(groups.rows.size());
          for (std::size_t k = 0; k < groups.rows.size(); ++k) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int r : groups.rows[k]) mx = std::max(mx, z(r, 0));
            double s = 0.0;
            for (int r : groups.rows[k]) s += std::exp(z(r, 0) - mx);
            for (int r : groups.rows[k]) d(r, 0) += w * std::exp(z(r, 0) - mx) / s;
            d(groups.targets[k], 0) -= w;
          }
        }
        accum(n.a, d);
        break;
      }
    }
  }
}

}  // namespace mujam
