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

// Minimal reverse-mode differentiation over row-major matrices. Only the
// primitives the graph network needs are provided.

#ifndef MUJAM_TAPE_HPP_
#define MUJAM_TAPE_HPP_

#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace mujam {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One gradient matrix per parameter tensor, same shapes.
using Gradients = std::vector<Matrix>;

using Index = std::shared_ptr<const std::vector<int>>;

inline Index make_index(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

// Groups of logit rows sharing a softmax, with the target row of each.
struct SoftmaxGroups {
  std::vector<std::vector<int>> rows;
  std::vector<int> targets;
};

class Tape {
 public:
  using Var = int;

  enum class Op {
    kInput,
    kParam,
    kLinear,
    kNoisyLinear,
    kAdd,
    kRelu,
    kGather,
    kConcat,
    kSegmentSum,
    kSumAll,
    kScale,
    kSquaredError,
    kSoftmaxXent,
  };

  Var input(Matrix value);
  // Leaf bound to an externally owned parameter tensor. replay() rereads it.
  Var param(int index, const Matrix* value);

  // x W^T + b, with W (out x in) and b (1 x out) broadcast over rows.
  Var linear(Var x, Var w, Var b);
  // Factored-Gaussian noisy layer: W = mu_w + sigma_w * (eps_out eps_in^T),
  // b = mu_b + sigma_b * eps_out. eps vectors are already transformed.
  Var noisy_linear(Var x, Var mu_w, Var sigma_w, Var mu_b, Var sigma_b, const Matrix& eps_in, const Matrix& eps_out);
  Var add(Var a, Var b);
  Var relu(Var x);
  Var gather_rows(Var x, Index rows);
  Var concat_cols(Var a, Var b);
  // out[seg[i]] += x[i], out has n rows.
  Var segment_sum(Var x, Index segments, int n);
  Var sum_all(Var x);
  Var scale(Var x, double factor);
  // (x - target)^2 for a 1x1 x.
  Var squared_error(Var x, double target);
  // Mean over groups of the softmax cross-entropy of an n x 1 logit column.
  Var softmax_xent(Var logits, std::shared_ptr<const SoftmaxGroups> groups);

  const Matrix& value(Var v) const { return nodes_[v].value; }
  double scalar(Var v) const { return nodes_[v].value(0, 0); }
  int size() const { return static_cast<int>(nodes_.size()); }
  int count(Op op) const;

  // Accumulates d(loss)/d(param) into grads[param index]. grads must be
  // shaped like the parameter set.
  void backward(Var loss, Gradients& grads) const;

  // Recomputes every node from its leaves, in recording order.
  void replay();

 private:
  struct Node {
    Op op = Op::kInput;
    int a = -1, b = -1, c = -1, d = -1, e = -1;
    double scalar = 0.0;
    int n = 0;
    int param_index = -1;
    const Matrix* param_value = nullptr;
    Index index;
    std::shared_ptr<const SoftmaxGroups> groups;
    Matrix aux0, aux1;
    Matrix value;
  };

  Var push(Node node);
  void forward(Node& node) const;

  std::vector<Node> nodes_;
};

}  // namespace mujam

#endif  // MUJAM_TAPE_HPP_
