// Copyright 2026 The mcfront Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// A small reverse-mode differentiable layer stack. Activations are matrices
// with one column per example; sequence layers read columns time-major
// (column t * streams + s is step t of stream s).

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcfront::gradnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DiffTensor {
 public:
  DiffTensor() = default;
  DiffTensor(Eigen::Index rows, Eigen::Index cols, bool trainable = true);

  Matrix value;
  Matrix grad;
  // Buffers (normalization constants) are saved with the model but never
  // updated by the optimizer.
  bool trainable = true;

  std::vector<Eigen::Index> shape() const { return {value.rows(), value.cols()}; }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct SeqShape {
  int steps = 1;
  int streams = 1;

  Eigen::Index columns() const { return static_cast<Eigen::Index>(steps) * streams; }
  static SeqShape batch(Eigen::Index n) { return {1, static_cast<int>(n)}; }
};

struct NamedTensor {
  std::string name;
  DiffTensor* tensor;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual std::string kind() const = 0;

  // Caches whatever backward() needs; a second forward() overwrites it.
  virtual Matrix forward(const Matrix& x, SeqShape shape) = 0;
  // Accumulates parameter gradients and returns dL/dx (empty when input
  // gradients are switched off).
  virtual Matrix backward(const Matrix& grad_out) = 0;

  virtual std::vector<NamedTensor> tensors() { return {}; }
  // Clears recurrent state carried between forward() calls.
  virtual void reset_state() {}
  // Re-imposes structural constraints after a parameter update.
  virtual void constrain() {}

  void set_input_grad(bool needed) { input_grad_ = needed; }
  bool input_grad() const { return input_grad_; }

 protected:
  bool input_grad_ = true;

 private:
  std::string name_;
};

using LayerPtr = std::unique_ptr<Layer>;

// y = W x + b.
class Affine : public Layer {
 public:
  Affine(std::string name, int out, int in);
  std::string kind() const override { return "affine"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;

  DiffTensor weight, bias;

 private:
  Matrix x_;
};

// Complex y = W x + b on interleaved [Re, Im] vectors, with the real and
// imaginary parts of W and b as independent real parameters.
class ComplexAffine : public Layer {
 public:
  ComplexAffine(std::string name, int out, int in);
  std::string kind() const override { return "complex_affine"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;

  int out_dim() const { return static_cast<int>(weight_re.value.rows()); }
  int in_dim() const { return static_cast<int>(weight_re.value.cols()); }

  DiffTensor weight_re, weight_im, bias_re, bias_im;

 private:
  Matrix xr_, xi_;
};

// K independent complex affines, block k mapping input channels
// [kM, (k+1)M) to outputs [kD, (k+1)D). Weights are stored per block, so
// the off-block entries of the equivalent dense matrix are zero by
// construction.
class BlockComplexAffine : public Layer {
 public:
  BlockComplexAffine(std::string name, int blocks, int out_per_block, int in_per_block);
  std::string kind() const override { return "block_complex_affine"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;

  int blocks() const { return blocks_; }
  int out_per_block() const { return out_; }
  int in_per_block() const { return in_; }
  // (blocks * out) x (blocks * in) dense complex equivalent.
  Eigen::MatrixXcd dense_weight() const;

  // Rows [k * out, (k+1) * out) hold block k.
  DiffTensor weight_re, weight_im, bias_re, bias_im;

 private:
  int blocks_, out_, in_;
  Matrix xr_, xi_;
};

// y_i = x_{2i}^2 + x_{2i+1}^2.
class PowPairs : public Layer {
 public:
  explicit PowPairs(std::string name) : Layer(std::move(name)) {}
  std::string kind() const override { return "pow_pairs"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Matrix x_;
};

// Max over consecutive groups of `group` rows; ties go to the lowest index.
class MaxPoolGroups : public Layer {
 public:
  MaxPoolGroups(std::string name, int group);
  std::string kind() const override { return "maxpool_groups"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  int group_;
  Eigen::Index in_rows_ = 0;
  Eigen::MatrixXi argmax_;
};

class Relu : public Layer {
 public:
  explicit Relu(std::string name) : Layer(std::move(name)) {}
  std::string kind() const override { return "relu"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Matrix x_;
};

// log(max(x, eps)); zero gradient in the clamped region.
class LogFloor : public Layer {
 public:
  LogFloor(std::string name, double eps = 1e-7);
  std::string kind() const override { return "log_floor"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  double eps() const { return eps_; }

 private:
  double eps_;
  Matrix x_;
};

// Fixed (x - shift) * scale, elementwise per row.
class Standardize : public Layer {
 public:
  Standardize(std::string name, int dim);
  std::string kind() const override { return "standardize"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;

  DiffTensor shift, scale;
};

// Causal mean subtraction, y_t = x_t - m_{t-1}, m_t = a m_{t-1} + (1-a) x_t,
// per stream, with m carried across forward() calls until reset_state().
// Gradients are truncated at the start of each forward() chunk.
class CausalMeanSubtract : public Layer {
 public:
  CausalMeanSubtract(std::string name, int dim, double decay);
  std::string kind() const override { return "cms"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;
  void reset_state() override { running_.resize(0, 0); }
  double decay() const { return decay_; }

  DiffTensor init_mean;

 private:
  double decay_;
  SeqShape shape_;
  Matrix running_;
};

// Unidirectional LSTM without peepholes. Gate rows are ordered
// [input, forget, cell, output]. State carries across forward() calls
// (truncated BPTT) until reset_state().
class Lstm : public Layer {
 public:
  Lstm(std::string name, int in, int hidden);
  std::string kind() const override { return "lstm"; }
  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;
  void reset_state() override;

  int hidden() const { return hidden_; }
  // Sets h and c for the next forward(); both H x streams.
  void set_state(const Matrix& h, const Matrix& c);

  DiffTensor w_input, w_recurrent, bias;

 private:
  int hidden_;
  SeqShape shape_;
  Matrix h_, c_;
  Matrix x_;
  Matrix gates_;   // 4H x columns, post-activation
  Matrix cells_;   // H x columns
  Matrix h_prev0_, c_prev0_;
};

class Sequential : public Layer {
 public:
  explicit Sequential(std::string name) : Layer(std::move(name)) {}
  std::string kind() const override { return "sequential"; }

  Layer& add(LayerPtr layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  Matrix forward(const Matrix& x, SeqShape shape) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<NamedTensor> tensors() override;
  void reset_state() override;
  void constrain() override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  Layer* find(const std::string& name);
  void zero_grad();

 private:
  std::vector<LayerPtr> layers_;
};

struct XentResult {
  double loss_sum = 0.0;
  long count = 0;
  long correct = 0;
  Matrix grad;  // dL/dlogits for L = loss_sum / count
  double mean_loss() const { return count ? loss_sum / count : 0.0; }
};

// Column-wise softmax cross entropy. Labels < 0 are ignored. Throws
// ValidationError for labels >= C.
XentResult softmax_xent(const Matrix& logits, std::span<const int> labels);
double softmax_xent(const Vector& logits, int label);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  long checked = 0;
};

// Central finite differences on every trainable parameter and input entry of
// `layer`, reducing the output to a scalar with a fixed random projection.
// Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(Layer& layer, const Matrix& input, SeqShape shape,
                           double eps = 1e-5, std::uint64_t seed = 7);

// Same, with softmax cross entropy (summed over columns) as the objective.
// The four-point stencil tolerates a larger eps, which deep chains with
// very small gradients need to stay clear of round-off.
GradCheckResult grad_check_xent(Layer& layer, const Matrix& input, SeqShape shape,
                                std::span<const int> labels, double eps = 1e-5,
                                bool fourth_order = false);

}  // namespace mcfront::gradnet
