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

#include <algorithm>
#include <cmath>
#include <string>

#include "mcfront/error.hpp"
#include "mcfront/gradnet.hpp"

namespace mcfront::gradnet {

namespace {

using StridedConst = Eigen::Map<const Matrix, 0, Eigen::Stride<Eigen::Dynamic, 2>>;
using Strided = Eigen::Map<Matrix, 0, Eigen::Stride<Eigen::Dynamic, 2>>;

void split_pairs(const Matrix& x, Matrix& re, Matrix& im) {
  const Eigen::Index n = x.rows() / 2;
  const Eigen::Stride<Eigen::Dynamic, 2> stride(x.rows(), 2);
  re = StridedConst(x.data(), n, x.cols(), stride);
  im = StridedConst(x.data() + 1, n, x.cols(), stride);
}

Matrix join_pairs(const Matrix& re, const Matrix& im) {
  Matrix out(2 * re.rows(), re.cols());
  const Eigen::Stride<Eigen::Dynamic, 2> stride(out.rows(), 2);
  Strided(out.data(), re.rows(), re.cols(), stride) = re;
  Strided(out.data() + 1, re.rows(), re.cols(), stride) = im;
  return out;
}

void expect_rows(const Layer& layer, const Matrix& x, Eigen::Index rows) {
  if (x.rows() != rows)
    throw ValidationError(layer.name() + ": expected " + std::to_string(rows) +
                          " input rows, got " + std::to_string(x.rows()));
}

void expect_columns(const Layer& layer, const Matrix& x, SeqShape shape) {
  if (x.cols() != shape.columns())
    throw ValidationError(layer.name() + ": " + std::to_string(x.cols()) +
                          " columns do not match " + std::to_string(shape.steps) + " steps x " +
                          std::to_string(shape.streams) + " streams");
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

DiffTensor::DiffTensor(Eigen::Index rows, Eigen::Index cols, bool trainable_)
    : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), trainable(trainable_) {}

// ---------------------------------------------------------------- Affine

Affine::Affine(std::string name, int out, int in)
    : Layer(std::move(name)), weight(out, in), bias(out, 1) {}

Matrix Affine::forward(const Matrix& x, SeqShape) {
  expect_rows(*this, x, weight.value.cols());
  x_ = x;
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Affine::backward(const Matrix& g) {
  weight.grad.noalias() += g * x_.transpose();
  bias.grad.col(0) += g.rowwise().sum();
  if (!input_grad_) return {};
  return weight.value.transpose() * g;
}

std::vector<NamedTensor> Affine::tensors() { return {{"W", &weight}, {"b", &bias}}; }

// --------------------------------------------------------- ComplexAffine

ComplexAffine::ComplexAffine(std::string name, int out, int in)
    : Layer(std::move(name)), weight_re(out, in), weight_im(out, in), bias_re(out, 1), bias_im(out, 1) {}

Matrix ComplexAffine::forward(const Matrix& x, SeqShape) {
  if (x.rows() % 2 != 0) throw ValidationError(name() + ": odd-length complex input");
  expect_rows(*this, x, 2 * weight_re.value.cols());
  split_pairs(x, xr_, xi_);
  Matrix yr = weight_re.value * xr_;
  yr.noalias() -= weight_im.value * xi_;
  yr.colwise() += bias_re.value.col(0);
  Matrix yi = weight_re.value * xi_;
  yi.noalias() += weight_im.value * xr_;
  yi.colwise() += bias_im.value.col(0);
  return join_pairs(yr, yi);
}

Matrix ComplexAffine::backward(const Matrix& g) {
  Matrix gr, gi;
  split_pairs(g, gr, gi);
  weight_re.grad.noalias() += gr * xr_.transpose();
  weight_re.grad.noalias() += gi * xi_.transpose();
  weight_im.grad.noalias() -= gr * xi_.transpose();
  weight_im.grad.noalias() += gi * xr_.transpose();
  bias_re.grad.col(0) += gr.rowwise().sum();
  bias_im.grad.col(0) += gi.rowwise().sum();
  if (!input_grad_) return {};
  Matrix dxr = weight_re.value.transpose() * gr;
  dxr.noalias() += weight_im.value.transpose() * gi;
  Matrix dxi = weight_re.value.transpose() * gi;
  dxi.noalias() -= weight_im.value.transpose() * gr;
  return join_pairs(dxr, dxi);
}

std::vector<NamedTensor> ComplexAffine::tensors() {
  return {{"W_re", &weight_re}, {"W_im", &weight_im}, {"b_re", &bias_re}, {"b_im", &bias_im}};
}

// ---------------------------------------------------- BlockComplexAffine

BlockComplexAffine::BlockComplexAffine(std::string name, int blocks, int out_per_block,
                                       int in_per_block)
    : Layer(std::move(name)),
      weight_re(blocks * out_per_block, in_per_block),
      weight_im(blocks * out_per_block, in_per_block),
      bias_re(blocks * out_per_block, 1),
      bias_im(blocks * out_per_block, 1),
      blocks_(blocks),
      out_(out_per_block),
      in_(in_per_block) {}

Matrix BlockComplexAffine::forward(const Matrix& x, SeqShape) {
  expect_rows(*this, x, 2 * static_cast<Eigen::Index>(blocks_) * in_);
  split_pairs(x, xr_, xi_);
  const Eigen::Index n = x.cols();
  Matrix yr(static_cast<Eigen::Index>(blocks_) * out_, n), yi(yr.rows(), n);
  for (int k = 0; k < blocks_; ++k) {
    const auto wr = weight_re.value.middleRows(k * out_, out_);
    const auto wi = weight_im.value.middleRows(k * out_, out_);
    const auto xr = xr_.middleRows(k * in_, in_);
    const auto xi = xi_.middleRows(k * in_, in_);
    auto yr_k = yr.middleRows(k * out_, out_);
    auto yi_k = yi.middleRows(k * out_, out_);
    yr_k.noalias() = wr * xr;
    yr_k.noalias() -= wi * xi;
    yr_k.colwise() += bias_re.value.col(0).segment(k * out_, out_);
    yi_k.noalias() = wr * xi;
    yi_k.noalias() += wi * xr;
    yi_k.colwise() += bias_im.value.col(0).segment(k * out_, out_);
  }
  return join_pairs(yr, yi);
}

Matrix BlockComplexAffine::backward(const Matrix& g) {
  Matrix gr, gi;
  split_pairs(g, gr, gi);
  Matrix dxr, dxi;
  if (input_grad_) {
    dxr.resize(xr_.rows(), xr_.cols());
    dxi.resize(xi_.rows(), xi_.cols());
  }
  for (int k = 0; k < blocks_; ++k) {
    const auto gr_k = gr.middleRows(k * out_, out_);
    const auto gi_k = gi.middleRows(k * out_, out_);
    const auto xr = xr_.middleRows(k * in_, in_);
    const auto xi = xi_.middleRows(k * in_, in_);
    auto dwr = weight_re.grad.middleRows(k * out_, out_);
    auto dwi = weight_im.grad.middleRows(k * out_, out_);
    dwr.noalias() += gr_k * xr.transpose();
    dwr.noalias() += gi_k * xi.transpose();
    dwi.noalias() -= gr_k * xi.transpose();
    dwi.noalias() += gi_k * xr.transpose();
    if (input_grad_) {
      const auto wr = weight_re.value.middleRows(k * out_, out_);
      const auto wi = weight_im.value.middleRows(k * out_, out_);
      auto dxr_k = dxr.middleRows(k * in_, in_);
      auto dxi_k = dxi.middleRows(k * in_, in_);
      dxr_k.noalias() = wr.transpose() * gr_k;
      dxr_k.noalias() += wi.transpose() * gi_k;
      dxi_k.noalias() = wr.transpose() * gi_k;
      dxi_k.noalias() -= wi.transpose() * gr_k;
    }
  }
  bias_re.grad.col(0) += gr.rowwise().sum();
  bias_im.grad.col(0) += gi.rowwise().sum();
  if (!input_grad_) return {};
  return join_pairs(dxr, dxi);
}

std::vector<NamedTensor> BlockComplexAffine::tensors() {
  return {{"W_re", &weight_re}, {"W_im", &weight_im}, {"b_re", &bias_re}, {"b_im", &bias_im}};
}

Eigen::MatrixXcd BlockComplexAffine::dense_weight() const {
  Eigen::MatrixXcd dense =
      Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(blocks_) * out_, static_cast<Eigen::Index>(blocks_) * in_);
  for (int k = 0; k < blocks_; ++k)
    for (int d = 0; d < out_; ++d)
      for (int m = 0; m < in_; ++m)
        dense(k * out_ + d, k * in_ + m) = {weight_re.value(k * out_ + d, m), weight_im.value(k * out_ + d, m)};
  return dense;
}

// -------------------------------------------------------------- PowPairs

Matrix PowPairs::forward(const Matrix& x, SeqShape) {
  if (x.rows() % 2 != 0) throw ValidationError(name() + ": odd-length input");
  x_ = x;
  Matrix re, im;
  split_pairs(x, re, im);
  return re.cwiseAbs2() + im.cwiseAbs2();
}

Matrix PowPairs::backward(const Matrix& g) {
  if (!input_grad_) return {};
  Matrix out(x_.rows(), x_.cols());
  const Eigen::Stride<Eigen::Dynamic, 2> stride(x_.rows(), 2);
  const Eigen::Index n = x_.rows() / 2;
  Strided(out.data(), n, x_.cols(), stride) =
      2.0 * StridedConst(x_.data(), n, x_.cols(), stride).cwiseProduct(g);
  Strided(out.data() + 1, n, x_.cols(), stride) =
      2.0 * StridedConst(x_.data() + 1, n, x_.cols(), stride).cwiseProduct(g);
  return out;
}

// --------------------------------------------------------- MaxPoolGroups

MaxPoolGroups::MaxPoolGroups(std::string name, int group) : Layer(std::move(name)), group_(group) {
  if (group < 1) throw ValidationError(this->name() + ": group size must be >= 1");
}

Matrix MaxPoolGroups::forward(const Matrix& x, SeqShape) {
  if (x.rows() % group_ != 0)
    throw ValidationError(name() + ": " + std::to_string(x.rows()) + " rows not divisible by group " +
                          std::to_string(group_));
  in_rows_ = x.rows();
  const Eigen::Index groups = x.rows() / group_;
  Matrix y(groups, x.cols());
  argmax_.resize(groups, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index k = 0; k < groups; ++k) {
      const double* p = x.col(c).data() + k * group_;
      int best = 0;
      for (int d = 1; d < group_; ++d)
        if (p[d] > p[best]) best = d;
      y(k, c) = p[best];
      argmax_(k, c) = best;
    }
  return y;
}

Matrix MaxPoolGroups::backward(const Matrix& g) {
  if (!input_grad_) return {};
  Matrix out = Matrix::Zero(in_rows_, g.cols());
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index k = 0; k < g.rows(); ++k) out(k * group_ + argmax_(k, c), c) = g(k, c);
  return out;
}

// ------------------------------------------------------ Relu / LogFloor

Matrix Relu::forward(const Matrix& x, SeqShape) {
  x_ = x;
  return x.cwiseMax(0.0);
}

Matrix Relu::backward(const Matrix& g) {
  if (!input_grad_) return {};
  return (x_.array() > 0.0).select(g, 0.0);
}

LogFloor::LogFloor(std::string name, double eps) : Layer(std::move(name)), eps_(eps) {
  if (!(eps > 0)) throw ValidationError(this->name() + ": eps must be positive");
}

Matrix LogFloor::forward(const Matrix& x, SeqShape) {
  x_ = x;
  return x.cwiseMax(eps_).array().log().matrix();
}

Matrix LogFloor::backward(const Matrix& g) {
  if (!input_grad_) return {};
  return (x_.array() > eps_).select(g.array() / x_.array(), 0.0).matrix();
}

// ----------------------------------------------------------- Standardize

Standardize::Standardize(std::string name, int dim)
    : Layer(std::move(name)), shift(dim, 1, false), scale(dim, 1, false) {
  scale.value.setOnes();
}

Matrix Standardize::forward(const Matrix& x, SeqShape) {
  expect_rows(*this, x, shift.value.rows());
  return ((x.colwise() - shift.value.col(0)).array().colwise() * scale.value.col(0).array()).matrix();
}

Matrix Standardize::backward(const Matrix& g) {
  if (!input_grad_) return {};
  return (g.array().colwise() * scale.value.col(0).array()).matrix();
}

std::vector<NamedTensor> Standardize::tensors() { return {{"shift", &shift}, {"scale", &scale}}; }

// ---------------------------------------------------- CausalMeanSubtract

CausalMeanSubtract::CausalMeanSubtract(std::string name, int dim, double decay)
    : Layer(std::move(name)), init_mean(dim, 1, false), decay_(decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw ValidationError(this->name() + ": decay must lie in (0, 1)");
}

Matrix CausalMeanSubtract::forward(const Matrix& x, SeqShape shape) {
  expect_rows(*this, x, init_mean.value.rows());
  expect_columns(*this, x, shape);
  if (running_.cols() != shape.streams)
    running_ = init_mean.value.col(0).replicate(1, shape.streams);
  shape_ = shape;
  Matrix y(x.rows(), x.cols());
  for (int t = 0; t < shape.steps; ++t) {
    const auto xt = x.middleCols(static_cast<Eigen::Index>(t) * shape.streams, shape.streams);
    y.middleCols(static_cast<Eigen::Index>(t) * shape.streams, shape.streams) = xt - running_;
    running_ = decay_ * running_ + (1.0 - decay_) * xt;
  }
  return y;
}

Matrix CausalMeanSubtract::backward(const Matrix& g) {
  if (!input_grad_) return {};
  Matrix dx(g.rows(), g.cols());
  Matrix dm = Matrix::Zero(g.rows(), shape_.streams);
  for (int t = shape_.steps - 1; t >= 0; --t) {
    const auto gt = g.middleCols(static_cast<Eigen::Index>(t) * shape_.streams, shape_.streams);
    dx.middleCols(static_cast<Eigen::Index>(t) * shape_.streams, shape_.streams) = gt + (1.0 - decay_) * dm;
    dm = decay_ * dm - gt;
  }
  return dx;
}

std::vector<NamedTensor> CausalMeanSubtract::tensors() { return {{"init_mean", &init_mean}}; }

// ------------------------------------------------------------------ Lstm

Lstm::Lstm(std::string name, int in, int hidden)
    : Layer(std::move(name)),
      w_input(4 * hidden, in),
      w_recurrent(4 * hidden, hidden),
      bias(4 * hidden, 1),
      hidden_(hidden) {
  if (hidden < 1) throw ValidationError(this->name() + ": hidden size must be >= 1");
  bias.value.middleRows(hidden, hidden).setOnes();
}

void Lstm::reset_state() {
  h_.resize(0, 0);
  c_.resize(0, 0);
}

void Lstm::set_state(const Matrix& h, const Matrix& c) {
  if (h.rows() != hidden_ || c.rows() != hidden_ || h.cols() != c.cols())
    throw ValidationError(name() + ": state shape mismatch");
  h_ = h;
  c_ = c;
}

Matrix Lstm::forward(const Matrix& x, SeqShape shape) {
  expect_rows(*this, x, w_input.value.cols());
  expect_columns(*this, x, shape);
  const int H = hidden_, B = shape.streams;
  if (h_.cols() != B) {
    h_ = Matrix::Zero(H, B);
    c_ = Matrix::Zero(H, B);
  }
  shape_ = shape;
  x_ = x;
  h_prev0_ = h_;
  c_prev0_ = c_;
  gates_ = w_input.value * x;
  gates_.colwise() += bias.value.col(0);
  cells_.resize(H, x.cols());
  Matrix out(H, x.cols());
  for (int t = 0; t < shape.steps; ++t) {
    auto z = gates_.middleCols(static_cast<Eigen::Index>(t) * B, B);
    z.noalias() += w_recurrent.value * h_;
    z.topRows(2 * H) = sigmoid(z.topRows(2 * H));
    z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
    z.bottomRows(H) = sigmoid(z.bottomRows(H));
    c_ = z.middleRows(H, H).cwiseProduct(c_) + z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
    h_ = z.bottomRows(H).cwiseProduct(c_.array().tanh().matrix());
    cells_.middleCols(static_cast<Eigen::Index>(t) * B, B) = c_;
    out.middleCols(static_cast<Eigen::Index>(t) * B, B) = h_;
  }
  return out;
}

Matrix Lstm::backward(const Matrix& g) {
  const int H = hidden_, B = shape_.streams;
  Matrix dz(4 * H, g.cols());
  Matrix dh_next = Matrix::Zero(H, B), dc_next = Matrix::Zero(H, B);
  for (int t = shape_.steps - 1; t >= 0; --t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
    const auto z = gates_.middleCols(col, B);
    const auto i = z.topRows(H), f = z.middleRows(H, H), gg = z.middleRows(2 * H, H), o = z.bottomRows(H);
    const Matrix tanh_c = cells_.middleCols(col, B).array().tanh().matrix();
    const Matrix c_prev = t > 0 ? Matrix(cells_.middleCols(col - B, B)) : c_prev0_;
    const Matrix dh = g.middleCols(col, B) + dh_next;
    const Matrix dc =
        dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) + dc_next;
    auto dzt = dz.middleCols(col, B);
    dzt.topRows(H) = dc.cwiseProduct(gg).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    dzt.middleRows(H, H) = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    dzt.middleRows(2 * H, H) = dc.cwiseProduct(i).cwiseProduct((1.0 - gg.array().square()).matrix());
    dzt.bottomRows(H) = dh.cwiseProduct(tanh_c).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
    dc_next = dc.cwiseProduct(f);
    dh_next.noalias() = w_recurrent.value.transpose() * dzt;
  }
  // h_{t-1} for every column: the previous step's output, or the carried state.
  Matrix h_prev(H, g.cols());
  h_prev.leftCols(B) = h_prev0_;
  for (int t = 1; t < shape_.steps; ++t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
    const auto z_prev = gates_.middleCols(col - B, B);
    h_prev.middleCols(col, B) =
        z_prev.bottomRows(H).cwiseProduct(cells_.middleCols(col - B, B).array().tanh().matrix());
  }
  w_recurrent.grad.noalias() += dz * h_prev.transpose();
  w_input.grad.noalias() += dz * x_.transpose();
  bias.grad.col(0) += dz.rowwise().sum();
  if (!input_grad_) return {};
  return w_input.value.transpose() * dz;
}

std::vector<NamedTensor> Lstm::tensors() {
  return {{"W", &w_input}, {"U", &w_recurrent}, {"b", &bias}};
}

// ------------------------------------------------------------ Sequential

Layer& Sequential::add(LayerPtr layer) {
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Layer* Sequential::find(const std::string& name) {
  for (auto& l : layers_)
    if (l->name() == name) return l.get();
  return nullptr;
}

Matrix Sequential::forward(const Matrix& x, SeqShape shape) {
  Matrix h = x;
  for (auto& l : layers_) {
    h = l->forward(h, shape);
    if (!h.allFinite()) throw Error("non-finite activation after layer " + l->name());
  }
  return h;
}

Matrix Sequential::backward(const Matrix& grad_out) {
  // Without an input gradient, layers below the lowest trainable one need no
  // backward pass at all.
  std::size_t first = 0;
  if (!input_grad_) {
    first = layers_.size();
    for (std::size_t i = 0; i < layers_.size() && first == layers_.size(); ++i)
      for (auto& t : layers_[i]->tensors())
        if (t.tensor->trainable) {
          first = i;
          break;
        }
  }
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > first;) {
    layers_[i]->set_input_grad(i > first || input_grad_);
    g = layers_[i]->backward(g);
  }
  if (!input_grad_) return {};
  return g;
}

std::vector<NamedTensor> Sequential::tensors() {
  std::vector<NamedTensor> out;
  for (auto& l : layers_)
    for (auto& t : l->tensors()) out.push_back({l->name() + "." + t.name, t.tensor});
  return out;
}

void Sequential::reset_state() {
  for (auto& l : layers_) l->reset_state();
}

void Sequential::constrain() {
  for (auto& l : layers_) l->constrain();
}

void Sequential::zero_grad() {
  for (auto& t : tensors()) t.tensor->zero_grad();
}

// ------------------------------------------------------------------ Loss

XentResult softmax_xent(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() < 2) throw ValidationError("softmax_xent: at least 2 classes required");
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
    throw ValidationError("softmax_xent: label count does not match logits");
  XentResult r;
  r.grad = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const int label = labels[c];
    if (label < 0) continue;
    if (label >= logits.rows())
      throw ValidationError("softmax_xent: label " + std::to_string(label) + " out of range");
    Eigen::Index best = 0;
    const double mx = logits.col(c).maxCoeff(&best);
    const Vector e = (logits.col(c).array() - mx).exp();
    const double sum = e.sum();
    r.loss_sum += std::log(sum) - (logits(label, c) - mx);
    r.grad.col(c) = e / sum;
    r.grad(label, c) -= 1.0;
    ++r.count;
    if (best == label) ++r.correct;
  }
  if (r.count > 0) r.grad /= static_cast<double>(r.count);
  return r;
}

double softmax_xent(const Vector& logits, int label) {
  const int labels[] = {label};
  return softmax_xent(Matrix(logits), labels).loss_sum;
}

}  // namespace mcfront::gradnet
