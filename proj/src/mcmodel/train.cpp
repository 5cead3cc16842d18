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
#include <limits>
#include <numeric>
#include <sstream>

#include "mcfront/error.hpp"
#include "mcfront/mcmodel.hpp"

namespace mcfront::mcmodel {

using gradnet::SeqShape;

long SequenceSet::frames() const {
  long n = 0;
  for (const auto& f : features) n += f.cols();
  return n;
}

void SequenceSet::add(Matrix f, std::vector<int> l) {
  features.push_back(std::move(f));
  labels.push_back(std::move(l));
}

void SequenceSet::validate() const {
  if (features.empty()) throw ValidationError("empty sequence set");
  if (features.size() != labels.size()) throw ValidationError("feature/label count mismatch");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].rows() != features[0].rows())
      throw ValidationError("utterance " + std::to_string(i) + " has a different feature dimension");
    if (static_cast<Eigen::Index>(labels[i].size()) != features[i].cols())
      throw ValidationError("utterance " + std::to_string(i) + " has " +
                            std::to_string(labels[i].size()) + " labels for " +
                            std::to_string(features[i].cols()) + " frames");
  }
}

signal::GlobalStats feature_stats(const SequenceSet& set) {
  set.validate();
  signal::StatsAccumulator acc;
  for (const auto& f : set.features) acc.add_rows(f.transpose());
  return acc.finish();
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ValidationError("train.lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ValidationError("train.beta1/beta2 must lie in [0, 1)");
  if (!(eps > 0)) throw ValidationError("train.eps must be positive");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (bptt_length < 1) throw ValidationError("train.bptt_length must be >= 1");
  for (const auto& [prefix, scale] : lr_scale)
    if (!(scale >= 0)) throw ValidationError("train.lr_scale[" + prefix + "] must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"beta1", c.beta1},   {"beta2", c.beta2},
          {"eps", c.eps},         {"batch_size", c.batch_size}, {"epochs", c.epochs},
          {"bptt_length", c.bptt_length}, {"seed", c.seed}, {"lr_scale", c.lr_scale},
          {"keep_best", c.keep_best}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.bptt_length = j.value("bptt_length", c.bptt_length);
  c.seed = j.value("seed", c.seed);
  c.lr_scale = j.value("lr_scale", c.lr_scale);
  c.keep_best = j.value("keep_best", c.keep_best);
  c.validate();
  return c;
}

Adam::Adam(std::vector<gradnet::NamedTensor> params, const TrainConfig& config)
    : beta1_(config.beta1), beta2_(config.beta2), eps_(config.eps) {
  for (auto& p : params) {
    if (!p.tensor->trainable) continue;
    double scale = 1.0;
    std::size_t matched = 0;
    for (const auto& [prefix, s] : config.lr_scale)
      if (p.name.rfind(prefix, 0) == 0 && prefix.size() >= matched) {
        scale = s;
        matched = prefix.size();
      }
    params_.push_back(p);
    lr_.push_back(config.lr * scale);
    m_.push_back(Matrix::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
    v_.push_back(Matrix::Zero(p.tensor->value.rows(), p.tensor->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto g = params_[i].tensor->grad.array();
    m_[i].array() = beta1_ * m_[i].array() + (1.0 - beta1_) * g;
    v_[i].array() = beta2_ * v_[i].array() + (1.0 - beta2_) * g.square();
    params_[i].tensor->value.array() -=
        lr_[i] * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double Adam::lr(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return lr_[i];
  throw Error("optimizer has no parameter '" + name + "'");
}

double relative_reduction(double candidate, double baseline) {
  if (!(baseline > 0)) throw ValidationError("relative_reduction: baseline must be positive");
  return (baseline - candidate) / baseline;
}

std::string history_csv(const History& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,split,loss,frame_error\n";
  for (const auto& r : history)
    out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.frame_error << '\n';
  return out.str();
}

namespace {

struct Chunk {
  Matrix x;
  std::vector<int> labels;
  SeqShape shape;
};

// Packs steps [t0, t0 + steps) of the given utterances time-major; streams
// that have ended contribute zero features and ignored labels.
Chunk pack(const SequenceSet& set, const std::vector<std::size_t>& ids, int t0, int steps) {
  const int B = static_cast<int>(ids.size());
  Chunk c;
  c.shape = {steps, B};
  c.x = Matrix::Zero(set.dim(), c.shape.columns());
  c.labels.assign(c.shape.columns(), -1);
  for (int b = 0; b < B; ++b) {
    const Matrix& f = set.features[ids[b]];
    const auto& l = set.labels[ids[b]];
    for (int s = 0; s < steps; ++s) {
      const int t = t0 + s;
      if (t >= f.cols()) break;
      c.x.col(static_cast<Eigen::Index>(s) * B + b) = f.col(t);
      c.labels[static_cast<std::size_t>(s) * B + b] = l[t];
    }
  }
  return c;
}

int max_length(const SequenceSet& set, const std::vector<std::size_t>& ids) {
  Eigen::Index n = 0;
  for (auto i : ids) n = std::max(n, set.features[i].cols());
  return static_cast<int>(n);
}

void check_input(Model& model, const SequenceSet& set) {
  set.validate();
  if (set.dim() != model.spec().input_dim())
    throw ValidationError("features have dimension " + std::to_string(set.dim()) + ", model " +
                          to_string(model.spec().input_kind) + " expects " +
                          std::to_string(model.spec().input_dim()));
}

constexpr int kEvalChunk = 100;

}  // namespace

EvalResult evaluate(Model& model, const SequenceSet& set, int batch_size) {
  check_input(model, set);
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  double loss = 0.0;
  long count = 0, correct = 0;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    std::vector<std::size_t> ids;
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) ids.push_back(i);
    model.net().reset_state();
    const int T = max_length(set, ids);
    for (int t0 = 0; t0 < T; t0 += kEvalChunk) {
      Chunk c = pack(set, ids, t0, std::min(kEvalChunk, T - t0));
      const auto r = gradnet::softmax_xent(model.forward(c.x, c.shape), c.labels);
      loss += r.loss_sum;
      count += r.count;
      correct += r.correct;
    }
  }
  model.net().reset_state();
  if (count == 0) throw ValidationError("evaluation set has no labeled frames");
  EvalResult e;
  e.frames = count;
  e.loss = loss / count;
  e.frame_error = 1.0 - static_cast<double>(correct) / count;
  return e;
}

History train(Model& model, const SequenceSet& train_set, const SequenceSet* dev_set,
              const TrainConfig& config) {
  config.validate();
  check_input(model, train_set);
  if (dev_set) check_input(model, *dev_set);
  Rng rng(config.seed);
  auto& net = model.net();
  net.set_input_grad(false);
  Adam adam(net.tensors(), config);
  History history;
  auto log = [&](HistoryRow row) {
    history.push_back(row);
    if (config.progress) config.progress(history.back());
  };
  // Parameter snapshot of the lowest dev error seen so far.
  double best_error = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best;
  auto check_dev = [&](int epoch) {
    const auto e = evaluate(model, *dev_set, config.batch_size);
    log({epoch, "dev", e.loss, e.frame_error});
    if (!config.keep_best || !(e.frame_error < best_error)) return;
    best_error = e.frame_error;
    best.clear();
    for (const auto& t : net.tensors()) best.push_back(t.tensor->value);
  };
  if (dev_set) check_dev(0);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    long count = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::vector<std::size_t> ids(
          order.begin() + start, order.begin() + std::min(order.size(), start + config.batch_size));
      net.reset_state();
      const int T = max_length(train_set, ids);
      for (int t0 = 0; t0 < T; t0 += config.bptt_length) {
        Chunk c = pack(train_set, ids, t0, std::min(config.bptt_length, T - t0));
        net.zero_grad();
        const auto r = gradnet::softmax_xent(net.forward(c.x, c.shape), c.labels);
        if (r.count == 0) continue;
        net.backward(r.grad);
        adam.step();
        net.constrain();
        loss += r.loss_sum;
        count += r.count;
        correct += r.correct;
      }
    }
    net.reset_state();
    log({epoch, "train", count ? loss / count : 0.0,
                       count ? 1.0 - static_cast<double>(correct) / count : 0.0});
    if (dev_set) check_dev(epoch);
  }
  if (!best.empty()) {
    const auto tensors = net.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].tensor->value = best[i];
  }
  return history;
}

}  // namespace mcfront::mcmodel
