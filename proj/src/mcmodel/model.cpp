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


#include <cmath>
#include <string>

#include "mcfront/error.hpp"
#include "mcfront/mcmodel.hpp"

namespace mcfront::mcmodel {

using gradnet::Affine;
using gradnet::BlockComplexAffine;
using gradnet::ComplexAffine;
using gradnet::SeqShape;
using gradnet::Sequential;

namespace {

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> names,
             const char* what) {
  for (const auto& [name, value] : names)
    if (s == name) return value;
  throw ValidationError(std::string("unknown ") + what + " '" + s + "'");
}

void fill_normal(Matrix& m, double variance, Rng& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
}

void fill_uniform(Matrix& m, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

std::unique_ptr<Sequential> fe_structure(int bins, int n_mels) {
  auto fe = std::make_unique<Sequential>(kFe);
  fe->emplace<Affine>("affine", n_mels, bins);
  fe->emplace<gradnet::Relu>("relu");
  fe->emplace<gradnet::LogFloor>("log", signal::kLogFloor);
  return fe;
}

std::unique_ptr<Sequential> mc_structure(const McArch& arch) {
  arch.validate();
  const int K = arch.bins, M = arch.channels, D = arch.directions;
  auto mc = std::make_unique<Sequential>(kFront);
  switch (arch.variant) {
    case Variant::kCat:
      mc->emplace<ComplexAffine>("sf", K, M * K);
      mc->emplace<gradnet::PowPairs>("pow");
      break;
    case Variant::kDsf:
      mc->emplace<Affine>("sf", 2 * D * K, 2 * M * K);
      mc->emplace<gradnet::PowPairs>("pow");
      mc->emplace<gradnet::MaxPoolGroups>("pool", D);
      break;
    case Variant::kEsf:
      mc->emplace<BlockComplexAffine>("sf", K, D, M);
      mc->emplace<gradnet::PowPairs>("pow");
      mc->emplace<Affine>("comb", K, D * K);
      mc->emplace<gradnet::Relu>("relu");
      break;
  }
  return mc;
}

void check_bank(const McArch& arch, const beamform::BeamformerBank& bank) {
  if (bank.n_bins() != arch.bins || bank.n_channels() != arch.channels ||
      bank.n_directions() != arch.directions)
    throw ValidationError("bank is " + std::to_string(bank.n_directions()) + " directions x " +
                          std::to_string(bank.n_bins()) + " bins x " +
                          std::to_string(bank.n_channels()) + " channels; architecture needs " +
                          std::to_string(arch.directions) + " x " + std::to_string(arch.bins) +
                          " x " + std::to_string(arch.channels));
}

}  // namespace

std::string to_string(InputKind kind) {
  switch (kind) {
    case InputKind::kLfbe: return "lfbe";
    case InputKind::kDft1: return "dft1";
    case InputKind::kDftMulti: return "dft_mc";
  }
  return "?";
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kCat: return "cat";
    case Variant::kDsf: return "dsf";
    case Variant::kEsf: return "esf";
  }
  return "?";
}

std::string to_string(InitMode init) { return init == InitMode::kBeamformer ? "bf" : "random"; }

InputKind input_kind_from_string(const std::string& s) {
  return parse_enum<InputKind>(
      s, {{"lfbe", InputKind::kLfbe}, {"dft1", InputKind::kDft1}, {"dft_mc", InputKind::kDftMulti}},
      "input kind");
}

Variant variant_from_string(const std::string& s) {
  return parse_enum<Variant>(
      s, {{"cat", Variant::kCat}, {"dsf", Variant::kDsf}, {"esf", Variant::kEsf}}, "architecture");
}

InitMode init_mode_from_string(const std::string& s) {
  return parse_enum<InitMode>(s, {{"bf", InitMode::kBeamformer}, {"random", InitMode::kRandom}},
                              "init mode");
}

void McArch::validate() const {
  if (directions < 1) throw ValidationError("arch.directions must be >= 1");
  if (bins < 1) throw ValidationError("arch.bins must be >= 1");
  if (channels < 1) throw ValidationError("arch.channels must be >= 1");
  if (cat_direction < 0 || cat_direction >= directions)
    throw ValidationError("arch.cat_direction out of range");
}

nlohmann::json to_json(const McArch& a) {
  return {{"variant", to_string(a.variant)}, {"directions", a.directions}, {"bins", a.bins},
          {"channels", a.channels},          {"init", to_string(a.init)},  {"cat_direction", a.cat_direction}};
}

McArch mc_arch_from_json(const nlohmann::json& j) {
  McArch a;
  a.variant = variant_from_string(j.value("variant", "esf"));
  a.directions = j.value("directions", a.directions);
  a.bins = j.value("bins", a.bins);
  a.channels = j.value("channels", a.channels);
  a.init = init_mode_from_string(j.value("init", "bf"));
  a.cat_direction = j.value("cat_direction", 0);
  a.validate();
  return a;
}

int ModelSpec::input_dim() const {
  switch (input_kind) {
    case InputKind::kLfbe: return n_mels;
    case InputKind::kDft1: return 2 * bins;
    case InputKind::kDftMulti: return 2 * bins * channels();
  }
  return 0;
}

void ModelSpec::validate() const {
  if (n_mels < 1 || bins < 1) throw ValidationError("model: n_mels and bins must be >= 1");
  if (classifier.layers < 1 || classifier.cells < 1)
    throw ValidationError("model: classifier needs at least one LSTM layer and cell");
  if (classifier.n_classes < 2) throw ValidationError("model: n_classes must be >= 2");
  if (!(cms_decay > 0 && cms_decay < 1)) throw ValidationError("model: cms_decay must lie in (0, 1)");
  if (input_kind == InputKind::kDftMulti) {
    if (!arch) throw ValidationError("model: multi-channel input needs an arch");
    arch->validate();
    if (arch->bins != bins) throw ValidationError("model: arch.bins differs from bins");
  }
}

nlohmann::json to_json(const ModelSpec& s) {
  nlohmann::json j = {{"input_kind", to_string(s.input_kind)},
                      {"bins", s.bins},
                      {"n_mels", s.n_mels},
                      {"cms_decay", s.cms_decay},
                      {"classifier",
                       {{"layers", s.classifier.layers},
                        {"cells", s.classifier.cells},
                        {"n_classes", s.classifier.n_classes}}}};
  if (s.arch) j["arch"] = to_json(*s.arch);
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.input_kind = input_kind_from_string(j.at("input_kind").get<std::string>());
  s.bins = j.value("bins", s.bins);
  s.n_mels = j.value("n_mels", s.n_mels);
  s.cms_decay = j.value("cms_decay", s.cms_decay);
  if (j.contains("classifier")) {
    const auto& c = j["classifier"];
    s.classifier.layers = c.value("layers", s.classifier.layers);
    s.classifier.cells = c.value("cells", s.classifier.cells);
    s.classifier.n_classes = c.value("n_classes", s.classifier.n_classes);
  }
  if (j.contains("arch")) s.arch = mc_arch_from_json(j["arch"]);
  s.validate();
  return s;
}

std::unique_ptr<Sequential> build_fe_dnn(const signal::FrameSpec& spec, int n_mels, FeInit init,
                                         Rng& rng) {
  auto fe = fe_structure(spec.n_bins_kept(), n_mels);
  init_fe_dnn(*fe, spec, init, rng);
  return fe;
}

void init_fe_dnn(Sequential& fe, const signal::FrameSpec& spec, FeInit init, Rng& rng) {
  auto& affine = dynamic_cast<Affine&>(fe.at(0));
  const int n_mels = static_cast<int>(affine.weight.value.rows());
  const int K = spec.n_bins_kept();
  if (affine.weight.value.cols() != K)
    throw ValidationError("fe: frame spec has " + std::to_string(K) + " bins, layer expects " +
                          std::to_string(affine.weight.value.cols()));
  if (init == FeInit::kMel)
    affine.weight.value = signal::mel_filterbank(n_mels, spec);
  else
    fill_uniform(affine.weight.value, 0.0, 2.0 / K, rng);
  affine.bias.value.setZero();
}

std::unique_ptr<Sequential> build_mc_front(const McArch& arch, const beamform::BeamformerBank* bank,
                                           Rng& rng) {
  auto mc = mc_structure(arch);
  init_mc_front(*mc, arch, bank, rng);
  return mc;
}

void init_mc_front(Sequential& front, const McArch& arch, const beamform::BeamformerBank* bank,
                   Rng& rng) {
  arch.validate();
  const bool use_bank = arch.init == InitMode::kBeamformer;
  if (use_bank) {
    if (!bank) throw ValidationError("beamformer init needs a bank");
    check_bank(arch, *bank);
  }
  const int K = arch.bins, M = arch.channels, D = arch.directions;
  for (auto& t : front.tensors()) t.tensor->value.setZero();

  switch (arch.variant) {
    case Variant::kCat: {
      auto& sf = dynamic_cast<ComplexAffine&>(front.at(0));
      if (!use_bank) {
        fill_normal(sf.weight_re.value, 1.0 / (2.0 * M * K), rng);
        fill_normal(sf.weight_im.value, 1.0 / (2.0 * M * K), rng);
        break;
      }
      for (int k = 0; k < K; ++k)
        for (int m = 0; m < M; ++m) {
          const auto c = std::conj(bank->weights[arch.cat_direction](k, m));
          sf.weight_re.value(k, k * M + m) = c.real();
          sf.weight_im.value(k, k * M + m) = c.imag();
        }
      break;
    }
    case Variant::kDsf: {
      auto& sf = dynamic_cast<Affine&>(front.at(0));
      if (!use_bank) {
        fill_normal(sf.weight.value, 1.0 / (2.0 * M * K), rng);
        break;
      }
      for (int k = 0; k < K; ++k)
        for (int d = 0; d < D; ++d)
          sf.weight.value.block(2 * (k * D + d), 2 * k * M, 2, 2 * M) =
              beamform::realify_weights(bank->weight(d, k)).transpose();
      break;
    }
    case Variant::kEsf: {
      auto& sf = dynamic_cast<BlockComplexAffine&>(front.at(0));
      if (!use_bank) {
        fill_normal(sf.weight_re.value, 1.0 / (2.0 * M), rng);
        fill_normal(sf.weight_im.value, 1.0 / (2.0 * M), rng);
      } else {
        for (int k = 0; k < K; ++k)
          for (int d = 0; d < D; ++d)
            for (int m = 0; m < M; ++m) {
              const auto c = std::conj(bank->weights[d](k, m));
              sf.weight_re.value(k * D + d, m) = c.real();
              sf.weight_im.value(k * D + d, m) = c.imag();
            }
      }
      auto& comb = dynamic_cast<Affine&>(front.at(2));
      for (int k = 0; k < K; ++k)
        comb.weight.value.block(k, k * D, 1, D).setConstant(1.0 / D);
      break;
    }
  }
}

// ----------------------------------------------------------------- Model

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int K = spec_.bins;
  const int feat_dim = spec_.n_mels;
  if (spec_.input_kind != InputKind::kLfbe) {
    net_.emplace<gradnet::Standardize>(kInputNorm, spec_.input_dim());
    if (spec_.input_kind == InputKind::kDft1)
      net_.emplace<gradnet::PowPairs>(kPow);
    else
      net_.add(mc_structure(*spec_.arch));
    net_.add(fe_structure(K, spec_.n_mels));
  }
  net_.emplace<gradnet::CausalMeanSubtract>(kCms, feat_dim, spec_.cms_decay);
  net_.emplace<gradnet::Standardize>(kFeatNorm, feat_dim);
  int in = feat_dim;
  for (int i = 0; i < spec_.classifier.layers; ++i) {
    net_.emplace<gradnet::Lstm>("lstm" + std::to_string(i), in, spec_.classifier.cells);
    in = spec_.classifier.cells;
  }
  net_.emplace<Affine>(kOutput, spec_.classifier.n_classes, in);
  net_.set_input_grad(false);
}

gradnet::Layer& Model::layer(const std::string& name) {
  gradnet::Layer* l = net_.find(name);
  if (!l) throw Error("model has no layer '" + name + "'");
  return *l;
}

Matrix Model::forward_until(const Matrix& x, const std::string& name, SeqShape shape) {
  Matrix h = x;
  for (std::size_t i = 0; i < net_.size(); ++i) {
    if (net_.at(i).name() == name) return h;
    h = net_.at(i).forward(h, shape);
  }
  throw Error("model has no layer '" + name + "'");
}

std::vector<std::string> Model::copy_from(Model& other, const std::string& prefix) {
  std::vector<std::string> copied;
  auto theirs = other.tensors();
  for (auto& mine : tensors()) {
    if (mine.name.rfind(prefix, 0) != 0) continue;
    for (auto& t : theirs)
      if (t.name == mine.name && t.tensor->value.rows() == mine.tensor->value.rows() &&
          t.tensor->value.cols() == mine.tensor->value.cols()) {
        mine.tensor->value = t.tensor->value;
        copied.push_back(mine.name);
        break;
      }
  }
  return copied;
}

void Model::init_classifier(Rng& rng) {
  for (int i = 0; i < spec_.classifier.layers; ++i) {
    auto& lstm = layer_as<gradnet::Lstm>("lstm" + std::to_string(i));
    const double r = 1.0 / std::sqrt(static_cast<double>(lstm.hidden()));
    fill_uniform(lstm.w_input.value, -r, r, rng);
    fill_uniform(lstm.w_recurrent.value, -r, r, rng);
    lstm.bias.value.setZero();
    lstm.bias.value.middleRows(lstm.hidden(), lstm.hidden()).setOnes();
  }
  auto& out = layer_as<Affine>(kOutput);
  const double r = 1.0 / std::sqrt(static_cast<double>(out.weight.value.cols()));
  fill_uniform(out.weight.value, -r, r, rng);
  out.bias.value.setZero();
}

void Model::set_input_stats(const signal::GlobalStats& stats) {
  auto& norm = layer_as<gradnet::Standardize>(kInputNorm);
  if (stats.dim() != norm.shift.value.rows())
    throw ValidationError("input stats have dimension " + std::to_string(stats.dim()) +
                          ", model expects " + std::to_string(norm.shift.value.rows()));
  norm.shift.value.col(0) = stats.mean;
  norm.scale.value.col(0) = stats.variance.cwiseSqrt().cwiseInverse();
}

void fit_feature_norm(Model& model, const SequenceSet& train) {
  train.validate();
  auto& cms = model.layer_as<gradnet::CausalMeanSubtract>(kCms);
  std::vector<Matrix> feats;
  feats.reserve(train.size());
  signal::StatsAccumulator raw;
  for (const auto& f : train.features) {
    model.net().reset_state();
    const SeqShape shape{static_cast<int>(f.cols()), 1};
    feats.push_back(model.forward_until(f, kCms, shape));
    raw.add_rows(feats.back().transpose());
  }
  cms.init_mean.value.col(0) = raw.finish().mean;
  signal::StatsAccumulator centered;
  for (const auto& f : feats) {
    cms.reset_state();
    centered.add_rows(cms.forward(f, {static_cast<int>(f.cols()), 1}).transpose());
  }
  const signal::GlobalStats s = centered.finish();
  auto& norm = model.layer_as<gradnet::Standardize>(kFeatNorm);
  norm.shift.value.col(0) = s.mean;
  norm.scale.value.col(0) = s.variance.cwiseSqrt().cwiseInverse();
  model.net().reset_state();
}

}  // namespace mcfront::mcmodel
