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


#include "mcfront/error.hpp"
#include "mcfront/mcmodel.hpp"

namespace mcfront::mcmodel {

namespace {

Rng stage_rng(const StageConfig& config, std::uint64_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.train.seed),
                    static_cast<std::uint32_t>(config.train.seed >> 32),
                    static_cast<std::uint32_t>(stage)};
  return Rng(seq);
}

void require(const SequenceSet& set, const char* view) {
  if (set.size() == 0) throw ValidationError(std::string("missing ") + view + " view");
  set.validate();
}

}  // namespace

StageResult train_stage1(const SequenceSet& train_set, const SequenceSet& dev_set,
                         const StageConfig& config) {
  require(train_set, "LFBE train");
  require(dev_set, "LFBE dev");
  ModelSpec spec;
  spec.input_kind = InputKind::kLfbe;
  spec.n_mels = config.n_mels;
  spec.bins = config.dft_spec.n_bins_kept();
  spec.classifier = config.classifier;
  StageResult r{std::make_unique<Model>(spec), {}};
  Rng rng = stage_rng(config, 1);
  r.model->init_classifier(rng);
  fit_feature_norm(*r.model, train_set);
  r.history = train(*r.model, train_set, &dev_set, config.train);
  return r;
}

std::unique_ptr<Model> init_stage2(Model& stage1, const SequenceSet& train_set,
                                   const StageConfig& config) {
  require(train_set, "DFT-1ch train");
  ModelSpec spec = stage1.spec();
  spec.input_kind = InputKind::kDft1;
  spec.bins = config.dft_spec.n_bins_kept();
  auto model = std::make_unique<Model>(spec);
  model->copy_from(stage1);
  const signal::GlobalStats stats = feature_stats(train_set);
  model->set_input_stats(stats);
  // The FE sees powers of normalized coefficients; folding each bin's
  // variance into the mel weights keeps its output close to the LFBE.
  Rng rng = stage_rng(config, 2);
  auto& fe = model->layer_as<gradnet::Sequential>(kFe);
  init_fe_dnn(fe, config.dft_spec, FeInit::kMel, rng);
  auto& w = dynamic_cast<gradnet::Affine&>(fe.at(0)).weight.value;
  for (Eigen::Index k = 0; k < w.cols(); ++k)
    w.col(k) *= 0.5 * (stats.variance[2 * k] + stats.variance[2 * k + 1]);
  fit_feature_norm(*model, train_set);
  return model;
}

StageResult train_stage2(Model& stage1, const SequenceSet& train_set, const SequenceSet& dev_set,
                         const StageConfig& config) {
  require(dev_set, "DFT-1ch dev");
  StageResult r{init_stage2(stage1, train_set, config), {}};
  r.history = train(*r.model, train_set, &dev_set, config.train);
  return r;
}

std::unique_ptr<Model> init_stage3(Model& stage2, const SequenceSet& train_set, const McArch& arch,
                                   const beamform::BeamformerBank* bank,
                                   const StageConfig& config) {
  require(train_set, "DFT-multichannel train");
  ModelSpec spec = stage2.spec();
  spec.input_kind = InputKind::kDftMulti;
  spec.arch = arch;
  auto model = std::make_unique<Model>(spec);
  model->copy_from(stage2);
  model->set_input_stats(feature_stats(train_set));
  Rng rng = stage_rng(config, 3);
  init_mc_front(model->layer_as<gradnet::Sequential>(kFront), arch, bank, rng);
  return model;
}

StageResult train_stage3(Model& stage2, const SequenceSet& train_set, const SequenceSet& dev_set,
                         const McArch& arch, const beamform::BeamformerBank* bank,
                         const StageConfig& config) {
  require(dev_set, "DFT-multichannel dev");
  StageResult r{init_stage3(stage2, train_set, arch, bank, config), {}};
  r.history = train(*r.model, train_set, &dev_set, config.train);
  return r;
}

StageResult fine_tune(Model& model, const SequenceSet& train_set, const SequenceSet& dev_set,
                      const TrainConfig& config) {
  StageResult r{std::make_unique<Model>(model.spec()), {}};
  r.model->copy_from(model);
  r.history = train(*r.model, train_set, &dev_set, config);
  return r;
}

}  // namespace mcfront::mcmodel
