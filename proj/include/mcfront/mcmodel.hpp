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

// Model assembly for the LFBE baseline, the single-channel DFT model and the
// multi-channel CAT / DSF / ESF networks, plus Adam, truncated-BPTT training,
// evaluation, checkpoints and the three-stage training procedure.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mcfront/beamform.hpp"
#include "mcfront/gradnet.hpp"
#include "mcfront/signal.hpp"

namespace mcfront::mcmodel {

using gradnet::Matrix;
using Rng = std::mt19937_64;

enum class InputKind { kLfbe, kDft1, kDftMulti };
enum class Variant { kCat, kDsf, kEsf };
enum class InitMode { kBeamformer, kRandom };
enum class FeInit { kMel, kRandom };

std::string to_string(InputKind kind);
std::string to_string(Variant variant);
std::string to_string(InitMode init);
InputKind input_kind_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);
InitMode init_mode_from_string(const std::string& s);

struct McArch {
  Variant variant = Variant::kEsf;
  int directions = 12;
  int bins = 127;
  int channels = 2;
  InitMode init = InitMode::kBeamformer;
  // Bank direction whose weights seed the CAT layer.
  int cat_direction = 0;

  void validate() const;
};

nlohmann::json to_json(const McArch& arch);
McArch mc_arch_from_json(const nlohmann::json& j);

struct ClassifierConfig {
  int layers = 2;
  int cells = 64;
  int n_classes = 8;
};

struct ModelSpec {
  InputKind input_kind = InputKind::kLfbe;
  int bins = 127;
  int n_mels = 64;
  std::optional<McArch> arch;  // required for kDftMulti
  ClassifierConfig classifier;
  double cms_decay = signal::kCmsDecay;

  int channels() const { return arch ? arch->channels : 1; }
  int input_dim() const;
  void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct SequenceSet {
  std::vector<Matrix> features;         // dim x T per utterance
  std::vector<std::vector<int>> labels;  // T per utterance, -1 = ignore

  std::size_t size() const { return features.size(); }
  int dim() const { return features.empty() ? 0 : static_cast<int>(features[0].rows()); }
  long frames() const;
  void add(Matrix f, std::vector<int> l);
  void validate() const;
};

// Per-dimension statistics over every frame of every utterance.
signal::GlobalStats feature_stats(const SequenceSet& set);

// Feature extraction stack on a K-vector of powers: affine (n_mels x K,
// bias 0) -> relu -> log_floor. Mel init copies signal::mel_filterbank, so
// the stack reproduces signal::lfbe; random init draws uniform(0, 2/K).
std::unique_ptr<gradnet::Sequential> build_fe_dnn(const signal::FrameSpec& spec, int n_mels,
                                                  FeInit init, Rng& rng);
void init_fe_dnn(gradnet::Sequential& fe, const signal::FrameSpec& spec, FeInit init, Rng& rng);

// Multi-channel front end mapping a normalized 2KM DFT vector to K powers.
// With a bank, CAT rows take direction cat_direction, DSF rows the realified
// weights of every (bin, direction) with all cross-bin entries 0, and ESF
// blocks the per-bin weights; ESF's combiner averages over directions.
// Random init draws N(0, 1 / real fan-in).
std::unique_ptr<gradnet::Sequential> build_mc_front(const McArch& arch,
                                                    const beamform::BeamformerBank* bank,
                                                    Rng& rng);
// Requires a bank when arch.init is kBeamformer.
void init_mc_front(gradnet::Sequential& front, const McArch& arch,
                   const beamform::BeamformerBank* bank, Rng& rng);

// Layer names used inside a Model.
inline constexpr const char* kInputNorm = "input_norm";
inline constexpr const char* kFront = "mc";
inline constexpr const char* kPow = "pow";
inline constexpr const char* kFe = "fe";
inline constexpr const char* kCms = "cms";
inline constexpr const char* kFeatNorm = "feat_norm";
inline constexpr const char* kOutput = "output";

class Model {
 public:
  // Builds every layer with zero parameters (random/structured init is a
  // separate step so that checkpoints can be loaded into the same graph).
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  gradnet::Sequential& net() { return net_; }

  Matrix forward(const Matrix& x, gradnet::SeqShape shape) { return net_.forward(x, shape); }
  // Runs the layers that precede `layer` (the input itself if it is first).
  Matrix forward_until(const Matrix& x, const std::string& layer, gradnet::SeqShape shape);

  gradnet::Layer& layer(const std::string& name);
  template <typename L>
  L& layer_as(const std::string& name) {
    return dynamic_cast<L&>(layer(name));
  }

  std::vector<gradnet::NamedTensor> tensors() { return net_.tensors(); }

  // Copies every tensor whose name exists in both models and has the same
  // shape; returns the names copied.
  std::vector<std::string> copy_from(Model& other, const std::string& prefix = "");

  void init_classifier(Rng& rng);
  void set_input_stats(const signal::GlobalStats& stats);

 private:
  ModelSpec spec_;
  gradnet::Sequential net_{"model"};
};

// Sets the cms initial mean and the feat_norm constants from the training
// data, as seen at the cms input of `model`.
void fit_feature_norm(Model& model, const SequenceSet& train);


struct HistoryRow;

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 16;
  int epochs = 20;
  int bptt_length = 20;
  std::uint64_t seed = 1;
  // Learning-rate multipliers keyed by tensor-name prefix; the longest
  // matching prefix wins.
  std::map<std::string, double> lr_scale;
  // With a dev set, restore the parameters of the epoch with the lowest dev
  // frame error (epoch 0 is the initial model).
  bool keep_best = true;
  // Called after every logged history row; not serialized.
  std::function<void(const HistoryRow&)> progress;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

class Adam {
 public:
  Adam(std::vector<gradnet::NamedTensor> params, const TrainConfig& config);
  // Applies one update from the accumulated gradients.
  void step();
  long steps() const { return t_; }
  double lr(const std::string& name) const;

 private:
  std::vector<gradnet::NamedTensor> params_;
  std::vector<Matrix> m_, v_;
  std::vector<double> lr_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct EvalResult {
  double loss = 0.0;
  double frame_error = 0.0;
  long frames = 0;
};

EvalResult evaluate(Model& model, const SequenceSet& set, int batch_size = 16);
// (baseline - candidate) / baseline.
double relative_reduction(double candidate, double baseline);

struct HistoryRow {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double frame_error = 0.0;
};

using History = std::vector<HistoryRow>;

std::string history_csv(const History& history);

// Adam with truncated BPTT over lockstep batches of utterances. Logs the
// pre-training dev result as epoch 0, then train and dev rows per epoch.
History train(Model& model, const SequenceSet& train_set, const SequenceSet* dev_set,
              const TrainConfig& config);

struct Checkpoint {
  ModelSpec spec;
  nlohmann::json meta = nlohmann::json::object();
  History history;
  std::map<std::string, Matrix> arrays;
};

inline constexpr int kCheckpointVersion = 1;

Checkpoint make_checkpoint(Model& model, nlohmann::json meta, History history);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt);
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Stage-wise training. Stage 1 trains the classifier on LFBE features;
// stage 2 puts a mel-initialized FE in front of the stage-1 classifier on
// single-channel DFT input; stage 3 adds the multi-channel front end to the
// stage-2 FE and classifier.
struct StageConfig {
  signal::FrameSpec dft_spec = signal::FrameSpec::dft_default();
  ClassifierConfig classifier;
  int n_mels = 64;
  TrainConfig train;
};

struct StageResult {
  std::unique_ptr<Model> model;
  History history;
};

StageResult train_stage1(const SequenceSet& train_set, const SequenceSet& dev_set,
                         const StageConfig& config);
// Stage-2 graph on a DFT-1ch view, initialized from stage 1 but not trained.
std::unique_ptr<Model> init_stage2(Model& stage1, const SequenceSet& train_set,
                                   const StageConfig& config);
StageResult train_stage2(Model& stage1, const SequenceSet& train_set, const SequenceSet& dev_set,
                         const StageConfig& config);
std::unique_ptr<Model> init_stage3(Model& stage2, const SequenceSet& train_set, const McArch& arch,
                                   const beamform::BeamformerBank* bank,
                                   const StageConfig& config);
StageResult train_stage3(Model& stage2, const SequenceSet& train_set, const SequenceSet& dev_set,
                         const McArch& arch, const beamform::BeamformerBank* bank,
                         const StageConfig& config);

// Continues training a copy of `model` on another view of the same task.
StageResult fine_tune(Model& model, const SequenceSet& train_set, const SequenceSet& dev_set,
                      const TrainConfig& config);

}  // namespace mcfront::mcmodel
