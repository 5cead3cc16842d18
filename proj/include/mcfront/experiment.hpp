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

// Experiment plumbing shared by the mcfront tool and the acceptance suite:
// feature views over simulated utterances, the per-seed run plan, the runner
// that writes checkpoints and result tables, and the report builder.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcfront/beamform.hpp"
#include "mcfront/mcmodel.hpp"
#include "mcfront/scenesim.hpp"
#include "mcfront/signal.hpp"

namespace mcfront::experiment {

// Worker count from MCFRONT_THREADS, defaulting to the hardware concurrency.
int worker_threads();
// Runs fn(0..n-1) on up to `threads` workers. Each index must write only its
// own output slot; the first exception is rethrown after all workers join.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Which features an utterance is turned into.
struct View {
  enum class Kind { kLfbe, kDft, kSdSelected };
  Kind kind = Kind::kDft;
  std::vector<int> mics{0};

  // "lfbe:0", "dft:1,4", "sd:0,1,2,3,4,5,6".
  std::string name() const;
  static View parse(const std::string& text);
  bool operator==(const View&) const = default;
};

struct ExperimentConfig {
  scenesim::CorpusConfig corpus;
  signal::FrameSpec dft_spec = signal::FrameSpec::dft_default();
  signal::FrameSpec lfbe_spec = signal::FrameSpec::lfbe_default();
  int n_mels = 64;
  int directions = 12;
  double loading = beamform::kDefaultLoading;
  mcmodel::ClassifierConfig classifier;
  mcmodel::TrainConfig stage1;
  mcmodel::TrainConfig stage2;
  // Also the budget of the single-channel and SD-baseline fine-tuning runs.
  mcmodel::TrainConfig stage3;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int mics = 2;
  std::vector<int> mic_sweep{1, 2, 4};
  int sd_mics = 7;
  // Subset of run tags to execute (plus their prerequisites); empty = all.
  std::vector<std::string> runs;

  void validate() const;
  // SHA-1 of the canonical JSON form.
  std::string digest() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

enum class RunKind { kLfbe, kDft1, kFineTune, kSdBaseline, kMultichannel };

struct RunDef {
  std::string tag;
  RunKind kind = RunKind::kLfbe;
  std::string parent;  // tag of the model this run starts from
  View view;
  std::optional<mcmodel::McArch> arch;
};

// Sensor indices of the N-microphone configuration of a geometry: the
// reference subsets for the 7-sensor array, otherwise the first N sensors
// (the reference sensor alone for N = 1).
std::vector<int> mic_subset(const beamform::ArrayGeometry& geom, int n);

// Tags: lfbe, dft1, dft1_ft, sd<N>, <cat|dsf|esf>_<bf|random>_m<M>.
std::string mc_tag(mcmodel::Variant variant, mcmodel::InitMode init, int mics);
std::string sd_tag(int mics);

// Every run of one seed in execution order, parents first.
std::vector<RunDef> plan_runs(const ExperimentConfig& config);

// Builds the feature matrix of one utterance for a view.
class Featurizer {
 public:
  explicit Featurizer(const ExperimentConfig& config);
  Eigen::MatrixXd operator()(const scenesim::Utterance& u, const View& view) const;
  // SD bank over the given sensors of the corpus geometry.
  const beamform::BeamformerBank& bank(const std::vector<int>& mics) const;

 private:
  const ExperimentConfig& config_;
  Eigen::MatrixXd filterbank_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, std::unique_ptr<beamform::BeamformerBank>> banks_;
};

// Synthesizes each scene once and builds every requested view from it.
std::vector<mcmodel::SequenceSet> featurize(const ExperimentConfig& config,
                                            const Featurizer& featurizer,
                                            const std::vector<scenesim::SceneSpec>& scenes,
                                            const std::vector<View>& views, int threads);
mcmodel::SequenceSet featurize(const ExperimentConfig& config, const Featurizer& featurizer,
                               const std::vector<scenesim::SceneSpec>& scenes, const View& view,
                               int threads);

// One evaluation row. split is "dev" (final epoch) or "test"; snr_db is
// "all" or the bucket value.
struct ResultRow {
  std::uint64_t seed = 0;
  std::string run;
  std::string split;
  std::string snr_db;
  long frames = 0;
  double loss = 0.0;
  double frame_error = 0.0;
  std::string config_digest;
};

std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

// Test-set evaluation overall and per SNR bucket.
std::vector<ResultRow> evaluate_test(mcmodel::Model& model, const mcmodel::SequenceSet& test,
                                     const std::vector<scenesim::SceneSpec>& scenes);

struct RunOutput {
  RunDef def;
  std::uint64_t seed = 0;
  mcmodel::History history;
  std::vector<ResultRow> results;
};

// Trains every planned run for one seed. Checkpoints and histories go to
// out_dir/seed_<seed>/ when out_dir is non-empty.
std::vector<RunOutput> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                const std::filesystem::path& out_dir, std::ostream* log);

// All seeds; writes config.json and results.csv into out_dir.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir, std::ostream* log);

// Directional checks on the comparative findings.
struct Finding {
  int criterion = 0;
  bool pass = false;
  std::string detail;
};

struct ReportOptions {
  std::string baseline = "sd7";
  std::string single_channel = "dft1_ft";
  int mics = 2;
};

std::vector<Finding> check_findings(const std::vector<ResultRow>& rows,
                                    const ReportOptions& options);

struct Report {
  std::map<std::string, std::string> files;  // file name -> contents
  std::string summary;
};

// Relative frame-error reduction tables (overall and per SNR bucket), the
// mic-count sweep, the init ablation and SVG bar charts of each.
Report make_report(const std::vector<ResultRow>& rows, const ReportOptions& options);

// Finite-difference checks of every layer kind and every architecture at
// tiny sizes, with the pass threshold of each.
struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  long checked = 0;
  std::string worst;

  bool pass() const { return max_rel_error < threshold; }
};

inline constexpr double kLayerGradThreshold = 1e-6;
inline constexpr double kModelGradThreshold = 1e-4;

std::vector<GradCheckRow> gradcheck_suite();
std::string gradcheck_table(const std::vector<GradCheckRow>& rows);

// Minimal SVG bar chart.
std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, double>>& bars);

}  // namespace mcfront::experiment
