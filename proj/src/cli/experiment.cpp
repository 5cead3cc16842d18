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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "mcfront/error.hpp"
#include "mcfront/experiment.hpp"
#include "mcfront/io.hpp"

namespace mcfront::experiment {

using mcmodel::InitMode;
using mcmodel::SequenceSet;
using mcmodel::Variant;

int worker_threads() {
  if (const char* env = std::getenv("MCFRONT_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1)
      throw ValidationError(std::string("MCFRONT_THREADS must be a positive integer, got '") + env +
                            "'");
    return static_cast<int>(n);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string format_snr(double snr) {
  if (std::isinf(snr)) return "inf";
  std::ostringstream s;
  s << snr;
  return s.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> mic_subset(const beamform::ArrayGeometry& geom, int n) {
  if (n < 1 || n > geom.size())
    throw ValidationError("mics must lie in [1, " + std::to_string(geom.size()) + "], got " +
                          std::to_string(n));
  if (geom.size() == 7) return beamform::reference_mic_subset(n);
  if (n == 1) return {geom.reference_sensor()};
  std::vector<int> s(n);
  for (int i = 0; i < n; ++i) s[i] = i;
  return s;
}

std::string View::name() const {
  const char* kind_name = kind == Kind::kLfbe ? "lfbe" : kind == Kind::kDft ? "dft" : "sd";
  return std::string(kind_name) + ":" + join_ints(mics);
}

View View::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("view '" + text + "' lacks ':<mics>'");
  View v;
  const std::string kind = text.substr(0, colon);
  if (kind == "lfbe") {
    v.kind = Kind::kLfbe;
  } else if (kind == "dft") {
    v.kind = Kind::kDft;
  } else if (kind == "sd") {
    v.kind = Kind::kSdSelected;
  } else {
    throw ValidationError("unknown view kind '" + kind + "'");
  }
  v.mics.clear();
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int m = -1;
    try {
      m = std::stoi(item, &used);
    } catch (const std::exception&) {
    }
    if (m < 0 || used != item.size())
      throw ValidationError("bad microphone index '" + item + "' in view '" + text + "'");
    v.mics.push_back(m);
  }
  if (v.mics.empty()) throw ValidationError("view '" + text + "' names no microphones");
  if (v.kind == Kind::kLfbe && v.mics.size() != 1)
    throw ValidationError("lfbe view takes exactly one microphone");
  return v;
}

void ExperimentConfig::validate() const {
  corpus.validate();
  dft_spec.validate();
  lfbe_spec.validate();
  if (dft_spec.sample_rate_hz != lfbe_spec.sample_rate_hz)
    throw ValidationError("dft_spec and lfbe_spec sample rates differ");
  if (n_mels < 1) throw ValidationError("n_mels must be >= 1");
  if (directions < 1) throw ValidationError("directions must be >= 1");
  if (!(loading >= 0)) throw ValidationError("loading must be >= 0");
  if (classifier.n_classes != corpus.n_classes)
    throw ValidationError("classifier.n_classes must equal corpus.n_classes");
  stage1.validate();
  stage2.validate();
  stage3.validate();
  if (seeds.empty()) throw ValidationError("seeds must not be empty");
  mic_subset(corpus.geometry, mics);
  mic_subset(corpus.geometry, sd_mics);
  for (int m : mic_sweep) mic_subset(corpus.geometry, m);
  plan_runs(*this);  // rejects unknown run tags
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"corpus", scenesim::to_json(c.corpus)},
          {"dft_spec", signal::to_json(c.dft_spec)},
          {"lfbe_spec", signal::to_json(c.lfbe_spec)},
          {"n_mels", c.n_mels},
          {"directions", c.directions},
          {"loading", c.loading},
          {"classifier",
           {{"layers", c.classifier.layers},
            {"cells", c.classifier.cells},
            {"n_classes", c.classifier.n_classes}}},
          {"stage1", mcmodel::to_json(c.stage1)},
          {"stage2", mcmodel::to_json(c.stage2)},
          {"stage3", mcmodel::to_json(c.stage3)},
          {"seeds", c.seeds},
          {"mics", c.mics},
          {"mic_sweep", c.mic_sweep},
          {"sd_mics", c.sd_mics},
          {"runs", c.runs}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  static const std::set<std::string> known{
      "corpus", "dft_spec", "lfbe_spec", "n_mels", "directions", "loading", "classifier", "stage1",
      "stage2", "stage3",   "seeds",     "mics",   "mic_sweep",  "sd_mics", "runs"};
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ValidationError("unknown config field '" + item.key() + "'");
  ExperimentConfig c;
  try {
    if (j.contains("corpus")) c.corpus = scenesim::corpus_config_from_json(j["corpus"]);
    if (j.contains("dft_spec")) c.dft_spec = signal::frame_spec_from_json(j["dft_spec"]);
    if (j.contains("lfbe_spec")) c.lfbe_spec = signal::frame_spec_from_json(j["lfbe_spec"]);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.directions = j.value("directions", c.directions);
    c.loading = j.value("loading", c.loading);
    if (j.contains("classifier")) {
      const auto& k = j["classifier"];
      c.classifier.layers = k.value("layers", c.classifier.layers);
      c.classifier.cells = k.value("cells", c.classifier.cells);
      c.classifier.n_classes = k.value("n_classes", c.classifier.n_classes);
    }
    if (j.contains("stage1")) c.stage1 = mcmodel::train_config_from_json(j["stage1"]);
    if (j.contains("stage2")) c.stage2 = mcmodel::train_config_from_json(j["stage2"]);
    if (j.contains("stage3")) c.stage3 = mcmodel::train_config_from_json(j["stage3"]);
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.mics = j.value("mics", c.mics);
    if (j.contains("mic_sweep")) c.mic_sweep = j["mic_sweep"].get<std::vector<int>>();
    c.sd_mics = j.value("sd_mics", c.sd_mics);
    if (j.contains("runs")) c.runs = j["runs"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::string ExperimentConfig::digest() const { return io::sha1_hex(to_json(*this).dump()); }

std::string mc_tag(Variant variant, InitMode init, int mics) {
  return mcmodel::to_string(variant) + "_" + mcmodel::to_string(init) + "_m" + std::to_string(mics);
}

std::string sd_tag(int mics) { return "sd" + std::to_string(mics); }

std::vector<RunDef> plan_runs(const ExperimentConfig& config) {
  const auto& geom = config.corpus.geometry;
  const View lfbe{View::Kind::kLfbe, {geom.reference_sensor()}};
  const View dft1{View::Kind::kDft, {geom.reference_sensor()}};
  std::vector<RunDef> all{
      {"lfbe", RunKind::kLfbe, "", lfbe, std::nullopt},
      {"dft1", RunKind::kDft1, "lfbe", dft1, std::nullopt},
      {"dft1_ft", RunKind::kFineTune, "dft1", dft1, std::nullopt},
      {sd_tag(config.sd_mics), RunKind::kSdBaseline, "dft1",
       View{View::Kind::kSdSelected, mic_subset(geom, config.sd_mics)}, std::nullopt}};
  auto add_mc = [&](Variant v, InitMode init, int mics) {
    const std::string tag = mc_tag(v, init, mics);
    for (const auto& r : all)
      if (r.tag == tag) return;
    mcmodel::McArch arch;
    arch.variant = v;
    arch.directions = config.directions;
    arch.bins = config.dft_spec.n_bins_kept();
    arch.channels = mics;
    arch.init = init;
    all.push_back({tag, RunKind::kMultichannel, "dft1",
                   View{View::Kind::kDft, mic_subset(geom, mics)}, arch});
  };
  add_mc(Variant::kCat, InitMode::kBeamformer, config.mics);
  add_mc(Variant::kDsf, InitMode::kBeamformer, config.mics);
  add_mc(Variant::kDsf, InitMode::kRandom, config.mics);
  add_mc(Variant::kEsf, InitMode::kBeamformer, config.mics);
  add_mc(Variant::kEsf, InitMode::kRandom, config.mics);
  for (int m : config.mic_sweep) add_mc(Variant::kEsf, InitMode::kBeamformer, m);

  if (config.runs.empty()) return all;
  std::set<std::string> keep;
  for (const auto& tag : config.runs) {
    std::string t = tag;
    while (!t.empty()) {
      auto it = std::find_if(all.begin(), all.end(), [&](const RunDef& r) { return r.tag == t; });
      if (it == all.end()) throw ValidationError("unknown run tag '" + tag + "'");
      keep.insert(t);
      t = it->parent;
    }
  }
  std::vector<RunDef> out;
  for (const auto& r : all)
    if (keep.count(r.tag)) out.push_back(r);
  return out;
}

Featurizer::Featurizer(const ExperimentConfig& config)
    : config_(config), filterbank_(signal::mel_filterbank(config.n_mels, config.lfbe_spec)) {}

const beamform::BeamformerBank& Featurizer::bank(const std::vector<int>& mics) const {
  std::lock_guard lock(mutex_);
  auto& slot = banks_[mics];
  if (!slot)
    slot = std::make_unique<beamform::BeamformerBank>(
        beamform::build_bank(config_.corpus.geometry.subset(mics),
                             beamform::uniform_directions(config_.directions), config_.dft_spec,
                             config_.loading));
  return *slot;
}

Eigen::MatrixXd Featurizer::operator()(const scenesim::Utterance& u, const View& view) const {
  switch (view.kind) {
    case View::Kind::kLfbe:
      return scenesim::lfbe_view(u, view.mics.at(0), config_.dft_spec, config_.lfbe_spec,
                                 filterbank_);
    case View::Kind::kDft:
      return scenesim::dft_view(u, view.mics, config_.dft_spec);
    case View::Kind::kSdSelected:
      return scenesim::sd_selected_view(u, view.mics, bank(view.mics));
  }
  throw Error("unreachable view kind");
}

std::vector<SequenceSet> featurize(const ExperimentConfig& config, const Featurizer& featurizer,
                                   const std::vector<scenesim::SceneSpec>& scenes,
                                   const std::vector<View>& views, int threads) {
  const int n = static_cast<int>(scenes.size());
  const std::size_t V = views.size();
  std::vector<mcmodel::Matrix> features(n * V);
  std::vector<std::vector<int>> labels(n);
  for (const auto& v : views)
    if (v.kind == View::Kind::kSdSelected) featurizer.bank(v.mics);
  parallel_for(n, threads, [&](int i) {
    const scenesim::Utterance u = scenesim::mix_scene(scenes[i], config.dft_spec);
    for (std::size_t v = 0; v < V; ++v) features[i * V + v] = featurizer(u, views[v]);
    labels[i] = u.labels;
  });
  std::vector<SequenceSet> sets(V);
  for (std::size_t v = 0; v < V; ++v) {
    for (int i = 0; i < n; ++i) sets[v].add(std::move(features[i * V + v]), labels[i]);
    sets[v].validate();
  }
  return sets;
}

SequenceSet featurize(const ExperimentConfig& config, const Featurizer& featurizer,
                      const std::vector<scenesim::SceneSpec>& scenes, const View& view,
                      int threads) {
  return std::move(featurize(config, featurizer, scenes, std::vector<View>{view}, threads)[0]);
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "seed,run,split,snr_db,frames,loss,frame_error,config_digest\n";
  for (const auto& r : rows)
    out += std::to_string(r.seed) + ',' + r.run + ',' + r.split + ',' + r.snr_db + ',' +
           std::to_string(r.frames) + ',' + format_double(r.loss) + ',' +
           format_double(r.frame_error) + ',' + r.config_digest + '\n';
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "seed,run,split,snr_db,frames,loss,frame_error,config_digest")
    throw ValidationError("results CSV has an unexpected header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8)
      throw ValidationError("results CSV line " + std::to_string(line_no) + " has " +
                            std::to_string(f.size()) + " fields, expected 8");
    try {
      ResultRow r;
      r.seed = std::stoull(f[0]);
      r.run = f[1];
      r.split = f[2];
      r.snr_db = f[3];
      r.frames = std::stol(f[4]);
      r.loss = std::stod(f[5]);
      r.frame_error = std::stod(f[6]);
      r.config_digest = f[7];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw ValidationError("results CSV line " + std::to_string(line_no) + " is malformed");
    }
  }
  return rows;
}

std::vector<ResultRow> evaluate_test(mcmodel::Model& model, const SequenceSet& test,
                                     const std::vector<scenesim::SceneSpec>& scenes) {
  if (scenes.size() != test.size())
    throw ValidationError("test scenes and features differ in count");
  std::vector<ResultRow> rows;
  const auto all = mcmodel::evaluate(model, test);
  rows.push_back({0, "", "test", "all", all.frames, all.loss, all.frame_error, ""});
  std::vector<double> buckets;
  for (const auto& s : scenes) buckets.push_back(s.snr_db);
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  if (buckets.size() < 2) return rows;
  for (double b : buckets) {
    SequenceSet subset;
    for (std::size_t i = 0; i < scenes.size(); ++i)
      if (scenes[i].snr_db == b) subset.add(test.features[i], test.labels[i]);
    const auto e = mcmodel::evaluate(model, subset);
    rows.push_back({0, "", "test", format_snr(b), e.frames, e.loss, e.frame_error, ""});
  }
  return rows;
}

namespace {

struct SplitSets {
  SequenceSet train, dev, test;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<RunOutput> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  ExperimentConfig c = config;
  c.corpus.seed = seed;
  c.stage1.seed = c.stage2.seed = c.stage3.seed = seed;
  const std::string digest = config.digest();
  const int threads = worker_threads();
  const auto train_scenes = scenesim::corpus_split(c.corpus, scenesim::Split::kTrain);
  const auto dev_scenes = scenesim::corpus_split(c.corpus, scenesim::Split::kDev);
  const auto test_scenes = scenesim::corpus_split(c.corpus, scenesim::Split::kTest);
  const std::vector<RunDef> plan = plan_runs(c);
  const Featurizer featurizer(c);

  std::map<std::string, SplitSets> views;
  std::map<std::string, std::unique_ptr<mcmodel::Model>> parents;
  const std::filesystem::path seed_dir =
      out_dir.empty() ? out_dir : out_dir / ("seed_" + std::to_string(seed));
  if (!seed_dir.empty()) std::filesystem::create_directories(seed_dir);

  // One synthesis pass per split computes every view the plan needs.
  std::vector<View> needed;
  for (const auto& run : plan)
    if (std::find(needed.begin(), needed.end(), run.view) == needed.end())
      needed.push_back(run.view);
  {
    auto train = featurize(c, featurizer, train_scenes, needed, threads);
    auto dev = featurize(c, featurizer, dev_scenes, needed, threads);
    auto test = featurize(c, featurizer, test_scenes, needed, threads);
    for (std::size_t v = 0; v < needed.size(); ++v)
      views.emplace(needed[v].name(),
                    SplitSets{std::move(train[v]), std::move(dev[v]), std::move(test[v])});
  }

  std::vector<RunOutput> outputs;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const RunDef& run = plan[i];
    const auto started = std::chrono::steady_clock::now();
    const std::string view_name = run.view.name();
    const SplitSets& sets = views.at(view_name);

    auto progress = [&](const mcmodel::HistoryRow& row) {
      if (log && row.split == "dev")
        *log << "  seed " << seed << ' ' << run.tag << " epoch " << row.epoch << " dev loss "
             << fixed(row.loss, 4) << " error " << fixed(row.frame_error, 4) << std::endl;
    };
    mcmodel::StageConfig stage{c.dft_spec, c.classifier, c.n_mels, {}};
    mcmodel::StageResult result;
    switch (run.kind) {
      case RunKind::kLfbe:
        stage.train = c.stage1;
        stage.train.progress = progress;
        result = mcmodel::train_stage1(sets.train, sets.dev, stage);
        break;
      case RunKind::kDft1:
        stage.train = c.stage2;
        stage.train.progress = progress;
        result = mcmodel::train_stage2(*parents.at(run.parent), sets.train, sets.dev, stage);
        break;
      case RunKind::kFineTune:
      case RunKind::kSdBaseline: {
        mcmodel::TrainConfig t = c.stage3;
        t.progress = progress;
        result = mcmodel::fine_tune(*parents.at(run.parent), sets.train, sets.dev, t);
        break;
      }
      case RunKind::kMultichannel: {
        stage.train = c.stage3;
        stage.train.progress = progress;
        const beamform::BeamformerBank* bank =
            run.arch->init == InitMode::kBeamformer ? &featurizer.bank(run.view.mics) : nullptr;
        result = mcmodel::train_stage3(*parents.at(run.parent), sets.train, sets.dev, *run.arch,
                                       bank, stage);
        break;
      }
    }

    RunOutput out{run, seed, result.history, {}};
    // The returned model may be an earlier epoch than the last one logged.
    const auto dev = mcmodel::evaluate(*result.model, sets.dev);
    out.results.push_back(
        {seed, run.tag, "dev", "all", sets.dev.frames(), dev.loss, dev.frame_error, digest});
    for (auto row : evaluate_test(*result.model, sets.test, test_scenes)) {
      row.seed = seed;
      row.run = run.tag;
      row.config_digest = digest;
      out.results.push_back(row);
    }

    if (!seed_dir.empty()) {
      nlohmann::json meta{{"run", run.tag},         {"seed", seed},
                          {"view", view_name},      {"parent", run.parent},
                          {"config_digest", digest}, {"config", to_json(c)}};
      mcmodel::save_checkpoint(seed_dir / (run.tag + ".ckpt"),
                               mcmodel::make_checkpoint(*result.model, meta, result.history));
      io::write_file_atomic(seed_dir / (run.tag + ".history.csv"),
                            mcmodel::history_csv(result.history));
    }
    if (log) {
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      *log << "seed " << seed << ' ' << run.tag << ": dev error "
           << fixed(out.results.front().frame_error, 4) << ", test error "
           << fixed(out.results[1].frame_error, 4) << " (" << fixed(seconds, 1) << " s)"
           << std::endl;
    }

    // Keep models and views only while later runs still need them.
    bool is_parent = false;
    std::set<std::string> needed_views;
    for (std::size_t j = i + 1; j < plan.size(); ++j) {
      is_parent |= plan[j].parent == run.tag;
      needed_views.insert(plan[j].view.name());
    }
    if (is_parent) parents[run.tag] = std::move(result.model);
    for (auto it = parents.begin(); it != parents.end();) {
      bool used = false;
      for (std::size_t j = i + 1; j < plan.size(); ++j) used |= plan[j].parent == it->first;
      it = used ? std::next(it) : parents.erase(it);
    }
    for (auto it = views.begin(); it != views.end();)
      it = needed_views.count(it->first) ? std::next(it) : views.erase(it);
    outputs.push_back(std::move(out));
  }
  return outputs;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    io::write_file_atomic(out_dir / "config.json", to_json(config).dump(1) + "\n");
  }
  std::vector<ResultRow> rows;
  for (std::uint64_t seed : config.seeds) {
    for (auto& out : run_seed(config, seed, out_dir, log))
      rows.insert(rows.end(), out.results.begin(), out.results.end());
    if (!out_dir.empty()) io::write_file_atomic(out_dir / "results.csv", results_csv(rows));
  }
  return rows;
}

}  // namespace mcfront::experiment
