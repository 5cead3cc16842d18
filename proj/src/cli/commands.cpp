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
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcfront/cli.hpp"
#include "mcfront/error.hpp"
#include "mcfront/experiment.hpp"
#include "mcfront/io.hpp"
#include "mcfront/wav_io.hpp"

namespace mcfront::cli {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;
using experiment::View;

namespace {

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ValidationError(flag + " is required");
  if (!fs::exists(path)) throw ValidationError(flag + ": no such file or directory: " + path);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json parse_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  require_file(path, "--config");
  return experiment::load_experiment_config(path);
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::vector<nlohmann::json> records;
  std::istringstream in(io::read_file(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return records;
}

std::string jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

std::vector<scenesim::Split> selected_splits(const std::string& split) {
  if (split == "all") return {scenesim::Split::kTrain, scenesim::Split::kDev, scenesim::Split::kTest};
  return {scenesim::split_from_string(split)};
}

// Rebuilds an utterance from a synth manifest record.
scenesim::Utterance load_utterance(const fs::path& data_dir, const nlohmann::json& record) {
  scenesim::Utterance u;
  u.spec = scenesim::scene_spec_from_json(record.at("spec"));
  const auto wav = signal::read_wav(data_dir / record.at("wav_path").get<std::string>(),
                                    u.spec.sample_rate_hz);
  u.channels = wav.channels / record.at("scale").get<double>();
  u.labels = signal::read_labels(data_dir / record.at("label_path").get<std::string>());
  return u;
}

// ---------------------------------------------------------------- design

struct DesignArgs {
  std::string geometry = "reference7";
  std::string config;
  std::string out;
  int mics = 0;
  int directions = 12;
  double loading = beamform::kDefaultLoading;
};

int cmd_design(const DesignArgs& a, std::ostream& out) {
  beamform::ArrayGeometry geom;
  if (a.geometry == "reference7") {
    geom = beamform::ArrayGeometry::reference7();
  } else {
    require_file(a.geometry, "--geometry");
    geom = beamform::load_geometry(a.geometry);
  }
  if (a.mics > 0) geom = geom.subset(experiment::mic_subset(geom, a.mics));
  if (a.directions < 1) throw ValidationError("--directions must be >= 1");
  const ExperimentConfig config = config_or_default(a.config);
  const auto bank = beamform::build_bank(geom, beamform::uniform_directions(a.directions),
                                         config.dft_spec, a.loading);
  out << "bank: " << bank.n_channels() << " mics, " << bank.n_directions() << " directions, "
      << bank.n_bins() << " bins, loading " << a.loading << "\n";
  out << "max |w^H v - 1| = " << bank.max_distortion_error() << "\n";
  if (!a.out.empty()) {
    io::write_file_atomic(a.out, beamform::bank_to_json(bank).dump(1) + "\n");
    out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
  std::string split = "all";
  int utterances = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  require_file(a.spec, "--spec");
  if (a.out.empty()) throw ValidationError("--out is required");
  scenesim::CorpusConfig corpus = scenesim::corpus_config_from_json(parse_json_file(a.spec));
  if (a.seed) corpus.seed = *a.seed;
  const auto splits = selected_splits(a.split);
  if (a.utterances < 0) throw ValidationError("--utterances must be >= 0");
  if (a.utterances > 0)
    for (auto s : splits) {
      if (s == scenesim::Split::kTrain) corpus.train_utterances = a.utterances;
      if (s == scenesim::Split::kDev) corpus.dev_utterances = a.utterances;
      if (s == scenesim::Split::kTest) corpus.test_utterances = a.utterances;
    }
  corpus.validate();
  fs::create_directories(a.out);
  std::vector<nlohmann::json> records;
  const int threads = experiment::worker_threads();
  for (auto split : splits) {
    const std::string name = scenesim::to_string(split);
    const auto scenes = scenesim::corpus_split(corpus, split);
    fs::create_directories(fs::path(a.out) / name);
    std::vector<nlohmann::json> split_records(scenes.size());
    experiment::parallel_for(static_cast<int>(scenes.size()), threads, [&](int i) {
      const auto u = scenesim::mix_scene(scenes[i]);
      const double peak = u.channels.cwiseAbs().maxCoeff();
      const double scale = peak > 0 ? 0.9 / peak : 1.0;
      const std::string stem = name + "/" + name + "_" + std::to_string(i);
      signal::write_wav(fs::path(a.out) / (stem + ".wav"),
                        {scenes[i].sample_rate_hz, u.channels * scale});
      signal::write_labels(fs::path(a.out) / (stem + ".lab"), u.labels);
      split_records[i] = {{"wav_path", stem + ".wav"},
                          {"label_path", stem + ".lab"},
                          {"split", name},
                          {"spec_digest", scenes[i].digest()},
                          {"spec", scenesim::to_json(scenes[i])},
                          {"scale", scale},
                          {"measured_snr_db", std::isinf(u.measured_snr_db)
                                                  ? nlohmann::json(nullptr)
                                                  : nlohmann::json(u.measured_snr_db)}};
    });
    records.insert(records.end(), split_records.begin(), split_records.end());
    out << name << ": " << scenes.size() << " utterances\n";
  }
  io::write_file_atomic(fs::path(a.out) / "corpus.json", scenesim::to_json(corpus).dump(1) + "\n");
  io::write_file_atomic(fs::path(a.out) / "manifest.jsonl", jsonl(records));
  out << "wrote " << records.size() << " utterances to " << a.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------- featurize

struct FeaturizeArgs {
  std::string data;
  std::string out;
  std::string view;
  std::string config;
  std::string split = "all";
  int mics = 0;
};

View resolve_view(const std::string& view, int mics, const ExperimentConfig& config) {
  if (!view.empty() && mics > 0) throw ValidationError("give either --view or --mics, not both");
  if (!view.empty()) return View::parse(view);
  if (mics > 0) return View{View::Kind::kDft, experiment::mic_subset(config.corpus.geometry, mics)};
  throw ValidationError("--view or --mics is required");
}

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out) {
  require_file(a.data, "--data");
  if (a.out.empty()) throw ValidationError("--out is required");
  const ExperimentConfig config = config_or_default(a.config);
  const View view = resolve_view(a.view, a.mics, config);
  require_file((fs::path(a.data) / "manifest.jsonl").string(), "--data manifest");
  std::vector<nlohmann::json> records;
  for (auto& r : read_jsonl(fs::path(a.data) / "manifest.jsonl"))
    if (a.split == "all" || r.at("split") == a.split) records.push_back(std::move(r));
  fs::create_directories(a.out);
  const experiment::Featurizer featurizer(config);
  std::vector<nlohmann::json> outputs(records.size());
  experiment::parallel_for(static_cast<int>(records.size()), experiment::worker_threads(),
                           [&](int i) {
                             const auto u = load_utterance(a.data, records[i]);
                             const Eigen::MatrixXd f = featurizer(u, view);
                             const std::string stem =
                                 fs::path(records[i].at("wav_path").get<std::string>())
                                     .stem()
                                     .string();
                             signal::write_features(fs::path(a.out) / (stem + ".mcf"), f);
                             signal::write_labels(fs::path(a.out) / (stem + ".lab"), u.labels);
                             outputs[i] = {{"feature_path", stem + ".mcf"},
                                           {"label_path", stem + ".lab"},
                                           {"split", records[i].at("split")},
                                           {"view", view.name()},
                                           {"spec_digest", records[i].at("spec_digest")},
                                           {"snr_db", records[i].at("spec").value(
                                                          "snr_db", nlohmann::json(nullptr))}};
                           });
  io::write_file_atomic(fs::path(a.out) / "features.jsonl", jsonl(outputs));
  out << "featurized " << outputs.size() << " utterances as " << view.name() << " into " << a.out
      << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string arch;
  std::string init = "bf";
  int mics = 0;
  std::vector<std::string> runs;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  if (a.out.empty()) throw ValidationError("--out is required");
  ExperimentConfig config = config_or_default(a.config);
  if (a.seed) config.seeds = {*a.seed};
  std::vector<std::string> runs = a.runs;
  if (!a.arch.empty()) {
    const int mics = a.mics > 0 ? a.mics : config.mics;
    runs.push_back(experiment::mc_tag(mcmodel::variant_from_string(a.arch),
                                      mcmodel::init_mode_from_string(a.init), mics));
    if (std::find(config.mic_sweep.begin(), config.mic_sweep.end(), mics) ==
            config.mic_sweep.end() &&
        mics != config.mics)
      config.mic_sweep.push_back(mics);
  } else if (a.mics > 0) {
    throw ValidationError("--mics needs --arch");
  }
  if (!runs.empty()) config.runs = runs;
  config.validate();
  const auto rows = experiment::run_experiment(config, a.out, &out);
  out << "wrote " << rows.size() << " result rows to " << (fs::path(a.out) / "results.csv").string()
      << " (config " << config.digest() << ")\n";
  return kExitOk;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::string split = "test";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.model, "--model");
  require_file(a.data, "--data");
  const mcmodel::Checkpoint ckpt = mcmodel::load_checkpoint(a.model);
  auto model = mcmodel::model_from_checkpoint(ckpt);
  if (!ckpt.meta.contains("view"))
    throw ValidationError("--model: checkpoint metadata lacks the feature view");
  const View view = View::parse(ckpt.meta.at("view").get<std::string>());
  const fs::path dir(a.data);
  mcmodel::SequenceSet set;
  std::vector<std::string> used;
  auto wanted = [&](const nlohmann::json& r) { return a.split == "all" || r.at("split") == a.split; };
  if (fs::exists(dir / "features.jsonl")) {
    for (const auto& r : read_jsonl(dir / "features.jsonl")) {
      if (!wanted(r)) continue;
      if (r.at("view") != view.name())
        throw ValidationError("--data: features are " + r.at("view").get<std::string>() +
                              ", model expects " + view.name());
      set.add(signal::read_features(dir / r.at("feature_path").get<std::string>()),
              signal::read_labels(dir / r.at("label_path").get<std::string>()));
    }
  } else if (fs::exists(dir / "manifest.jsonl")) {
    const ExperimentConfig config = ckpt.meta.contains("config")
                                        ? experiment::experiment_config_from_json(ckpt.meta["config"])
                                        : ExperimentConfig{};
    const experiment::Featurizer featurizer(config);
    std::vector<nlohmann::json> records;
    for (auto& r : read_jsonl(dir / "manifest.jsonl"))
      if (wanted(r)) records.push_back(std::move(r));
    std::vector<mcmodel::Matrix> features(records.size());
    std::vector<std::vector<int>> labels(records.size());
    experiment::parallel_for(static_cast<int>(records.size()), experiment::worker_threads(),
                             [&](int i) {
                               const auto u = load_utterance(dir, records[i]);
                               features[i] = featurizer(u, view);
                               labels[i] = u.labels;
                             });
    for (std::size_t i = 0; i < records.size(); ++i)
      set.add(std::move(features[i]), std::move(labels[i]));
  } else {
    throw ValidationError("--data: " + a.data + " has neither manifest.jsonl nor features.jsonl");
  }
  if (set.size() == 0) throw ValidationError("--split: no utterances in split '" + a.split + "'");
  const auto e = mcmodel::evaluate(*model, set);
  out << "frame_error " << fixed(e.frame_error, 4) << " loss " << fixed(e.loss, 4) << " over "
      << e.frames << " frames (" << set.size() << " utterances)\n";
  if (!a.out.empty())
    io::write_file_atomic(a.out, nlohmann::json{{"model", a.model},
                                                {"split", a.split},
                                                {"frames", e.frames},
                                                {"loss", e.loss},
                                                {"frame_error", e.frame_error}}
                                         .dump(1) +
                                     "\n");
  return kExitOk;
}

// ------------------------------------------------------------- gradcheck

int cmd_gradcheck(bool all, const std::string& check, std::ostream& out) {
  if (!all && check.empty()) throw ValidationError("give --all or --check NAME");
  auto rows = experiment::gradcheck_suite();
  if (!all) {
    std::erase_if(rows, [&](const auto& r) { return r.name != check; });
    if (rows.empty()) throw ValidationError("--check: unknown check '" + check + "'");
  }
  out << experiment::gradcheck_table(rows);
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass(); });
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> results;
  std::string out;
  experiment::ReportOptions options;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.results.empty()) throw ValidationError("--results is required");
  if (a.out.empty()) throw ValidationError("--out is required");
  std::vector<experiment::ResultRow> rows;
  for (const auto& r : a.results) {
    require_file(r, "--results");
    const fs::path p = fs::is_directory(r) ? fs::path(r) / "results.csv" : fs::path(r);
    require_file(p.string(), "--results");
    auto part = experiment::parse_results_csv(io::read_file(p));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto report = experiment::make_report(rows, a.options);
  fs::create_directories(a.out);
  for (const auto& [name, content] : report.files)
    io::write_file_atomic(fs::path(a.out) / name, content);
  io::write_file_atomic(fs::path(a.out) / "summary.txt", report.summary);
  out << report.summary;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-channel acoustic front-end toolkit", "mcfront"};
  app.require_subcommand(1);

  DesignArgs design;
  auto* c_design = app.add_subcommand("design", "Design a super-directive beamformer bank");
  c_design->add_option("--geometry", design.geometry, "reference7 or a geometry JSON file");
  c_design->add_option("--mics", design.mics, "Use the N-microphone subset");
  c_design->add_option("--directions", design.directions, "Number of look directions");
  c_design->add_option("--loading", design.loading, "Diagonal loading");
  c_design->add_option("--config", design.config, "Experiment config for the frame spec");
  c_design->add_option("--out", design.out, "Bank JSON output");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a labeled multi-channel corpus");
  c_synth->add_option("--spec", synth.spec, "Corpus recipe JSON");
  c_synth->add_option("--out", synth.out, "Output directory");
  c_synth->add_option("--split", synth.split, "train, dev, test or all");
  c_synth->add_option("--utterances", synth.utterances, "Utterances per selected split");
  c_synth->add_option("--seed", synth.seed, "Corpus seed");

  FeaturizeArgs feat;
  auto* c_feat = app.add_subcommand("featurize", "Compute a feature view of a synth corpus");
  c_feat->add_option("--data", feat.data, "Synth output directory");
  c_feat->add_option("--out", feat.out, "Output directory");
  c_feat->add_option("--view", feat.view, "lfbe:<mic>, dft:<mics> or sd:<mics>");
  c_feat->add_option("--mics", feat.mics, "DFT view of the N-microphone subset");
  c_feat->add_option("--config", feat.config, "Experiment config for the frame specs");
  c_feat->add_option("--split", feat.split, "train, dev, test or all");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Run stage-wise training for an experiment");
  c_train->add_option("--config", train.config, "Experiment config JSON");
  c_train->add_option("--out", train.out, "Output directory");
  c_train->add_option("--seed", train.seed, "Run a single seed");
  c_train->add_option("--arch", train.arch, "cat, dsf or esf")
      ->check(CLI::IsMember({"cat", "dsf", "esf"}));
  c_train->add_option("--init", train.init, "bf or random")->check(CLI::IsMember({"bf", "random"}));
  c_train->add_option("--mics", train.mics, "Microphones for --arch")
      ->check(CLI::IsMember({1, 2, 4, 7}));
  c_train->add_option("--run", train.runs, "Run tag to train (repeatable)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  c_eval->add_option("--model", eval.model, "Checkpoint");
  c_eval->add_option("--data", eval.data, "Synth or featurize output directory");
  c_eval->add_option("--split", eval.split, "train, dev, test or all");
  c_eval->add_option("--out", eval.out, "Result JSON output");

  bool gc_all = false;
  std::string gc_check;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  c_grad->add_flag("--all", gc_all, "Run every check");
  c_grad->add_option("--check", gc_check, "Run one named check");

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Build result tables and charts");
  c_report->add_option("--results", report.results, "Result directories or CSV files");
  c_report->add_option("--baseline", report.options.baseline, "Baseline run tag");
  c_report->add_option("--single-channel", report.options.single_channel,
                       "Single-channel reference run tag");
  c_report->add_option("--mics", report.options.mics, "Microphones of the main comparison");
  c_report->add_option("--out", report.out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mcfront: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (c_design->parsed()) return cmd_design(design, out);
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_feat->parsed()) return cmd_featurize(feat, out);
    if (c_train->parsed()) return cmd_train(train, out);
    if (c_eval->parsed()) return cmd_eval(eval, out);
    if (c_grad->parsed()) return cmd_gradcheck(gc_all, gc_check, out);
    if (c_report->parsed()) return cmd_report(report, out);
  } catch (const ValidationError& e) {
    err << "mcfront: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "mcfront: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace mcfront::cli
