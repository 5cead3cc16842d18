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

#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mcfront/beamform.hpp"
#include "mcfront/cli.hpp"
#include "mcfront/experiment.hpp"
#include "mcfront/io.hpp"
#include "mcfront/mcmodel.hpp"
#include "mcfront/wav_io.hpp"

namespace mcfront::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("mcfront_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // A four-utterance corpus of half-second scenes.
  std::string write_corpus() const {
    scenesim::CorpusConfig c;
    c.train_utterances = 2;
    c.dev_utterances = 1;
    c.test_utterances = 1;
    c.duration_s = 0.5;
    io::write_file_atomic(path("corpus.json"), scenesim::to_json(c).dump());
    return path("corpus.json");
  }

  fs::path dir_;
};

TEST_F(CliTest, DesignSingleMicBankIsAllOnes) {
  const auto geom = beamform::ArrayGeometry::reference7().subset({0});
  io::write_file_atomic(path("one.json"), beamform::geometry_to_json(geom).dump());
  for (const auto& args : {std::vector<std::string>{"design", "--geometry", path("one.json"),
                                                    "--directions", "12", "--out", path("b1.json")},
                           std::vector<std::string>{"design", "--mics", "1", "--directions", "12",
                                                    "--out", path("b1.json")}}) {
    const auto r = run(args);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("1 mics, 12 directions, 127 bins"), std::string::npos) << r.out;
    const auto bank =
        beamform::bank_from_json(nlohmann::json::parse(io::read_file(path("b1.json"))));
    ASSERT_EQ(bank.n_directions(), 12);
    for (const auto& w : bank.weights) {
      ASSERT_EQ(w.cols(), 1);
      EXPECT_LT((w.array() - 1.0).abs().maxCoeff(), 1e-12);
    }
  }
}

TEST_F(CliTest, GradcheckAllPasses) {
  const auto r = run({"gradcheck", "--all"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  for (const char* name : {"affine", "lstm", "model_dsf_bf", "model_esf_random"})
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  EXPECT_EQ(run({"gradcheck", "--check", "relu"}).code, kExitOk);
  EXPECT_EQ(run({"gradcheck", "--check", "nope"}).code, kExitValidation);
  EXPECT_EQ(run({"gradcheck"}).code, kExitValidation);
}

TEST_F(CliTest, SynthWritesManifestAndIsIdempotent) {
  const std::string corpus = write_corpus();
  auto r = run({"synth", "--spec", corpus, "--out", path("data")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string manifest = io::read_file(path("data/manifest.jsonl"));
  std::istringstream lines(manifest);
  std::string line;
  int n = 0;
  std::map<std::string, int> per_split;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    ++per_split[j.at("split").get<std::string>()];
    EXPECT_EQ(j.at("spec_digest").get<std::string>().size(), 40u);
    const auto wav = signal::read_wav(dir_ / "data" / j.at("wav_path").get<std::string>());
    EXPECT_EQ(wav.channels.rows(), 7);
    EXPECT_EQ(wav.channels.cols(), 8000);
    const fs::path lab = dir_ / "data" / j.at("label_path").get<std::string>();
    EXPECT_EQ(fs::file_size(lab), 2 * signal::read_labels(lab).size());
  }
  EXPECT_EQ(n, 4);
  EXPECT_EQ(per_split["train"], 2);
  EXPECT_EQ(per_split["test"], 1);

  const std::string wav0 = io::read_file(path("data/train/train_0.wav"));
  r = run({"synth", "--spec", corpus, "--out", path("data")});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(io::read_file(path("data/manifest.jsonl")), manifest);
  EXPECT_EQ(io::read_file(path("data/train/train_0.wav")), wav0);

  r = run({"synth", "--spec", corpus, "--out", path("t"), "--split", "test", "--utterances", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("test: 3 utterances"), std::string::npos) << r.out;
  EXPECT_EQ(run({"synth", "--spec", corpus, "--out", path("t"), "--split", "eval"}).code,
            kExitValidation);
}

TEST_F(CliTest, EvalOfMemorizingCheckpointIsZero) {
  ASSERT_EQ(run({"synth", "--spec", write_corpus(), "--out", path("data")}).code, kExitOk);
  auto r = run({"featurize", "--data", path("data"), "--view", "lfbe:0", "--split", "test",
                "--out", path("feat")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rec = nlohmann::json::parse(io::read_file(path("feat/features.jsonl")));
  EXPECT_EQ(rec.at("view"), "lfbe:0");

  mcmodel::SequenceSet set;
  set.add(signal::read_features(dir_ / "feat" / rec.at("feature_path").get<std::string>()),
          signal::read_labels(dir_ / "feat" / rec.at("label_path").get<std::string>()));
  ASSERT_EQ(set.dim(), 64);
  mcmodel::ModelSpec spec;
  spec.classifier = {1, 24, 8};
  mcmodel::Model model(spec);
  mcmodel::Rng rng(3);
  model.init_classifier(rng);
  mcmodel::fit_feature_norm(model, set);
  mcmodel::TrainConfig tc;
  tc.lr = 0.02;
  tc.epochs = 150;
  tc.batch_size = 1;
  mcmodel::train(model, set, nullptr, tc);
  ASSERT_EQ(mcmodel::evaluate(model, set).frame_error, 0.0);
  experiment::ExperimentConfig config;
  nlohmann::json meta{{"view", "lfbe:0"}, {"config", experiment::to_json(config)}};
  mcmodel::save_checkpoint(path("m.ckpt"), mcmodel::make_checkpoint(model, meta, {}));

  r = run({"eval", "--model", path("m.ckpt"), "--data", path("feat"), "--out", path("e.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("frame_error 0.0000"), std::string::npos) << r.out;
  EXPECT_EQ(nlohmann::json::parse(io::read_file(path("e.json"))).at("frame_error"), 0.0);
  // Straight from the waveforms gives the same features.
  r = run({"eval", "--model", path("m.ckpt"), "--data", path("data")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("frame_error 0.0000"), std::string::npos) << r.out;
  // A feature view the model was not built for is refused.
  ASSERT_EQ(run({"featurize", "--data", path("data"), "--mics", "2", "--out", path("f2")}).code,
            kExitOk);
  EXPECT_EQ(run({"eval", "--model", path("m.ckpt"), "--data", path("f2")}).code, kExitValidation);
}

void write_results(const fs::path& dir, double base, double cand) {
  fs::create_directories(dir);
  const std::vector<experiment::ResultRow> rows{{1, "base", "test", "all", 10, 0.1, base, "d"},
                                                {1, "cand", "test", "all", 10, 0.1, cand, "d"}};
  io::write_file_atomic(dir / "results.csv", experiment::results_csv(rows));
}

TEST_F(CliTest, ReportReductionsAndDeterminism) {
  write_results(dir_ / "res", 0.20, 0.167);
  auto r = run({"report", "--results", path("res"), "--baseline", "base", "--out", path("rep")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("cand: 0.1670 (16.5%)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("base: 0.2000 (0.0%)"), std::string::npos) << r.out;
  const std::string csv = io::read_file(path("rep/reduction.csv"));
  EXPECT_NE(csv.find("cand,all,mean,0.167000,0.200000,16.50"), std::string::npos) << csv;

  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(path("rep")))
    first[e.path().filename().string()] = io::read_file(e.path());
  ASSERT_EQ(run({"report", "--results", path("res/results.csv"), "--baseline", "base", "--out",
                 path("rep")})
                .code,
            kExitOk);
  for (const auto& [name, content] : first)
    EXPECT_EQ(io::read_file(dir_ / "rep" / name), content) << name;

  r = run({"report", "--results", path("res"), "--baseline", "sd7", "--out", path("rep2")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("baseline"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("rep2")));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitValidation);
  EXPECT_EQ(run({"bogus"}).code, kExitValidation);
  EXPECT_EQ(run({"design", "--nope"}).code, kExitValidation);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"train", "--arch", "xyz"}).code, kExitValidation);
  EXPECT_EQ(run({"train", "--mics", "3"}).code, kExitValidation);

  auto r = run({"eval", "--model", path("missing.ckpt"), "--data", path("d")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("--model"), std::string::npos) << r.err;
  r = run({"synth", "--out", path("d")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("--spec"), std::string::npos) << r.err;

  io::write_file_atomic(path("bad.json"), "{not json");
  EXPECT_EQ(run({"synth", "--spec", path("bad.json"), "--out", path("d")}).code, kExitValidation);

  // An output path below a regular file cannot be created.
  io::write_file_atomic(path("file"), "x");
  r = run({"design", "--out", path("file/bank.json")});
  EXPECT_EQ(r.code, kExitRuntime) << r.err;
}

}  // namespace
}  // namespace mcfront::cli
