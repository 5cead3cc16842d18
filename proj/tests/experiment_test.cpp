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

#include <cstdlib>
#include <stdexcept>

#include <gtest/gtest.h>

#include "mcfront/error.hpp"
#include "mcfront/experiment.hpp"

namespace mcfront::experiment {
namespace {

using mcmodel::InitMode;
using mcmodel::Variant;

std::vector<std::string> tags(const std::vector<RunDef>& runs) {
  std::vector<std::string> out;
  for (const auto& r : runs) out.push_back(r.tag);
  return out;
}

TEST(View, NameParseRoundTrip) {
  for (const std::string text : {"lfbe:0", "dft:1,4", "sd:0,1,2,3,4,5,6"})
    EXPECT_EQ(View::parse(text).name(), text);
  EXPECT_EQ(View::parse("dft:1,4").mics, (std::vector<int>{1, 4}));
  EXPECT_EQ(View::parse("sd:0").kind, View::Kind::kSdSelected);
}

TEST(View, RejectsMalformed) {
  for (const std::string text : {"dft", "mfcc:0", "dft:", "dft:1,x", "dft:-1", "lfbe:0,1"})
    EXPECT_THROW(View::parse(text), ValidationError) << text;
}

TEST(MicSubset, ReferenceArray) {
  const auto g = beamform::ArrayGeometry::reference7();
  EXPECT_EQ(mic_subset(g, 1), (std::vector<int>{0}));
  EXPECT_EQ(mic_subset(g, 2), (std::vector<int>{1, 4}));
  EXPECT_EQ(mic_subset(g, 4), (std::vector<int>{1, 2, 4, 5}));
  EXPECT_EQ(mic_subset(g, 7).size(), 7u);
  EXPECT_THROW(mic_subset(g, 0), ValidationError);
  EXPECT_THROW(mic_subset(g, 8), ValidationError);
}

TEST(PlanRuns, DefaultOrderHasParentsFirst) {
  const ExperimentConfig c;
  const auto runs = plan_runs(c);
  EXPECT_EQ(tags(runs), (std::vector<std::string>{"lfbe", "dft1", "dft1_ft", "sd7", "cat_bf_m2",
                                                  "dsf_bf_m2", "dsf_random_m2", "esf_bf_m2",
                                                  "esf_random_m2", "esf_bf_m1", "esf_bf_m4"}));
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].parent.empty()) continue;
    bool seen = false;
    for (std::size_t j = 0; j < i; ++j) seen = seen || runs[j].tag == runs[i].parent;
    EXPECT_TRUE(seen) << runs[i].tag;
  }
  EXPECT_EQ(runs[3].view.name(), "sd:0,1,2,3,4,5,6");
  EXPECT_EQ(runs[4].view.name(), "dft:1,4");
  ASSERT_TRUE(runs[7].arch.has_value());
  EXPECT_EQ(runs[7].arch->variant, Variant::kEsf);
  EXPECT_EQ(runs[7].arch->channels, 2);
  EXPECT_EQ(runs[7].arch->bins, 127);
}

TEST(PlanRuns, SelectionKeepsAncestors) {
  ExperimentConfig c;
  c.runs = {"esf_bf_m4"};
  EXPECT_EQ(tags(plan_runs(c)), (std::vector<std::string>{"lfbe", "dft1", "esf_bf_m4"}));
  c.runs = {"esf_bf_m3"};
  EXPECT_THROW(plan_runs(c), ValidationError);
}

TEST(Tags, Format) {
  EXPECT_EQ(mc_tag(Variant::kDsf, InitMode::kRandom, 2), "dsf_random_m2");
  EXPECT_EQ(mc_tag(Variant::kEsf, InitMode::kBeamformer, 4), "esf_bf_m4");
  EXPECT_EQ(sd_tag(7), "sd7");
}

TEST(ExperimentConfig, JsonRoundTripAndDigest) {
  ExperimentConfig c;
  c.corpus.band_floor = 0.4;
  c.stage3.lr = 3e-4;
  c.seeds = {7, 9};
  c.runs = {"dsf_bf_m2"};
  const auto back = experiment_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_EQ(c.digest().size(), 40u);
  ExperimentConfig d = c;
  d.stage3.lr = 2e-4;
  EXPECT_NE(d.digest(), c.digest());
}

TEST(ExperimentConfig, RejectsUnknownFieldsAndBadValues) {
  auto j = to_json(ExperimentConfig{});
  j["learning_rate"] = 1.0;
  EXPECT_THROW(experiment_config_from_json(j), ValidationError);
  ExperimentConfig c;
  c.classifier.n_classes = 5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ExperimentConfig{};
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ValidationError);
  c = ExperimentConfig{};
  c.mic_sweep = {9};
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ResultsCsv, RoundTripIsExact) {
  std::vector<ResultRow> rows{{1, "esf_bf_m2", "test", "all", 1234, 0.1 + 0.2, 1.0 / 3.0, "abc"},
                              {2, "sd7", "test", "5", 99, 1e-300, 0.0, ""},
                              {3, "lfbe", "dev", "all", 1, 2.5, 0.125, "d"}};
  const std::string csv = results_csv(rows);
  const auto back = parse_results_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].run, rows[i].run);
    EXPECT_EQ(back[i].split, rows[i].split);
    EXPECT_EQ(back[i].snr_db, rows[i].snr_db);
    EXPECT_EQ(back[i].frames, rows[i].frames);
    EXPECT_EQ(back[i].loss, rows[i].loss);
    EXPECT_EQ(back[i].frame_error, rows[i].frame_error);
    EXPECT_EQ(back[i].config_digest, rows[i].config_digest);
  }
  EXPECT_EQ(results_csv(back), csv);
}

TEST(ResultsCsv, RejectsMalformed) {
  EXPECT_THROW(parse_results_csv("a,b\n"), ValidationError);
  EXPECT_THROW(
      parse_results_csv("seed,run,split,snr_db,frames,loss,frame_error,config_digest\n1,x,test\n"),
      ValidationError);
  EXPECT_THROW(parse_results_csv("seed,run,split,snr_db,frames,loss,frame_error,config_digest\n"
                                 "x,r,test,all,1,0.1,0.1,d\n"),
               ValidationError);
}

std::vector<ResultRow> synthetic_rows(double esf, double dsf, double cat, double one, double sd,
                                      double m1, double m4, std::uint64_t seed = 1) {
  std::vector<ResultRow> rows;
  auto add = [&](const std::string& run, const std::string& split, double e) {
    rows.push_back({seed, run, split, "all", 100, 0.5, e, "d"});
  };
  for (const std::string split : {"test", "dev"}) {
    add("esf_bf_m2", split, esf);
    add("dsf_bf_m2", split, dsf);
    add("cat_bf_m2", split, cat);
    add("dft1_ft", split, one);
    add("sd7", split, sd);
    add("esf_bf_m1", split, m1);
    add("esf_bf_m4", split, m4);
    add("dsf_random_m2", split, dsf + 0.05);
    add("esf_random_m2", split, esf + 0.05);
  }
  return rows;
}

TEST(Findings, OrderingAndReduction) {
  auto f = check_findings(synthetic_rows(0.08, 0.10, 0.12, 0.15, 0.10, 0.15, 0.075), {});
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].criterion, 6);
  EXPECT_TRUE(f[0].pass) << f[0].detail;
  EXPECT_TRUE(f[1].pass) << f[1].detail;
  EXPECT_TRUE(f[2].pass) << f[2].detail;

  // 5% better than the baseline is not enough.
  f = check_findings(synthetic_rows(0.095, 0.10, 0.12, 0.15, 0.10, 0.15, 0.09), {});
  EXPECT_FALSE(f[0].pass);
  // CAT beating ESF breaks the ordering even if DSF does not.
  f = check_findings(synthetic_rows(0.08, 0.10, 0.07, 0.15, 0.5, 0.15, 0.075), {});
  EXPECT_FALSE(f[0].pass);
  // A larger 2 -> 4 gain than 1 -> 2 gain fails the sweep.
  f = check_findings(synthetic_rows(0.08, 0.10, 0.12, 0.15, 0.10, 0.09, 0.02), {});
  EXPECT_FALSE(f[2].pass);
}

TEST(Findings, EverySeedMustPass) {
  auto rows = synthetic_rows(0.08, 0.10, 0.12, 0.15, 0.10, 0.15, 0.075, 1);
  const auto bad = synthetic_rows(0.11, 0.10, 0.12, 0.15, 0.10, 0.15, 0.075, 2);
  rows.insert(rows.end(), bad.begin(), bad.end());
  const auto f = check_findings(rows, {});
  EXPECT_FALSE(f[0].pass);
  EXPECT_NE(f[0].detail.find("seed 2"), std::string::npos);
}

TEST(Findings, MissingRunsFail) {
  const std::vector<ResultRow> rows{{1, "sd7", "test", "all", 1, 0.1, 0.1, ""},
                                    {1, "dft1_ft", "test", "all", 1, 0.1, 0.2, ""}};
  for (const auto& f : check_findings(rows, {})) {
    EXPECT_FALSE(f.pass);
    EXPECT_NE(f.detail.find("missing"), std::string::npos);
  }
}

TEST(Report, ReductionArithmetic) {
  const std::vector<ResultRow> rows{{1, "base", "test", "all", 10, 0.1, 0.20, ""},
                                    {1, "cand", "test", "all", 10, 0.1, 0.167, ""}};
  ReportOptions opt;
  opt.baseline = "base";
  const auto r = make_report(rows, opt);
  const std::string& csv = r.files.at("reduction.csv");
  EXPECT_NE(csv.find("cand,all,1,0.167000,0.200000,16.50\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("base,all,1,0.200000,0.200000,0.00\n"), std::string::npos) << csv;
  EXPECT_NE(r.summary.find("cand: 0.1670 (16.5%)"), std::string::npos) << r.summary;
}

TEST(Report, DeterministicAndValidated) {
  const auto rows = synthetic_rows(0.08, 0.10, 0.12, 0.15, 0.10, 0.15, 0.075);
  const auto a = make_report(rows, {});
  const auto b = make_report(parse_results_csv(results_csv(rows)), {});
  EXPECT_EQ(a.files, b.files);
  EXPECT_EQ(a.summary, b.summary);
  for (const auto* name : {"reduction.csv", "reduction.svg", "mic_sweep.csv", "mic_sweep.svg",
                           "init_ablation.csv", "init_ablation.svg", "findings.csv"})
    EXPECT_TRUE(a.files.count(name)) << name;

  ReportOptions missing;
  missing.baseline = "sd4";
  EXPECT_THROW(make_report(rows, missing), ValidationError);
  const std::vector<ResultRow> one{{1, "sd7", "test", "all", 1, 0.1, 0.1, ""}};
  EXPECT_THROW(make_report(one, {}), ValidationError);
}

TEST(SvgBarChart, OneRectPerBar) {
  const std::string svg = svg_bar_chart("t <x>", "y", {{"a", 1.0}, {"b", -2.0}, {"c", 0.5}});
  std::size_t n = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++n;
  EXPECT_EQ(n, 3u);
  EXPECT_NE(svg.find("t &lt;x&gt;"), std::string::npos);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](int i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](int i) {
                              if (i == 5) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, ThreadCountFromEnvironment) {
  ::setenv("MCFRONT_THREADS", "3", 1);
  EXPECT_EQ(worker_threads(), 3);
  ::setenv("MCFRONT_THREADS", "zero", 1);
  EXPECT_THROW(worker_threads(), ValidationError);
  ::unsetenv("MCFRONT_THREADS");
  EXPECT_GE(worker_threads(), 1);
}

TEST(Featurizer, ViewShapesAndSdSelection) {
  ExperimentConfig c;
  c.corpus.duration_s = 0.5;
  const Featurizer f(c);
  scenesim::SceneSpec s;
  s.duration_s = 0.5;
  s.snr_db = 10.0;
  s.target_azimuth = 1.5707963267948966;
  const auto u = scenesim::mix_scene(s);
  const long T = static_cast<long>(u.labels.size());
  EXPECT_EQ(f(u, View::parse("dft:1,4")).rows(), 2 * 2 * 127);
  EXPECT_EQ(f(u, View::parse("dft:1,4")).cols(), T);
  EXPECT_EQ(f(u, View::parse("lfbe:0")).rows(), 64);
  EXPECT_EQ(f(u, View::parse("lfbe:0")).cols(), T);
  const auto sd = f(u, View::parse("sd:0,1,2,3,4,5,6"));
  EXPECT_EQ(sd.rows(), 2 * 127);
  const auto direct = scenesim::sd_selected_view(u, {0, 1, 2, 3, 4, 5, 6},
                                                 f.bank({0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ((sd - direct).cwiseAbs().maxCoeff(), 0.0);
  // One bank per microphone set.
  EXPECT_EQ(&f.bank({1, 4}), &f.bank({1, 4}));
  EXPECT_EQ(f.bank({1, 4}).n_channels(), 2);
}

}  // namespace
}  // namespace mcfront::experiment
