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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mcfront/beamform.hpp"
#include "mcfront/error.hpp"
#include "mcfront/mcmodel.hpp"
#include "mcfront/signal.hpp"
#include "oracles.hpp"

namespace mcfront::mcmodel {
namespace {

using gradnet::SeqShape;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

beamform::BeamformerBank two_mic_bank(int directions) {
  const auto geom = beamform::ArrayGeometry::reference7().subset(beamform::reference_mic_subset(2));
  return beamform::build_bank(geom, beamform::uniform_directions(directions),
                              signal::FrameSpec::dft_default());
}

// A bank over K arbitrary frequencies, for architectures at tiny sizes. The
// pair of microphones cannot tell mirror-image azimuths apart, so directions
// avoid the exact max-pool ties that uniform spacing would create.
beamform::BeamformerBank tiny_bank(int K, int M, int D) {
  auto geom = beamform::ArrayGeometry::reference7().subset(beamform::reference_mic_subset(M));
  beamform::BeamformerBank bank;
  bank.geometry = geom;
  for (int d = 0; d < D; ++d) bank.directions.push_back({0.2 + 0.9 * d, 0.0, ""});
  for (int d = 0; d < D; ++d) {
    Eigen::MatrixXcd w(K, M);
    for (int k = 0; k < K; ++k)
      w.row(k) = beamform::sd_weights(geom, bank.directions[d], 2 * M_PI * 400.0 * (k + 1)).transpose();
    bank.weights.push_back(w);
  }
  return bank;
}

// Flattened multi-channel snapshot as the network sees it.
Matrix flat(const Eigen::MatrixXcd& snapshot) { return signal::interleave(snapshot); }

TEST(FeDnn, MelInitReproducesLfbe) {
  Rng rng(1);
  const auto spec = signal::FrameSpec::dft_default();
  auto fe = build_fe_dnn(spec, 64, FeInit::kMel, rng);
  const Eigen::MatrixXd fb = signal::mel_filterbank(64, spec);
  std::exponential_distribution<double> e(0.3);
  Matrix p(spec.n_bins_kept(), 20);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = e(rng) * (i % 7 == 0 ? 1e-9 : 1.0);
  const Matrix y = fe->forward(p, SeqShape::batch(20));
  for (int c = 0; c < 20; ++c)
    EXPECT_LT((y.col(c) - signal::lfbe(p.col(c), fb)).cwiseAbs().maxCoeff(), 1e-6);
  const Matrix z = fe->forward(Matrix::Zero(spec.n_bins_kept(), 1), SeqShape::batch(1));
  EXPECT_TRUE((z.array() == std::log(1e-7)).all());
}

TEST(FeDnn, RandomInitIsNonNegativeAndBounded) {
  Rng rng(2);
  auto fe = build_fe_dnn(signal::FrameSpec::dft_default(), 64, FeInit::kRandom, rng);
  const auto& w = dynamic_cast<gradnet::Affine&>(fe->at(0)).weight.value;
  EXPECT_GE(w.minCoeff(), 0.0);
  EXPECT_LT(w.maxCoeff(), 2.0 / 127);
}

TEST(McFront, DsfInitMatchesBruteForceSelection) {
  Rng rng(3);
  const auto bank = two_mic_bank(12);
  McArch arch{Variant::kDsf, 12, 127, 2, InitMode::kBeamformer};
  auto front = build_mc_front(arch, &bank, rng);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXcd x(127, 2);
    for (int k = 0; k < 127; ++k) x.row(k) = testing::random_complex(2, rng).transpose();
    const Matrix y = front->forward(flat(x), SeqShape::batch(1));
    for (int k = 0; k < 127; ++k) {
      double best = 0.0;
      for (int d = 0; d < 12; ++d)
        best = std::max(best, std::norm(bank.weight(d, k).dot(x.row(k).transpose())));
      EXPECT_NEAR(y(k, 0), best, 1e-10 * std::max(1.0, best));
    }
  }
}

TEST(McFront, DsfInitIsBlockSparse) {
  Rng rng(4);
  const auto bank = two_mic_bank(12);
  McArch arch{Variant::kDsf, 12, 127, 2, InitMode::kBeamformer};
  auto front = build_mc_front(arch, &bank, rng);
  const auto& w = dynamic_cast<gradnet::Affine&>(front->at(0)).weight.value;
  // Row pair for (bin 5, direction 3) touches only bin 5's four inputs.
  const Eigen::Index row = 2 * (5 * 12 + 3);
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    if (c < 20 || c >= 24) {
      EXPECT_EQ(w(row, c), 0.0);
    }
}

TEST(McFront, EsfSingleDirectionGivesSdPowerSpectrum) {
  Rng rng(5);
  const auto bank = two_mic_bank(1);
  McArch arch{Variant::kEsf, 1, 127, 2, InitMode::kBeamformer};
  auto front = build_mc_front(arch, &bank, rng);
  Eigen::MatrixXcd x(127, 2);
  for (int k = 0; k < 127; ++k) x.row(k) = testing::random_complex(2, rng).transpose();
  const Matrix y = front->forward(flat(x), SeqShape::batch(1));
  for (int k = 0; k < 127; ++k) {
    const double p = std::norm(beamform::apply_beamformer(bank.weight(0, k), x.row(k).transpose()));
    EXPECT_NEAR(y(k, 0), p, 1e-10 * std::max(1.0, p));
  }
}

TEST(McFront, EsfInitAveragesDirections) {
  Rng rng(6);
  const auto bank = two_mic_bank(12);
  McArch arch{Variant::kEsf, 12, 127, 2, InitMode::kBeamformer};
  auto front = build_mc_front(arch, &bank, rng);
  Eigen::MatrixXcd x(127, 2);
  for (int k = 0; k < 127; ++k) x.row(k) = testing::random_complex(2, rng).transpose();
  const Matrix y = front->forward(flat(x), SeqShape::batch(1));
  for (int k = 0; k < 127; k += 9) {
    double mean = 0.0;
    for (int d = 0; d < 12; ++d) mean += std::norm(bank.weight(d, k).dot(x.row(k).transpose())) / 12;
    EXPECT_NEAR(y(k, 0), mean, 1e-10 * std::max(1.0, mean));
  }
}

TEST(McFront, CatInitGivesChosenBeamformer) {
  Rng rng(7);
  const auto bank = two_mic_bank(12);
  McArch arch{Variant::kCat, 12, 127, 2, InitMode::kBeamformer, 4};
  auto front = build_mc_front(arch, &bank, rng);
  Eigen::MatrixXcd x(127, 2);
  for (int k = 0; k < 127; ++k) x.row(k) = testing::random_complex(2, rng).transpose();
  const Matrix y = front->forward(flat(x), SeqShape::batch(1));
  for (int k = 0; k < 127; ++k) {
    const double p = std::norm(beamform::apply_beamformer(bank.weight(4, k), x.row(k).transpose()));
    EXPECT_NEAR(y(k, 0), p, 1e-10 * std::max(1.0, p));
  }
}

TEST(McFront, BankMismatchAndMissingBankRejected) {
  Rng rng(8);
  const auto bank = two_mic_bank(12);
  McArch arch{Variant::kEsf, 6, 127, 2, InitMode::kBeamformer};
  EXPECT_THROW(build_mc_front(arch, &bank, rng), ValidationError);
  arch.directions = 12;
  EXPECT_THROW(build_mc_front(arch, nullptr, rng), ValidationError);
  arch.init = InitMode::kRandom;
  EXPECT_NO_THROW(build_mc_front(arch, nullptr, rng));
}

TEST(Model, InputDimensions) {
  ModelSpec s;
  s.input_kind = InputKind::kLfbe;
  EXPECT_EQ(s.input_dim(), 64);
  s.input_kind = InputKind::kDft1;
  EXPECT_EQ(s.input_dim(), 254);
  s.input_kind = InputKind::kDftMulti;
  s.arch = McArch{Variant::kEsf, 12, 127, 2, InitMode::kBeamformer};
  EXPECT_EQ(s.input_dim(), 508);
  Model m(s);
  EXPECT_EQ(m.layer_as<gradnet::Standardize>(kInputNorm).shift.value.rows(), 508);
}

TEST(Model, SpecJsonRoundTrip) {
  ModelSpec s;
  s.input_kind = InputKind::kDftMulti;
  s.arch = McArch{Variant::kDsf, 3, 127, 4, InitMode::kRandom, 2};
  s.classifier = {1, 16, 5};
  const ModelSpec back = model_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
}

// Tiny M=2, K=9, D=3, C=3, T=2 networks, checked end to end.
class TinyArchGradient : public ::testing::TestWithParam<std::tuple<Variant, InitMode>> {};

TEST_P(TinyArchGradient, PassesFiniteDifferenceCheck) {
  const auto [variant, init] = GetParam();
  const int K = 9, M = 2, D = 3;
  Rng rng(9);
  ModelSpec s;
  s.input_kind = InputKind::kDftMulti;
  s.bins = K;
  s.n_mels = 4;
  s.arch = McArch{variant, D, K, M, init};
  s.classifier = {2, 4, 3};
  Model model(s);
  const auto bank = tiny_bank(K, M, D);
  model.init_classifier(rng);
  init_mc_front(model.layer_as<gradnet::Sequential>(kFront), *s.arch, &bank, rng);
  auto& fe = dynamic_cast<gradnet::Affine&>(model.layer_as<gradnet::Sequential>(kFe).at(0));
  fe.weight.value = random_matrix(4, K, rng).cwiseAbs();
  fe.bias.value.setConstant(0.1);
  auto& norm = model.layer_as<gradnet::Standardize>(kFeatNorm);
  norm.scale.value.setConstant(0.5);
  const int labels[] = {0, 2, 1, 1};
  // Some gradients of the deep chain are ~1e-8, below what a two-point
  // difference resolves; the four-point stencil at eps 1e-3 does.
  const auto r = gradnet::grad_check_xent(model.net(), random_matrix(2 * K * M, 4, rng), {2, 2},
                                          labels, 1e-3, true);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 200);
}

INSTANTIATE_TEST_SUITE_P(
    AllArchitectures, TinyArchGradient,
    ::testing::Combine(::testing::Values(Variant::kCat, Variant::kDsf, Variant::kEsf),
                       ::testing::Values(InitMode::kBeamformer, InitMode::kRandom)),
    [](const auto& info) {
      return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
    });

TEST(Adam, FirstStepMovesByLearningRate) {
  TrainConfig c;
  c.lr = 0.01;
  gradnet::DiffTensor t(3, 1);
  t.value << 1.0, -2.0, 0.5;
  t.grad << 3.0, -0.2, 1e-3;
  Adam adam({{"t", &t}}, c);
  adam.step();
  EXPECT_NEAR(t.value(0, 0), 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(t.value(1, 0), -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(t.value(2, 0), 0.5 - 0.01, 1e-7);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  TrainConfig c;
  gradnet::DiffTensor t(2, 2);
  t.value << 1, 2, 3, 4;
  const Matrix before = t.value;
  Adam adam({{"t", &t}}, c);
  for (int i = 0; i < 10; ++i) adam.step();
  EXPECT_EQ(t.value, before);
}

TEST(Adam, MinimizesQuadratic) {
  TrainConfig c;
  c.lr = 0.1;
  gradnet::DiffTensor t(1, 1);
  t.value(0, 0) = 1.0;
  Adam adam({{"t", &t}}, c);
  for (int i = 0; i < 200; ++i) {
    t.grad(0, 0) = 2.0 * t.value(0, 0);
    adam.step();
  }
  EXPECT_LT(std::abs(t.value(0, 0)), 0.05);
}

TEST(Adam, SkipsBuffers) {
  TrainConfig c;
  gradnet::DiffTensor buf(1, 1, false);
  buf.grad(0, 0) = 1.0;
  Adam adam({{"buf", &buf}}, c);
  adam.step();
  EXPECT_EQ(buf.value(0, 0), 0.0);
}

TEST(Adam, LrScaleUsesLongestPrefix) {
  TrainConfig c;
  c.lr = 0.01;
  c.lr_scale = {{"mc", 0.5}, {"mc.comb", 0.1}};
  gradnet::DiffTensor a(1, 1), b(1, 1), d(1, 1);
  a.grad(0, 0) = b.grad(0, 0) = d.grad(0, 0) = 1.0;
  Adam adam({{"mc.comb.W", &a}, {"mc.sf.W_re", &b}, {"lstm0.W", &d}}, c);
  EXPECT_DOUBLE_EQ(adam.lr("mc.comb.W"), 0.001);
  EXPECT_DOUBLE_EQ(adam.lr("mc.sf.W_re"), 0.005);
  EXPECT_DOUBLE_EQ(adam.lr("lstm0.W"), 0.01);
  adam.step();
  EXPECT_NEAR(a.value(0, 0), -0.001, 1e-9);
  EXPECT_NEAR(b.value(0, 0), -0.005, 1e-9);
  EXPECT_NEAR(d.value(0, 0), -0.01, 1e-9);
}

TEST(Adam, LrScaleSurvivesJsonAndRejectsNegative) {
  TrainConfig c;
  c.lr_scale = {{"mc.comb", 0.01}};
  EXPECT_EQ(train_config_from_json(to_json(c)).lr_scale, c.lr_scale);
  auto j = to_json(c);
  j["lr_scale"]["mc.comb"] = -1.0;
  EXPECT_THROW(train_config_from_json(j), std::exception);
}

TEST(Evaluate, RelativeReduction) {
  EXPECT_NEAR(relative_reduction(0.167, 0.20), 0.165, 1e-12);
  EXPECT_EQ(relative_reduction(0.3, 0.3), 0.0);
  EXPECT_THROW(relative_reduction(0.1, 0.0), ValidationError);
}

// Small separable task: class c has mean pattern c in an 8-dim feature.
SequenceSet toy_set(int utterances, int frames, int classes, Rng& rng, double noise = 0.3) {
  SequenceSet set;
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::normal_distribution<double> g(0.0, noise);
  for (int u = 0; u < utterances; ++u) {
    Matrix f(8, frames);
    std::vector<int> l(frames);
    int cls = pick(rng);
    for (int t = 0; t < frames; ++t) {
      if (t % 5 == 0) cls = pick(rng);
      l[t] = cls;
      for (int i = 0; i < 8; ++i) f(i, t) = (i % classes == cls ? 2.0 : 0.0) + g(rng);
    }
    set.add(f, l);
  }
  return set;
}

ModelSpec toy_spec(int classes) {
  ModelSpec s;
  s.input_kind = InputKind::kLfbe;
  s.n_mels = 8;
  s.classifier = {1, 16, classes};
  return s;
}

TEST(Evaluate, PerfectAndRandomPredictors) {
  Rng rng(10);
  SequenceSet set;
  std::uniform_int_distribution<int> cls(0, 7);
  for (int u = 0; u < 40; ++u) {
    std::vector<int> l(200);
    for (auto& x : l) x = cls(rng);
    set.add(random_matrix(8, 200, rng), l);
  }
  Model random_model(toy_spec(8));
  random_model.init_classifier(rng);
  random_model.layer_as<gradnet::Affine>(kOutput).weight.value *= 50.0;
  fit_feature_norm(random_model, set);
  const auto e = evaluate(random_model, set);
  EXPECT_EQ(e.frames, 8000);
  EXPECT_NEAR(e.frame_error, 0.875, 0.02);

  SequenceSet zeros;
  zeros.add(Matrix::Zero(8, 50), std::vector<int>(50, 3));
  Model perfect(toy_spec(8));
  perfect.layer_as<gradnet::Affine>(kOutput).bias.value(3, 0) = 10.0;
  EXPECT_EQ(evaluate(perfect, zeros).frame_error, 0.0);

  EXPECT_THROW(evaluate(perfect, SequenceSet{}), ValidationError);
}

TEST(Train, OverfitsSmallSubset) {
  Rng rng(11);
  SequenceSet set = toy_set(10, 20, 3, rng);
  ASSERT_EQ(set.frames(), 200);
  Model model(toy_spec(3));
  model.init_classifier(rng);
  fit_feature_norm(model, set);
  TrainConfig c;
  c.lr = 0.01;
  c.epochs = 60;
  c.batch_size = 5;
  const History h = train(model, set, nullptr, c);
  double prev = 1e9;
  for (const auto& r : h) {
    EXPECT_LE(r.loss, prev * 1.0 + 1e-12) << "epoch " << r.epoch;
    prev = r.loss;
  }
  EXPECT_LT(h.back().loss, 0.05);
}

TEST(Train, KeepBestRestoresLowestDevEpoch) {
  for (const bool keep : {true, false}) {
    Rng rng(21);
    SequenceSet set = toy_set(6, 20, 3, rng, 2.0);
    SequenceSet dev = toy_set(4, 20, 3, rng, 2.0);
    Model model(toy_spec(3));
    model.init_classifier(rng);
    fit_feature_norm(model, set);
    TrainConfig c;
    c.lr = 1.0;  // large enough that dev error bounces between epochs
    c.epochs = 8;
    c.batch_size = 2;
    c.keep_best = keep;
    const History h = train(model, set, &dev, c);
    double lowest = 1e9, last = 0.0;
    for (const auto& r : h)
      if (r.split == "dev") {
        lowest = std::min(lowest, r.frame_error);
        last = r.frame_error;
      }
    ASSERT_LT(lowest, last);
    EXPECT_DOUBLE_EQ(evaluate(model, dev, c.batch_size).frame_error, keep ? lowest : last);
  }
}

TEST(Train, DeterministicCheckpoints) {
  auto run = [] {
    Rng rng(12);
    SequenceSet set = toy_set(6, 30, 3, rng);
    Model model(toy_spec(3));
    model.init_classifier(rng);
    fit_feature_norm(model, set);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 4;
    c.seed = 5;
    History h = train(model, set, &set, c);
    return checkpoint_to_string(make_checkpoint(model, {{"run", "x"}}, h));
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, EsfBlockConstraintSurvivesUpdates) {
  Rng rng(13);
  const auto bank = two_mic_bank(3);
  ModelSpec s;
  s.input_kind = InputKind::kDftMulti;
  s.arch = McArch{Variant::kEsf, 3, 127, 2, InitMode::kBeamformer};
  s.n_mels = 8;
  s.classifier = {1, 8, 3};
  Model model(s);
  model.init_classifier(rng);
  init_mc_front(model.layer_as<gradnet::Sequential>(kFront), *s.arch, &bank, rng);
  Rng frng(14);
  init_fe_dnn(model.layer_as<gradnet::Sequential>(kFe), signal::FrameSpec::dft_default(), FeInit::kRandom,
              frng);
  SequenceSet set;
  for (int u = 0; u < 4; ++u) set.add(random_matrix(508, 10, rng), std::vector<int>(10, u % 3));
  model.set_input_stats(feature_stats(set));
  fit_feature_norm(model, set);
  auto& sf = dynamic_cast<gradnet::BlockComplexAffine&>(model.layer_as<gradnet::Sequential>(kFront).at(0));
  const Eigen::MatrixXcd before = sf.dense_weight();
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  c.bptt_length = 5;
  train(model, set, nullptr, c);
  const Eigen::MatrixXcd after = sf.dense_weight();
  EXPECT_GT((after - before).cwiseAbs().maxCoeff(), 0.0);
  for (int k = 0; k < 127; ++k)
    for (int j = 0; j < 127; ++j)
      if (j != k) {
        EXPECT_EQ(after.block(3 * k, 2 * j, 3, 2).cwiseAbs().maxCoeff(), 0.0);
      }
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Rng rng(15);
  ModelSpec s;
  s.input_kind = InputKind::kDftMulti;
  s.arch = McArch{Variant::kCat, 12, 127, 2, InitMode::kRandom};
  s.classifier = {2, 8, 4};
  Model model(s);
  model.init_classifier(rng);
  init_mc_front(model.layer_as<gradnet::Sequential>(kFront), *s.arch, nullptr, rng);
  model.set_input_stats({Eigen::VectorXd::Random(508), Eigen::VectorXd::Constant(508, 2.5)});
  History h{{0, "dev", 1.0 / 3.0, 0.5}, {1, "train", 0.1, 0.01}};
  const std::string text = checkpoint_to_string(make_checkpoint(model, {{"stage", 3}}, h));
  const Checkpoint back = checkpoint_from_string(text);
  EXPECT_EQ(checkpoint_to_string(back), text);
  auto restored = model_from_checkpoint(back);
  for (auto& t : restored->tensors()) {
    bool found = false;
    for (auto& o : model.tensors())
      if (o.name == t.name) {
        found = true;
        EXPECT_EQ(o.tensor->value, t.tensor->value) << t.name;
      }
    EXPECT_TRUE(found);
  }
  EXPECT_EQ(back.history[0].loss, 1.0 / 3.0);
}

TEST(Checkpoint, RejectsUnknownVersionAndCorruptArrays) {
  EXPECT_THROW(checkpoint_from_string(R"({"format_version": 99})"), ValidationError);
  EXPECT_THROW(checkpoint_from_string("not json"), ValidationError);
  Model model(toy_spec(3));
  auto j = nlohmann::json::parse(checkpoint_to_string(make_checkpoint(model, {}, {})));
  j["arrays"]["output.b"]["data"] = "AAAA";
  EXPECT_THROW(checkpoint_from_string(j.dump()), ValidationError);
}

}  // namespace
}  // namespace mcfront::mcmodel
