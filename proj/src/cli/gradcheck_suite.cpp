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
#include <cstdio>
#include <numbers>
#include <random>

#include "mcfront/experiment.hpp"

namespace mcfront::experiment {

namespace {

using gradnet::Matrix;
using gradnet::SeqShape;
using Rng = std::mt19937_64;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void randomize(gradnet::Layer& layer, Rng& rng, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  for (auto& t : layer.tensors())
    for (Eigen::Index i = 0; i < t.tensor->value.size(); ++i) t.tensor->value.data()[i] = g(rng);
}

GradCheckRow row(const std::string& name, const gradnet::GradCheckResult& r, double threshold) {
  return {name, r.max_rel_error, threshold, r.checked, r.worst};
}

// SD bank over a small geometry at K bins of 400 Hz spacing; directions are
// spread so that no two beams tie for a bin.
beamform::BeamformerBank tiny_bank(int K, int M, int D) {
  beamform::BeamformerBank bank;
  bank.geometry = beamform::ArrayGeometry::reference7().subset(beamform::reference_mic_subset(M));
  for (int d = 0; d < D; ++d) bank.directions.push_back({0.2 + 0.9 * d, 0.0, ""});
  for (int d = 0; d < D; ++d) {
    Eigen::MatrixXcd w(K, M);
    for (int k = 0; k < K; ++k)
      w.row(k) = beamform::sd_weights(bank.geometry, bank.directions[d],
                                      2 * std::numbers::pi * 400.0 * (k + 1))
                     .transpose();
    bank.weights.push_back(w);
  }
  return bank;
}

GradCheckRow check_model(mcmodel::ModelSpec spec, const std::string& name, Rng& rng) {
  mcmodel::Model model(spec);
  model.init_classifier(rng);
  randomize(model.layer(mcmodel::kFeatNorm), rng, 0.3);
  if (spec.input_kind != mcmodel::InputKind::kLfbe) {
    auto& fe = dynamic_cast<gradnet::Affine&>(
        model.layer_as<gradnet::Sequential>(mcmodel::kFe).at(0));
    fe.weight.value = random_matrix(fe.weight.value.rows(), fe.weight.value.cols(), rng, 0.1, 1.0);
    fe.bias.value.setConstant(0.1);
  }
  if (spec.arch) {
    const auto bank = tiny_bank(spec.bins, spec.arch->channels, spec.arch->directions);
    mcmodel::init_mc_front(model.layer_as<gradnet::Sequential>(mcmodel::kFront), *spec.arch,
                           &bank, rng);
  }
  const int labels[] = {0, 2, 1, 1};
  const Matrix x = random_matrix(spec.input_dim(), 4, rng);
  return row(name, gradnet::grad_check_xent(model.net(), x, {2, 2}, labels, 1e-3, true),
             kModelGradThreshold);
}

}  // namespace

std::vector<GradCheckRow> gradcheck_suite() {
  std::vector<GradCheckRow> rows;
  Rng rng(2024);
  const SeqShape batch = SeqShape::batch(5);
  const SeqShape seq{3, 2};
  {
    gradnet::Affine l("affine", 4, 6);
    randomize(l, rng);
    rows.push_back(row("affine", gradnet::grad_check(l, random_matrix(6, 5, rng), batch),
                       kLayerGradThreshold));
  }
  {
    gradnet::ComplexAffine l("complex_affine", 3, 4);
    randomize(l, rng);
    rows.push_back(row("complex_affine",
                       gradnet::grad_check(l, random_matrix(8, 5, rng), batch),
                       kLayerGradThreshold));
  }
  {
    gradnet::BlockComplexAffine l("block_complex_affine", 3, 2, 2);
    randomize(l, rng);
    rows.push_back(row("block_complex_affine",
                       gradnet::grad_check(l, random_matrix(12, 5, rng), batch),
                       kLayerGradThreshold));
  }
  {
    gradnet::PowPairs l("pow_pairs");
    rows.push_back(row("pow_pairs", gradnet::grad_check(l, random_matrix(8, 5, rng), batch),
                       kLayerGradThreshold));
  }
  {
    // Distinct values at least 0.1 apart keep every group away from a tie.
    gradnet::MaxPoolGroups l("maxpool_groups", 3);
    Matrix x(6, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 0.1 * ((i * 7) % 30);
    rows.push_back(row("maxpool_groups", gradnet::grad_check(l, x, batch), kLayerGradThreshold));
  }
  {
    gradnet::Relu l("relu");
    Matrix x = random_matrix(6, 5, rng);
    x = x.unaryExpr([](double v) { return v >= 0 ? v + 0.1 : v - 0.1; });
    rows.push_back(row("relu", gradnet::grad_check(l, x, batch), kLayerGradThreshold));
  }
  {
    gradnet::LogFloor l("log_floor");
    rows.push_back(row("log_floor",
                       gradnet::grad_check(l, random_matrix(6, 5, rng, 0.5, 2.0), batch),
                       kLayerGradThreshold));
  }
  {
    gradnet::Standardize l("standardize", 6);
    randomize(l, rng);
    // Affine in its input, so differences are exact and a wide step only
    // shrinks round-off.
    rows.push_back(row("standardize",
                       gradnet::grad_check(l, random_matrix(6, 5, rng), batch, 1e-2),
                       kLayerGradThreshold));
  }
  {
    gradnet::CausalMeanSubtract l("cms", 4, 0.9);
    randomize(l, rng);
    rows.push_back(row("cms", gradnet::grad_check(l, random_matrix(4, 6, rng), seq),
                       kLayerGradThreshold));
  }
  {
    gradnet::Lstm l("lstm", 4, 3);
    randomize(l, rng);
    rows.push_back(row("lstm", gradnet::grad_check(l, random_matrix(4, 6, rng), seq),
                       kLayerGradThreshold));
  }
  {
    gradnet::Affine l("logits", 4, 6);
    randomize(l, rng);
    const int labels[] = {0, 3, 1, -1, 2};
    rows.push_back(row("softmax_xent",
                       gradnet::grad_check_xent(l, random_matrix(6, 5, rng), batch, labels),
                       kLayerGradThreshold));
  }

  mcmodel::ModelSpec base;
  base.bins = 9;
  base.n_mels = 4;
  base.classifier = {2, 4, 3};
  {
    mcmodel::ModelSpec s = base;
    s.input_kind = mcmodel::InputKind::kLfbe;
    rows.push_back(check_model(s, "model_lfbe", rng));
  }
  {
    mcmodel::ModelSpec s = base;
    s.input_kind = mcmodel::InputKind::kDft1;
    rows.push_back(check_model(s, "model_dft1", rng));
  }
  for (auto v : {mcmodel::Variant::kCat, mcmodel::Variant::kDsf, mcmodel::Variant::kEsf})
    for (auto init : {mcmodel::InitMode::kBeamformer, mcmodel::InitMode::kRandom}) {
      mcmodel::ModelSpec s = base;
      s.input_kind = mcmodel::InputKind::kDftMulti;
      s.arch = mcmodel::McArch{v, 3, s.bins, 2, init};
      rows.push_back(check_model(s, "model_" + mcmodel::to_string(v) + "_" +
                                        mcmodel::to_string(init),
                                 rng));
    }
  return rows;
}

std::string gradcheck_table(const std::vector<GradCheckRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %12s %10s %8s  %s\n", "check", "max_rel_err",
                "threshold", "entries", "status");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-22s %12.3e %10.0e %8ld  %s\n", r.name.c_str(),
                  r.max_rel_error, r.threshold, r.checked, r.pass() ? "ok" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace mcfront::experiment
