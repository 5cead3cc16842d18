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

#include "mcfront/beamform.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcfront/error.hpp"
#include "mcfront/io.hpp"

namespace mcfront::beamform {

int ArrayGeometry::reference_sensor() const {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : positions) centroid += p;
  centroid /= static_cast<double>(positions.size());
  int best = 0;
  for (int m = 1; m < size(); ++m)
    if ((positions[m] - centroid).norm() < (positions[best] - centroid).norm()) best = m;
  return best;
}

ArrayGeometry ArrayGeometry::subset(const std::vector<int>& indices) const {
  ArrayGeometry out;
  out.name = name + "[";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= size())
      throw ValidationError("geometry subset: sensor index " + std::to_string(indices[i]) +
                            " out of range");
    out.positions.push_back(positions[indices[i]]);
    out.name += (i ? "," : "") + std::to_string(indices[i]);
  }
  out.name += "]";
  return out;
}

void ArrayGeometry::validate() const {
  if (positions.empty()) throw ValidationError("geometry: at least one sensor required");
  for (const auto& p : positions)
    if (!p.allFinite()) throw ValidationError("geometry: non-finite sensor position");
}

ArrayGeometry ArrayGeometry::reference7() {
  ArrayGeometry geom;
  geom.name = "circular7";
  const double radius = 0.036;
  geom.positions.emplace_back(0.0, 0.0, 0.0);
  for (int i = 0; i < 6; ++i) {
    const double a = std::numbers::pi * i / 3.0;
    geom.positions.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return geom;
}

std::vector<int> reference_mic_subset(int n_mics) {
  switch (n_mics) {
    case 1: return {0};
    case 2: return {1, 4};
    case 4: return {1, 2, 4, 5};
    case 7: return {0, 1, 2, 3, 4, 5, 6};
    default:
      throw ValidationError("mic subset: expected 1, 2, 4 or 7, got " + std::to_string(n_mics));
  }
}

Eigen::Vector3d LookDirection::unit() const {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

std::vector<LookDirection> uniform_directions(int count) {
  if (count < 1) throw ValidationError("directions: count must be >= 1");
  std::vector<LookDirection> dirs(count);
  for (int d = 0; d < count; ++d) {
    dirs[d].azimuth = 2.0 * std::numbers::pi * d / count;
    dirs[d].label = "az" + std::to_string(static_cast<int>(std::lround(360.0 * d / count)));
  }
  return dirs;
}

Eigen::VectorXcd manifold_vector(const ArrayGeometry& geom, const LookDirection& dir,
                                 double omega, double c) {
  const Eigen::Vector3d u = dir.unit();
  Eigen::VectorXcd v(geom.size());
  for (int m = 0; m < geom.size(); ++m) {
    const double tau = -u.dot(geom.positions[m]) / c;
    v[m] = std::polar(1.0, -omega * tau);
  }
  return v;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

Eigen::MatrixXd diffuse_coherence(const ArrayGeometry& geom, double omega, double c) {
  const int n = geom.size();
  Eigen::MatrixXd cov(n, n);
  for (int m = 0; m < n; ++m) {
    cov(m, m) = 1.0;
    for (int k = m + 1; k < n; ++k) cov(m, k) = cov(k, m) = sinc(omega * geom.distance(m, k) / c);
  }
  return cov;
}

Eigen::VectorXcd sd_weights(const ArrayGeometry& geom, const LookDirection& dir, double omega,
                            double loading, double c) {
  if (loading < 0) throw ValidationError("sd_weights: diagonal loading must be >= 0");
  const int n = geom.size();
  Eigen::MatrixXd loaded = diffuse_coherence(geom, omega, c);
  loaded.diagonal().array() += loading;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(loaded);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      pivots.minCoeff() <= 1e-12 * pivots.maxCoeff())
    throw Error("singular coherence");
  const Eigen::VectorXcd v = manifold_vector(geom, dir, omega, c);
  const Eigen::VectorXd y_re = ldlt.solve(v.real());
  const Eigen::VectorXd y_im = ldlt.solve(v.imag());
  Eigen::VectorXcd y(n);
  for (int m = 0; m < n; ++m) y[m] = Complex(y_re[m], y_im[m]);
  return y / v.dot(y);
}

Complex apply_beamformer(const Eigen::VectorXcd& w, const Eigen::VectorXcd& x) {
  if (w.size() != x.size())
    throw ValidationError("apply_beamformer: weight has " + std::to_string(w.size()) +
                          " channels, snapshot has " + std::to_string(x.size()));
  return w.dot(x);
}

Eigen::MatrixXd realify_weights(const Eigen::VectorXcd& w) {
  Eigen::MatrixXd r(2 * w.size(), 2);
  for (Eigen::Index m = 0; m < w.size(); ++m) {
    // Block [Re c, Im c; -Im c, Re c] with c = conj(w_m), the entries of w^H.
    const Complex c = std::conj(w[m]);
    r(2 * m, 0) = c.real();
    r(2 * m, 1) = c.imag();
    r(2 * m + 1, 0) = -c.imag();
    r(2 * m + 1, 1) = c.real();
  }
  return r;
}

Eigen::VectorXd realify_snapshot(const Eigen::VectorXcd& x) {
  Eigen::VectorXd r(2 * x.size());
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    r[2 * m] = x[m].real();
    r[2 * m + 1] = x[m].imag();
  }
  return r;
}

double BeamformerBank::max_distortion_error() const {
  double worst = 0.0;
  for (int d = 0; d < n_directions(); ++d)
    for (int k = 0; k < n_bins(); ++k) {
      const Eigen::VectorXcd v =
          manifold_vector(geometry, directions[d], spec.bin_omega(k), speed_of_sound);
      worst = std::max(worst, std::abs(weight(d, k).dot(v) - 1.0));
    }
  return worst;
}

BeamformerBank build_bank(const ArrayGeometry& geom, const std::vector<LookDirection>& directions,
                          const signal::FrameSpec& spec, const Eigen::VectorXd& loading, double c) {
  geom.validate();
  spec.validate();
  if (directions.empty()) throw ValidationError("build_bank: at least one direction required");
  const int n_bins = spec.n_bins_kept();
  if (loading.size() != n_bins)
    throw ValidationError("build_bank: loading schedule has " + std::to_string(loading.size()) +
                          " entries, expected " + std::to_string(n_bins));
  BeamformerBank bank;
  bank.geometry = geom;
  bank.directions = directions;
  bank.spec = spec;
  bank.diagonal_loading = loading;
  bank.speed_of_sound = c;
  bank.weights.assign(directions.size(), Eigen::MatrixXcd(n_bins, geom.size()));
  for (std::size_t d = 0; d < directions.size(); ++d)
    for (int k = 0; k < n_bins; ++k)
      bank.weights[d].row(k) = sd_weights(geom, directions[d], spec.bin_omega(k), loading[k], c).transpose();
  return bank;
}

BeamformerBank build_bank(const ArrayGeometry& geom, const std::vector<LookDirection>& directions,
                          const signal::FrameSpec& spec, double loading, double c) {
  return build_bank(geom, directions, spec,
                    Eigen::VectorXd::Constant(spec.n_bins_kept(), loading), c);
}

Eigen::MatrixXcd beamform_sequence(const BeamformerBank& bank, int direction,
                                   const signal::SpectralSequence& frames) {
  const int n_bins = bank.n_bins();
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(frames.size()), n_bins);
  const Eigen::MatrixXcd& w = bank.weights.at(direction);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Eigen::MatrixXcd& x = frames[t].data;
    if (x.rows() != n_bins || x.cols() != bank.n_channels())
      throw ValidationError("beamform: frame shape does not match the bank");
    // Row-wise w_k^H x_k.
    out.row(t) = w.conjugate().cwiseProduct(x).rowwise().sum().transpose();
  }
  return out;
}

Selection select_max_energy(const BeamformerBank& bank, const signal::SpectralSequence& frames) {
  if (frames.empty()) throw ValidationError("select_max_energy: empty frame sequence");
  Selection sel;
  sel.energies.resize(bank.n_directions());
  for (int d = 0; d < bank.n_directions(); ++d) {
    Eigen::MatrixXcd y = beamform_sequence(bank, d, frames);
    sel.energies[d] = y.cwiseAbs2().sum();
    if (d == 0 || sel.energies[d] > sel.energies[sel.index]) {
      sel.index = d;
      sel.output = std::move(y);
    }
  }
  return sel;
}

nlohmann::json geometry_to_json(const ArrayGeometry& geom) {
  nlohmann::json positions = nlohmann::json::array();
  for (const auto& p : geom.positions) positions.push_back({p.x(), p.y(), p.z()});
  return {{"name", geom.name}, {"positions", positions}};
}

ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  ArrayGeometry geom;
  try {
    geom.name = j.value("name", std::string("unnamed"));
    for (const auto& p : j.at("positions")) {
      const auto xyz = p.get<std::vector<double>>();
      if (xyz.size() != 3) throw ValidationError("geometry: each position needs 3 coordinates");
      geom.positions.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("geometry: ") + e.what());
  }
  geom.validate();
  return geom;
}

ArrayGeometry load_geometry(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return geometry_from_json(j);
}

nlohmann::json bank_to_json(const BeamformerBank& bank) {
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : bank.directions)
    dirs.push_back({{"azimuth", d.azimuth}, {"elevation", d.elevation}, {"label", d.label}});
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : bank.weights) {
    nlohmann::json per_bin = nlohmann::json::array();
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      nlohmann::json taps = nlohmann::json::array();
      for (Eigen::Index m = 0; m < w.cols(); ++m) taps.push_back({w(k, m).real(), w(k, m).imag()});
      per_bin.push_back(std::move(taps));
    }
    weights.push_back(std::move(per_bin));
  }
  return {{"format", "mcfront-bank-1"},
          {"geometry", geometry_to_json(bank.geometry)},
          {"directions", dirs},
          {"frame_spec", signal::to_json(bank.spec)},
          {"speed_of_sound", bank.speed_of_sound},
          {"diagonal_loading",
           std::vector<double>(bank.diagonal_loading.begin(), bank.diagonal_loading.end())},
          {"weights", weights}};
}

BeamformerBank bank_from_json(const nlohmann::json& j) {
  BeamformerBank bank;
  try {
    if (j.value("format", std::string()) != "mcfront-bank-1")
      throw ValidationError("bank: unknown format");
    bank.geometry = geometry_from_json(j.at("geometry"));
    for (const auto& d : j.at("directions"))
      bank.directions.push_back(LookDirection{d.at("azimuth").get<double>(),
                                              d.value("elevation", 0.0),
                                              d.value("label", std::string())});
    bank.spec = signal::frame_spec_from_json(j.at("frame_spec"));
    bank.speed_of_sound = j.value("speed_of_sound", kSpeedOfSound);
    const auto loading = j.at("diagonal_loading").get<std::vector<double>>();
    bank.diagonal_loading =
        Eigen::Map<const Eigen::VectorXd>(loading.data(), static_cast<Eigen::Index>(loading.size()));
    const int n_bins = bank.spec.n_bins_kept(), n_ch = bank.geometry.size();
    for (const auto& per_bin : j.at("weights")) {
      if (static_cast<int>(per_bin.size()) != n_bins)
        throw ValidationError("bank: weight table has wrong bin count");
      Eigen::MatrixXcd w(n_bins, n_ch);
      for (int k = 0; k < n_bins; ++k) {
        if (static_cast<int>(per_bin[k].size()) != n_ch)
          throw ValidationError("bank: weight table has wrong channel count");
        for (int m = 0; m < n_ch; ++m)
          w(k, m) = Complex(per_bin[k][m][0].get<double>(), per_bin[k][m][1].get<double>());
      }
      bank.weights.push_back(std::move(w));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bank: ") + e.what());
  }
  if (bank.weights.size() != bank.directions.size())
    throw ValidationError("bank: direction count does not match weight table");
  return bank;
}

}  // namespace mcfront::beamform
