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

// Fixed beamforming: array geometry, diffuse-noise coherence, super-directive
// (SD) weight design, complex and real-valued application, and max-energy
// beamformer selection.

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mcfront/signal.hpp"

namespace mcfront::beamform {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfSound = 343.0;
inline constexpr double kDefaultLoading = 0.01;

struct ArrayGeometry {
  std::string name;
  std::vector<Eigen::Vector3d> positions;  // meters

  int size() const { return static_cast<int>(positions.size()); }
  double distance(int m, int n) const { return (positions[m] - positions[n]).norm(); }
  // Index of the sensor closest to the array centroid.
  int reference_sensor() const;
  ArrayGeometry subset(const std::vector<int>& indices) const;
  void validate() const;

  // Six sensors equi-spaced on a 72 mm diameter circle plus one at the
  // center. Index 0 is the center, 1..6 sit at azimuth 0, 60, ..., 300 deg.
  static ArrayGeometry reference7();
};

// Sensor indices into reference7() for the 1/2/4/7-microphone configurations.
// Two channels are a diagonal pair across the center.
std::vector<int> reference_mic_subset(int n_mics);

struct LookDirection {
  double azimuth = 0.0;    // radians, [0, 2pi)
  double elevation = 0.0;  // radians
  std::string label;

  // Unit vector pointing from the array towards the source.
  Eigen::Vector3d unit() const;
};

// D directions at elevation 0, azimuth 2*pi*d/D.
std::vector<LookDirection> uniform_directions(int count);

// Far-field manifold vector, v_m = exp(-j w tau_m), tau_m = -(u . r_m) / c.
Eigen::VectorXcd manifold_vector(const ArrayGeometry& geom, const LookDirection& dir,
                                 double omega, double c = kSpeedOfSound);

// Spherically isotropic noise coherence, sinc(w d_mn / c).
Eigen::MatrixXd diffuse_coherence(const ArrayGeometry& geom, double omega,
                                  double c = kSpeedOfSound);

double sinc(double x);

// Super-directive weights w = S^-1 v / (v^H S^-1 v) with S = coherence +
// loading * I. Throws Error("singular coherence") when S cannot be factored.
Eigen::VectorXcd sd_weights(const ArrayGeometry& geom, const LookDirection& dir,
                            double omega, double loading = kDefaultLoading,
                            double c = kSpeedOfSound);

// Y = w^H X.
Complex apply_beamformer(const Eigen::VectorXcd& w, const Eigen::VectorXcd& x);

// 2M x 2 real form built from the entries c_m = conj(w_m) of w^H: rows
// [Re c_m, Im c_m; -Im c_m, Re c_m]. Its transpose times realify_snapshot(X)
// gives [Re Y, Im Y] for Y = w^H X.
Eigen::MatrixXd realify_weights(const Eigen::VectorXcd& w);
Eigen::VectorXd realify_snapshot(const Eigen::VectorXcd& x);

struct BeamformerBank {
  std::vector<Eigen::MatrixXcd> weights;  // D entries, each K x M
  ArrayGeometry geometry;
  std::vector<LookDirection> directions;
  signal::FrameSpec spec;
  Eigen::VectorXd diagonal_loading;  // per kept bin
  double speed_of_sound = kSpeedOfSound;

  int n_directions() const { return static_cast<int>(weights.size()); }
  int n_bins() const { return weights.empty() ? 0 : static_cast<int>(weights[0].rows()); }
  int n_channels() const { return geometry.size(); }
  Eigen::VectorXcd weight(int d, int k) const { return weights[d].row(k).transpose(); }
  // Largest |w^H v - 1| over every (direction, bin).
  double max_distortion_error() const;
};

BeamformerBank build_bank(const ArrayGeometry& geom, const std::vector<LookDirection>& directions,
                          const signal::FrameSpec& spec, const Eigen::VectorXd& loading,
                          double c = kSpeedOfSound);
BeamformerBank build_bank(const ArrayGeometry& geom, const std::vector<LookDirection>& directions,
                          const signal::FrameSpec& spec, double loading = kDefaultLoading,
                          double c = kSpeedOfSound);

struct Selection {
  int index = 0;
  Eigen::MatrixXcd output;  // T x K
  std::vector<double> energies;
};

// Picks the direction with the largest output energy summed over frames and
// bins; ties go to the lowest index.
Selection select_max_energy(const BeamformerBank& bank, const signal::SpectralSequence& frames);

// Output of one beamformer over a frame sequence, T x K.
Eigen::MatrixXcd beamform_sequence(const BeamformerBank& bank, int direction,
                                   const signal::SpectralSequence& frames);

nlohmann::json geometry_to_json(const ArrayGeometry& geom);
ArrayGeometry geometry_from_json(const nlohmann::json& j);
ArrayGeometry load_geometry(const std::filesystem::path& path);

nlohmann::json bank_to_json(const BeamformerBank& bank);
BeamformerBank bank_from_json(const nlohmann::json& j);

}  // namespace mcfront::beamform
