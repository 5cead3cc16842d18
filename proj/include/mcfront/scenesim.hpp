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

// Synthetic labeled array scenes: class-bearing shaped-noise sources,
// far-field plane-wave rendering, diffuse noise with the spherically
// isotropic coherence, and feature views of the mixtures.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mcfront/beamform.hpp"
#include "mcfront/signal.hpp"

namespace mcfront::scenesim {

inline constexpr int kBands = 8;
inline constexpr double kNoiseOff = std::numeric_limits<double>::infinity();

struct SceneSpec {
  beamform::ArrayGeometry geometry = beamform::ArrayGeometry::reference7();
  double target_azimuth = 0.0;  // radians
  std::optional<double> interferer_azimuth;
  double snr_db = kNoiseOff;
  std::optional<double> sir_db;
  double duration_s = 4.0;
  int n_classes = 8;
  std::uint64_t seed = 0;
  int sample_rate_hz = 16000;
  double speed_of_sound = beamform::kSpeedOfSound;
  // Relative amplitude of the attenuated bands of a class envelope.
  double band_floor = 0.1;

  long samples() const;
  void validate() const;
  // SHA-1 of the canonical JSON form.
  std::string digest() const;
};

nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);

// Eight mel-spaced band edges (nine values) between 100 Hz and 0.95 * Nyquist.
std::vector<double> band_edges_hz(int sample_rate_hz);

// Per-class band amplitudes, n_classes x 8: the weight-4 codewords of the
// extended [8,4,4] Hamming code in increasing binary order, mapped to 1 for
// set bits and `floor` otherwise. Supports up to 14 classes.
Eigen::MatrixXd class_envelopes(int n_classes, double floor = 0.1);

struct Segment {
  int class_id = 0;
  long start = 0;   // samples
  long length = 0;  // samples
};

struct ClassSignal {
  Eigen::VectorXd samples;
  std::vector<Segment> segments;
};

// White Gaussian noise shaped by the class envelope, scaled to unit RMS.
Eigen::VectorXd shaped_noise(int class_id, long n_samples, const Eigen::MatrixXd& envelopes,
                             int sample_rate_hz, std::uint64_t seed);

// One class held over the whole duration.
ClassSignal class_source(int class_id, double duration_s, std::uint64_t seed, int n_classes = 8,
                         int sample_rate_hz = 16000, double band_floor = 0.1);

// Consecutive segments of 0.2-0.5 s, each a multiple of `hop` samples, with
// uniformly drawn classes (consecutive segments differ).
std::vector<Segment> random_segments(long n_samples, int hop, int n_classes, int sample_rate_hz,
                                     std::uint64_t seed);

// Renders shaped noise for each segment with the given class sequence.
ClassSignal render_segments(const std::vector<Segment>& segments, const Eigen::MatrixXd& envelopes,
                            long n_samples, int sample_rate_hz, std::uint64_t seed);

// Far-field arrival at every sensor: channel m is `mono` delayed by
// tau_m = -(u . r_m) / c through a 33-tap Blackman-windowed sinc.
Eigen::MatrixXd plane_wave_render(const Eigen::VectorXd& mono, const beamform::ArrayGeometry& geom,
                                  double azimuth, int sample_rate_hz,
                                  double c = beamform::kSpeedOfSound);

// Noise whose cross-sensor coherence at each bin of `spec` is the diffuse
// sinc model, synthesized by coloring independent complex Gaussian bins with
// a Cholesky factor of coherence + 1e-6 I and overlap-adding with square-root
// periodic Hann windows at 50% overlap. Each channel has unit variance.
Eigen::MatrixXd diffuse_noise(const beamform::ArrayGeometry& geom, long n_samples,
                              const signal::FrameSpec& spec, double c, std::uint64_t seed);

struct Utterance {
  SceneSpec spec;
  Eigen::MatrixXd channels;       // M x N
  std::vector<Segment> segments;  // target classes
  std::vector<int> labels;        // one per DFT frame
  double measured_snr_db = kNoiseOff;
  double measured_sir_db = kNoiseOff;
};

// Class of the sample at the center of each analysis frame.
std::vector<int> frame_labels(const std::vector<Segment>& segments, int n_frames,
                              const signal::FrameSpec& spec);

// Target plus diffuse noise at snr_db plus an optional interferer at sir_db,
// both measured at the reference sensor over the whole utterance. The
// interferer shares the target's segmentation with a different class in
// every segment.
Utterance mix_scene(const SceneSpec& spec,
                    const signal::FrameSpec& dft_spec = signal::FrameSpec::dft_default());

// Feature views, one column per DFT frame.
Eigen::MatrixXd dft_view(const Utterance& u, const std::vector<int>& channels,
                         const signal::FrameSpec& spec);
Eigen::MatrixXd lfbe_view(const Utterance& u, int channel, const signal::FrameSpec& dft_spec,
                          const signal::FrameSpec& lfbe_spec, const Eigen::MatrixXd& filterbank);
// Single-channel DFT view of the max-energy SD beamformer over the bank's
// sensors (channel indices into the utterance).
Eigen::MatrixXd sd_selected_view(const Utterance& u, const std::vector<int>& channels,
                                 const beamform::BeamformerBank& bank, int* selected = nullptr);

enum class Split { kTrain = 0, kDev = 1, kTest = 2 };

std::string to_string(Split split);
Split split_from_string(const std::string& s);

// Recipe for a labeled corpus. Utterance i of a split gets seed
// (seed << 24) | (split << 20) | i, so the splits draw from disjoint seed
// ranges, SNR bucket i mod |buckets|, and azimuths drawn uniformly from the
// given ranges (degrees).
struct CorpusConfig {
  beamform::ArrayGeometry geometry = beamform::ArrayGeometry::reference7();
  int train_utterances = 64;
  int dev_utterances = 16;
  int test_utterances = 16;
  double duration_s = 4.0;
  std::vector<double> snr_buckets_db{0.0, 5.0, 10.0, 20.0};
  std::optional<double> sir_db = 5.0;
  double target_azimuth_min_deg = 75.0;
  double target_azimuth_max_deg = 105.0;
  double interferer_azimuth_min_deg = 195.0;
  double interferer_azimuth_max_deg = 255.0;
  int n_classes = 8;
  double band_floor = 0.1;
  std::uint64_t seed = 1;

  int utterances(Split split) const;
  void validate() const;
};

nlohmann::json to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);

std::vector<SceneSpec> corpus_split(const CorpusConfig& config, Split split);

// Power-ratio SNR in dB between two signals.
double snr_db(const Eigen::VectorXd& signal, const Eigen::VectorXd& noise);

}  // namespace mcfront::scenesim
