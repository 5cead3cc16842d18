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

// Framing, DFT features, normalization and the log mel filter bank energy
// (LFBE) reference pipeline.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mcfront::signal {

using Complex = std::complex<double>;

struct FrameSpec {
  int sample_rate_hz = 16000;
  double window_ms = 12.5;
  double hop_ms = 10.0;
  int fft_size = 256;

  int window_samples() const;
  int hop_samples() const;
  // DC and Nyquist are dropped.
  int n_bins_kept() const { return fft_size / 2 - 1; }
  // Frequency in Hz of kept bin `k` (0-based, i.e. original DFT bin k + 1).
  double bin_hz(int k) const;
  double bin_omega(int k) const;

  // Throws ValidationError when a field is out of range.
  void validate() const;

  // 12.5 ms / 10 ms / 256-point DFT: 127 kept bins at 16 kHz.
  static FrameSpec dft_default();
  // 25 ms / 10 ms / 512-point DFT used by the LFBE baseline.
  static FrameSpec lfbe_default();

  bool operator==(const FrameSpec&) const = default;
};

nlohmann::json to_json(const FrameSpec& spec);
FrameSpec frame_spec_from_json(const nlohmann::json& j);

// One multi-channel DFT snapshot X(t, w_k): K rows (kept bins) by M columns.
struct SpectralFrame {
  Eigen::MatrixXcd data;
  int frame_index = 0;

  int bins() const { return static_cast<int>(data.rows()); }
  int channels() const { return static_cast<int>(data.cols()); }
};

using SpectralSequence = std::vector<SpectralFrame>;

struct GlobalStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  int dim() const { return static_cast<int>(mean.size()); }
};

nlohmann::json to_json(const GlobalStats& stats);
GlobalStats global_stats_from_json(const nlohmann::json& j);

inline constexpr double kVarianceFloor = 1e-8;
inline constexpr double kLogFloor = 1e-7;
inline constexpr double kCmsDecay = 0.995;

Eigen::VectorXd periodic_hann(int length);

// Returns T x W windowed frames, T = floor((len - W) / hop) + 1, or an empty
// matrix when the signal is shorter than one window.
Eigen::MatrixXd frame_and_window(std::span<const double> samples,
                                 const FrameSpec& spec);

// DFT of each row (zero-padded to fft_size), keeping bins 1..fft_size/2-1.
SpectralSequence dft_features(const Eigen::MatrixXd& frames,
                              const FrameSpec& spec);

// Multi-channel STFT. `channels` is M x N; every frame has K x M data.
SpectralSequence stft(const Eigen::MatrixXd& channels, const FrameSpec& spec);

// Flattens a snapshot to the network input layout: per bin k,
// [Re X_1, Im X_1, ..., Re X_M, Im X_M], bins concatenated k = 1..K.
Eigen::VectorXd interleave(const Eigen::MatrixXcd& snapshot);
Eigen::MatrixXcd deinterleave(const Eigen::Ref<const Eigen::VectorXd>& flat,
                              int channels);

// Per-bin power |X_k|^2 of a single-channel snapshot.
Eigen::VectorXd power_spectrum(const Eigen::VectorXcd& bins);

// Streaming per-dimension mean / population variance (Welford).
class StatsAccumulator {
 public:
  explicit StatsAccumulator(int dim = 0);

  void add(const Eigen::Ref<const Eigen::VectorXd>& x);
  // Each row of `rows` is one feature vector.
  void add_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows);

  long count() const { return count_; }
  // Throws Error("no data") when nothing was added.
  GlobalStats finish(double variance_floor = kVarianceFloor) const;

 private:
  long count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

// Each row of `features` is one feature vector.
GlobalStats estimate_global_stats(const Eigen::MatrixXd& features,
                                  double variance_floor = kVarianceFloor);

Eigen::VectorXd global_normalize(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const GlobalStats& stats);
Eigen::VectorXd denormalize(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const GlobalStats& stats);
// Row-wise normalization of a T x dim matrix, in place.
void normalize_rows(Eigen::MatrixXd& rows, const GlobalStats& stats);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x K triangular filters on the mel scale between 0 Hz and Nyquist,
// sampled at the kept-bin frequencies. A filter narrower than the bin
// spacing (no bin inside its support) collapses to weight 1 on the bin
// nearest its center, so every row has a positive entry.
Eigen::MatrixXd mel_filterbank(int n_mels, const FrameSpec& spec);

// Center frequencies (Hz) of the filters built by mel_filterbank.
std::vector<double> mel_center_frequencies(int n_mels, const FrameSpec& spec);

// log(max(fb * power, floor)). Throws ValidationError on negative power.
Eigen::VectorXd lfbe(const Eigen::Ref<const Eigen::VectorXd>& power,
                     const Eigen::MatrixXd& fb, double floor = kLogFloor);

// Online causal mean subtraction on a T x dim sequence:
//   y_t = x_t - m_{t-1},  m_t = decay * m_{t-1} + (1 - decay) * x_t
// with m_{-1} = init_mean.
Eigen::MatrixXd causal_mean_subtract(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& init_mean,
                                     double decay = kCmsDecay);

// LFBE features of a mono signal: T x n_mels. Frames are centered like the
// frames of `align_to` (the signal is zero-padded on both sides by half the
// window-length difference) so both views have the same frame count.
Eigen::MatrixXd lfbe_features(std::span<const double> samples,
                              const FrameSpec& lfbe_spec,
                              const Eigen::MatrixXd& fb,
                              const FrameSpec& align_to);

}  // namespace mcfront::signal
