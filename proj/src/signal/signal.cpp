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

#include "mcfront/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "mcfront/error.hpp"

namespace mcfront::signal {

namespace {

Eigen::FFT<double>& thread_fft() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace

int FrameSpec::window_samples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}

int FrameSpec::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

double FrameSpec::bin_hz(int k) const {
  return static_cast<double>(k + 1) * sample_rate_hz / fft_size;
}

double FrameSpec::bin_omega(int k) const {
  return 2.0 * std::numbers::pi * bin_hz(k);
}

void FrameSpec::validate() const {
  if (sample_rate_hz <= 0) throw ValidationError("frame spec: sample_rate_hz must be positive");
  if (!(window_ms > 0)) throw ValidationError("frame spec: window_ms must be positive");
  if (!(hop_ms > 0)) throw ValidationError("frame spec: hop_ms must be positive");
  if (fft_size < 4 || (fft_size & (fft_size - 1)) != 0)
    throw ValidationError("frame spec: fft_size must be a power of two >= 4");
  if (window_samples() < 1) throw ValidationError("frame spec: window shorter than one sample");
  if (hop_samples() < 1) throw ValidationError("frame spec: hop shorter than one sample");
  if (window_samples() > fft_size)
    throw ValidationError("frame spec: window (" + std::to_string(window_samples()) +
                          " samples) exceeds fft_size " + std::to_string(fft_size));
}

FrameSpec FrameSpec::dft_default() { return FrameSpec{}; }

FrameSpec FrameSpec::lfbe_default() {
  FrameSpec spec;
  spec.window_ms = 25.0;
  spec.fft_size = 512;
  return spec;
}

nlohmann::json to_json(const FrameSpec& spec) {
  return {{"sample_rate_hz", spec.sample_rate_hz},
          {"window_ms", spec.window_ms},
          {"hop_ms", spec.hop_ms},
          {"fft_size", spec.fft_size}};
}

FrameSpec frame_spec_from_json(const nlohmann::json& j) {
  FrameSpec spec;
  try {
    spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
    spec.window_ms = j.value("window_ms", spec.window_ms);
    spec.hop_ms = j.value("hop_ms", spec.hop_ms);
    spec.fft_size = j.value("fft_size", spec.fft_size);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("frame spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const GlobalStats& stats) {
  return {{"mean", std::vector<double>(stats.mean.begin(), stats.mean.end())},
          {"variance", std::vector<double>(stats.variance.begin(), stats.variance.end())}};
}

GlobalStats global_stats_from_json(const nlohmann::json& j) {
  GlobalStats stats;
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto variance = j.at("variance").get<std::vector<double>>();
    if (mean.size() != variance.size()) throw ValidationError("stats: mean/variance size mismatch");
    stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    stats.variance =
        Eigen::Map<const Eigen::VectorXd>(variance.data(), static_cast<Eigen::Index>(variance.size()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("stats: ") + e.what());
  }
  return stats;
}

Eigen::VectorXd periodic_hann(int length) {
  Eigen::VectorXd w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

Eigen::MatrixXd frame_and_window(std::span<const double> samples,
                                 const FrameSpec& spec) {
  spec.validate();
  const long len = static_cast<long>(samples.size());
  const int width = spec.window_samples();
  const int hop = spec.hop_samples();
  if (len < width) return Eigen::MatrixXd(0, width);
  const long n_frames = (len - width) / hop + 1;
  const Eigen::VectorXd window = periodic_hann(width);
  Eigen::MatrixXd frames(n_frames, width);
  for (long t = 0; t < n_frames; ++t) {
    const double* src = samples.data() + t * hop;
    for (int n = 0; n < width; ++n) frames(t, n) = src[n] * window[n];
  }
  return frames;
}

SpectralSequence dft_features(const Eigen::MatrixXd& frames,
                              const FrameSpec& spec) {
  spec.validate();
  if (frames.cols() > spec.fft_size)
    throw ValidationError("dft_features: frame wider than fft_size");
  const int n_bins = spec.n_bins_kept();
  auto& fft = thread_fft();
  std::vector<double> padded(spec.fft_size, 0.0);
  std::vector<Complex> spectrum;
  SpectralSequence out(frames.rows());
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    std::fill(padded.begin(), padded.end(), 0.0);
    for (Eigen::Index n = 0; n < frames.cols(); ++n) padded[n] = frames(t, n);
    fft.fwd(spectrum, padded);
    out[t].frame_index = static_cast<int>(t);
    out[t].data.resize(n_bins, 1);
    for (int k = 0; k < n_bins; ++k) out[t].data(k, 0) = spectrum[k + 1];
  }
  return out;
}

SpectralSequence stft(const Eigen::MatrixXd& channels, const FrameSpec& spec) {
  const int n_channels = static_cast<int>(channels.rows());
  if (n_channels < 1) throw ValidationError("stft: no channels");
  SpectralSequence out;
  for (int m = 0; m < n_channels; ++m) {
    const Eigen::VectorXd row = channels.row(m).transpose();
    const Eigen::MatrixXd frames =
        frame_and_window(std::span<const double>(row.data(), row.size()), spec);
    SpectralSequence single = dft_features(frames, spec);
    if (m == 0) {
      out.resize(single.size());
      for (std::size_t t = 0; t < single.size(); ++t) {
        out[t].frame_index = single[t].frame_index;
        out[t].data.resize(spec.n_bins_kept(), n_channels);
      }
    }
    for (std::size_t t = 0; t < single.size(); ++t) out[t].data.col(m) = single[t].data.col(0);
  }
  return out;
}

Eigen::VectorXd interleave(const Eigen::MatrixXcd& snapshot) {
  const Eigen::Index n_bins = snapshot.rows(), n_channels = snapshot.cols();
  Eigen::VectorXd flat(2 * n_bins * n_channels);
  for (Eigen::Index k = 0; k < n_bins; ++k)
    for (Eigen::Index m = 0; m < n_channels; ++m) {
      flat[2 * (k * n_channels + m)] = snapshot(k, m).real();
      flat[2 * (k * n_channels + m) + 1] = snapshot(k, m).imag();
    }
  return flat;
}

Eigen::MatrixXcd deinterleave(const Eigen::Ref<const Eigen::VectorXd>& flat,
                              int channels) {
  if (channels < 1 || flat.size() % (2 * channels) != 0)
    throw ValidationError("deinterleave: length not divisible by 2 * channels");
  const Eigen::Index n_bins = flat.size() / (2 * channels);
  Eigen::MatrixXcd snapshot(n_bins, channels);
  for (Eigen::Index k = 0; k < n_bins; ++k)
    for (int m = 0; m < channels; ++m)
      snapshot(k, m) = Complex(flat[2 * (k * channels + m)], flat[2 * (k * channels + m) + 1]);
  return snapshot;
}

Eigen::VectorXd power_spectrum(const Eigen::VectorXcd& bins) {
  return bins.cwiseAbs2();
}

StatsAccumulator::StatsAccumulator(int dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}

void StatsAccumulator::add(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (count_ == 0 && mean_.size() == 0) {
    mean_ = Eigen::VectorXd::Zero(x.size());
    m2_ = Eigen::VectorXd::Zero(x.size());
  }
  if (x.size() != mean_.size())
    throw ValidationError("stats: feature dimension " + std::to_string(x.size()) +
                          " does not match " + std::to_string(mean_.size()));
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.array() += delta.array() * (x - mean_).array();
}

void StatsAccumulator::add_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) add(rows.row(r).transpose());
}

GlobalStats StatsAccumulator::finish(double variance_floor) const {
  if (count_ == 0) throw Error("no data");
  if (count_ < 2) throw Error("stats: at least 2 feature vectors required");
  GlobalStats stats;
  stats.mean = mean_;
  stats.variance = (m2_ / static_cast<double>(count_)).cwiseMax(variance_floor);
  return stats;
}

GlobalStats estimate_global_stats(const Eigen::MatrixXd& features,
                                  double variance_floor) {
  StatsAccumulator acc(static_cast<int>(features.cols()));
  acc.add_rows(features);
  return acc.finish(variance_floor);
}

namespace {

void check_dim(Eigen::Index n, const GlobalStats& stats) {
  if (n != stats.mean.size() || n != stats.variance.size())
    throw ValidationError("normalize: dimension " + std::to_string(n) +
                          " does not match stats dimension " + std::to_string(stats.mean.size()));
}

}  // namespace

Eigen::VectorXd global_normalize(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const GlobalStats& stats) {
  check_dim(x.size(), stats);
  return ((x - stats.mean).array() / stats.variance.array().sqrt()).matrix();
}

Eigen::VectorXd denormalize(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const GlobalStats& stats) {
  check_dim(x.size(), stats);
  return (x.array() * stats.variance.array().sqrt()).matrix() + stats.mean;
}

void normalize_rows(Eigen::MatrixXd& rows, const GlobalStats& stats) {
  check_dim(rows.cols(), stats);
  const Eigen::RowVectorXd inv_std = stats.variance.array().sqrt().inverse().matrix().transpose();
  rows.rowwise() -= stats.mean.transpose();
  rows.array().rowwise() *= inv_std.array();
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points(int n_mels, const FrameSpec& spec) {
  const double top = hz_to_mel(spec.sample_rate_hz / 2.0);
  std::vector<double> points(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) points[i] = top * i / (n_mels + 1);
  return points;
}

}  // namespace

std::vector<double> mel_center_frequencies(int n_mels, const FrameSpec& spec) {
  const std::vector<double> points = mel_points(n_mels, spec);
  std::vector<double> centers(n_mels);
  for (int m = 0; m < n_mels; ++m) centers[m] = mel_to_hz(points[m + 1]);
  return centers;
}

Eigen::MatrixXd mel_filterbank(int n_mels, const FrameSpec& spec) {
  spec.validate();
  const int n_bins = spec.n_bins_kept();
  if (n_mels < 1) throw ValidationError("mel_filterbank: n_mels must be >= 1");
  if (n_mels > n_bins)
    throw ValidationError("mel_filterbank: n_mels " + std::to_string(n_mels) +
                          " exceeds the " + std::to_string(n_bins) + " kept bins");
  const std::vector<double> points = mel_points(n_mels, spec);
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = points[m], center = points[m + 1], right = points[m + 2];
    int nearest = 0;
    double nearest_dist = 1e300;
    for (int k = 0; k < n_bins; ++k) {
      const double mel = hz_to_mel(spec.bin_hz(k));
      if (mel > left && mel <= center)
        fb(m, k) = (mel - left) / (center - left);
      else if (mel > center && mel < right)
        fb(m, k) = (right - mel) / (right - center);
      if (std::abs(mel - center) < nearest_dist) {
        nearest_dist = std::abs(mel - center);
        nearest = k;
      }
    }
    if (fb.row(m).maxCoeff() <= 0.0) fb(m, nearest) = 1.0;
  }
  return fb;
}

Eigen::VectorXd lfbe(const Eigen::Ref<const Eigen::VectorXd>& power,
                     const Eigen::MatrixXd& fb, double floor) {
  if (!(floor > 0)) throw ValidationError("lfbe: floor must be positive");
  if (power.size() != fb.cols())
    throw ValidationError("lfbe: power spectrum has " + std::to_string(power.size()) +
                          " bins, filter bank expects " + std::to_string(fb.cols()));
  if ((power.array() < 0.0).any()) throw ValidationError("lfbe: negative power");
  return (fb * power).cwiseMax(floor).array().log().matrix();
}

Eigen::MatrixXd causal_mean_subtract(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& init_mean,
                                     double decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw ValidationError("cms: decay must lie in (0, 1)");
  if (init_mean.size() != features.cols())
    throw ValidationError("cms: initial mean dimension mismatch");
  Eigen::MatrixXd out(features.rows(), features.cols());
  Eigen::RowVectorXd running = init_mean.transpose();
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    out.row(t) = features.row(t) - running;
    running = decay * running + (1.0 - decay) * features.row(t);
  }
  return out;
}

Eigen::MatrixXd lfbe_features(std::span<const double> samples,
                              const FrameSpec& lfbe_spec,
                              const Eigen::MatrixXd& fb,
                              const FrameSpec& align_to) {
  const int pad = std::max(0, (lfbe_spec.window_samples() - align_to.window_samples()) / 2);
  std::vector<double> padded(samples.size() + 2 * pad, 0.0);
  std::copy(samples.begin(), samples.end(), padded.begin() + pad);
  const Eigen::MatrixXd frames = frame_and_window(padded, lfbe_spec);
  const SpectralSequence spectra = dft_features(frames, lfbe_spec);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spectra.size()), fb.rows());
  for (std::size_t t = 0; t < spectra.size(); ++t)
    out.row(t) = lfbe(spectra[t].data.col(0).cwiseAbs2(), fb).transpose();
  return out;
}

}  // namespace mcfront::signal
