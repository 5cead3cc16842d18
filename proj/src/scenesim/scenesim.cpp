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
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "mcfront/error.hpp"
#include "mcfront/io.hpp"
#include "mcfront/scenesim.hpp"

namespace mcfront::scenesim {

namespace {

using Complex = std::complex<double>;
using Rng = std::mt19937_64;

// Independent random streams derived from one seed.
enum Stream : std::uint32_t {
  kSegmentsStream = 1,
  kTargetStream,
  kInterfererClassStream,
  kInterfererStream,
  kNoiseStream,
};

Rng make_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    index};
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  Rng rng = make_rng(seed, stream);
  return rng();
}

Eigen::FFT<double>& thread_fft() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

long next_pow2(long n) {
  long p = 1;
  while (p < n) p <<= 1;
  return p;
}

double blackman(double t, double half_width) {
  if (std::abs(t) >= half_width) return 0.0;
  const double x = std::numbers::pi * t / half_width;
  return 0.42 + 0.5 * std::cos(x) + 0.08 * std::cos(2 * x);
}

double sinc_pi(double t) {
  if (t == 0.0) return 1.0;
  if (t == std::round(t)) return 0.0;
  return std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
}

double mean_power(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.size() ? x.squaredNorm() / static_cast<double>(x.size()) : 0.0;
}

}  // namespace

long SceneSpec::samples() const {
  return std::lround(duration_s * sample_rate_hz);
}

void SceneSpec::validate() const {
  geometry.validate();
  if (!(duration_s > 0)) throw ValidationError("scene.duration_s must be positive");
  if (n_classes < 2 || n_classes > 14) throw ValidationError("scene.n_classes must lie in [2, 14]");
  if (sample_rate_hz <= 0) throw ValidationError("scene.sample_rate_hz must be positive");
  if (!(speed_of_sound > 0)) throw ValidationError("scene.speed_of_sound must be positive");
  if (std::isnan(snr_db)) throw ValidationError("scene.snr_db is NaN");
  if (sir_db && !interferer_azimuth)
    throw ValidationError("scene.sir_db given without interferer_azimuth");
  if (interferer_azimuth && !sir_db)
    throw ValidationError("scene.interferer_azimuth given without sir_db");
  if (sir_db && !std::isfinite(*sir_db)) throw ValidationError("scene.sir_db must be finite");
  if (!(band_floor >= 0 && band_floor < 1)) throw ValidationError("scene.band_floor must lie in [0, 1)");
}

nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json j = {{"geometry", beamform::geometry_to_json(s.geometry)},
                      {"target_azimuth", s.target_azimuth},
                      {"duration_s", s.duration_s},
                      {"n_classes", s.n_classes},
                      {"seed", s.seed},
                      {"sample_rate_hz", s.sample_rate_hz},
                      {"speed_of_sound", s.speed_of_sound},
                      {"band_floor", s.band_floor}};
  // JSON has no infinity; an absent snr_db means the noise is off.
  if (std::isfinite(s.snr_db)) j["snr_db"] = s.snr_db;
  if (s.interferer_azimuth) j["interferer_azimuth"] = *s.interferer_azimuth;
  if (s.sir_db) j["sir_db"] = *s.sir_db;
  return j;
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    if (j.contains("geometry")) s.geometry = beamform::geometry_from_json(j["geometry"]);
    s.target_azimuth = j.value("target_azimuth", 0.0);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.n_classes = j.value("n_classes", s.n_classes);
    s.seed = j.value("seed", s.seed);
    s.sample_rate_hz = j.value("sample_rate_hz", s.sample_rate_hz);
    s.speed_of_sound = j.value("speed_of_sound", s.speed_of_sound);
    s.band_floor = j.value("band_floor", s.band_floor);
    if (j.contains("snr_db") && !j["snr_db"].is_null()) s.snr_db = j["snr_db"].get<double>();
    if (j.contains("interferer_azimuth")) s.interferer_azimuth = j["interferer_azimuth"].get<double>();
    if (j.contains("sir_db")) s.sir_db = j["sir_db"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SceneSpec::digest() const { return io::sha1_hex(to_json(*this).dump()); }

std::vector<double> band_edges_hz(int sample_rate_hz) {
  const double lo = signal::hz_to_mel(100.0);
  const double hi = signal::hz_to_mel(0.95 * sample_rate_hz / 2.0);
  std::vector<double> edges(kBands + 1);
  for (int i = 0; i <= kBands; ++i) edges[i] = signal::mel_to_hz(lo + (hi - lo) * i / kBands);
  return edges;
}

Eigen::MatrixXd class_envelopes(int n_classes, double floor) {
  std::vector<unsigned> words;
  for (unsigned d = 0; d < 16; ++d) {
    const unsigned d1 = d >> 3 & 1, d2 = d >> 2 & 1, d3 = d >> 1 & 1, d4 = d & 1;
    const unsigned p1 = d1 ^ d2 ^ d4, p2 = d1 ^ d3 ^ d4, p3 = d2 ^ d3 ^ d4;
    const unsigned p4 = d1 ^ d2 ^ d3 ^ d4 ^ p1 ^ p2 ^ p3;
    const unsigned w = d1 << 7 | d2 << 6 | d3 << 5 | d4 << 4 | p1 << 3 | p2 << 2 | p3 << 1 | p4;
    if (std::popcount(w) == 4) words.push_back(w);
  }
  std::sort(words.begin(), words.end());
  if (n_classes < 1 || n_classes > static_cast<int>(words.size()))
    throw ValidationError("class_envelopes supports 1.." + std::to_string(words.size()) + " classes");
  Eigen::MatrixXd env(n_classes, kBands);
  for (int c = 0; c < n_classes; ++c)
    for (int b = 0; b < kBands; ++b) env(c, b) = (words[c] >> (kBands - 1 - b) & 1) ? 1.0 : floor;
  return env;
}

Eigen::VectorXd shaped_noise(int class_id, long n_samples, const Eigen::MatrixXd& envelopes,
                             int sample_rate_hz, std::uint64_t seed) {
  if (class_id < 0 || class_id >= envelopes.rows())
    throw ValidationError("class_id " + std::to_string(class_id) + " out of range");
  if (n_samples <= 0) return {};
  const long nfft = next_pow2(n_samples);
  Rng rng = make_rng(seed, kTargetStream, static_cast<std::uint32_t>(class_id));
  std::normal_distribution<double> g;
  std::vector<double> x(nfft, 0.0);
  for (long i = 0; i < n_samples; ++i) x[i] = g(rng);
  std::vector<Complex> spec;
  auto& fft = thread_fft();
  fft.fwd(spec, x);
  const auto edges = band_edges_hz(sample_rate_hz);
  const double floor = envelopes.row(class_id).minCoeff();
  for (long k = 0; k <= nfft / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate_hz / nfft;
    double gain = floor;
    for (int b = 0; b < kBands; ++b)
      if (f >= edges[b] && f < edges[b + 1]) gain = envelopes(class_id, b);
    spec[k] *= gain;
    if (k > 0 && k < nfft / 2) spec[nfft - k] *= gain;
  }
  std::vector<double> y;
  fft.inv(y, spec);
  Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(y.data(), n_samples);
  const double rms = std::sqrt(mean_power(out));
  if (rms > 0) out /= rms;
  return out;
}

ClassSignal class_source(int class_id, double duration_s, std::uint64_t seed, int n_classes,
                         int sample_rate_hz, double band_floor) {
  const long n = std::lround(duration_s * sample_rate_hz);
  ClassSignal s;
  s.samples = shaped_noise(class_id, n, class_envelopes(n_classes, band_floor), sample_rate_hz, seed);
  s.segments.push_back({class_id, 0, n});
  return s;
}

std::vector<Segment> random_segments(long n_samples, int hop, int n_classes, int sample_rate_hz,
                                     std::uint64_t seed) {
  if (hop < 1 || n_classes < 2) throw ValidationError("random_segments: hop >= 1 and n_classes >= 2");
  Rng rng = make_rng(seed, kSegmentsStream);
  // Segment lengths count whole hops so boundaries fall on frame starts.
  const int lo = static_cast<int>(std::ceil(0.2 * sample_rate_hz / hop));
  const int hi = std::max(lo, static_cast<int>(std::floor(0.5 * sample_rate_hz / hop)));
  std::uniform_int_distribution<int> len(lo, hi);
  std::uniform_int_distribution<int> first(0, n_classes - 1), other(1, n_classes - 1);
  std::vector<Segment> segs;
  long pos = 0;
  int cls = first(rng);
  while (pos < n_samples) {
    const long l = std::min<long>(static_cast<long>(len(rng)) * hop, n_samples - pos);
    segs.push_back({cls, pos, l});
    pos += l;
    cls = (cls + other(rng)) % n_classes;
  }
  return segs;
}

ClassSignal render_segments(const std::vector<Segment>& segments, const Eigen::MatrixXd& envelopes,
                            long n_samples, int sample_rate_hz, std::uint64_t seed) {
  ClassSignal s;
  s.segments = segments;
  s.samples = Eigen::VectorXd::Zero(n_samples);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.start < 0 || seg.start + seg.length > n_samples)
      throw ValidationError("segment exceeds the signal");
    Rng r = make_rng(seed, kTargetStream, static_cast<std::uint32_t>(i));
    s.samples.segment(seg.start, seg.length) =
        shaped_noise(seg.class_id, seg.length, envelopes, sample_rate_hz, r());
  }
  return s;
}

Eigen::MatrixXd plane_wave_render(const Eigen::VectorXd& mono, const beamform::ArrayGeometry& geom,
                                  double azimuth, int sample_rate_hz, double c) {
  geom.validate();
  constexpr int kHalfTaps = 16;
  const beamform::LookDirection dir{azimuth, 0.0, ""};
  const Eigen::Vector3d u = dir.unit();
  const long n = mono.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(geom.size(), n);
  for (int m = 0; m < geom.size(); ++m) {
    double delay = -u.dot(geom.positions[m]) / c * sample_rate_hz;
    if (std::abs(delay) < 1e-9) delay = 0.0;
    if (delay == 0.0) {
      out.row(m) = mono.transpose();
      continue;
    }
    // y[i] = sum_j x[i - j] h(j - delay), taps centered on the nearest integer.
    const long center = std::lround(delay);
    std::vector<double> h;
    for (long j = center - kHalfTaps; j <= center + kHalfTaps; ++j) {
      const double t = static_cast<double>(j) - delay;
      h.push_back(sinc_pi(t) * blackman(t, kHalfTaps + 1));
    }
    for (long i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int tap = 0; tap < static_cast<int>(h.size()); ++tap) {
        const long src = i - (center - kHalfTaps + tap);
        if (src >= 0 && src < n) acc += mono[src] * h[tap];
      }
      out(m, i) = acc;
    }
  }
  return out;
}

Eigen::MatrixXd diffuse_noise(const beamform::ArrayGeometry& geom, long n_samples,
                              const signal::FrameSpec& spec, double c, std::uint64_t seed) {
  geom.validate();
  spec.validate();
  const int L = spec.fft_size, hop = L / 2, M = geom.size();
  const double fs = spec.sample_rate_hz;
  std::vector<Eigen::MatrixXd> factors;
  for (int k = 0; k <= L / 2; ++k) {
    Eigen::MatrixXd s = beamform::diffuse_coherence(geom, 2 * std::numbers::pi * k * fs / L, c);
    s.diagonal().array() += 1e-6;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw Error("diffuse coherence is not positive definite");
    factors.push_back(llt.matrixL());
  }
  Eigen::VectorXd window = signal::periodic_hann(L).cwiseSqrt();
  const long frames = n_samples / hop + 2;
  Eigen::MatrixXd buf = Eigen::MatrixXd::Zero(M, (frames + 1) * hop);
  Rng rng = make_rng(seed, kNoiseStream);
  std::normal_distribution<double> g;
  const double half = std::sqrt(L / 2.0), full = std::sqrt(static_cast<double>(L));
  std::vector<std::vector<Complex>> spectra(M, std::vector<Complex>(L));
  std::vector<double> frame;
  auto& fft = thread_fft();
  Eigen::VectorXd zr(M), zi(M), xr(M), xi(M);
  for (long f = 0; f < frames; ++f) {
    for (int k = 0; k <= L / 2; ++k) {
      const bool real_bin = k == 0 || k == L / 2;
      for (int m = 0; m < M; ++m) {
        zr[m] = (real_bin ? full : half) * g(rng);
        zi[m] = real_bin ? 0.0 : half * g(rng);
      }
      // The factor is real, so it mixes real and imaginary parts separately.
      xr.noalias() = factors[k].triangularView<Eigen::Lower>() * zr;
      xi.noalias() = factors[k].triangularView<Eigen::Lower>() * zi;
      for (int m = 0; m < M; ++m) {
        spectra[m][k] = Complex(xr[m], xi[m]);
        if (!real_bin) spectra[m][L - k] = Complex(xr[m], -xi[m]);
      }
    }
    for (int m = 0; m < M; ++m) {
      fft.inv(frame, spectra[m]);
      for (int i = 0; i < L; ++i) buf(m, f * hop + i) += window[i] * frame[i];
    }
  }
  // Skip the first half frame, which only one window covers.
  return buf.middleCols(hop, n_samples);
}

std::vector<int> frame_labels(const std::vector<Segment>& segments, int n_frames,
                              const signal::FrameSpec& spec) {
  std::vector<int> labels(n_frames, -1);
  std::size_t s = 0;
  for (int t = 0; t < n_frames; ++t) {
    const long center = static_cast<long>(t) * spec.hop_samples() + spec.window_samples() / 2;
    while (s < segments.size() && segments[s].start + segments[s].length <= center) ++s;
    if (s < segments.size() && segments[s].start <= center) labels[t] = segments[s].class_id;
  }
  return labels;
}

double snr_db(const Eigen::VectorXd& sig, const Eigen::VectorXd& noise) {
  return 10.0 * std::log10(mean_power(sig) / mean_power(noise));
}

Utterance mix_scene(const SceneSpec& spec, const signal::FrameSpec& dft_spec) {
  spec.validate();
  dft_spec.validate();
  if (dft_spec.sample_rate_hz != spec.sample_rate_hz)
    throw ValidationError("scene and frame spec sample rates differ");
  const long n = spec.samples();
  const int ref = spec.geometry.reference_sensor();
  const Eigen::MatrixXd env = class_envelopes(spec.n_classes, spec.band_floor);

  Utterance u;
  u.spec = spec;
  u.segments = random_segments(n, dft_spec.hop_samples(), spec.n_classes, spec.sample_rate_hz, spec.seed);
  const ClassSignal target =
      render_segments(u.segments, env, n, spec.sample_rate_hz, derive_seed(spec.seed, kTargetStream));
  u.channels = plane_wave_render(target.samples, spec.geometry, spec.target_azimuth,
                                 spec.sample_rate_hz, spec.speed_of_sound);
  const double target_power = mean_power(u.channels.row(ref).transpose());

  if (spec.interferer_azimuth) {
    Rng pick = make_rng(spec.seed, kInterfererClassStream);
    std::uniform_int_distribution<int> other(1, spec.n_classes - 1);
    std::vector<Segment> segs = u.segments;
    for (auto& s : segs) s.class_id = (s.class_id + other(pick)) % spec.n_classes;
    const ClassSignal src = render_segments(segs, env, n, spec.sample_rate_hz,
                                            derive_seed(spec.seed, kInterfererStream));
    Eigen::MatrixXd interferer = plane_wave_render(src.samples, spec.geometry, *spec.interferer_azimuth,
                                                   spec.sample_rate_hz, spec.speed_of_sound);
    interferer *= std::sqrt(target_power / mean_power(interferer.row(ref).transpose()) *
                            std::pow(10.0, -*spec.sir_db / 10.0));
    u.measured_sir_db = snr_db(u.channels.row(ref).transpose(), interferer.row(ref).transpose());
    u.channels += interferer;
  }
  if (std::isfinite(spec.snr_db)) {
    Eigen::MatrixXd noise = diffuse_noise(spec.geometry, n, dft_spec, spec.speed_of_sound,
                                          derive_seed(spec.seed, kNoiseStream));
    noise *= std::sqrt(target_power / mean_power(noise.row(ref).transpose()) *
                       std::pow(10.0, -spec.snr_db / 10.0));
    // Measured against the target alone, before the interferer was added.
    u.measured_snr_db = 10.0 * std::log10(target_power / mean_power(noise.row(ref).transpose()));
    u.channels += noise;
  }
  const long W = dft_spec.window_samples(), hop = dft_spec.hop_samples();
  const int frames = n < W ? 0 : static_cast<int>((n - W) / hop + 1);
  u.labels = frame_labels(u.segments, frames, dft_spec);
  return u;
}

Eigen::MatrixXd dft_view(const Utterance& u, const std::vector<int>& channels,
                         const signal::FrameSpec& spec) {
  Eigen::MatrixXd x(channels.size(), u.channels.cols());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 0 || channels[i] >= u.channels.rows())
      throw ValidationError("channel " + std::to_string(channels[i]) + " out of range");
    x.row(i) = u.channels.row(channels[i]);
  }
  const signal::SpectralSequence seq = signal::stft(x, spec);
  Eigen::MatrixXd out(2 * spec.n_bins_kept() * static_cast<Eigen::Index>(channels.size()),
                      static_cast<Eigen::Index>(seq.size()));
  for (std::size_t t = 0; t < seq.size(); ++t) out.col(t) = signal::interleave(seq[t].data);
  return out;
}

Eigen::MatrixXd lfbe_view(const Utterance& u, int channel, const signal::FrameSpec& dft_spec,
                          const signal::FrameSpec& lfbe_spec, const Eigen::MatrixXd& filterbank) {
  if (channel < 0 || channel >= u.channels.rows())
    throw ValidationError("channel " + std::to_string(channel) + " out of range");
  const Eigen::VectorXd x = u.channels.row(channel).transpose();
  return signal::lfbe_features(std::span<const double>(x.data(), x.size()), lfbe_spec, filterbank,
                               dft_spec)
      .transpose();
}

Eigen::MatrixXd sd_selected_view(const Utterance& u, const std::vector<int>& channels,
                                 const beamform::BeamformerBank& bank, int* selected) {
  if (static_cast<int>(channels.size()) != bank.n_channels())
    throw ValidationError("bank has " + std::to_string(bank.n_channels()) + " channels, got " +
                          std::to_string(channels.size()));
  Eigen::MatrixXd x(channels.size(), u.channels.cols());
  for (std::size_t i = 0; i < channels.size(); ++i) x.row(i) = u.channels.row(channels[i]);
  const signal::SpectralSequence seq = signal::stft(x, bank.spec);
  const beamform::Selection sel = beamform::select_max_energy(bank, seq);
  if (selected) *selected = sel.index;
  Eigen::MatrixXd out(2 * sel.output.cols(), sel.output.rows());
  for (Eigen::Index t = 0; t < sel.output.rows(); ++t)
    out.col(t) = signal::interleave(sel.output.row(t).transpose());
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "'");
}

int CorpusConfig::utterances(Split split) const {
  switch (split) {
    case Split::kTrain: return train_utterances;
    case Split::kDev: return dev_utterances;
    case Split::kTest: return test_utterances;
  }
  return 0;
}

void CorpusConfig::validate() const {
  geometry.validate();
  for (int n : {train_utterances, dev_utterances, test_utterances})
    if (n < 0 || n >= (1 << 20)) throw ValidationError("corpus: utterance counts must lie in [0, 2^20)");
  if (!(duration_s > 0)) throw ValidationError("corpus.duration_s must be positive");
  if (snr_buckets_db.empty()) throw ValidationError("corpus.snr_buckets_db is empty");
  if (target_azimuth_min_deg > target_azimuth_max_deg ||
      interferer_azimuth_min_deg > interferer_azimuth_max_deg)
    throw ValidationError("corpus: azimuth ranges must have min <= max");
  if (seed >= (std::uint64_t{1} << 40)) throw ValidationError("corpus.seed must be < 2^40");
}

nlohmann::json to_json(const CorpusConfig& c) {
  nlohmann::json j = {{"geometry", beamform::geometry_to_json(c.geometry)},
                      {"train_utterances", c.train_utterances},
                      {"dev_utterances", c.dev_utterances},
                      {"test_utterances", c.test_utterances},
                      {"duration_s", c.duration_s},
                      {"snr_buckets_db", c.snr_buckets_db},
                      {"target_azimuth_deg", {c.target_azimuth_min_deg, c.target_azimuth_max_deg}},
                      {"interferer_azimuth_deg", {c.interferer_azimuth_min_deg, c.interferer_azimuth_max_deg}},
                      {"n_classes", c.n_classes},
                      {"band_floor", c.band_floor},
                      {"seed", c.seed}};
  if (c.sir_db) j["sir_db"] = *c.sir_db;
  return j;
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  CorpusConfig c;
  try {
    if (j.contains("geometry")) c.geometry = beamform::geometry_from_json(j["geometry"]);
    c.train_utterances = j.value("train_utterances", c.train_utterances);
    c.dev_utterances = j.value("dev_utterances", c.dev_utterances);
    c.test_utterances = j.value("test_utterances", c.test_utterances);
    c.duration_s = j.value("duration_s", c.duration_s);
    c.snr_buckets_db = j.value("snr_buckets_db", c.snr_buckets_db);
    if (j.contains("sir_db"))
      c.sir_db = j["sir_db"].is_null() ? std::nullopt : std::optional<double>(j["sir_db"].get<double>());
    if (j.contains("target_azimuth_deg")) {
      c.target_azimuth_min_deg = j["target_azimuth_deg"].at(0).get<double>();
      c.target_azimuth_max_deg = j["target_azimuth_deg"].at(1).get<double>();
    }
    if (j.contains("interferer_azimuth_deg")) {
      c.interferer_azimuth_min_deg = j["interferer_azimuth_deg"].at(0).get<double>();
      c.interferer_azimuth_max_deg = j["interferer_azimuth_deg"].at(1).get<double>();
    }
    c.n_classes = j.value("n_classes", c.n_classes);
    c.band_floor = j.value("band_floor", c.band_floor);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("corpus config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<SceneSpec> corpus_split(const CorpusConfig& config, Split split) {
  config.validate();
  const double deg = std::numbers::pi / 180.0;
  std::vector<SceneSpec> specs;
  for (int i = 0; i < config.utterances(split); ++i) {
    SceneSpec s;
    s.geometry = config.geometry;
    s.seed = config.seed << 24 | static_cast<std::uint64_t>(split) << 20 | static_cast<std::uint64_t>(i);
    Rng rng = make_rng(s.seed, 0);
    std::uniform_real_distribution<double> target(config.target_azimuth_min_deg,
                                                  config.target_azimuth_max_deg);
    std::uniform_real_distribution<double> interferer(config.interferer_azimuth_min_deg,
                                                      config.interferer_azimuth_max_deg);
    s.target_azimuth = target(rng) * deg;
    if (config.sir_db) {
      s.interferer_azimuth = interferer(rng) * deg;
      s.sir_db = config.sir_db;
    }
    s.snr_db = config.snr_buckets_db[i % config.snr_buckets_db.size()];
    s.duration_s = config.duration_s;
    s.n_classes = config.n_classes;
    s.band_floor = config.band_floor;
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace mcfront::scenesim
