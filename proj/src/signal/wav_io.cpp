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

#include "mcfront/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcfront/error.hpp"
#include "mcfront/io.hpp"

namespace mcfront::signal {

WavData read_wav(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string_view in(bytes);
  if (in.size() < 12 || in.substr(0, 4) != "RIFF" || in.substr(8, 4) != "WAVE")
    throw ValidationError(path.string() + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  int n_channels = 0, rate = 0, bits = 0;
  bool have_fmt = false;
  while (pos + 8 <= in.size()) {
    const std::string_view id = in.substr(pos, 4);
    const std::uint32_t size = io::read_u32(in, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > in.size()) throw ValidationError(path.string() + ": truncated chunk");
    if (id == "fmt ") {
      if (io::read_u16(in, body) != 1) throw ValidationError(path.string() + ": only PCM is supported");
      n_channels = io::read_u16(in, body + 2);
      rate = static_cast<int>(io::read_u32(in, body + 4));
      bits = io::read_u16(in, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ValidationError(path.string() + ": data chunk before fmt");
      if (bits != 16) throw ValidationError(path.string() + ": only 16-bit PCM is supported");
      if (n_channels < 1 || n_channels > 8)
        throw ValidationError(path.string() + ": channel count must be 1..8");
      const std::size_t n_samples = size / (2 * n_channels);
      WavData wav;
      wav.sample_rate_hz = rate;
      wav.channels.resize(n_channels, static_cast<Eigen::Index>(n_samples));
      for (std::size_t n = 0; n < n_samples; ++n)
        for (int m = 0; m < n_channels; ++m) {
          const auto raw = static_cast<std::int16_t>(io::read_u16(in, body + 2 * (n * n_channels + m)));
          wav.channels(m, static_cast<Eigen::Index>(n)) = raw / 32768.0;
        }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw ValidationError(path.string() + ": no data chunk");
}

WavData read_wav(const std::filesystem::path& path, int expected_rate_hz) {
  WavData wav = read_wav(path);
  if (wav.sample_rate_hz != expected_rate_hz)
    throw ValidationError(path.string() + ": sample rate " + std::to_string(wav.sample_rate_hz) +
                          " Hz does not match configured " + std::to_string(expected_rate_hz) +
                          " Hz");
  return wav;
}

void write_wav(const std::filesystem::path& path, const WavData& wav) {
  const auto n_channels = static_cast<std::uint32_t>(wav.channels.rows());
  const auto n_samples = static_cast<std::uint32_t>(wav.channels.cols());
  if (n_channels < 1 || n_channels > 8) throw ValidationError("write_wav: channel count must be 1..8");
  const std::uint32_t data_bytes = n_samples * n_channels * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  io::append_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  io::append_u32(out, 16);
  io::append_u16(out, 1);
  io::append_u16(out, static_cast<std::uint16_t>(n_channels));
  io::append_u32(out, static_cast<std::uint32_t>(wav.sample_rate_hz));
  io::append_u32(out, static_cast<std::uint32_t>(wav.sample_rate_hz) * n_channels * 2);
  io::append_u16(out, static_cast<std::uint16_t>(n_channels * 2));
  io::append_u16(out, 16);
  out += "data";
  io::append_u32(out, data_bytes);
  for (std::uint32_t n = 0; n < n_samples; ++n)
    for (std::uint32_t m = 0; m < n_channels; ++m) {
      const double scaled = std::round(wav.channels(m, n) * 32768.0);
      const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      io::append_u16(out, static_cast<std::uint16_t>(q));
    }
  io::write_file_atomic(path, out);
}

void write_features(const std::filesystem::path& path, const Eigen::MatrixXd& rows) {
  std::string out = "MCF1";
  io::append_u32(out, 2);
  io::append_u32(out, static_cast<std::uint32_t>(rows.rows()));
  io::append_u32(out, static_cast<std::uint32_t>(rows.cols()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    for (Eigen::Index c = 0; c < rows.cols(); ++c) io::append_f32(out, static_cast<float>(rows(r, c)));
  io::write_file_atomic(path, out);
}

Eigen::MatrixXd read_features(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string_view in(bytes);
  if (in.size() < 8 || in.substr(0, 4) != "MCF1")
    throw ValidationError(path.string() + ": bad feature file magic");
  const std::uint32_t rank = io::read_u32(in, 4);
  if (rank < 1 || rank > 2) throw ValidationError(path.string() + ": unsupported rank");
  const std::uint32_t n_rows = io::read_u32(in, 8);
  const std::uint32_t n_cols = rank == 2 ? io::read_u32(in, 12) : 1;
  const std::size_t offset = 8 + 4 * rank;
  if (in.size() != offset + 4ull * n_rows * n_cols)
    throw ValidationError(path.string() + ": payload size does not match header");
  Eigen::MatrixXd rows(n_rows, n_cols);
  for (std::uint32_t r = 0; r < n_rows; ++r)
    for (std::uint32_t c = 0; c < n_cols; ++c)
      rows(r, c) = io::read_f32(in, offset + 4ull * (r * n_cols + c));
  return rows;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::string out;
  out.reserve(2 * labels.size());
  for (int label : labels) {
    if (label < 0 || label > 0xFFFF) throw ValidationError("write_labels: label out of uint16 range");
    io::append_u16(out, static_cast<std::uint16_t>(label));
  }
  io::write_file_atomic(path, out);
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() % 2 != 0) throw ValidationError(path.string() + ": odd label file size");
  std::vector<int> labels(bytes.size() / 2);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = io::read_u16(bytes, 2 * i);
  return labels;
}

}  // namespace mcfront::signal
