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

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace mcfront::signal {

struct WavData {
  int sample_rate_hz = 16000;
  // M x N, samples scaled to [-1, 1).
  Eigen::MatrixXd channels;
};

// RIFF WAV, 16-bit PCM, 1..8 channels.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const WavData& wav);
// Same as read_wav, but throws ValidationError when the rate differs.
WavData read_wav(const std::filesystem::path& path, int expected_rate_hz);

// Feature dump: "MCF1", uint32 rank, rank x uint32 dims, then row-major
// float32 payload. All fields little-endian.
void write_features(const std::filesystem::path& path, const Eigen::MatrixXd& rows);
Eigen::MatrixXd read_features(const std::filesystem::path& path);

// Per-frame class labels as raw little-endian uint16.
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& path);

}  // namespace mcfront::signal
