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

// File helpers shared by every module: atomic writes and little-endian
// binary encoding.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mcfront::io {

// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

void append_u16(std::string& out, std::uint16_t v);
void append_u32(std::string& out, std::uint32_t v);
void append_f32(std::string& out, float v);

std::uint16_t read_u16(std::string_view in, std::size_t offset);
std::uint32_t read_u32(std::string_view in, std::size_t offset);
float read_f32(std::string_view in, std::size_t offset);

// Lower-case hex SHA-1 of `bytes`, used for provenance digests.
std::string sha1_hex(std::string_view bytes);

}  // namespace mcfront::io
