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


#include <cstring>

#include <boost/beast/core/detail/base64.hpp>

#include "mcfront/error.hpp"
#include "mcfront/io.hpp"
#include "mcfront/mcmodel.hpp"

namespace mcfront::mcmodel {

namespace {

namespace b64 = boost::beast::detail::base64;

// Column-major little-endian float64.
std::string encode_array(const Matrix& m) {
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
  std::string out(b64::encoded_size(bytes), '\0');
  out.resize(b64::encode(out.data(), m.data(), bytes));
  return out;
}

Matrix decode_array(const std::string& text, Eigen::Index rows, Eigen::Index cols,
                    const std::string& name) {
  std::string raw(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(raw.data(), text.data(), text.size());
  // The decoder stops at the '=' padding.
  if (read + 2 < text.size() || written != sizeof(double) * static_cast<std::size_t>(rows * cols))
    throw ValidationError("checkpoint array '" + name + "' is corrupt or has the wrong size");
  Matrix m(rows, cols);
  std::memcpy(m.data(), raw.data(), written);
  return m;
}

}  // namespace

Checkpoint make_checkpoint(Model& model, nlohmann::json meta, History history) {
  Checkpoint c;
  c.spec = model.spec();
  c.meta = std::move(meta);
  c.history = std::move(history);
  for (auto& t : model.tensors()) c.arrays[t.name] = t.tensor->value;
  return c;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<Model>(ckpt.spec);
  for (auto& t : model->tensors()) {
    auto it = ckpt.arrays.find(t.name);
    if (it == ckpt.arrays.end()) throw ValidationError("checkpoint lacks array '" + t.name + "'");
    if (it->second.rows() != t.tensor->value.rows() || it->second.cols() != t.tensor->value.cols())
      throw ValidationError("checkpoint array '" + t.name + "' has the wrong shape");
    t.tensor->value = it->second;
  }
  return model;
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  nlohmann::json arrays = nlohmann::json::object();
  for (const auto& [name, m] : ckpt.arrays)
    arrays[name] = {{"shape", {m.rows(), m.cols()}}, {"data", encode_array(m)}};
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : ckpt.history)
    history.push_back(
        {{"epoch", r.epoch}, {"split", r.split}, {"loss", r.loss}, {"frame_error", r.frame_error}});
  nlohmann::json j = {{"format_version", kCheckpointVersion},
                      {"spec", to_json(ckpt.spec)},
                      {"meta", ckpt.meta},
                      {"history", history},
                      {"arrays", arrays}};
  if (auto it = ckpt.arrays.find(std::string(kInputNorm) + ".shift"); it != ckpt.arrays.end()) {
    const Matrix& scale = ckpt.arrays.at(std::string(kInputNorm) + ".scale");
    signal::GlobalStats s{it->second.col(0), scale.col(0).cwiseAbs2().cwiseInverse()};
    j["stats"] = signal::to_json(s);
  }
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"] != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint format_version " +
                          (j.contains("format_version") ? j["format_version"].dump() : "(missing)"));
  Checkpoint c;
  c.spec = model_spec_from_json(j.at("spec"));
  c.meta = j.value("meta", nlohmann::json::object());
  for (const auto& r : j.value("history", nlohmann::json::array()))
    c.history.push_back({r.at("epoch").get<int>(), r.at("split").get<std::string>(),
                         r.at("loss").get<double>(), r.at("frame_error").get<double>()});
  for (const auto& [name, a] : j.at("arrays").items()) {
    const auto shape = a.at("shape");
    c.arrays[name] = decode_array(a.at("data").get<std::string>(), shape.at(0).get<Eigen::Index>(),
                                  shape.at(1).get<Eigen::Index>(), name);
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(io::read_file(path));
}

}  // namespace mcfront::mcmodel
