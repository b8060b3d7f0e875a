// SPDX-License-Identifier: Apache-2.0
#include "numerics/checkpoint.hpp"

#include <fstream>

namespace graphflow {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint &ckpt) {
  json tensors = json::object();
  for (const auto &[name, t] : ckpt.tensors)
    tensors[name] = {{"shape", t.shape()}, {"data", t.storage()}};
  return {{"format", "graphflow-checkpoint"},
          {"format_version", kCheckpointFormatVersion},
          {"meta", ckpt.meta},
          {"tensors", std::move(tensors)}};
}

Checkpoint checkpoint_from_json(const json &j) {
  if (!j.is_object() || j.value("format", "") != "graphflow-checkpoint")
    throw CheckpointError("not a graphflow checkpoint");
  const int version = j.value("format_version", -1);
  if (version != kCheckpointFormatVersion)
    throw CheckpointError("unsupported checkpoint format_version " +
                          std::to_string(version));
  Checkpoint out;
  out.meta = j.value("meta", json::object());
  try {
    for (const auto &[name, entry] : j.at("tensors").items()) {
      auto shape = entry.at("shape").get<Shape>();
      auto data = entry.at("data").get<std::vector<double>>();
      out.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
    }
  } catch (const json::exception &e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError &e) {
    throw CheckpointError(std::string("malformed checkpoint tensor: ") +
                          e.what());
  }
  return out;
}

void save_checkpoint(const Checkpoint &ckpt,
                     const std::filesystem::path &path) {
  std::ofstream os(path);
  if (!os)
    throw CheckpointError("cannot open " + path.string() + " for writing");
  os << checkpoint_to_json(ckpt).dump();
  if (!os)
    throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw CheckpointError("cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error &e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

} // namespace graphflow
