// SPDX-License-Identifier: Apache-2.0
/**
 * @file   checkpoint.hpp
 * @brief  JSON container mapping tensor names to shape + flat 64-bit values.
 *
 * Layout:
 *   { "format": "graphflow-checkpoint", "format_version": 1,
 *     "meta": { ... }, "tensors": { "<name>": {"shape": [..], "data": [..]} } }
 */
#ifndef GRAPHFLOW_NUMERICS_CHECKPOINT_HPP
#define GRAPHFLOW_NUMERICS_CHECKPOINT_HPP

#include "numerics/autodiff.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>

namespace graphflow {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Bindings tensors;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint &ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json &j);

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace graphflow

#endif
