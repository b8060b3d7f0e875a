// SPDX-License-Identifier: Apache-2.0
/**
 * @file   flow_trace.hpp
 * @brief  Per-word cosine similarity of final context states between
 *         consecutive turns; low similarity marks a shift of focus.
 */
#ifndef GRAPHFLOW_HARNESS_FLOW_TRACE_HPP
#define GRAPHFLOW_HARNESS_FLOW_TRACE_HPP

#include "harness/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace graphflow {

struct FlowTurn {
  std::size_t turn = 0;            // 0-based index of the later turn (>= 1)
  std::vector<double> similarity;  // one per context word, in [-1, 1]
  std::vector<std::uint8_t> zero_norm;   // similarity forced to 1
  std::vector<std::uint8_t> highlighted; // similarity < threshold
  std::vector<std::size_t> rank;   // word indices, most changed first
};

struct FlowTrace {
  double threshold = 0.0;
  std::vector<FlowTurn> turns;
};

/// Cosine similarity; a zero-norm operand yields 1 and sets `zero_norm`.
double cosine_similarity(const double *a, const double *b, std::size_t n,
                         bool *zero_norm = nullptr);

/// `states[i]` holds turn i's final context states, one row per word.
FlowTrace flow_trace(const std::vector<Tensor> &states, double threshold);

/// Runs the model (evaluation mode) and traces the conversation.
FlowTrace flow_trace(const GraphFlowModel &model, const Conversation &conv,
                     double threshold);

/// The ceil(m/4) most changed words of a traced turn.
std::vector<std::size_t> top_quartile(const FlowTurn &turn);

nlohmann::json flow_trace_json(const Conversation &conv,
                               const FlowTrace &trace);
/// Context per turn with changed words in [brackets].
std::string flow_trace_text(const Conversation &conv, const FlowTrace &trace);

} // namespace graphflow

#endif
