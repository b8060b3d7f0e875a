// SPDX-License-Identifier: Apache-2.0
/**
 * @file   dataset.hpp
 * @brief  CoQA-style JSON datasets and the synthetic conversation generator.
 *
 * Accepted layout (a subset of the public CoQA release):
 *
 *   { "data": [ { "id": "...", "story": "...",
 *                 "context_pos": [ints]?, "context_ner": [ints]?,
 *                 "questions": [ {"turn_id": 1, "input_text": "..."} ],
 *                 "answers":   [ {"turn_id": 1, "input_text": "...",
 *                                 "span_start": 10, "span_end": 17,
 *                                 "human_f1": 0.8?} ] } ] }
 *
 * span_start/span_end are byte offsets into the story ([start, end)). An
 * input_text of "yes", "no" or "unknown" selects that answer type.
 */
#ifndef GRAPHFLOW_HARNESS_DATASET_HPP
#define GRAPHFLOW_HARNESS_DATASET_HPP

#include "encoding/conversation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphflow {

class DatasetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LoadReport {
  std::vector<Conversation> conversations;
  std::size_t dropped_turns = 0;
  std::size_t dropped_conversations = 0;
  std::vector<std::string> warnings;
};

/// Maps a byte range to the covering token range; nullopt if no token
/// overlaps it.
std::optional<Span> align_char_span(const std::vector<std::size_t> &begins,
                                    const std::vector<std::size_t> &ends,
                                    std::size_t char_begin,
                                    std::size_t char_end);

LoadReport parse_coqa(const nlohmann::json &doc, const std::string &source);
LoadReport load_coqa(const std::filesystem::path &path);

/// Inverse of parse_coqa up to whitespace: tokens are joined by spaces.
nlohmann::json to_coqa_json(const std::vector<Conversation> &convs);
void save_coqa(const std::vector<Conversation> &convs,
               const std::filesystem::path &path);

struct SyntheticSpec {
  std::size_t dialogs = 30;
  std::size_t turns = 5;
  std::size_t min_context = 30;
  std::size_t max_context = 40;
  std::size_t entity_vocab = 80;
  /// Fraction of turns (after the first) that ask about the word following
  /// the previous answer.
  double history_rate = 0.5;
  /// Fraction of anchored turns answered yes / no / unknown.
  double type_rate = 0.0;
  std::uint64_t seed = 1;
};

/// Unknown keys are rejected; null gives the defaults.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json &j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec &spec);

/// Deterministic for a given spec. Anchored turns ask "what follows <w> ?"
/// (answer: the word after <w>); history turns ask "what follows that ?"
/// (answer: the word after the previous answer).
nlohmann::json generate_synthetic_json(const SyntheticSpec &spec);
std::vector<Conversation> generate_synthetic(const SyntheticSpec &spec);

} // namespace graphflow

#endif
