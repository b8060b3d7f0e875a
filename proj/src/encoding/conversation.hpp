// SPDX-License-Identifier: Apache-2.0
/**
 * @file   conversation.hpp
 * @brief  Tokens, turns and conversations shared by every stage of the model.
 */
#ifndef GRAPHFLOW_ENCODING_CONVERSATION_HPP
#define GRAPHFLOW_ENCODING_CONVERSATION_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphflow {

enum class AnswerType : int { Span = 0, Yes = 1, No = 2, Unknown = 3 };
inline constexpr std::size_t kNumAnswerTypes = 4;

std::string_view answer_type_name(AnswerType t);
std::optional<AnswerType> answer_type_from_name(std::string_view name);

struct Token {
  std::string surface;
  std::size_t vocab_id = 0;
  std::size_t pos_id = 0; // 0 = unknown
  std::size_t ner_id = 0; // 0 = none
};

/// Inclusive token span [start, end].
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span &, const Span &) = default;
};

struct Turn {
  std::string id;
  std::vector<Token> question;
  AnswerType type = AnswerType::Span;
  std::optional<Span> span; // present iff type == Span
  std::string answer_text;
  std::vector<Token> answer_tokens;
  /// Per-question human F1, when the dataset provides it (HEQ).
  std::optional<double> human_f1;
};

struct Conversation {
  std::string id;
  std::vector<Token> context;
  std::vector<Turn> turns;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

} // namespace graphflow

#endif
