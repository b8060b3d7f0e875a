// SPDX-License-Identifier: Apache-2.0
/**
 * @file   fixtures.hpp
 * @brief  Hand-built conversations for tests.
 */
#ifndef GRAPHFLOW_TESTS_FIXTURES_HPP
#define GRAPHFLOW_TESTS_FIXTURES_HPP

#include "encoding/conversation.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace graphflow::fixture {

inline std::vector<Token> words(const std::string &text) {
  std::vector<Token> out;
  std::istringstream is(text);
  for (std::string w; is >> w;)
    out.push_back(Token{w, 0, 0, 0});
  return out;
}

inline Turn span_turn(const std::string &id, const std::string &question,
                      const std::vector<Token> &context, std::size_t start,
                      std::size_t end) {
  Turn t;
  t.id = id;
  t.question = words(question);
  t.type = AnswerType::Span;
  t.span = Span{start, end};
  for (std::size_t j = start; j <= end; ++j) {
    t.answer_tokens.push_back(context[j]);
    t.answer_text += (j > start ? " " : "") + context[j].surface;
  }
  return t;
}

inline Turn typed_turn(const std::string &id, const std::string &question,
                       AnswerType type) {
  Turn t;
  t.id = id;
  t.question = words(question);
  t.type = type;
  t.answer_text = std::string(answer_type_name(type));
  t.answer_tokens = words(t.answer_text);
  return t;
}

/// Three turns over "anna met bob near the old lake today": answers
/// "anna" (0), "the old lake" (4..6) and yes.
inline Conversation story() {
  Conversation c;
  c.id = "story";
  c.context = words("anna met bob near the old lake today");
  c.turns.push_back(span_turn("1", "who met bob ?", c.context, 0, 0));
  c.turns.push_back(span_turn("2", "where ?", c.context, 4, 6));
  c.turns.push_back(typed_turn("3", "was it today ?", AnswerType::Yes));
  return c;
}

} // namespace graphflow::fixture

#endif
