// SPDX-License-Identifier: Apache-2.0
#include "encoding/conversation.hpp"

#include <array>
#include <stdexcept>

namespace graphflow {

namespace {
constexpr std::array<std::string_view, kNumAnswerTypes> kTypeNames = {
    "span", "yes", "no", "unknown"};
}

std::string_view answer_type_name(AnswerType t) {
  return kTypeNames.at(static_cast<std::size_t>(t));
}

std::optional<AnswerType> answer_type_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i)
    if (kTypeNames[i] == name)
      return static_cast<AnswerType>(i);
  return std::nullopt;
}

void Conversation::validate() const {
  if (context.empty())
    throw std::invalid_argument("conversation '" + id + "' has no context");
  if (turns.empty())
    throw std::invalid_argument("conversation '" + id + "' has no turns");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto &t = turns[i];
    const std::string where =
        "conversation '" + id + "' turn " + std::to_string(i);
    if (t.question.empty())
      throw std::invalid_argument(where + ": empty question");
    if ((t.type == AnswerType::Span) != t.span.has_value())
      throw std::invalid_argument(where +
                                  ": span must be present iff type is span");
    if (t.span && (t.span->start > t.span->end ||
                   t.span->end >= context.size()))
      throw std::invalid_argument(where + ": span out of range");
  }
}

} // namespace graphflow
