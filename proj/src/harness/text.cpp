// SPDX-License-Identifier: Apache-2.0
#include "harness/text.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace graphflow {

namespace {
bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
} // namespace

std::vector<TextToken> tokenize(std::string_view text) {
  std::vector<TextToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word_byte(c))
      while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j])))
        ++j;
    TextToken tok;
    tok.begin = i;
    tok.end = j;
    tok.text.reserve(j - i);
    for (std::size_t k = i; k < j; ++k)
      tok.text.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[k]))));
    out.push_back(std::move(tok));
    i = j;
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto &t : tokenize(text))
    out.push_back(std::move(t.text));
  return out;
}

Vocabulary::Vocabulary() { add(std::string(kUnknown)); }

Vocabulary::Vocabulary(std::vector<std::string> words) {
  if (words.empty() || words.front() != kUnknown)
    throw FormatError("vocabulary must start with " + std::string(kUnknown));
  for (auto &w : words)
    if (const std::size_t next = words_.size(); add(w) != next)
      throw FormatError("duplicate vocabulary entry '" + w + "'");
}

std::size_t Vocabulary::add(const std::string &word) {
  auto [it, inserted] = index_.emplace(word, words_.size());
  if (inserted)
    words_.push_back(word);
  return it->second;
}

std::size_t Vocabulary::id(const std::string &word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

void Vocabulary::assign(std::vector<Conversation> &convs, bool grow) {
  auto fix = [&](std::vector<Token> &toks) {
    for (auto &t : toks)
      t.vocab_id = grow ? add(t.surface) : id(t.surface);
  };
  for (auto &c : convs) {
    fix(c.context);
    for (auto &t : c.turns) {
      fix(t.question);
      fix(t.answer_tokens);
    }
  }
}

void Vocabulary::save(const std::filesystem::path &path) const {
  std::ofstream os(path);
  if (!os)
    throw IoError("cannot write vocabulary " + path.string());
  for (const auto &w : words_)
    os << w << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> words;
  for (std::string line; std::getline(is, line);)
    words.push_back(line);
  return Vocabulary(std::move(words));
}

} // namespace graphflow
