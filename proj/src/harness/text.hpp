// SPDX-License-Identifier: Apache-2.0
/**
 * @file   text.hpp
 * @brief  Tokenizer and vocabulary.
 */
#ifndef GRAPHFLOW_HARNESS_TEXT_HPP
#define GRAPHFLOW_HARNESS_TEXT_HPP

#include "encoding/conversation.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace graphflow {

struct TextToken {
  std::string text; // lowercased
  std::size_t begin = 0; // byte offsets into the source, [begin, end)
  std::size_t end = 0;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A text file (vocabulary, embeddings) is malformed.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Lowercased whitespace + punctuation split: runs of alphanumerics (and
/// bytes >= 0x80) form words; every other printable byte is its own token.
std::vector<TextToken> tokenize(std::string_view text);

std::vector<std::string> tokenize_words(std::string_view text);

/// Line number = id. Id 0 is reserved for unknown words.
class Vocabulary {
public:
  static constexpr std::string_view kUnknown = "<unk>";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t add(const std::string &word);
  /// 0 for unknown words.
  std::size_t id(const std::string &word) const;
  const std::string &word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string> &words() const { return words_; }

  /// Sets vocab ids on every token; grows the vocabulary when `grow`.
  void assign(std::vector<Conversation> &convs, bool grow);

  void save(const std::filesystem::path &path) const;
  static Vocabulary load(const std::filesystem::path &path);

private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

} // namespace graphflow

#endif
