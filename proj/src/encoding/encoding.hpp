// SPDX-License-Identifier: Apache-2.0
/**
 * @file   encoding.hpp
 * @brief  Turn-level featurization and question understanding.
 *
 * Context word vector layout (columns, left to right):
 *   [ pos | ner | exact-match | word | aligned-question | answer-markers ]
 * Question word vector layout:
 *   [ word | turn-marker ]
 */
#ifndef GRAPHFLOW_ENCODING_ENCODING_HPP
#define GRAPHFLOW_ENCODING_ENCODING_HPP

#include "encoding/conversation.hpp"
#include "numerics/layers.hpp"

#include <optional>
#include <random>
#include <vector>

namespace graphflow {

struct EncoderOptions {
  std::size_t word_vocab = 100;
  std::size_t word_dim = 64;
  std::size_t pos_vocab = 50;
  std::size_t pos_dim = 12;
  std::size_t ner_vocab = 20;
  std::size_t ner_dim = 8;
  std::size_t exact_match_dim = 3;
  std::size_t turn_marker_dim = 3;
  std::size_t hidden = 64;
  std::size_t history = 2;
  bool prepend_questions = true;
  bool prepend_answers = true;
  bool answer_locations = true;
  double dropout_embedding = 0.0;
  double dropout_rnn = 0.0;

  std::size_t answer_marker_dim() const {
    return answer_locations ? history : 0;
  }
  std::size_t context_dim() const {
    return pos_dim + ner_dim + exact_match_dim + 2 * word_dim +
           answer_marker_dim();
  }
  std::size_t question_dim() const { return word_dim + turn_marker_dim; }
};

/// Column offsets of each feature group inside a context word vector.
struct ContextLayout {
  std::size_t pos, ner, exact_match, word, align, answer, total;
  static ContextLayout of(const EncoderOptions &opts);
};

// -- featurization ------------------------------------------------------------

/// 1 where the (case-folded) context word occurs in the question.
std::vector<std::uint8_t> exact_match_flags(const std::vector<Token> &context,
                                            const std::vector<Token> &question);

/// Optional replacement of the gold history (predicted answers at inference).
struct HistoryOverride {
  std::vector<std::optional<Span>> spans;         // one per earlier turn
  std::vector<std::vector<Token>> answer_tokens;  // one per earlier turn
};

/// m x N binary matrix; column k-1 marks the span answered k turns ago.
/// Empty tensor when N == 0.
Tensor answer_location_markers(const Conversation &conv, std::size_t turn,
                               std::size_t history,
                               const HistoryOverride *override = nullptr);

struct ContextFeatures {
  std::vector<std::uint8_t> exact_match;
  std::vector<std::size_t> pos_ids;
  std::vector<std::size_t> ner_ids;
  Tensor answer_markers; // m x N, empty when N == 0
};

/// Exact match is taken against `question` when given (the history-augmented
/// question), otherwise against the raw question of `turn`.
ContextFeatures featurize_context(const Conversation &conv, std::size_t turn,
                                  std::size_t history,
                                  const HistoryOverride *override = nullptr,
                                  const std::vector<Token> *question = nullptr);

/// Turn-marker vocabulary: offset 0, -1, -2 and "older" (clamped).
inline constexpr std::size_t kTurnMarkerVocab = 4;
std::size_t turn_marker_id(int offset);

struct AugmentedQuestion {
  std::vector<Token> tokens;
  std::vector<int> offsets; // 0 for the current turn, -k for k turns back
};

struct PrependOptions {
  bool questions = true;
  bool answers = true;
};

/// Question of `turn` preceded by up to `history` earlier question/answer
/// pairs, oldest first.
AugmentedQuestion prepend_history(const Conversation &conv, std::size_t turn,
                                  std::size_t history,
                                  PrependOptions opts = {},
                                  const HistoryOverride *override = nullptr);

// -- attention and question understanding -------------------------------------

struct Alignment {
  Var weights; // m x n, rows sum to 1
  Var output;  // m x dz
};

/// weights(j,k) ~ exp(relu(P x_j) . relu(P y_k)); output row j = sum_k
/// weights(j,k) z_k. `projection` is d x e for keys of width e.
Alignment align(Var context_keys, Var question_keys, Var values,
                Var projection);

/// Bidirectional recurrence over question word vectors (n' x d_q -> n' x d).
Var encode_question(const LstmCell &fwd, const LstmCell &bwd, Var words);

/// softmax(Q w) weighted sum of question rows; `weight` is 1 x d.
Var question_self_attention(Var questions, Var weight);

/// Incremental history recurrence over per-turn question vectors.
class QuestionHistory {
public:
  explicit QuestionHistory(LstmCell cell) : cell_(cell) {}
  Var push(Var question_vector);

private:
  LstmCell cell_;
  std::optional<LstmState> state_;
};

std::vector<Var> question_history_lstm(const LstmCell &cell,
                                       const std::vector<Var> &questions);

// -- per-turn assembly --------------------------------------------------------

struct EncoderParams {
  Var word, pos, ner, exact_match, turn_marker;
  Var align_projection;
  LstmCell question_fwd, question_bwd;
  Var question_attention;
  LstmCell history;

  static void declare(ParamSet &ps, const EncoderOptions &opts);
  static EncoderParams bind(Tape &tape);
};

struct EncodedTurn {
  Var context;        // m x d_c
  Var question;       // n' x d_q
  Var context_words;  // m x word_dim
  Var question_words; // n' x word_dim
  ContextFeatures features;
  AugmentedQuestion augmented;
};

EncodedTurn encode_turn(const EncoderParams &params,
                        const EncoderOptions &opts, const Conversation &conv,
                        std::size_t turn,
                        const HistoryOverride *override = nullptr,
                        std::mt19937_64 *dropout_rng = nullptr);

} // namespace graphflow

#endif
