// SPDX-License-Identifier: Apache-2.0
#include "encoding/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

namespace graphflow {

ContextLayout ContextLayout::of(const EncoderOptions &o) {
  ContextLayout l{};
  l.pos = 0;
  l.ner = l.pos + o.pos_dim;
  l.exact_match = l.ner + o.ner_dim;
  l.word = l.exact_match + o.exact_match_dim;
  l.align = l.word + o.word_dim;
  l.answer = l.align + o.word_dim;
  l.total = l.answer + o.answer_marker_dim();
  return l;
}

namespace {

std::string fold(std::string_view s) {
  std::string out(s);
  for (auto &ch : out)
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Span and answer tokens of the turn `back` turns before `turn`.
std::optional<Span> history_span(const Conversation &conv, std::size_t idx,
                                 const HistoryOverride *ov) {
  if (ov && idx < ov->spans.size())
    return ov->spans[idx];
  return conv.turns[idx].span;
}

const std::vector<Token> &history_answer(const Conversation &conv,
                                         std::size_t idx,
                                         const HistoryOverride *ov) {
  if (ov && idx < ov->answer_tokens.size())
    return ov->answer_tokens[idx];
  return conv.turns[idx].answer_tokens;
}

} // namespace

std::vector<std::uint8_t> exact_match_flags(const std::vector<Token> &context,
                                            const std::vector<Token> &question) {
  std::unordered_set<std::string> words;
  for (const auto &q : question)
    words.insert(fold(q.surface));
  std::vector<std::uint8_t> flags(context.size(), 0);
  for (std::size_t j = 0; j < context.size(); ++j)
    flags[j] = words.count(fold(context[j].surface)) ? 1 : 0;
  return flags;
}

Tensor answer_location_markers(const Conversation &conv, std::size_t turn,
                               std::size_t history,
                               const HistoryOverride *ov) {
  if (turn >= conv.turns.size())
    throw std::out_of_range("turn index out of range");
  if (history == 0)
    return {};
  Tensor markers({conv.context.size(), history}, 0.0);
  for (std::size_t back = 1; back <= history && back <= turn; ++back) {
    auto span = history_span(conv, turn - back, ov);
    if (!span)
      continue;
    for (std::size_t j = span->start; j <= span->end && j < conv.context.size();
         ++j)
      markers(j, back - 1) = 1.0;
  }
  return markers;
}

ContextFeatures featurize_context(const Conversation &conv, std::size_t turn,
                                  std::size_t history,
                                  const HistoryOverride *ov,
                                  const std::vector<Token> *question) {
  if (turn >= conv.turns.size())
    throw std::out_of_range("turn index out of range");
  ContextFeatures f;
  f.exact_match = exact_match_flags(
      conv.context, question ? *question : conv.turns[turn].question);
  f.pos_ids.reserve(conv.context.size());
  f.ner_ids.reserve(conv.context.size());
  for (const auto &tok : conv.context) {
    f.pos_ids.push_back(tok.pos_id);
    f.ner_ids.push_back(tok.ner_id);
  }
  f.answer_markers = answer_location_markers(conv, turn, history, ov);
  return f;
}

std::size_t turn_marker_id(int offset) {
  if (offset > 0)
    throw std::invalid_argument("turn offset must be <= 0");
  return static_cast<std::size_t>(std::min(-offset, 3));
}

AugmentedQuestion prepend_history(const Conversation &conv, std::size_t turn,
                                  std::size_t history, PrependOptions opts,
                                  const HistoryOverride *ov) {
  if (turn >= conv.turns.size())
    throw std::out_of_range("turn index out of range");
  AugmentedQuestion out;
  auto append = [&](const std::vector<Token> &toks, int offset) {
    for (const auto &t : toks) {
      out.tokens.push_back(t);
      out.offsets.push_back(offset);
    }
  };
  const std::size_t depth = std::min(history, turn);
  for (std::size_t back = depth; back >= 1; --back) {
    const std::size_t idx = turn - back;
    const int offset = -static_cast<int>(back);
    if (opts.questions)
      append(conv.turns[idx].question, offset);
    if (opts.answers)
      append(history_answer(conv, idx, ov), offset);
  }
  append(conv.turns[turn].question, 0);
  return out;
}

// -- attention ----------------------------------------------------------------

Alignment align(Var context_keys, Var question_keys, Var values,
                Var projection) {
  if (question_keys.rows() != values.rows())
    throw ShapeError("align: " + std::to_string(question_keys.rows()) +
                     " question keys for " + std::to_string(values.rows()) +
                     " values");
  Var pc = relu(matmul_nt(context_keys, projection));  // m x d
  Var pq = relu(matmul_nt(question_keys, projection)); // n x d
  Var weights = softmax_rows(matmul_nt(pc, pq));       // m x n
  return {weights, matmul(weights, values)};
}

Var encode_question(const LstmCell &fwd, const LstmCell &bwd, Var words) {
  return bilstm(fwd, bwd, words);
}

Var question_self_attention(Var questions, Var weight) {
  Var scores = softmax_rows(matmul_nt(weight, questions)); // 1 x n
  return matmul(scores, questions);                        // 1 x d
}

Var QuestionHistory::push(Var question_vector) {
  Tape &tape = *question_vector.tape;
  if (!state_) {
    Var zero = tape.constant(Tensor({1, cell_.hidden}, 0.0));
    state_ = LstmState{zero, zero};
  }
  Var proj = add_row_broadcast(matmul_nt(question_vector, cell_.w_input),
                               cell_.bias);
  state_ = lstm_step(cell_, proj, *state_);
  return state_->h;
}

std::vector<Var> question_history_lstm(const LstmCell &cell,
                                       const std::vector<Var> &questions) {
  QuestionHistory hist(cell);
  std::vector<Var> out;
  out.reserve(questions.size());
  for (auto q : questions)
    out.push_back(hist.push(q));
  return out;
}

// -- parameters ---------------------------------------------------------------

void EncoderParams::declare(ParamSet &ps, const EncoderOptions &o) {
  if (o.hidden % 2 != 0)
    throw std::invalid_argument("hidden size must be even");
  ps.add("embed.word", {o.word_vocab, o.word_dim}, o.word_dim);
  ps.add("embed.pos", {o.pos_vocab, o.pos_dim}, o.pos_dim);
  ps.add("embed.ner", {o.ner_vocab, o.ner_dim}, o.ner_dim);
  ps.add("embed.exact_match", {2, o.exact_match_dim}, o.exact_match_dim);
  ps.add("embed.turn_marker", {kTurnMarkerVocab, o.turn_marker_dim},
         o.turn_marker_dim);
  ps.add("align.projection", {o.hidden, o.word_dim}, o.word_dim);
  LstmCell::declare(ps, "question.fwd", o.question_dim(), o.hidden / 2);
  LstmCell::declare(ps, "question.bwd", o.question_dim(), o.hidden / 2);
  ps.add("question.attention", {1, o.hidden}, o.hidden);
  LstmCell::declare(ps, "question.history", o.hidden, o.hidden);
}

EncoderParams EncoderParams::bind(Tape &tape) {
  EncoderParams p;
  p.word = tape.leaf("embed.word");
  p.pos = tape.leaf("embed.pos");
  p.ner = tape.leaf("embed.ner");
  p.exact_match = tape.leaf("embed.exact_match");
  p.turn_marker = tape.leaf("embed.turn_marker");
  p.align_projection = tape.leaf("align.projection");
  p.question_fwd = LstmCell::bind(tape, "question.fwd");
  p.question_bwd = LstmCell::bind(tape, "question.bwd");
  p.question_attention = tape.leaf("question.attention");
  p.history = LstmCell::bind(tape, "question.history");
  return p;
}

namespace {
std::vector<std::size_t> vocab_ids(const std::vector<Token> &toks) {
  std::vector<std::size_t> ids;
  ids.reserve(toks.size());
  for (const auto &t : toks)
    ids.push_back(t.vocab_id);
  return ids;
}
} // namespace

EncodedTurn encode_turn(const EncoderParams &p, const EncoderOptions &o,
                        const Conversation &conv, std::size_t turn,
                        const HistoryOverride *ov, std::mt19937_64 *rng) {
  Tape &tape = *p.word.tape;
  if (turn >= conv.turns.size())
    throw std::out_of_range("turn index out of range");
  if (conv.turns[turn].question.empty())
    throw std::invalid_argument("question must be non-empty");

  EncodedTurn out;
  out.augmented = prepend_history(
      conv, turn, o.history, {o.prepend_questions, o.prepend_answers}, ov);
  out.features = featurize_context(conv, turn, o.answer_marker_dim(), ov,
                                   &out.augmented.tokens);

  Var g_c = dropout(embedding(p.word, vocab_ids(conv.context)),
                    o.dropout_embedding, rng);
  Var g_q = dropout(embedding(p.word, vocab_ids(out.augmented.tokens)),
                    o.dropout_embedding, rng);
  Alignment aligned = align(g_c, g_q, g_q, p.align_projection);

  std::vector<std::size_t> em_ids(out.features.exact_match.begin(),
                                  out.features.exact_match.end());
  std::vector<Var> ctx = {embedding(p.pos, out.features.pos_ids),
                          embedding(p.ner, out.features.ner_ids),
                          embedding(p.exact_match, em_ids), g_c,
                          aligned.output};
  if (o.answer_marker_dim() > 0)
    ctx.push_back(tape.constant(out.features.answer_markers));
  out.context = concat_cols(ctx);

  std::vector<std::size_t> marker_ids;
  marker_ids.reserve(out.augmented.offsets.size());
  for (int off : out.augmented.offsets)
    marker_ids.push_back(turn_marker_id(off));
  out.question = concat_cols({g_q, embedding(p.turn_marker, marker_ids)});
  out.context_words = g_c;
  out.question_words = g_q;
  return out;
}

} // namespace graphflow
