// SPDX-License-Identifier: Apache-2.0
#include "encoding/encoding.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace graphflow;
using doctest::Approx;

namespace {

// Context "x y z"; questions p, q, r; answers x then y.
Conversation tiny() {
  Conversation c;
  c.id = "tiny";
  c.context = fixture::words("x y z");
  c.turns.push_back(fixture::span_turn("1", "p", c.context, 0, 0));
  c.turns.push_back(fixture::span_turn("2", "q", c.context, 1, 1));
  c.turns.push_back(fixture::span_turn("3", "r", c.context, 2, 2));
  return c;
}

std::vector<std::string> surfaces(const std::vector<Token> &toks) {
  std::vector<std::string> out;
  for (const auto &t : toks)
    out.push_back(t.surface);
  return out;
}

} // namespace

TEST_CASE("history is prepended oldest first with turn offsets") {
  Conversation c = tiny();
  AugmentedQuestion q = prepend_history(c, 2, 2);
  CHECK(surfaces(q.tokens) == std::vector<std::string>{"p", "x", "q", "y", "r"});
  CHECK(q.offsets == std::vector<int>{-2, -2, -1, -1, 0});

  CHECK(prepend_history(c, 2, 1).offsets == std::vector<int>{-1, -1, 0});
  CHECK(prepend_history(c, 0, 2).offsets == std::vector<int>{0});

  AugmentedQuestion no_q = prepend_history(c, 2, 2, PrependOptions{false, true});
  CHECK(surfaces(no_q.tokens) == std::vector<std::string>{"x", "y", "r"});
  AugmentedQuestion no_a = prepend_history(c, 2, 2, PrependOptions{true, false});
  CHECK(surfaces(no_a.tokens) == std::vector<std::string>{"p", "q", "r"});
  CHECK_THROWS_AS(prepend_history(c, 3, 2), std::out_of_range);
}

TEST_CASE("turn markers clamp older turns") {
  CHECK(turn_marker_id(0) == 0);
  CHECK(turn_marker_id(-1) == 1);
  CHECK(turn_marker_id(-2) == 2);
  CHECK(turn_marker_id(-7) == 3);
  CHECK_THROWS_AS(turn_marker_id(1), std::invalid_argument);
}

TEST_CASE("exact match is case folded") {
  auto flags = exact_match_flags(fixture::words("Anna met Bob"),
                                 fixture::words("who met bob ?"));
  CHECK(flags == std::vector<std::uint8_t>{0, 1, 1});
}

TEST_CASE("answer markers flag earlier spans per look-back column") {
  Conversation c = fixture::story();
  Tensor m = answer_location_markers(c, 2, 2);
  REQUIRE(m.rows() == c.context.size());
  REQUIRE(m.cols() == 2);
  for (std::size_t j = 0; j < m.rows(); ++j) {
    CHECK(m(j, 0) == (j >= 4 && j <= 6 ? 1.0 : 0.0));
    CHECK(m(j, 1) == (j == 0 ? 1.0 : 0.0));
  }
  CHECK(answer_location_markers(c, 0, 2).max_abs() == 0.0);

  HistoryOverride ov;
  ov.spans = {Span{1, 1}, std::nullopt};
  ov.answer_tokens = {fixture::words("met"), fixture::words("yes")};
  Tensor p = answer_location_markers(c, 2, 2, &ov);
  CHECK(p(1, 1) == 1.0);
  CHECK(p(0, 1) == 0.0);
  double col0 = 0.0;
  for (std::size_t j = 0; j < p.rows(); ++j)
    col0 += p(j, 0);
  CHECK(col0 == 0.0);
  AugmentedQuestion q = prepend_history(c, 2, 2, {}, &ov);
  CHECK(surfaces(q.tokens)[4] == "met");
}

TEST_CASE("zero history makes featurization and prepending no-ops") {
  Conversation c = fixture::story();
  for (std::size_t turn = 0; turn < c.turns.size(); ++turn) {
    AugmentedQuestion q = prepend_history(c, turn, 0);
    CHECK(surfaces(q.tokens) == surfaces(c.turns[turn].question));
    CHECK(q.offsets == std::vector<int>(c.turns[turn].question.size(), 0));
    ContextFeatures f = featurize_context(c, turn, 0);
    CHECK(f.answer_markers.empty());
    CHECK(f.exact_match ==
          exact_match_flags(c.context, c.turns[turn].question));
  }
}

TEST_CASE("alignment rows are distributions") {
  std::mt19937_64 rng(4);
  Bindings b{{"c", oracle::random_tensor(rng, {5, 3})},
             {"q", oracle::random_tensor(rng, {4, 3})},
             {"v", oracle::random_tensor(rng, {4, 2})},
             {"p", oracle::random_tensor(rng, {6, 3})}};
  Tensor w = evaluate(
      [](Tape &t) {
        return align(t.leaf("c"), t.leaf("q"), t.leaf("v"), t.leaf("p"))
            .weights;
      },
      b);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < w.cols(); ++k) {
      CHECK(w(r, k) > 0.0);
      s += w(r, k);
    }
    CHECK(s == Approx(1.0).epsilon(1e-12));
  }

  // A zero projection scores every pair equally: outputs are value means.
  b["p"] = Tensor({6, 3}, 0.0);
  Tensor out = evaluate(
      [](Tape &t) {
        return align(t.leaf("c"), t.leaf("q"), t.leaf("v"), t.leaf("p"))
            .output;
      },
      b);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      mean += b.at("v")(k, c) / 4.0;
    CHECK(out(0, c) == Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("question self-attention with zero weights is the row mean") {
  Bindings b{{"q", Tensor::matrix(2, 2, {1, 2, 3, 6})},
             {"w", Tensor({1, 2}, 0.0)}};
  Tensor v = evaluate(
      [](Tape &t) { return question_self_attention(t.leaf("q"), t.leaf("w")); },
      b);
  CHECK(v.storage() == std::vector<double>{2, 4});
}

TEST_CASE("incremental question history equals the batch recurrence") {
  ParamSet ps;
  LstmCell::declare(ps, "h", 3, 3);
  Bindings b = ps.initialize(6);
  std::mt19937_64 rng(6);
  for (const char *n : {"a", "b", "c"})
    b.emplace(n, oracle::random_tensor(rng, {1, 3}));
  Tensor batch = evaluate(
      [](Tape &t) {
        return concat_rows(question_history_lstm(
            LstmCell::bind(t, "h"), {t.leaf("a"), t.leaf("b"), t.leaf("c")}));
      },
      b);
  Tensor step = evaluate(
      [](Tape &t) {
        QuestionHistory h(LstmCell::bind(t, "h"));
        std::vector<Var> out;
        for (const char *n : {"a", "b", "c"})
          out.push_back(h.push(t.leaf(n)));
        return concat_rows(out);
      },
      b);
  CHECK(batch == step);
}

TEST_CASE("encoded turn follows the documented column layout") {
  EncoderOptions o;
  o.word_vocab = 20;
  o.word_dim = 4;
  o.pos_vocab = 3;
  o.pos_dim = 2;
  o.ner_vocab = 3;
  o.ner_dim = 2;
  o.exact_match_dim = 2;
  o.turn_marker_dim = 2;
  o.hidden = 4;
  o.history = 2;
  ContextLayout l = ContextLayout::of(o);
  CHECK(l.pos == 0);
  CHECK(l.ner == 2);
  CHECK(l.exact_match == 4);
  CHECK(l.word == 6);
  CHECK(l.align == 10);
  CHECK(l.answer == 14);
  CHECK(l.total == 16);
  CHECK(o.context_dim() == 16);

  ParamSet ps;
  EncoderParams::declare(ps, o);
  Bindings b = ps.initialize(1);
  Conversation c = fixture::story();
  Tape t(&b);
  EncodedTurn e = encode_turn(EncoderParams::bind(t), o, c, 2);
  CHECK(e.context.rows() == c.context.size());
  CHECK(e.context.cols() == o.context_dim());
  CHECK(e.question.rows() == e.augmented.tokens.size());
  CHECK(e.question.cols() == o.question_dim());
  // Answer-marker columns carry the raw markers.
  const Tensor &ctx = e.context.value();
  for (std::size_t j = 0; j < c.context.size(); ++j)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(ctx(j, l.answer + k) == e.features.answer_markers(j, k));

  o.answer_locations = false;
  CHECK(o.context_dim() == 14);
}
