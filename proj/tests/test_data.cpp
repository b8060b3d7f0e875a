// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"
#include "harness/config.hpp"
#include "harness/dataset.hpp"
#include "harness/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace graphflow;
using nlohmann::json;

namespace {

json small_doc() {
  return json::parse(R"({"data": [{
    "id": "c1",
    "story": "Anna met Bob, near the lake.",
    "questions": [{"turn_id": 1, "input_text": "Who met Bob?"},
                  {"turn_id": 2, "input_text": "Where?"},
                  {"turn_id": 3, "input_text": "Was it sunny?"},
                  {"turn_id": 4, "input_text": ""}],
    "answers": [{"turn_id": 1, "input_text": "Anna", "span_start": 0,
                 "span_end": 4, "human_f1": 0.9},
                {"turn_id": 2, "input_text": "near the lake",
                 "span_start": 14, "span_end": 27},
                {"turn_id": 3, "input_text": "unknown"},
                {"turn_id": 4, "input_text": "x", "span_start": 0,
                 "span_end": 1}]}]})");
}

} // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
  auto toks = tokenize("Anna met Bob, near the lake.");
  std::vector<std::string> words;
  for (const auto &t : toks)
    words.push_back(t.text);
  CHECK(words == std::vector<std::string>{"anna", "met", "bob", ",", "near",
                                          "the", "lake", "."});
  CHECK(toks[2].begin == 9);
  CHECK(toks[2].end == 12);
  CHECK(tokenize_words("  ").empty());
}

TEST_CASE("coqa layout parses spans, types and drops bad turns") {
  LoadReport rep = parse_coqa(small_doc(), "mem");
  REQUIRE(rep.conversations.size() == 1);
  const Conversation &c = rep.conversations[0];
  CHECK(c.context.size() == 8);
  REQUIRE(c.turns.size() == 3);
  CHECK(rep.dropped_turns == 1);
  CHECK(rep.warnings.size() == 1);
  CHECK(*c.turns[0].span == Span{0, 0});
  CHECK(c.turns[0].human_f1 == 0.9);
  CHECK(*c.turns[1].span == Span{4, 6});
  CHECK(c.turns[2].type == AnswerType::Unknown);
  CHECK_FALSE(c.turns[2].span);
  CHECK_THROWS_AS(parse_coqa(json::parse(R"({"nodata": 1})"), "mem"),
                  DatasetError);
}

TEST_CASE("re-serializing a loaded dataset is idempotent") {
  auto once = parse_coqa(small_doc(), "mem").conversations;
  json j1 = to_coqa_json(once);
  auto twice = parse_coqa(j1, "mem").conversations;
  CHECK(to_coqa_json(twice) == j1);

  auto path = std::filesystem::temp_directory_path() / "gf_data_test.json";
  save_coqa(once, path);
  CHECK(to_coqa_json(load_coqa(path).conversations) == j1);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_coqa("/nonexistent/data.json"), DatasetError);
}

TEST_CASE("char spans align to the covering tokens") {
  std::vector<std::size_t> b{0, 5, 9}, e{4, 8, 12};
  CHECK(*align_char_span(b, e, 0, 4) == Span{0, 0});
  CHECK(*align_char_span(b, e, 2, 10) == Span{0, 2});
  CHECK_FALSE(align_char_span(b, e, 4, 5));
}

TEST_CASE("vocabulary file is one token per line with id 0 unknown") {
  Vocabulary v;
  CHECK(v.add("lake") == 1);
  CHECK(v.add("lake") == 1);
  CHECK(v.id("sea") == 0);
  auto path = std::filesystem::temp_directory_path() / "gf_vocab_test.txt";
  v.save(path);
  std::ifstream is(path);
  std::string l0, l1;
  std::getline(is, l0);
  std::getline(is, l1);
  CHECK(l0 == "<unk>");
  CHECK(l1 == "lake");
  CHECK(Vocabulary::load(path).words() == v.words());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"<unk>", "a", "a"}),
                  FormatError);
  CHECK_THROWS_AS(Vocabulary::load("/nonexistent/vocab.txt"), IoError);
}

TEST_CASE("synthetic corpus is deterministic") {
  SyntheticSpec s;
  s.seed = 5;
  CHECK(generate_synthetic_json(s) == generate_synthetic_json(s));
  SyntheticSpec t = s;
  t.seed = 6;
  CHECK(generate_synthetic_json(s) != generate_synthetic_json(t));
  CHECK(synthetic_spec_from_json(synthetic_spec_to_json(s)).seed == 5);
  CHECK_THROWS_AS(synthetic_spec_from_json(json{{"bogus", 1}}), DatasetError);
  CHECK_THROWS_AS(synthetic_spec_from_json(json{{"dialogs", -1}}),
                  DatasetError);
  SyntheticSpec bad = s;
  bad.history_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad), DatasetError);
}

TEST_CASE("history rate 0: every answer follows from the question alone") {
  SyntheticSpec s;
  s.history_rate = 0.0;
  s.seed = 2;
  for (const auto &c : generate_synthetic(s))
    for (const auto &t : c.turns) {
      REQUIRE(t.question.size() == 4);
      const std::string &anchor = t.question[2].surface;
      std::size_t pos = c.context.size();
      for (std::size_t j = 0; j + 1 < c.context.size(); ++j)
        if (c.context[j].surface == anchor)
          pos = j + 1;
      REQUIRE(pos < c.context.size());
      CHECK(*t.span == Span{pos, pos});
    }
}

TEST_CASE("history rate 1: answers require the previous span") {
  SyntheticSpec s;
  s.history_rate = 1.0;
  s.seed = 3;
  std::size_t history_turns = 0;
  for (const auto &c : generate_synthetic(s)) {
    CHECK(c.context.size() <= 40);
    for (std::size_t i = 1; i < c.turns.size(); ++i) {
      const Turn &t = c.turns[i];
      // The question is the same text every time; only the previous answer
      // location determines the gold span.
      CHECK(tokenize_words("what follows that ?").size() == t.question.size());
      CHECK(t.span->start == c.turns[i - 1].span->end + 1);
      ++history_turns;
    }
  }
  CHECK(history_turns == 30 * 4);
}

TEST_CASE("f1 oracle values") {
  CHECK(f1_score("a b c", "b c d") == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score("the lake", "The Lake") == 1.0);
  CHECK(f1_score("x", "y") == 0.0);
  CHECK(f1_score("", "") == 1.0);
  CHECK(f1_score("", "a") == 0.0);
  CHECK(f1_score("a", "") == 0.0);
}

TEST_CASE("f1 equals the multiset reference on random pairs") {
  std::mt19937_64 rng(12);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> p, g;
    std::string ps, gs;
    for (std::size_t n = rng() % 6; n > 0; --n) {
      p.push_back(pool[rng() % pool.size()]);
      ps += p.back() + " ";
    }
    for (std::size_t n = rng() % 6; n > 0; --n) {
      g.push_back(pool[rng() % pool.size()]);
      gs += g.back() + " ";
    }
    CHECK(f1_score(ps, gs) == oracle::f1(p, g));
  }
}

TEST_CASE("config json round trip and validation") {
  Config c;
  c.hidden = 32;
  c.ablation.no_knn = true;
  Config back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.ablation == c.ablation);
  CHECK_THROWS_AS(config_from_json(json{{"hiden", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"hidden", "big"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"hidden", 7}}), ConfigError);
  CHECK(config_from_json(json{{"profile", "quac"}}).hops == 3);
  CHECK(config_from_json(json{{"profile", "quac"}, {"hops", 4}}).hops == 4);
  CHECK(config_from_json(json::object()).hops == 5);
}

TEST_CASE("data directory override applies to relative paths") {
  ::setenv("GRAPHFLOW_DATA_DIR", "/data/root", 1);
  CHECK(resolve_data_path("coqa/dev.json") == "/data/root/coqa/dev.json");
  CHECK(resolve_data_path("/abs/dev.json") == "/abs/dev.json");
  ::unsetenv("GRAPHFLOW_DATA_DIR");
  CHECK(resolve_data_path("coqa/dev.json") == "coqa/dev.json");
}
