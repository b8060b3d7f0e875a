// SPDX-License-Identifier: Apache-2.0
#include "harness/dataset.hpp"

#include "harness/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace graphflow {

using nlohmann::json;

std::optional<Span> align_char_span(const std::vector<std::size_t> &begins,
                                    const std::vector<std::size_t> &ends,
                                    std::size_t char_begin,
                                    std::size_t char_end) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < begins.size(); ++i) {
    if (ends[i] <= char_begin || begins[i] >= char_end)
      continue;
    if (!first)
      first = i;
    last = i;
  }
  if (!first)
    return std::nullopt;
  return Span{*first, *last};
}

namespace {

std::vector<Token> make_tokens(const std::vector<TextToken> &toks) {
  std::vector<Token> out;
  out.reserve(toks.size());
  for (const auto &t : toks)
    out.push_back({t.text, 0, 0, 0});
  return out;
}

std::optional<AnswerType> special_type(const std::string &answer) {
  auto words = tokenize_words(answer);
  if (words.size() != 1)
    return std::nullopt;
  if (words[0] == "yes")
    return AnswerType::Yes;
  if (words[0] == "no")
    return AnswerType::No;
  if (words[0] == "unknown")
    return AnswerType::Unknown;
  return std::nullopt;
}

// First occurrence of the answer's tokens inside the context.
std::optional<Span> find_tokens(const std::vector<Token> &context,
                                const std::vector<Token> &needle) {
  if (needle.empty() || needle.size() > context.size())
    return std::nullopt;
  for (std::size_t s = 0; s + needle.size() <= context.size(); ++s) {
    bool ok = true;
    for (std::size_t k = 0; ok && k < needle.size(); ++k)
      ok = context[s + k].surface == needle[k].surface;
    if (ok)
      return Span{s, s + needle.size() - 1};
  }
  return std::nullopt;
}

} // namespace

LoadReport parse_coqa(const json &doc, const std::string &source) {
  LoadReport report;
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array())
    throw DatasetError(source + ": expected an object with a \"data\" array");

  try {
    for (const auto &item : doc["data"]) {
      Conversation conv;
      conv.id = item.value("id", std::to_string(report.conversations.size() +
                                                report.dropped_conversations));
      const std::string story = item.at("story").get<std::string>();
      auto ctoks = tokenize(story);
      conv.context = make_tokens(ctoks);
      std::vector<std::size_t> begins, ends;
      for (const auto &t : ctoks) {
        begins.push_back(t.begin);
        ends.push_back(t.end);
      }
      auto fill_ids = [&](const char *key, auto setter) {
        if (!item.contains(key))
          return;
        auto ids = item.at(key).get<std::vector<std::size_t>>();
        if (ids.size() != conv.context.size())
          throw DatasetError(source + ": conversation '" + conv.id + "' " +
                             key + " has " + std::to_string(ids.size()) +
                             " entries for " +
                             std::to_string(conv.context.size()) + " tokens");
        for (std::size_t i = 0; i < ids.size(); ++i)
          setter(conv.context[i], ids[i]);
      };
      fill_ids("context_pos", [](Token &t, std::size_t v) { t.pos_id = v; });
      fill_ids("context_ner", [](Token &t, std::size_t v) { t.ner_id = v; });

      std::map<long, json> answers;
      for (const auto &a : item.at("answers"))
        answers[a.at("turn_id").get<long>()] = a;

      for (const auto &q : item.at("questions")) {
        const long turn_id = q.at("turn_id").get<long>();
        const std::string where = source + ": conversation '" + conv.id +
                                  "' turn " + std::to_string(turn_id);
        auto ait = answers.find(turn_id);
        if (ait == answers.end()) {
          report.warnings.push_back(where + ": no answer, dropped");
          ++report.dropped_turns;
          continue;
        }
        const json &a = ait->second;
        Turn turn;
        turn.id = std::to_string(turn_id);
        turn.question = make_tokens(tokenize(q.at("input_text").get<std::string>()));
        turn.answer_text = a.at("input_text").get<std::string>();
        turn.answer_tokens = make_tokens(tokenize(turn.answer_text));
        if (a.contains("human_f1"))
          turn.human_f1 = a.at("human_f1").get<double>();
        if (turn.question.empty()) {
          report.warnings.push_back(where + ": empty question, dropped");
          ++report.dropped_turns;
          continue;
        }
        if (auto t = special_type(turn.answer_text)) {
          turn.type = *t;
        } else {
          turn.type = AnswerType::Span;
          const long s = a.value("span_start", -1L);
          const long e = a.value("span_end", -1L);
          if (s >= 0 && e > s)
            turn.span = align_char_span(begins, ends,
                                        static_cast<std::size_t>(s),
                                        static_cast<std::size_t>(e));
          else
            turn.span = find_tokens(conv.context, turn.answer_tokens);
          if (!turn.span) {
            report.warnings.push_back(where + ": unalignable span, dropped");
            ++report.dropped_turns;
            continue;
          }
        }
        conv.turns.push_back(std::move(turn));
      }
      if (conv.context.empty() || conv.turns.empty()) {
        report.warnings.push_back(source + ": conversation '" + conv.id +
                                  "' has no usable turns, dropped");
        ++report.dropped_conversations;
        continue;
      }
      conv.validate();
      report.conversations.push_back(std::move(conv));
    }
  } catch (const json::exception &e) {
    throw DatasetError(source + ": " + e.what());
  }
  return report;
}

LoadReport load_coqa(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw DatasetError("cannot open dataset " + path.string());
  json doc;
  try {
    is >> doc;
  } catch (const json::parse_error &e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
  return parse_coqa(doc, path.string());
}

json to_coqa_json(const std::vector<Conversation> &convs) {
  json data = json::array();
  for (const auto &conv : convs) {
    std::string story;
    std::vector<std::size_t> begins, ends;
    std::vector<std::size_t> pos, ner;
    bool has_pos = false, has_ner = false;
    for (const auto &t : conv.context) {
      if (!story.empty())
        story += ' ';
      begins.push_back(story.size());
      story += t.surface;
      ends.push_back(story.size());
      pos.push_back(t.pos_id);
      ner.push_back(t.ner_id);
      has_pos = has_pos || t.pos_id != 0;
      has_ner = has_ner || t.ner_id != 0;
    }
    json questions = json::array(), answers = json::array();
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
      const auto &t = conv.turns[i];
      std::string q;
      for (const auto &tok : t.question)
        q += (q.empty() ? "" : " ") + tok.surface;
      questions.push_back({{"turn_id", i + 1}, {"input_text", q}});
      json a = {{"turn_id", i + 1}, {"input_text", t.answer_text}};
      if (t.span) {
        a["span_start"] = begins[t.span->start];
        a["span_end"] = ends[t.span->end];
        a["span_text"] =
            story.substr(begins[t.span->start],
                         ends[t.span->end] - begins[t.span->start]);
      }
      if (t.human_f1)
        a["human_f1"] = *t.human_f1;
      answers.push_back(std::move(a));
    }
    json item = {{"id", conv.id},
                 {"story", story},
                 {"questions", std::move(questions)},
                 {"answers", std::move(answers)}};
    if (has_pos)
      item["context_pos"] = pos;
    if (has_ner)
      item["context_ner"] = ner;
    data.push_back(std::move(item));
  }
  return {{"version", "graphflow-1"}, {"data", std::move(data)}};
}

void save_coqa(const std::vector<Conversation> &convs,
               const std::filesystem::path &path) {
  std::ofstream os(path);
  if (!os)
    throw DatasetError("cannot write dataset " + path.string());
  os << to_coqa_json(convs).dump(1);
}

// -- synthetic ----------------------------------------------------------------

SyntheticSpec synthetic_spec_from_json(const json &j) {
  SyntheticSpec spec;
  if (j.is_null())
    return spec;
  if (!j.is_object())
    throw DatasetError("synthetic spec must be a JSON object");
  for (const auto &[key, value] : j.items()) {
    static const std::set<std::string> counts = {
        "dialogs", "turns", "min_context", "max_context", "entity_vocab",
        "seed"};
    if (counts.count(key) && !value.is_number_unsigned())
      throw DatasetError("synthetic spec key '" + key +
                         "' must be a non-negative integer");
    try {
      if (key == "dialogs")
        value.get_to(spec.dialogs);
      else if (key == "turns")
        value.get_to(spec.turns);
      else if (key == "min_context")
        value.get_to(spec.min_context);
      else if (key == "max_context")
        value.get_to(spec.max_context);
      else if (key == "entity_vocab")
        value.get_to(spec.entity_vocab);
      else if (key == "history_rate")
        value.get_to(spec.history_rate);
      else if (key == "type_rate")
        value.get_to(spec.type_rate);
      else if (key == "seed")
        value.get_to(spec.seed);
      else
        throw DatasetError("unknown synthetic spec key '" + key + "'");
    } catch (const json::type_error &e) {
      throw DatasetError("synthetic spec key '" + key + "': " + e.what());
    }
  }
  return spec;
}

json synthetic_spec_to_json(const SyntheticSpec &spec) {
  return {{"dialogs", spec.dialogs},           {"turns", spec.turns},
          {"min_context", spec.min_context},   {"max_context", spec.max_context},
          {"entity_vocab", spec.entity_vocab}, {"history_rate", spec.history_rate},
          {"type_rate", spec.type_rate},       {"seed", spec.seed}};
}


json generate_synthetic_json(const SyntheticSpec &spec) {
  if (spec.dialogs == 0 || spec.turns == 0)
    throw DatasetError("synthetic spec needs dialogs and turns");
  if (spec.min_context < 2 || spec.min_context > spec.max_context)
    throw DatasetError("synthetic spec: bad context length range");
  if (spec.entity_vocab < spec.max_context + 1)
    throw DatasetError(
        "synthetic spec: entity vocabulary smaller than the context");
  if (spec.history_rate < 0.0 || spec.history_rate > 1.0 ||
      spec.type_rate < 0.0 || spec.type_rate > 1.0)
    throw DatasetError("synthetic spec: rates must be in [0, 1]");

  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> entities;
  for (std::size_t i = 0; i < spec.entity_vocab; ++i)
    entities.push_back("w" + std::to_string(i));
  auto uniform = [&](std::size_t lo, std::size_t hi) { // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  json data = json::array();
  for (std::size_t d = 0; d < spec.dialogs; ++d) {
    const std::size_t m = uniform(spec.min_context, spec.max_context);
    std::vector<std::size_t> pool(entities.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> words;
    for (std::size_t j = 0; j < m; ++j)
      words.push_back(entities[pool[j]]);
    const std::string absent = entities[pool[m]];

    std::string story;
    std::vector<std::size_t> begins, ends;
    for (const auto &w : words) {
      if (!story.empty())
        story += ' ';
      begins.push_back(story.size());
      story += w;
      ends.push_back(story.size());
    }

    json questions = json::array(), answers = json::array();
    // Position of the previous span answer; m when there is none.
    std::size_t prev = m;
    for (std::size_t t = 0; t < spec.turns; ++t) {
      const std::size_t remaining = spec.turns - 1 - t;
      json q = {{"turn_id", t + 1}};
      json a = {{"turn_id", t + 1}};
      const bool history = prev + 1 < m &&
                           coin(rng) < spec.history_rate;
      if (history) {
        const std::size_t pos = prev + 1;
        q["input_text"] = "what follows that ?";
        a["input_text"] = words[pos];
        a["span_start"] = begins[pos];
        a["span_end"] = ends[pos];
        prev = pos;
      } else if (coin(rng) < spec.type_rate) {
        const std::size_t kind = uniform(0, 2);
        if (kind == 0) {
          q["input_text"] = "is there " + words[uniform(0, m - 1)] + " ?";
          a["input_text"] = "yes";
        } else if (kind == 1) {
          q["input_text"] = "is there " + absent + " ?";
          a["input_text"] = "no";
        } else {
          q["input_text"] = "what follows " + absent + " ?";
          a["input_text"] = "unknown";
        }
        prev = m;
      } else {
        // Leave room for a chain of follow-ups after this anchor.
        const std::size_t room = std::min(remaining, m - 2);
        const std::size_t anchor = uniform(0, m - 2 - room);
        const std::size_t pos = anchor + 1;
        q["input_text"] = "what follows " + words[anchor] + " ?";
        a["input_text"] = words[pos];
        a["span_start"] = begins[pos];
        a["span_end"] = ends[pos];
        prev = pos;
      }
      questions.push_back(std::move(q));
      answers.push_back(std::move(a));
    }
    data.push_back({{"id", "syn-" + std::to_string(spec.seed) + "-" +
                               std::to_string(d)},
                    {"story", story},
                    {"questions", std::move(questions)},
                    {"answers", std::move(answers)}});
  }
  return {{"version", "graphflow-synthetic-1"}, {"data", std::move(data)}};
}

std::vector<Conversation> generate_synthetic(const SyntheticSpec &spec) {
  return parse_coqa(generate_synthetic_json(spec), "synthetic").conversations;
}

} // namespace graphflow
