// SPDX-License-Identifier: Apache-2.0
#include "harness/gradcheck.hpp"

#include "encoding/encoding.hpp"
#include "graph_learning/graph_learning.hpp"
#include "prediction/prediction.hpp"
#include "rgnn/rgnn.hpp"

#include <random>

namespace graphflow {

using nlohmann::json;

bool GradCheckSuite::pass() const {
  for (const auto &c : checks)
    if (!c.report.pass())
      return false;
  return !checks.empty();
}

namespace {

class Randomizer {
public:
  explicit Randomizer(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape), 0.0);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = dist(rng_);
    return t;
  }

  /// Declared parameters at their training initialization.
  Bindings bind(const ParamSet &ps) { return ps.initialize(rng_()); }

private:
  std::mt19937_64 rng_;
};

// Fixed random cotangent so non-scalar outputs reduce to a scalar.
Var project(Var out, std::uint64_t seed) {
  Randomizer r(seed);
  return sum(mul_const(out, r.uniform(out.shape(), -1.0, 1.0)));
}

} // namespace

std::vector<ModuleCase> module_cases(std::uint64_t seed) {
  Randomizer rnd(seed);
  std::vector<ModuleCase> cases;
  auto add_case = [&](std::string name, ParamSet ps,
                      std::vector<std::pair<std::string, Shape>> inputs,
                      Expression expr) {
    Bindings b = rnd.bind(ps);
    for (auto &[n, s] : inputs)
      b.emplace(n, rnd.uniform(s));
    cases.push_back({std::move(name), std::move(expr), std::move(b)});
  };
  const std::uint64_t proj = seed + 7;

  {
    ParamSet ps;
    Linear::declare(ps, "lin", 3, 2);
    add_case("linear", ps, {{"x", {2, 3}}}, [=](Tape &t) {
      return project(Linear::bind(t, "lin")(t.leaf("x")), proj);
    });
  }
  {
    ParamSet ps;
    LstmCell::declare(ps, "lstm", 3, 2);
    add_case("lstm_sequence", ps, {{"x", {3, 3}}}, [=](Tape &t) {
      return project(
          lstm_sequence(LstmCell::bind(t, "lstm"), t.leaf("x"), false), proj);
    });
  }
  {
    ParamSet ps;
    LstmCell::declare(ps, "fwd", 3, 2);
    LstmCell::declare(ps, "bwd", 3, 2);
    add_case("bilstm", ps, {{"x", {3, 3}}}, [=](Tape &t) {
      return project(bilstm(LstmCell::bind(t, "fwd"), LstmCell::bind(t, "bwd"),
                            t.leaf("x")),
                     proj);
    });
  }
  {
    ParamSet ps;
    GruCell::declare(ps, "gru", 3, 2);
    add_case("gru_update", ps, {{"h", {2, 2}}, {"x", {2, 3}}}, [=](Tape &t) {
      return project(
          gru_update(GruCell::bind(t, "gru"), t.leaf("h"), t.leaf("x")), proj);
    });
  }
  {
    ParamSet ps;
    ps.add("projection", {3, 2}, 2);
    add_case("align", ps,
             {{"context", {3, 2}}, {"question", {2, 2}}, {"values", {2, 4}}},
             [=](Tape &t) {
               return project(align(t.leaf("context"), t.leaf("question"),
                                    t.leaf("values"), t.leaf("projection"))
                                  .output,
                              proj);
             });
  }
  {
    ParamSet ps;
    LstmCell::declare(ps, "fwd", 3, 2);
    LstmCell::declare(ps, "bwd", 3, 2);
    ps.add("attention", {1, 4}, 4);
    add_case("question_encoding", ps, {{"words", {3, 3}}}, [=](Tape &t) {
      Var q = encode_question(LstmCell::bind(t, "fwd"),
                              LstmCell::bind(t, "bwd"), t.leaf("words"));
      return project(question_self_attention(q, t.leaf("attention")), proj);
    });
  }
  {
    ParamSet ps;
    LstmCell::declare(ps, "history", 3, 3);
    add_case("question_history_lstm", ps,
             {{"q1", {1, 3}}, {"q2", {1, 3}}, {"q3", {1, 3}}}, [=](Tape &t) {
               auto out = question_history_lstm(
                   LstmCell::bind(t, "history"),
                   {t.leaf("q1"), t.leaf("q2"), t.leaf("q3")});
               return project(concat_rows(out), proj);
             });
  }
  {
    ParamSet ps;
    ps.add("graph", {1, 3}, 3);
    add_case("graph_learning", ps, {{"context", {5, 3}}}, [=](Tape &t) {
      Var dense = weighted_adjacency(t.leaf("context"), t.leaf("graph"));
      return project(sparsify_topk(dense, 2).normalized, proj);
    });
  }
  {
    ParamSet ps;
    FusionParams::declare(ps, "fusion", 2);
    add_case("fuse", ps, {{"a", {3, 2}}, {"b", {3, 2}}}, [=](Tape &t) {
      return project(
          fuse(t.leaf("a"), t.leaf("b"), FusionParams::bind(t, "fusion")),
          proj);
    });
  }
  {
    ParamSet ps;
    GruCell::declare(ps, "cell", 2, 2);
    add_case("ggnn", ps, {{"nodes", {3, 2}}, {"scores", {3, 3}}},
             [=](Tape &t) {
               Var adj = softmax_rows(t.leaf("scores"));
               return project(ggnn(t.leaf("nodes"), adj, 2,
                                   GruCell::bind(t, "cell")),
                              proj);
             });
  }
  {
    ParamSet ps;
    RecurrentGraphLayer::declare(ps, "layer", 2);
    add_case("rgnn_sequence", ps,
             {{"n1", {3, 2}}, {"n2", {3, 2}}, {"s1", {3, 3}}, {"s2", {3, 3}}},
             [=](Tape &t) {
               auto layer =
                   RecurrentGraphLayer::bind(t, "layer", RgnnOptions{2});
               auto out = rgnn_sequence(
                   layer, {t.leaf("n1"), t.leaf("n2")},
                   {softmax_rows(t.leaf("s1")), softmax_rows(t.leaf("s2"))});
               return project(concat_rows(out), proj);
             });
  }
  {
    ParamSet ps;
    StackedReasoner::declare(ps, 3, 2, 4);
    add_case("stacked_reasoning", ps,
             {{"c1", {4, 3}}, {"c2", {4, 3}}, {"q", {2, 4}},
              {"cw", {4, 2}}, {"qw", {2, 2}}, {"s", {4, 4}}},
             [=](Tape &t) {
               ReasoningOptions ro;
               ro.hidden = 4;
               ro.rgnn.hops = 2;
               auto r = StackedReasoner::bind(t, ro);
               Var g = softmax_rows(t.leaf("s"));
               Var a = r.step(t.leaf("c1"), g, t.leaf("q"), t.leaf("cw"),
                              t.leaf("qw"))
                           .output;
               Var b = r.step(t.leaf("c2"), g, t.leaf("q"), t.leaf("cw"),
                              t.leaf("qw"))
                           .output;
               return project(concat_rows({a, b}), proj);
             });
  }
  {
    ParamSet ps;
    PredictionParams::declare(ps, 2);
    add_case("prediction_loss", ps, {{"context", {3, 2}}, {"p", {1, 2}}},
             [=](Tape &t) {
               auto pp = PredictionParams::bind(t);
               auto probs = predict_turn(pp, t.leaf("context"), t.leaf("p"));
               Turn gold;
               gold.type = AnswerType::Span;
               gold.span = Span{1, 2};
               Turn yes;
               yes.type = AnswerType::Yes;
               return add(turn_loss(probs, gold), turn_loss(probs, yes));
             });
  }
  {
    ParamSet ps;
    Linear::declare(ps, "head", 2, 2 * 4);
    add_case("binary_type_head", ps, {{"context", {3, 2}}, {"p", {1, 2}}},
             [=](Tape &t) {
               return project(answer_type_probs(t.leaf("p"), t.leaf("context"),
                                                Linear::bind(t, "head"), 2),
                              proj);
             });
  }
  return cases;
}

GradCheckSuite check_modules(std::uint64_t seed, double tolerance,
                             double epsilon, bool richardson,
                             const std::function<void(Gradients &)> &tamper) {
  GradCheckSuite suite;
  for (auto &c : module_cases(seed)) {
    CheckOptions opts;
    opts.tolerance = tolerance;
    opts.epsilon = epsilon;
    opts.richardson = richardson;
    opts.seed = seed;
    opts.tamper = tamper;
    suite.checks.push_back(
        {c.name, finite_difference_check(c.expr, c.bindings, opts)});
  }
  return suite;
}

Config tiny_model_config() {
  Config c;
  c.hidden = 4;
  c.word_dim = 4;
  c.pos_dim = 2;
  c.ner_dim = 2;
  c.exact_match_dim = 2;
  c.turn_marker_dim = 2;
  c.pos_vocab = 3;
  c.ner_vocab = 3;
  c.k = 3;
  c.hops = 2;
  c.history = 2;
  c.dropout_embedding = 0.0;
  c.dropout_rnn = 0.0;
  return c;
}

Conversation tiny_conversation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto tok = [&](std::string s) {
    return Token{std::move(s), 0,
                 std::uniform_int_distribution<std::size_t>(0, 2)(rng),
                 std::uniform_int_distribution<std::size_t>(0, 2)(rng)};
  };
  Conversation conv;
  conv.id = "tiny";
  for (const char *w : {"anna", "met", "bob", "near", "the", "lake"})
    conv.context.push_back(tok(w));
  Turn t1;
  t1.id = "1";
  t1.question = {tok("who"), tok("met"), tok("bob")};
  t1.span = Span{0, 0};
  t1.answer_text = "anna";
  t1.answer_tokens = {tok("anna")};
  Turn t2;
  t2.id = "2";
  t2.question = {tok("where"), tok("was"), tok("she")};
  t2.span = Span{4, 5};
  t2.answer_text = "the lake";
  t2.answer_tokens = {tok("the"), tok("lake")};
  conv.turns = {t1, t2};
  return conv;
}

GradientReport check_model(std::uint64_t seed, double tolerance,
                           double epsilon, bool richardson,
                           const Config &base) {
  Conversation conv = tiny_conversation(seed);
  Vocabulary vocab;
  std::vector<Conversation> convs{conv};
  vocab.assign(convs, true);
  Config cfg = base;
  cfg.seed = seed;
  GraphFlowModel model(cfg, vocab);
  CheckOptions opts;
  opts.tolerance = tolerance;
  opts.epsilon = epsilon;
  opts.richardson = richardson;
  opts.seed = seed;
  return finite_difference_check(model.loss_expression(convs.front()),
                                 model.params(), opts);
}

json gradcheck_json(const GradCheckSuite &suite) {
  json checks = json::array();
  for (const auto &c : suite.checks) {
    json params = json::array();
    for (const auto &p : c.report.params)
      params.push_back({{"name", p.name},
                        {"coords", p.coords_checked},
                        {"coords_skipped", p.coords_skipped},
                        {"max_rel_error", p.max_rel_error},
                        {"pass", p.pass}});
    checks.push_back({{"name", c.name},
                      {"tolerance", c.report.tolerance},
                      {"worst", c.report.worst()},
                      {"pass", c.report.pass()},
                      {"params", std::move(params)}});
  }
  return {{"pass", suite.pass()}, {"checks", std::move(checks)}};
}

} // namespace graphflow
