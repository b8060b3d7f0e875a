// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"
#include "harness/ablation.hpp"
#include "harness/dataset.hpp"
#include "harness/flow_trace.hpp"
#include "harness/gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace graphflow;
using doctest::Approx;

namespace {

Config small_config() {
  Config c = tiny_model_config();
  c.hidden = 8;
  c.word_dim = 4;
  c.k = 3;
  c.hops = 1;
  c.epochs = 2;
  c.seed = 3;
  c.learning_rate = 0.01;
  return c;
}

std::vector<Conversation> synthetic(std::size_t dialogs, std::uint64_t seed,
                                    Vocabulary &vocab) {
  SyntheticSpec s;
  s.dialogs = dialogs;
  s.turns = 3;
  s.min_context = 8;
  s.max_context = 12;
  s.entity_vocab = 30;
  s.seed = seed;
  auto convs = generate_synthetic(s);
  vocab.assign(convs, true);
  return convs;
}

} // namespace

TEST_CASE("adamax follows its update rule") {
  Bindings p{{"w", Tensor({1, 1}, 1.0)}};
  Adamax opt(0.1);
  opt.step(p, Gradients{{"w", Tensor({1, 1}, 0.5)}});
  // m = 0.05, u = 0.5: w -= 0.1 / 0.1 * 0.05 / 0.5
  CHECK(p.at("w")[0] == Approx(0.9).epsilon(1e-7));
  opt.step(p, Gradients{{"w", Tensor({1, 1}, -1.0)}});
  // m = -0.055, u = 1: w -= 0.1 / 0.19 * -0.055
  CHECK(p.at("w")[0] == Approx(0.9 + 0.1 / 0.19 * 0.055).epsilon(1e-7));
  CHECK(opt.steps() == 2);
}

TEST_CASE("global norm clipping") {
  Gradients g{{"a", Tensor::matrix(1, 1, {3})}, {"b", Tensor::matrix(1, 1, {4})}};
  CHECK(clip_global_norm(g, 10.0) == Approx(5.0));
  CHECK(g.at("a")[0] == 3.0);
  CHECK(clip_global_norm(g, 1.0) == Approx(5.0));
  CHECK(g.at("a")[0] == Approx(0.6));
  CHECK(g.at("b")[0] == Approx(0.8));
  Gradients h{{"a", Tensor::matrix(1, 1, {30})}};
  clip_global_norm(h, 0.0);
  CHECK(h.at("a")[0] == 30.0);
}

TEST_CASE("forward pass shapes and checkpoint round trip") {
  Vocabulary vocab;
  auto convs = synthetic(2, 1, vocab);
  GraphFlowModel model(small_config(), vocab);
  CHECK(model.params().count("graph.weight") == 1);
  const Conversation &c = convs[0];
  ConversationResult r = model.run(c, ForwardOptions{});
  REQUIRE(r.turns.size() == c.turns.size());
  CHECK(std::isfinite(r.loss));
  CHECK(r.turns[0].start.cols() == c.context.size());
  CHECK(r.turns[0].type.cols() == kNumAnswerTypes);
  CHECK(r.turns[0].node_states.rows() == c.context.size());
  CHECK(r.turns[0].node_states.cols() == 8);

  auto path = std::filesystem::temp_directory_path() / "gf_model_test.json";
  model.save(path);
  GraphFlowModel back = GraphFlowModel::load(path);
  std::filesystem::remove(path);
  CHECK(back.params() == model.params());
  CHECK(back.vocabulary().words() == vocab.words());
  CHECK(config_to_json(back.config()) == config_to_json(model.config()));
  EvalReport a = evaluate(model, convs), b = evaluate(back, convs);
  CHECK(a.predictions == b.predictions);

  Checkpoint ck = model.to_checkpoint();
  ck.tensors.erase("graph.weight");
  CHECK_THROWS_AS(GraphFlowModel::from_checkpoint(ck), CheckpointError);
}

TEST_CASE("pretrained vectors overwrite embedding rows") {
  Vocabulary vocab;
  auto convs = synthetic(1, 1, vocab);
  GraphFlowModel model(small_config(), vocab);
  const std::string w = vocab.word(1);
  auto path = std::filesystem::temp_directory_path() / "gf_emb_test.txt";
  {
    std::ofstream os(path);
    os << w << " 1 2 3 4\nnotinvocab 0 0 0 0\n";
  }
  CHECK(model.load_embeddings(path) == 1);
  const Tensor &table = model.params().at("embed.word");
  CHECK(table(1, 0) == 1.0);
  CHECK(table(1, 3) == 4.0);
  {
    std::ofstream os(path);
    os << w << " 1 2\n";
  }
  CHECK_THROWS_AS(model.load_embeddings(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(model.load_embeddings("/nonexistent/emb.txt"), IoError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Vocabulary vocab;
  auto convs = synthetic(3, 2, vocab);
  GraphFlowModel a(small_config(), vocab), b(small_config(), vocab);
  TrainResult ra = train(a, convs, {}), rb = train(b, convs, {});
  REQUIRE(ra.epochs.size() == 2);
  for (std::size_t i = 0; i < ra.epochs.size(); ++i)
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
  CHECK(a.params() == b.params());
  CHECK(evaluate(a, convs).predictions == evaluate(b, convs).predictions);
  CHECK_THROWS_AS(train(a, {}, {}), TrainingError);
}

TEST_CASE("smoothed training loss does not increase over five epochs") {
  Vocabulary vocab;
  auto convs = synthetic(10, 4, vocab);
  Config cfg = small_config();
  cfg.epochs = 5;
  GraphFlowModel model(cfg, vocab);
  TrainResult r = train(model, convs, {});
  REQUIRE(r.epochs.size() == 5);
  std::vector<double> smooth;
  for (std::size_t i = 1; i < r.epochs.size(); ++i)
    smooth.push_back(0.5 * (r.epochs[i - 1].train_loss + r.epochs[i].train_loss));
  for (std::size_t i = 1; i < smooth.size(); ++i)
    CHECK(smooth[i] <= smooth[i - 1]);
  // The kept parameters are those of the earliest best epoch.
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto &e : r.epochs)
    if (e.selection_f1 > best) {
      best = e.selection_f1;
      best_epoch = e.epoch;
    }
  CHECK(r.best_epoch == best_epoch);
  CHECK(evaluate(model, convs).f1 == Approx(best).epsilon(1e-12));
}

TEST_CASE("evaluation reports HEQ only with human references") {
  Conversation c = fixture::story();
  std::vector<Conversation> convs{c};
  Vocabulary vocab;
  vocab.assign(convs, true);
  GraphFlowModel model(small_config(), vocab);
  EvalReport r = evaluate(model, convs);
  CHECK(r.turns == 3);
  CHECK_FALSE(r.heq_q);
  for (auto &t : convs[0].turns)
    t.human_f1 = 0.0;
  EvalReport h = evaluate(model, convs);
  REQUIRE(h.heq_q);
  CHECK(*h.heq_q == 1.0);
  CHECK(report_json(h, false).contains("heq_q"));

  const auto &p = r.predictions.at(1);
  for (const char *key : {"conversation_id", "turn_id", "type", "span_text",
                          "start", "end", "scores"})
    CHECK(p.contains(key));
  CHECK(p["conversation_id"] == "story");
  CHECK(p["turn_id"] == "2");
  CHECK(evaluate(model, convs, true).turns == 3);
}

TEST_CASE("flow trace similarities and highlighting") {
  Tensor a = Tensor::matrix(3, 2, {1, 0, 0, 1, 0, 0});
  Tensor b = Tensor::matrix(3, 2, {2, 0, 1, 0, 0, 0});
  FlowTrace same = flow_trace({a, a}, 0.5);
  REQUIRE(same.turns.size() == 1);
  CHECK(same.turns[0].similarity == std::vector<double>{1, 1, 1});
  CHECK(same.turns[0].highlighted == std::vector<std::uint8_t>{false, false, false});

  FlowTrace t = flow_trace({a, b}, 0.5);
  const FlowTurn &ft = t.turns[0];
  CHECK(ft.similarity[0] == Approx(1.0));
  CHECK(ft.similarity[1] == Approx(0.0));
  CHECK(ft.highlighted == std::vector<std::uint8_t>{false, true, false});
  CHECK(ft.zero_norm == std::vector<std::uint8_t>{false, false, true});
  CHECK(ft.rank.front() == 1);
  CHECK(top_quartile(ft) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(flow_trace({a, Tensor({2, 2}, 1.0)}, 0.5), ShapeError);

  Conversation c;
  c.id = "c";
  c.context = fixture::words("x y z");
  c.turns = {fixture::span_turn("1", "p", c.context, 0, 0),
             fixture::span_turn("2", "q", c.context, 1, 1)};
  std::string text = flow_trace_text(c, t);
  CHECK(text.find("x [y] z") != std::string::npos);
  auto j = flow_trace_json(c, t);
  CHECK(j["turns"][0]["highlighted"] == nlohmann::json::array({1}));
  CHECK(j["turns"][0]["zero_norm"] == nlohmann::json::array({2}));
}

TEST_CASE("ablation rows map to switches and report every row") {
  Config base = small_config();
  CHECK(ablated_config(base, "-RecurrentConn").ablation.no_recurrent_conn);
  CHECK(ablated_config(base, "-RGNN").ablation.no_rgnn);
  CHECK(ablated_config(base, "-kNN").ablation.no_knn);
  CHECK(ablated_config(base, "-PreQues").ablation.no_pre_ques);
  CHECK(ablated_config(base, "-PreAns").ablation.no_pre_ans);
  CHECK(ablated_config(base, "-PreAnsLoc").ablation.no_pre_ans_loc);
  CHECK(ablated_config(base, "0-His").history == 0);
  CHECK(ablated_config(base, "1-His").history == 1);
  CHECK_THROWS_AS(ablated_config(base, "-Nothing"), ConfigError);

  Vocabulary vocab;
  auto convs = synthetic(2, 5, vocab);
  base.epochs = 1;
  auto rows = run_ablation(base, default_ablation_rows(), convs, {}, convs,
                           vocab);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "full");
  CHECK(*rows[0].reference_f1 == 78.3);
  CHECK(*rows[1].reference_f1 == 69.9);
  auto j = ablation_json(rows);
  CHECK(j["rows"].size() == 4);
  CHECK(j["rows"][2]["row"] == "-RGNN");
  for (const auto &r : rows)
    CHECK(std::isfinite(r.loss));
}

TEST_CASE("module gradient checks pass and catch a tampered gradient") {
  auto cases = module_cases(1);
  CHECK(cases.size() == 14);
  GradCheckSuite ok = check_modules(1, kModuleTolerance);
  for (const auto &c : ok.checks)
    CHECK_MESSAGE(c.report.pass(), c.name << " worst " << c.report.worst());
  GradCheckSuite bad = check_modules(1, kModuleTolerance, kModuleEpsilon, true,
                                     [](Gradients &g) {
                                       for (auto &[_, t] : g)
                                         for (auto &v : t.storage())
                                           v *= 1.1;
                                     });
  CHECK_FALSE(bad.pass());
  auto j = gradcheck_json(ok);
  CHECK(j["pass"] == true);
  CHECK(j["checks"].size() == 14);
}
