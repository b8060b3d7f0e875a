// SPDX-License-Identifier: Apache-2.0
#include "harness/model.hpp"

#include "encoding/encoding.hpp"
#include "rgnn/rgnn.hpp"

#include <fstream>
#include <sstream>

namespace graphflow {

using nlohmann::json;

namespace {
constexpr const char *kGraphWeight = "graph.weight";
} // namespace

ParamSet GraphFlowModel::declare(const Config &cfg, std::size_t vocab_size) {
  cfg.validate();
  const EncoderOptions eo = cfg.encoder_options(vocab_size, false);
  ParamSet ps;
  EncoderParams::declare(ps, eo);
  ps.add(kGraphWeight, {1, eo.context_dim()}, eo.context_dim());
  StackedReasoner::declare(ps, eo.context_dim(), eo.word_dim, cfg.hidden);
  PredictionParams::declare(ps, cfg.hidden);
  return ps;
}

GraphFlowModel::GraphFlowModel(Config cfg, Vocabulary vocab)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)),
      decls_(declare(cfg_, vocab_.size())),
      params_(decls_.initialize(cfg_.seed)) {}

std::string answer_text(const Conversation &conv, const DecodedAnswer &ans) {
  if (ans.type != AnswerType::Span || !ans.span)
    return std::string(answer_type_name(ans.type));
  std::string text;
  for (std::size_t j = ans.span->start; j <= ans.span->end; ++j) {
    if (!text.empty())
      text += ' ';
    text += conv.context[j].surface;
  }
  return text;
}

Var GraphFlowModel::forward(Tape &tape, const Conversation &conv,
                            const ForwardOptions &opts,
                            ConversationResult *out) const {
  conv.validate();
  const EncoderOptions eo = cfg_.encoder_options(vocab_.size(), opts.training);
  const ReasoningOptions ro = cfg_.reasoning_options(opts.training);
  std::mt19937_64 *rng = opts.training ? opts.rng : nullptr;

  EncoderParams enc = EncoderParams::bind(tape);
  Var graph_weight = tape.leaf(kGraphWeight);
  StackedReasoner reasoner = StackedReasoner::bind(tape, ro);
  PredictionParams pred = PredictionParams::bind(tape);
  QuestionHistory history(enc.history);

  HistoryOverride predicted;
  const HistoryOverride *ov = opts.predicted_history ? &predicted : nullptr;

  std::vector<Var> losses;
  for (std::size_t t = 0; t < conv.turns.size(); ++t) {
    EncodedTurn turn = encode_turn(enc, eo, conv, t, ov, rng);
    Var questions = dropout(
        encode_question(enc.question_fwd, enc.question_bwd, turn.question),
        ro.dropout_rnn, rng);
    Var p = history.push(
        question_self_attention(questions, enc.question_attention));

    Var dense = weighted_adjacency(turn.context, graph_weight);
    ContextGraph graph = cfg_.ablation.no_knn ? dense_graph(dense)
                                              : sparsify_topk(dense, cfg_.k);
    auto states = reasoner.step(turn.context, graph.normalized, questions,
                                turn.context_words, turn.question_words, rng);
    TurnProbabilities probs = predict_turn(pred, states.output, p);
    losses.push_back(turn_loss(probs, conv.turns[t]));

    const bool need_decode = out || opts.predicted_history;
    if (!need_decode)
      continue;
    DecodedAnswer ans = decode(tape.value(probs.start), tape.value(probs.end),
                               tape.value(probs.type), cfg_.max_span_len);
    if (opts.predicted_history) {
      predicted.spans.push_back(ans.span);
      std::vector<Token> toks;
      if (ans.span)
        toks.assign(conv.context.begin() + ans.span->start,
                    conv.context.begin() + ans.span->end + 1);
      else
        toks.push_back(
            {std::string(answer_type_name(ans.type)),
             vocab_.id(std::string(answer_type_name(ans.type))), 0, 0});
      predicted.answer_tokens.push_back(std::move(toks));
    }
    if (out) {
      TurnResult r;
      r.answer = ans;
      r.answer_text = answer_text(conv, ans);
      r.start = tape.value(probs.start);
      r.end = tape.value(probs.end);
      r.type = tape.value(probs.type);
      r.node_states = tape.value(states.output);
      if (opts.dump_graphs)
        r.graph = graph_dump(graph, t);
      out->turns.push_back(std::move(r));
    }
  }
  Var total = losses.size() == 1 ? losses[0] : sum(concat_cols(losses));
  return affine(total, 1.0 / static_cast<double>(losses.size()), 0.0);
}

ConversationResult GraphFlowModel::run(const Conversation &conv,
                                       const ForwardOptions &opts,
                                       Gradients *grads) const {
  ConversationResult result;
  Tape tape(&params_);
  Var loss = forward(tape, conv, opts, &result);
  result.loss = tape.value(loss)(0, 0);
  if (grads) {
    tape.backward(loss);
    *grads = tape.leaf_gradients();
  }
  return result;
}

Expression GraphFlowModel::loss_expression(const Conversation &conv) const {
  return [this, conv](Tape &tape) {
    return forward(tape, conv, ForwardOptions{}, nullptr);
  };
}

std::size_t GraphFlowModel::load_embeddings(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot read embeddings " + path.string());
  Tensor &table = params_.at("embed.word");
  std::size_t found = 0, line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word))
      continue;
    std::vector<double> values;
    for (double v; ls >> v;)
      values.push_back(v);
    if (!ls.eof())
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed vector");
    if (values.size() != cfg_.word_dim)
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(cfg_.word_dim) +
                        " values, got " + std::to_string(values.size()));
    const std::size_t id = vocab_.id(word);
    if (id == 0 && word != Vocabulary::kUnknown)
      continue;
    for (std::size_t c = 0; c < values.size(); ++c)
      table(id, c) = values[c];
    ++found;
  }
  if (!table.all_finite())
    throw NumericError("embedding file holds non-finite values");
  return found;
}

Checkpoint GraphFlowModel::to_checkpoint(json extra) const {
  Checkpoint ck;
  ck.tensors = params_;
  ck.meta = std::move(extra);
  ck.meta["config"] = config_to_json(cfg_);
  ck.meta["vocab"] = vocab_.words();
  return ck;
}

GraphFlowModel GraphFlowModel::from_checkpoint(const Checkpoint &ck) {
  if (!ck.meta.contains("config") || !ck.meta.contains("vocab"))
    throw CheckpointError("checkpoint lacks model config or vocabulary");
  // Any inconsistency inside the file is reported as a checkpoint problem.
  try {
    Config cfg = config_from_json(ck.meta.at("config"));
    auto words = ck.meta.at("vocab").get<std::vector<std::string>>();
    GraphFlowModel model(cfg, Vocabulary(std::move(words)));
    model.decls_.validate(ck.tensors);
    for (const auto &d : model.decls_.decls())
      model.params_.at(d.name) = ck.tensors.at(d.name);
    return model;
  } catch (const json::exception &e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  } catch (const ConfigError &e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  } catch (const FormatError &e) {
    throw CheckpointError(std::string("bad checkpoint vocabulary: ") +
                          e.what());
  } catch (const BindingError &e) {
    throw CheckpointError(e.what());
  } catch (const ShapeError &e) {
    throw CheckpointError(e.what());
  }
}

void GraphFlowModel::save(const std::filesystem::path &path, json extra) const {
  save_checkpoint(to_checkpoint(std::move(extra)), path);
}

GraphFlowModel GraphFlowModel::load(const std::filesystem::path &path) {
  return from_checkpoint(load_checkpoint(path));
}

} // namespace graphflow
