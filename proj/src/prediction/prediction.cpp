// SPDX-License-Identifier: Apache-2.0
#include "prediction/prediction.hpp"

#include <stdexcept>

namespace graphflow {

void PredictionParams::declare(ParamSet &ps, std::size_t d,
                               std::size_t num_class) {
  ps.add("predict.start", {d, d}, d);
  ps.add("predict.end", {d, d}, d);
  GruCell::declare(ps, "predict.update", d, d);
  Linear::declare(ps, "predict.type", d, num_class * 2 * d);
}

PredictionParams PredictionParams::bind(Tape &tape, std::size_t num_class) {
  PredictionParams p;
  p.start_weight = tape.leaf("predict.start");
  p.end_weight = tape.leaf("predict.end");
  p.update = GruCell::bind(tape, "predict.update");
  p.type_head = Linear::bind(tape, "predict.type");
  p.num_class = num_class;
  return p;
}

namespace {
Var pointer(Var context, Var question, Var weight) {
  // c_j^T W p for every j: (p W^T) C^T.
  return softmax_rows(matmul_nt(matmul_nt(question, weight), context));
}
} // namespace

Var start_probs(Var context, Var question, Var weight) {
  return pointer(context, question, weight);
}

Var question_update(Var question, Var context, Var start, const GruCell &cell) {
  if (start.cols() != context.rows())
    throw ShapeError("question_update: " + std::to_string(start.cols()) +
                     " probabilities for " + std::to_string(context.rows()) +
                     " context words");
  return gru_update(cell, question, matmul(start, context));
}

Var end_probs(Var context, Var updated_question, Var weight) {
  return pointer(context, updated_question, weight);
}

Var answer_type_probs(Var question, Var context, const Linear &head,
                      std::size_t num_class) {
  if (num_class < 2)
    throw std::invalid_argument("answer type head needs >= 2 classes");
  const std::size_t d = context.cols();
  Var pooled = concat_cols({mean_rows(context), max_rows(context)}); // 1 x 2d
  Var scorer = reshape(head(question), {num_class, 2 * d});
  Var logits = matmul_nt(pooled, scorer); // 1 x num_class
  if (num_class >= 3)
    return softmax_rows(logits);
  Var p1 = sigmoid(sub(slice_cols(logits, 1, 1), slice_cols(logits, 0, 1)));
  return concat_cols({affine(p1, -1.0, 1.0), p1});
}

TurnProbabilities predict_turn(const PredictionParams &p, Var context,
                               Var question) {
  TurnProbabilities out;
  out.start = start_probs(context, question, p.start_weight);
  Var updated = question_update(question, context, out.start, p.update);
  out.end = end_probs(context, updated, p.end_weight);
  out.type = answer_type_probs(question, context, p.type_head, p.num_class);
  return out;
}

Var turn_loss(const TurnProbabilities &probs, const Turn &gold) {
  const auto t = static_cast<std::size_t>(gold.type);
  if (t >= probs.type.cols())
    throw std::out_of_range("gold answer type outside the classifier");
  Var loss = affine(log_clamped(element(probs.type, 0, t), kLogClamp), -1.0,
                    0.0);
  if (gold.type == AnswerType::Span) {
    if (!gold.span)
      throw std::invalid_argument("span answer without a gold span");
    const std::size_t m = probs.start.cols();
    if (gold.span->start > gold.span->end || gold.span->end >= m)
      throw std::out_of_range("gold span (" +
                              std::to_string(gold.span->start) + "," +
                              std::to_string(gold.span->end) +
                              ") outside context of " + std::to_string(m));
    Var ls = log_clamped(element(probs.start, 0, gold.span->start), kLogClamp);
    Var le = log_clamped(element(probs.end, 0, gold.span->end), kLogClamp);
    loss = sub(loss, add(ls, le));
  }
  return loss;
}

Span best_span(const Tensor &start, const Tensor &end, std::size_t max_len) {
  if (max_len < 1)
    throw std::invalid_argument("max span length must be >= 1");
  const std::size_t m = start.size();
  if (m == 0 || end.size() != m)
    throw ShapeError("best_span: mismatched or empty distributions");
  Span best{0, 0};
  double best_score = -1.0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t last = std::min(m - 1, s + max_len - 1);
    for (std::size_t e = s; e <= last; ++e) {
      const double score = start[s] * end[e];
      if (score > best_score) {
        best_score = score;
        best = {s, e};
      }
    }
  }
  return best;
}

DecodedAnswer decode(const Tensor &start, const Tensor &end,
                     const Tensor &type, std::size_t max_len) {
  DecodedAnswer out;
  std::size_t arg = 0;
  for (std::size_t c = 1; c < type.size(); ++c)
    if (type[c] > type[arg])
      arg = c;
  out.type = static_cast<AnswerType>(arg);
  out.type_score = type[arg];
  if (out.type == AnswerType::Span) {
    out.span = best_span(start, end, max_len);
    out.span_score = start[out.span->start] * end[out.span->end];
  }
  return out;
}

} // namespace graphflow
