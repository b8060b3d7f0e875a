// SPDX-License-Identifier: Apache-2.0
/**
 * @file   prediction.hpp
 * @brief  Span pointers, answer-type head, training loss and span decoding.
 */
#ifndef GRAPHFLOW_PREDICTION_HPP
#define GRAPHFLOW_PREDICTION_HPP

#include "encoding/conversation.hpp"
#include "numerics/layers.hpp"

#include <optional>

namespace graphflow {

inline constexpr double kLogClamp = 1e-12;

struct PredictionParams {
  Var start_weight; // d x d
  Var end_weight;   // d x d
  GruCell update;   // question update before the end pointer
  Linear type_head; // d -> num_class * 2d
  std::size_t num_class = kNumAnswerTypes;

  static void declare(ParamSet &ps, std::size_t d,
                      std::size_t num_class = kNumAnswerTypes);
  static PredictionParams bind(Tape &tape,
                               std::size_t num_class = kNumAnswerTypes);
};

/// 1 x m; entry j ~ exp(c_j . (W p)).
Var start_probs(Var context, Var question, Var weight);
/// GRU(p, sum_j P_j c_j), 1 x d.
Var question_update(Var question, Var context, Var start, const GruCell &cell);
Var end_probs(Var context, Var updated_question, Var weight);
/// Pooled context [mean ; max] scored against reshape(f_c(p)). Softmax for
/// three or more classes, sigmoid of the logit difference for two.
Var answer_type_probs(Var question, Var context, const Linear &head,
                      std::size_t num_class);

struct TurnProbabilities {
  Var start, end, type; // 1 x m, 1 x m, 1 x num_class
};

TurnProbabilities predict_turn(const PredictionParams &params, Var context,
                               Var question);

/// -[type==span](log P^S_s + log P^E_e) - log P^C_t with clamped logs.
Var turn_loss(const TurnProbabilities &probs, const Turn &gold);

struct DecodedAnswer {
  AnswerType type = AnswerType::Span;
  std::optional<Span> span;
  double span_score = 0.0; // P^S_s * P^E_e of the chosen span
  double type_score = 0.0;
};

/// Best (s, e) with s <= e, e - s + 1 <= max_len by P^S_s * P^E_e; ties go
/// to the smaller s, then the smaller e.
Span best_span(const Tensor &start, const Tensor &end, std::size_t max_len);

/// Type first (argmax, ties to the lower class); a span only for type span.
DecodedAnswer decode(const Tensor &start, const Tensor &end,
                     const Tensor &type, std::size_t max_len);

} // namespace graphflow

#endif
