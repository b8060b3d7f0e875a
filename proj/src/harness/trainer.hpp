// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Adamax training over dialogs (one dialog per update) with
 *         best-F1 model selection.
 */
#ifndef GRAPHFLOW_HARNESS_TRAINER_HPP
#define GRAPHFLOW_HARNESS_TRAINER_HPP

#include "harness/metrics.hpp"
#include "harness/model.hpp"

#include <functional>
#include <vector>

namespace graphflow {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Adamax: m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);
/// theta <- theta - lr / (1 - b1^t) * m / (u + eps).
class Adamax {
public:
  explicit Adamax(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Bindings &params, const Gradients &grads);
  std::size_t steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  Bindings m_, u_;
};

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(Gradients &grads, double max_norm);

struct EpochLog {
  std::size_t epoch = 0; // 1-based
  double train_loss = 0.0;
  double selection_f1 = 0.0; // dev F1, or training F1 without a dev set
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// Trains `model` in place; on return it holds the parameters of the best
/// epoch (ties to the earlier one). Throws TrainingError on a non-finite
/// loss or gradient.
TrainResult train(GraphFlowModel &model, const std::vector<Conversation> &train,
                  const std::vector<Conversation> &dev,
                  const EpochCallback &on_epoch = {});

} // namespace graphflow

#endif
