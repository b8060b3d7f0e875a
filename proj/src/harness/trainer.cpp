// SPDX-License-Identifier: Apache-2.0
#include "harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace graphflow {

void Adamax::step(Bindings &params, const Gradients &grads) {
  ++t_;
  const double bias = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  for (const auto &[name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end())
      continue;
    Tensor &theta = pit->second;
    auto [mit, m_new] = m_.try_emplace(name, theta.shape(), 0.0);
    auto [uit, u_new] = u_.try_emplace(name, theta.shape(), 0.0);
    Tensor &m = mit->second;
    Tensor &u = uit->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      u[i] = std::max(beta2_ * u[i], std::abs(g[i]));
      theta[i] -= lr_ / bias * m[i] / (u[i] + eps_);
    }
  }
}

double clip_global_norm(Gradients &grads, double max_norm) {
  double sq = 0.0;
  for (const auto &[_, g] : grads)
    for (double v : g.data())
      sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto &[_, g] : grads)
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] *= scale;
  }
  return norm;
}

TrainResult train(GraphFlowModel &model, const std::vector<Conversation> &data,
                  const std::vector<Conversation> &dev,
                  const EpochCallback &on_epoch) {
  const Config &cfg = model.config();
  if (data.empty())
    throw TrainingError("training set is empty");

  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adamax opt(cfg.learning_rate);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ForwardOptions fw;
  fw.training = true;
  fw.rng = &dropout_rng;

  TrainResult result;
  Bindings best = model.params();
  const auto &selection = dev.empty() ? data : dev;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Conversation &conv = data[idx];
      Gradients grads;
      ConversationResult res;
      try {
        res = model.run(conv, fw, &grads);
      } catch (const NumericError &e) {
        throw TrainingError("epoch " + std::to_string(epoch) +
                            ", conversation '" + conv.id + "': " + e.what());
      }
      const double norm = clip_global_norm(grads, cfg.grad_clip);
      if (!std::isfinite(res.loss) || !std::isfinite(norm))
        throw TrainingError("epoch " + std::to_string(epoch) +
                            ", conversation '" + conv.id +
                            "': non-finite loss or gradient");
      loss_sum += res.loss;
      opt.step(model.params(), grads);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / data.size();
    log.selection_f1 = evaluate(model, selection).f1;
    result.epochs.push_back(log);
    if (log.selection_f1 > result.best_f1) {
      result.best_f1 = log.selection_f1;
      result.best_epoch = epoch;
      best = model.params();
    }
    if (on_epoch)
      on_epoch(log);
    if (cfg.target_f1 > 0.0 && log.selection_f1 >= cfg.target_f1) {
      result.stopped_early = true;
      break;
    }
  }
  model.params() = std::move(best);
  return result;
}

} // namespace graphflow
