// SPDX-License-Identifier: Apache-2.0
/**
 * @file   gradcheck.hpp
 * @brief  Finite-difference checks of every parameterized module and of the
 *         end-to-end loss on a tiny model.
 */
#ifndef GRAPHFLOW_HARNESS_GRADCHECK_HPP
#define GRAPHFLOW_HARNESS_GRADCHECK_HPP

#include "harness/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace graphflow {

inline constexpr double kModuleTolerance = 1e-6;
inline constexpr double kModelTolerance = 1e-4;
// Steps for the Richardson-combined central differences. Smaller steps lose
// coordinates with gradients near 1e-8 to rounding; the kink retreat in the
// checker keeps larger ones off the non-smooth points.
inline constexpr double kModuleEpsilon = 5e-3;
inline constexpr double kModelEpsilon = 3e-3;

struct NamedCheck {
  std::string name;
  GradientReport report;
};

struct GradCheckSuite {
  std::vector<NamedCheck> checks;
  bool pass() const;
};

/// One scalar expression per module. Parameters start from their training
/// initialization and inputs are uniform in [-2, 2]; inputs are bound as
/// leaves and checked too.
struct ModuleCase {
  std::string name;
  Expression expr;
  Bindings bindings;
};
std::vector<ModuleCase> module_cases(std::uint64_t seed);

/// Module checks at `tolerance`; `tamper` perturbs analytic gradients.
GradCheckSuite check_modules(std::uint64_t seed, double tolerance,
                             double epsilon = kModuleEpsilon,
                             bool richardson = true,
                             const std::function<void(Gradients &)> &tamper = {});

/// Tiny model: T=2 turns, m=6 context words, n=3 question words, d=4, K=3,
/// hops=2, no dropout.
Config tiny_model_config();
Conversation tiny_conversation(std::uint64_t seed);

GradientReport check_model(std::uint64_t seed, double tolerance,
                           double epsilon = kModelEpsilon,
                           bool richardson = true,
                           const Config &cfg = tiny_model_config());

nlohmann::json gradcheck_json(const GradCheckSuite &suite);

} // namespace graphflow

#endif
