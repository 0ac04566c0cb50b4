#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "chorus/scheduler.hpp"

namespace chorus::tgaa {

struct TgaaParams {
  double a_k = 2.0;  // maximum excess key amplification
  double a_o = 1.0;  // maximum excess output amplification
  bool enabled_key = true;
  bool enabled_output = true;
};

struct StageProgress {
  int t = 0;
  StagePlan plan;
  double m = 0.0;
  double tau = 0.0;
};

// Denoising progress over the reuse-affected computed window [K1, K2).
inline double decay_progress(int t, const StagePlan& plan) {
  const double span = std::max(1, plan.k2 - plan.k1);
  return std::clamp((t - plan.k1) / span, 0.0, 1.0);
}

// Key amplification factor, bilinear decay in denoising progress and match
// score, clamped at 1 so conditioning is never weakened.
inline double gamma_k(const StageProgress& p, const TgaaParams& params) {
  if (!params.enabled_key || params.a_k <= 0.0) return 1.0;
  const double u = decay_progress(p.t, p.plan);
  const double s = match_progress(p.m, p.tau);
  return std::max(1.0, 1.0 + params.a_k * (1.0 - u) * (1.0 - s));
}

// Output amplification factor, same form with a_o.
inline double gamma_o(const StageProgress& p, const TgaaParams& params) {
  if (!params.enabled_output || params.a_o <= 0.0) return 1.0;
  const double u = decay_progress(p.t, p.plan);
  const double s = match_progress(p.m, p.tau);
  return std::max(1.0, 1.0 + params.a_o * (1.0 - u) * (1.0 - s));
}

using GammaPair = std::pair<double, double>;  // (gamma_k, gamma_o)

// Precomputed factor table for t in [K1, N). Factors are 1.0 for every
// t >= K2, and for all steps when m < tau (no reuse, no amplification).
inline std::vector<GammaPair> schedule(const StagePlan& plan, double m, double tau,
                                       const TgaaParams& params) {
  std::vector<GammaPair> table;
  table.reserve(static_cast<std::size_t>(std::max(0, plan.n - plan.k1)));
  for (int t = plan.k1; t < plan.n; ++t) {
    if (m < tau || t >= plan.k2) {
      table.emplace_back(1.0, 1.0);
      continue;
    }
    StageProgress p{t, plan, m, tau};
    table.emplace_back(gamma_k(p, params), gamma_o(p, params));
  }
  return table;
}

}  // namespace chorus::tgaa
