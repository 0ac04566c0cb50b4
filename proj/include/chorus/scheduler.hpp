#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace chorus {

enum class Mode { baseline, nirvana, chorus };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::nirvana: return "nirvana";
    case Mode::chorus: return "chorus";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "nirvana") return Mode::nirvana;
  if (s == "chorus") return Mode::chorus;
  throw std::invalid_argument("unknown mode: " + s);
}

// Stage boundaries for one request: full reuse over [0, K1), selective
// region denoising over [K1, K2), full compute over [K2, N).
struct StagePlan {
  int k1 = 0;
  int k2 = 0;
  int n = 0;
  double m = 0.0;
  Mode mode = Mode::chorus;
};

struct SchedulerParams {
  double tau = 0.75;
  double k1_frac = 0.25;
  double k2_frac = 0.75;
  int stage3_min = 1;

  void validate() const {
    if (k1_frac < 0.0 || k2_frac < k1_frac || k2_frac > 1.0)
      throw std::invalid_argument("scheduler: need 0 <= k1_frac <= k2_frac <= 1");
    if (stage3_min < 0) throw std::invalid_argument("scheduler: stage3_min must be >= 0");
  }
};

// Normalized match score s = (m - tau) / (1 - tau), clamped to [0, 1].
// A degenerate threshold (tau >= 1) leaves no range; matches are treated
// as saturated there.
inline double match_progress(double m, double tau) {
  const double denom = 1.0 - tau;
  if (denom <= 0.0) return m >= tau ? 1.0 : 0.0;
  return std::clamp((m - tau) / denom, 0.0, 1.0);
}

// Monotone mapping from the matching score to stage boundaries.
// Below the threshold both boundaries collapse to zero (full compute).
inline StagePlan plan_stages(double m, int n_steps, const SchedulerParams& params, Mode mode) {
  if (n_steps < 1) throw std::invalid_argument("plan_stages: need N >= 1");
  params.validate();
  StagePlan plan;
  plan.n = n_steps;
  plan.m = m;
  plan.mode = mode;
  if (mode == Mode::baseline || m < params.tau) return plan;

  const double s = match_progress(m, params.tau);
  const int cap = std::max(0, n_steps - params.stage3_min);
  const int k1 = static_cast<int>(std::llround(s * params.k1_frac * n_steps));
  plan.k1 = std::min(k1, cap);
  const int span = static_cast<int>(std::llround(s * (params.k2_frac - params.k1_frac) * n_steps));
  plan.k2 = std::min(plan.k1 + span, cap);
  if (mode == Mode::nirvana) plan.k2 = plan.k1;
  return plan;
}

}  // namespace chorus
