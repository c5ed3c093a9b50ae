#pragma once

#include "eve/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace eve::diffusion {

enum class ScheduleKind { squared_cosine };

inline std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::squared_cosine:
      return "squared_cosine";
  }
  return "unknown";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "squared_cosine" || s == "squaredcos_cap_v2") return ScheduleKind::squared_cosine;
  throw Error("unknown schedule kind '" + s + "'");
}

// DDPM coefficients indexed by denoising step k in [0, N). The sample at
// step k carries noise level alpha_bar[k]; a reverse step maps step k to
// step k - 1, and step 0 produces the clean output.
//
//   a_{k-1} = alpha[k] * (a_k - gamma[k] * eps) + sigma[k] * eta
struct NoiseSchedule {
  int num_steps = 0;
  ScheduleKind kind = ScheduleKind::squared_cosine;
  std::vector<double> betas;
  std::vector<double> alpha_bar;
  std::vector<double> alpha;
  std::vector<double> gamma;
  std::vector<double> sigma;
};

namespace detail {
// Cosine cumulative-alpha curve with offset s = 0.008.
inline double cosine_alpha_bar(double t) {
  constexpr double s = 0.008;
  const double c = std::cos((t + s) / (1.0 + s) * std::numbers::pi / 2.0);
  return c * c;
}
}  // namespace detail

inline NoiseSchedule build_schedule(int num_steps, ScheduleKind kind = ScheduleKind::squared_cosine) {
  if (num_steps < 1) throw Error("build_schedule: num_steps must be >= 1, got " + std::to_string(num_steps));
  constexpr double kMaxBeta = 0.999;

  NoiseSchedule s;
  s.num_steps = num_steps;
  s.kind = kind;
  s.betas.resize(num_steps);
  for (int i = 0; i < num_steps; ++i) {
    const double t1 = static_cast<double>(i) / num_steps;
    const double t2 = static_cast<double>(i + 1) / num_steps;
    s.betas[i] = std::min(1.0 - detail::cosine_alpha_bar(t2) / detail::cosine_alpha_bar(t1), kMaxBeta);
  }

  s.alpha_bar.resize(num_steps);
  double cum = 1.0;
  for (int i = 0; i < num_steps; ++i) {
    cum *= 1.0 - s.betas[i];
    s.alpha_bar[i] = cum;
  }

  s.alpha.resize(num_steps);
  s.gamma.resize(num_steps);
  s.sigma.resize(num_steps);
  for (int k = 0; k < num_steps; ++k) {
    const double beta = s.betas[k];
    const double prev_bar = k == 0 ? 1.0 : s.alpha_bar[k - 1];
    s.alpha[k] = 1.0 / std::sqrt(1.0 - beta);
    s.gamma[k] = beta / std::sqrt(1.0 - s.alpha_bar[k]);
    s.sigma[k] = k == 0 ? 0.0 : std::sqrt(beta * (1.0 - prev_bar) / (1.0 - s.alpha_bar[k]));
  }
  return s;
}

}  // namespace eve::diffusion
