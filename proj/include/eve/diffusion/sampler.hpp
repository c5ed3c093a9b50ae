#pragma once

#include "eve/core/rng.hpp"
#include "eve/core/types.hpp"
#include "eve/diffusion/mixture.hpp"
#include "eve/diffusion/schedule.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eve::diffusion {

enum class MaskMode { respect_mask, ignore_mask };

struct GuidanceConfig {
  double beta = 10.0;
  // Guidance is applied on the final `guided_steps` reverse steps (k < G).
  int guided_steps = 8;
  MaskMode mask_mode = MaskMode::respect_mask;
  // Ramp beta linearly from beta / G at the first guided step up to beta at k = 0.
  bool linear_ramp = false;

  double beta_at(int k) const {
    if (k >= guided_steps || guided_steps <= 0) return 0.0;
    if (!linear_ramp) return beta;
    return beta * static_cast<double>(guided_steps - k) / guided_steps;
  }
};

namespace detail {
inline void check_feedback(const AggregatedFeedback& fb, Eigen::Index flat_len, int dims) {
  if (fb.reference.dims != dims || fb.reference.values.size() != flat_len) {
    throw Error("guided_reverse_step: feedback shape " + std::to_string(fb.reference.horizon) + "x" +
                std::to_string(fb.reference.dims) + " does not match sample of length " + std::to_string(flat_len));
  }
}
}  // namespace detail

// One reverse DDPM step with optional L2 guidance toward the feedback
// reference. `dims` is the per-timestep action dimension used to broadcast
// the feedback mask.
inline Vector guided_reverse_step(const MixtureDenoiser& denoiser, std::string_view key, const Vector& noisy, int k,
                                  const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                                  const AggregatedFeedback* feedback, int dims, Rng& rng) {
  if (guidance.guided_steps > schedule.num_steps) {
    throw Error("GuidanceConfig: guided_steps " + std::to_string(guidance.guided_steps) + " exceeds schedule length " +
                std::to_string(schedule.num_steps));
  }
  if (feedback) detail::check_feedback(*feedback, noisy.size(), dims);

  Vector direction = denoise_predict(denoiser, key, noisy, k, schedule);
  const double beta = guidance.beta_at(k);
  if (feedback && beta != 0.0) {
    const bool respect = guidance.mask_mode == MaskMode::respect_mask;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) {
      if (respect && !feedback->governs(static_cast<int>(i % dims))) continue;
      direction[i] += beta * (noisy[i] - feedback->reference.values[i]);
    }
  }

  Vector next = schedule.alpha[k] * (noisy - schedule.gamma[k] * direction);
  if (schedule.sigma[k] > 0.0) {
    for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += schedule.sigma[k] * rng.normal();
  }
  return next;
}

// Full reverse process from a fresh N(0, I) draw on `rng`.
inline ActionChunk sample_chunk(const MixtureDenoiser& denoiser, std::string_view key, const NoiseSchedule& schedule,
                                int horizon, int dims, const GuidanceConfig& guidance,
                                const AggregatedFeedback* feedback, Rng& rng) {
  Vector a = rng.normal_vector(static_cast<Eigen::Index>(horizon) * dims);
  for (int k = schedule.num_steps - 1; k >= 0; --k) {
    a = guided_reverse_step(denoiser, key, a, k, schedule, guidance, feedback, dims, rng);
  }
  return ActionChunk(horizon, dims, std::move(a));
}

inline ActionChunk sample_unguided(const MixtureDenoiser& denoiser, std::string_view key,
                                   const NoiseSchedule& schedule, int horizon, int dims, Rng& rng) {
  return sample_chunk(denoiser, key, schedule, horizon, dims, GuidanceConfig{0.0, 0}, nullptr, rng);
}

inline std::uint64_t candidate_seed(std::uint64_t stream_seed, int index) {
  return derive_seed(stream_seed, {static_cast<std::uint64_t>(index)});
}

// K independent unguided samples; candidate i uses the stream
// candidate_seed(stream_seed, i), so results do not depend on evaluation order.
inline std::vector<ActionChunk> sample_candidates(const MixtureDenoiser& denoiser, std::string_view key, int count,
                                                  const NoiseSchedule& schedule, int horizon, int dims,
                                                  std::uint64_t stream_seed) {
  if (count < 1) throw Error("sample_candidates: K must be >= 1");
  std::vector<ActionChunk> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(candidate_seed(stream_seed, i));
    out.push_back(sample_unguided(denoiser, key, schedule, horizon, dims, rng));
  }
  return out;
}

}  // namespace eve::diffusion
