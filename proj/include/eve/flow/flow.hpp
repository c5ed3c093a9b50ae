#pragma once

#include "eve/core/rng.hpp"
#include "eve/core/types.hpp"
#include "eve/diffusion/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eve::flow {

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Vector velocity(const Vector& sample, std::string_view key, double tau) const = 0;
};

// Marginal velocity E[A1 - A0 | A_tau = x] of the straight-line path
// A_tau = (1 - tau) A0 + tau A1 with A0 ~ N(0, I) and A1 drawn from the
// per-observation Gaussian mixture. Shares its table with the denoiser.
class MixtureVelocityField final : public VelocityField {
 public:
  explicit MixtureVelocityField(std::shared_ptr<const diffusion::MixtureTable> table) : table_(std::move(table)) {}

  Vector velocity(const Vector& x, std::string_view key, double tau) const override {
    auto it = table_->find(key);
    if (it == table_->end()) throw Error("MixtureVelocityField: unknown observation key '" + std::string(key) + "'");
    const auto& m = it->second;
    if (x.size() != m.dim()) throw Error("MixtureVelocityField: sample length mismatch");

    const double t = std::clamp(tau, 0.0, 1.0);
    const double u = 1.0 - t;
    std::vector<double> logw(m.components.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m.components.size(); ++c) {
      const auto& comp = m.components[c];
      double acc = std::log(comp.weight);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = t * t * comp.variance[i] + u * u;
        const double r = x[i] - t * comp.mean[i];
        acc -= 0.5 * (r * r / v + std::log(v));
      }
      logw[c] = acc;
      best = std::max(best, acc);
    }
    double total = 0.0;
    for (double& l : logw) {
      l = std::exp(l - best);
      total += l;
    }

    Vector out = Vector::Zero(x.size());
    for (std::size_t c = 0; c < m.components.size(); ++c) {
      const double r = logw[c] / total;
      if (r == 0.0) continue;
      const auto& comp = m.components[c];
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = t * t * comp.variance[i] + u * u;
        const double resid = x[i] - t * comp.mean[i];
        const double clean = comp.mean[i] + t * comp.variance[i] / v * resid;
        const double noise = u / v * resid;
        out[i] += r * (clean - noise);
      }
    }
    return out;
  }

 private:
  std::shared_ptr<const diffusion::MixtureTable> table_;
};

struct FlowGuidanceConfig {
  double gamma = 5.0;
  int num_steps = 10;
  // Guidance applies to Euler steps with index >= first_guided_step.
  int first_guided_step = 0;

  double delta() const { return 1.0 / num_steps; }
};

// Clean-action estimate from the current sample and velocity.
inline Vector estimate_clean(const Vector& sample, const Vector& velocity, double tau) {
  if (tau < 0.0 || tau > 1.0) throw Error("estimate_clean: tau must lie in [0, 1]");
  return sample + (1.0 - tau) * velocity;
}

// v_hat = v - gamma * (1 - tau) * (A1_hat - A_ref)
inline Vector guided_velocity(const Vector& sample, const Vector& velocity, double tau, double gamma,
                              const Vector& a_ref) {
  return velocity - gamma * (1.0 - tau) * (estimate_clean(sample, velocity, tau) - a_ref);
}

// One Euler step of guided flow. The update A + delta * v_hat is evaluated
// in the equivalent blended form
//   (1 - c) A + (delta - c (1 - tau)) v + c A_ref,  c = delta * gamma * (1 - tau)
// which is exact when c = 1 (one step, full guidance).
inline Vector guided_flow_step(const VelocityField& field, std::string_view key, const Vector& sample, double tau,
                               const FlowGuidanceConfig& config, const Vector* a_ref, bool guided_step = true) {
  if (a_ref && a_ref->size() != sample.size()) {
    throw Error("guided_flow_step: reference length " + std::to_string(a_ref->size()) + " != sample length " +
                std::to_string(sample.size()));
  }
  const double delta = config.delta();
  const Vector v = field.velocity(sample, key, tau);
  if (!a_ref || config.gamma == 0.0 || !guided_step) return sample + delta * v;

  const double c = delta * config.gamma * (1.0 - tau);
  return (1.0 - c) * sample + (delta - c * (1.0 - tau)) * v + c * (*a_ref);
}

inline Vector integrate_flat(const VelocityField& field, std::string_view key, const Vector& init,
                             const FlowGuidanceConfig& config, const Vector* a_ref) {
  if (config.num_steps < 1) throw Error("integrate: num_steps must be >= 1");
  if (!init.allFinite()) throw Error("integrate: non-finite initial sample");
  Vector a = init;
  for (int i = 0; i < config.num_steps; ++i) {
    const double tau = static_cast<double>(i) / config.num_steps;
    a = guided_flow_step(field, key, a, tau, config, a_ref, i >= config.first_guided_step);
  }
  return a;
}

inline ActionChunk integrate(const VelocityField& field, std::string_view key, const Vector& init, int horizon,
                             int dims, const FlowGuidanceConfig& config, const AggregatedFeedback* feedback) {
  // Masked-out dimensions of the reference are replaced by the unguided
  // clean estimate at each step, which leaves them unguided.
  if (!feedback) return ActionChunk(horizon, dims, integrate_flat(field, key, init, config, nullptr));
  if (feedback->reference.values.size() != init.size()) throw Error("integrate: feedback shape mismatch");

  Vector a = init;
  for (int i = 0; i < config.num_steps; ++i) {
    const double tau = static_cast<double>(i) / config.num_steps;
    const bool guided = i >= config.first_guided_step;
    bool full_mask = true;
    for (int j = 0; j < dims; ++j) full_mask = full_mask && feedback->governs(j);
    if (full_mask) {
      a = guided_flow_step(field, key, a, tau, config, &feedback->reference.values, guided);
      continue;
    }
    const Vector v = field.velocity(a, key, tau);
    Vector ref = estimate_clean(a, v, tau);
    for (Eigen::Index k = 0; k < ref.size(); ++k) {
      if (feedback->governs(static_cast<int>(k % dims))) ref[k] = feedback->reference.values[k];
    }
    if (!guided || config.gamma == 0.0) {
      a = a + config.delta() * v;
    } else {
      a = a + config.delta() * guided_velocity(a, v, tau, config.gamma, ref);
    }
  }
  return ActionChunk(horizon, dims, std::move(a));
}

inline std::vector<ActionChunk> sample_candidates(const VelocityField& field, std::string_view key, int count,
                                                  int horizon, int dims, const FlowGuidanceConfig& config,
                                                  std::uint64_t stream_seed) {
  if (count < 1) throw Error("sample_candidates: K must be >= 1");
  std::vector<ActionChunk> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(stream_seed, {static_cast<std::uint64_t>(i)}));
    out.push_back(integrate(field, key, rng.normal_vector(static_cast<Eigen::Index>(horizon) * dims), horizon, dims,
                            config, nullptr));
  }
  return out;
}

}  // namespace eve::flow
