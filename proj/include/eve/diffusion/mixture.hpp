#pragma once

#include "eve/core/types.hpp"
#include "eve/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace eve::diffusion {

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Vector variance;  // diagonal
};

// Diagonal-covariance Gaussian mixture over flattened action chunks.
struct GaussianMixture {
  std::vector<GaussianComponent> components;

  Eigen::Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }

  void validate() const {
    if (components.empty()) throw Error("GaussianMixture: no components");
    const Eigen::Index d = dim();
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0)) throw Error("GaussianMixture: component weight must be positive");
      if (c.mean.size() != d || c.variance.size() != d) throw Error("GaussianMixture: inconsistent component dims");
      if (!c.mean.allFinite()) throw Error("GaussianMixture: non-finite mean");
      if (!((c.variance.array() > 0.0).all())) throw Error("GaussianMixture: variances must be positive");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error("GaussianMixture: weights sum to " + std::to_string(total));
  }

  void normalize_weights() {
    double total = 0.0;
    for (const auto& c : components) total += c.weight;
    for (auto& c : components) c.weight /= total;
  }
};

// Responsibilities of each component for a sample drawn from the mixture
// pushed through x = sqrt(a) * x0 + sqrt(1 - a) * eps.
inline std::vector<double> noised_responsibilities(const GaussianMixture& m, const Vector& x, double alpha_bar) {
  const double sa = std::sqrt(alpha_bar);
  const double one_minus = 1.0 - alpha_bar;
  std::vector<double> logw(m.components.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const auto& comp = m.components[c];
    double quad = 0.0;
    double logdet = 0.0;
    double prod = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = alpha_bar * comp.variance[i] + one_minus;
      const double r = x[i] - sa * comp.mean[i];
      quad += r * r / v;
      // Batched logs: 16 factors of at least 1e-8 cannot underflow.
      prod *= v;
      if ((i & 15) == 15) {
        logdet += std::log(prod);
        prod = 1.0;
      }
    }
    logdet += std::log(prod);
    logw[c] = std::log(comp.weight) - 0.5 * (quad + logdet);
    best = std::max(best, logw[c]);
  }
  double total = 0.0;
  for (double& l : logw) {
    l = std::exp(l - best);
    total += l;
  }
  for (double& l : logw) l /= total;
  return logw;
}

inline double noised_log_density(const GaussianMixture& m, const Vector& x, double alpha_bar) {
  const double sa = std::sqrt(alpha_bar);
  const double one_minus = 1.0 - alpha_bar;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(m.components.size());
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    const auto& comp = m.components[c];
    double acc = std::log(comp.weight);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = alpha_bar * comp.variance[i] + one_minus;
      const double r = x[i] - sa * comp.mean[i];
      acc -= 0.5 * (r * r / v + std::log(v) + log2pi);
    }
    terms[c] = acc;
    best = std::max(best, acc);
  }
  double total = 0.0;
  for (double t : terms) total += std::exp(t - best);
  return best + std::log(total);
}

// Posterior mean E[x0 | x] under the noised mixture.
inline Vector posterior_mean(const GaussianMixture& m, const Vector& x, double alpha_bar) {
  const double sa = std::sqrt(alpha_bar);
  const double one_minus = 1.0 - alpha_bar;
  const auto resp = noised_responsibilities(m, x, alpha_bar);
  Vector out = Vector::Zero(x.size());
  for (std::size_t c = 0; c < m.components.size(); ++c) {
    if (resp[c] == 0.0) continue;
    const auto& comp = m.components[c];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = alpha_bar * comp.variance[i] + one_minus;
      out[i] += resp[c] * (comp.mean[i] + sa * comp.variance[i] / v * (x[i] - sa * comp.mean[i]));
    }
  }
  return out;
}

using MixtureTable = std::map<std::string, GaussianMixture, std::less<>>;

// Analytic stand-in for a trained noise-prediction network: the exact
// posterior-mean denoiser of a per-observation Gaussian mixture.
class MixtureDenoiser {
 public:
  MixtureDenoiser() : table_(std::make_shared<MixtureTable>()) {}
  explicit MixtureDenoiser(std::shared_ptr<const MixtureTable> table) : table_(std::move(table)) {
    for (const auto& [key, m] : *table_) m.validate();
  }

  const GaussianMixture& mixture(std::string_view key) const {
    auto it = table_->find(key);
    if (it == table_->end()) throw Error("MixtureDenoiser: unknown observation key '" + std::string(key) + "'");
    return it->second;
  }

  bool contains(std::string_view key) const { return table_->find(key) != table_->end(); }
  const MixtureTable& table() const { return *table_; }
  std::shared_ptr<const MixtureTable> shared_table() const { return table_; }

  Eigen::Index dim() const { return table_->empty() ? 0 : table_->begin()->second.dim(); }

 private:
  std::shared_ptr<const MixtureTable> table_;
};

inline Vector denoise_predict(const MixtureDenoiser& denoiser, std::string_view key, const Vector& noisy, int k,
                              const NoiseSchedule& schedule) {
  if (k < 0 || k >= schedule.num_steps) throw Error("denoise_predict: step index out of range");
  const auto& m = denoiser.mixture(key);
  if (noisy.size() != m.dim()) {
    throw Error("denoise_predict: sample length " + std::to_string(noisy.size()) + " != " + std::to_string(m.dim()));
  }
  const double ab = schedule.alpha_bar[k];
  const Vector x0 = posterior_mean(m, noisy, ab);
  return (noisy - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
}

}  // namespace eve::diffusion
