#pragma once

#include "eve/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace eve::mmd {

struct MmdConfig {
  // Absent means the median heuristic over the pooled samples.
  std::optional<double> bandwidth;
  double threshold = 0.48;
  int num_samples = 20;
  bool single_intervention = true;
};

// Samples restricted to the overlap window, each flattened time-major.
struct OverlapWindowPair {
  std::vector<Vector> x_samples;
  std::vector<Vector> y_samples;
};

inline double rbf_kernel(const Vector& u, const Vector& v, double bandwidth) {
  if (u.size() != v.size()) throw Error("rbf_kernel: length mismatch");
  if (!(bandwidth > 0.0)) throw Error("rbf_kernel: bandwidth must be positive");
  return std::exp(-(u - v).squaredNorm() / bandwidth);
}

inline double median_heuristic(const std::vector<Vector>& x, const std::vector<Vector>& y) {
  std::vector<const Vector*> pool;
  pool.reserve(x.size() + y.size());
  for (const auto& s : x) pool.push_back(&s);
  for (const auto& s : y) pool.push_back(&s);
  std::vector<double> d2;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) d2.push_back((*pool[i] - *pool[j]).squaredNorm());
  if (d2.empty()) return 1.0;
  const auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double med = *mid;
  if (d2.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d2.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

namespace detail {
// Fixed-order double loop, so results never depend on scheduling.
inline double mean_kernel(const std::vector<Vector>& a, const std::vector<Vector>& b, double bw) {
  double total = 0.0;
  for (const auto& u : a) {
    double row = 0.0;
    for (const auto& v : b) row += rbf_kernel(u, v, bw);
    total += row;
  }
  return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}
}  // namespace detail

inline double empirical_mmd(const OverlapWindowPair& pair, double bandwidth) {
  if (pair.x_samples.empty() || pair.y_samples.empty()) throw Error("empirical_mmd: empty sample set");
  if (pair.x_samples.size() != pair.y_samples.size()) throw Error("empirical_mmd: unequal sample counts");
  const double xx = detail::mean_kernel(pair.x_samples, pair.x_samples, bandwidth);
  const double yy = detail::mean_kernel(pair.y_samples, pair.y_samples, bandwidth);
  const double xy = detail::mean_kernel(pair.x_samples, pair.y_samples, bandwidth);
  // (xx + yy) is symmetric in the arguments; evaluating xy as the mean of both
  // orders makes the estimate exactly symmetric.
  const double yx = detail::mean_kernel(pair.y_samples, pair.x_samples, bandwidth);
  return std::max(0.0, (xx + yy) - (xy + yx));
}

inline double empirical_mmd(const OverlapWindowPair& pair, const MmdConfig& config) {
  const double bw = config.bandwidth ? *config.bandwidth : median_heuristic(pair.x_samples, pair.y_samples);
  return empirical_mmd(pair, bw);
}

// Builds the pair from chunks planned at t (rows [shift, H)) and at t + shift
// (rows [0, H - shift)).
inline OverlapWindowPair overlap_pair(const std::vector<ActionChunk>& previous, const std::vector<ActionChunk>& current,
                                      int shift) {
  if (previous.size() != current.size()) throw Error("overlap_pair: unequal sample counts");
  OverlapWindowPair p;
  for (std::size_t i = 0; i < previous.size(); ++i) {
    const int len = previous[i].horizon - shift;
    if (len <= 0 || current[i].horizon - shift != len) throw Error("overlap_pair: no overlap window");
    p.x_samples.push_back(previous[i].window(shift, len));
    p.y_samples.push_back(current[i].window(0, len));
  }
  return p;
}

inline bool should_intervene(const std::vector<double>& history, const MmdConfig& config, int interventions_so_far) {
  if (history.empty()) return false;
  if (config.single_intervention && interventions_so_far > 0) return false;
  return history.back() >= config.threshold;
}

enum class CalibrationTarget { max_separation };

struct Calibration {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
  // The observed maximum at which balanced accuracy peaks; the returned
  // threshold lies in (next lower observed maximum, this value].
  double winning_cut = 0.0;
};

inline double trace_max(const std::vector<double>& trace) {
  double m = -std::numeric_limits<double>::infinity();
  for (double s : trace) m = std::max(m, s);
  return m;
}

// Balanced accuracy of predicting failure iff max score >= cut.
inline double balanced_accuracy(const std::vector<double>& success_max, const std::vector<double>& failure_max,
                                double cut) {
  std::size_t tn = 0;
  std::size_t tp = 0;
  for (double s : success_max) tn += s < cut;
  for (double f : failure_max) tp += f >= cut;
  return 0.5 * (static_cast<double>(tn) / success_max.size() + static_cast<double>(tp) / failure_max.size());
}

inline Calibration calibrate_threshold(const std::vector<std::vector<double>>& success_logs,
                                       const std::vector<std::vector<double>>& failure_logs,
                                       CalibrationTarget = CalibrationTarget::max_separation) {
  if (success_logs.empty()) throw Error("calibrate_threshold: no success traces");
  if (failure_logs.empty()) throw Error("calibrate_threshold: no failure traces");
  std::vector<double> smax;
  std::vector<double> fmax;
  for (const auto& t : success_logs) smax.push_back(trace_max(t));
  for (const auto& t : failure_logs) fmax.push_back(trace_max(t));

  std::vector<double> cuts = smax;
  cuts.insert(cuts.end(), fmax.begin(), fmax.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  Calibration best{cuts.front(), -1.0, cuts.front()};
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const double acc = balanced_accuracy(smax, fmax, cuts[i]);
    if (acc >= best.balanced_accuracy) {
      best.balanced_accuracy = acc;
      best.winning_cut = cuts[i];
      best_index = i;
    }
  }
  best.threshold = best_index == 0 ? best.winning_cut : 0.5 * (cuts[best_index - 1] + cuts[best_index]);
  return best;
}

}  // namespace eve::mmd
