#pragma once

#include "eve/core/types.hpp"
#include "eve/verifiers/message.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

namespace eve::verifiers {

// Weighted per-dimension fusion of verifier references. Messages of kind
// none drop out; on each action dim only the contributors whose mask covers
// it are averaged, with their weights renormalized. Dims no contributor
// governs carry the plain weighted mean of all references so the chunk stays
// complete, but stay masked out. Returns nullopt when every message is none.
inline std::optional<AggregatedFeedback> aggregate(const std::vector<VerifierMessage>& messages,
                                                   const std::vector<double>& weights) {
  if (messages.size() != weights.size()) throw Error("aggregate: weights length does not match messages");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("aggregate: weights must be finite and nonnegative");

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < messages.size(); ++i)
    if (!messages[i].is_none()) live.push_back(i);
  if (live.empty()) return std::nullopt;

  const ActionChunk& first = *messages[live.front()].reference;
  const int h = first.horizon;
  const int d = first.dims;
  for (std::size_t i : live) messages[i].validate(h, d);

  // Canonical summation order, so the result does not depend on input order.
  std::sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = messages[a];
    const auto& mb = messages[b];
    if (ma.verifier_id != mb.verifier_id) return ma.verifier_id < mb.verifier_id;
    if (weights[a] != weights[b]) return weights[a] < weights[b];
    const Vector& va = ma.reference->values;
    const Vector& vb = mb.reference->values;
    if (ma.mask != mb.mask) return ma.mask < mb.mask;
    return std::lexicographical_compare(va.data(), va.data() + va.size(), vb.data(), vb.data() + vb.size());
  });

  double total = 0.0;
  for (std::size_t i : live) total += weights[i];
  if (total == 0.0) throw Error("aggregate: all contributing verifiers have zero weight");

  AggregatedFeedback out;
  out.reference = ActionChunk(h, d);
  out.mask.assign(d, false);
  out.weights_used.assign(messages.size(), 0.0);
  for (std::size_t i : live) out.weights_used[i] = weights[i] / total;

  for (int j = 0; j < d; ++j) {
    double covered = 0.0;
    for (std::size_t i : live)
      if (messages[i].mask[j]) covered += weights[i];
    const bool governed = covered > 0.0;
    out.mask[j] = governed;
    const double norm = governed ? covered : total;
    for (int t = 0; t < h; ++t) {
      double acc = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i : live) {
        if (governed && !messages[i].mask[j]) continue;
        const double v = messages[i].reference->at(t, j);
        acc += (weights[i] / norm) * v;
        if (weights[i] > 0.0) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      out.reference.at(t, j) = std::clamp(acc, lo, hi);
    }
  }
  return out;
}

}  // namespace eve::verifiers
