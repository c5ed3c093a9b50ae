#pragma once

#include "eve/core/types.hpp"
#include "eve/sim/world.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eve::verifiers {

struct Primitive {
  std::string name;
  ActionChunk chunk;
  DimMask mask;
};

class PrimitiveVocabulary {
 public:
  void add(Primitive p) {
    if (index_.count(p.name)) throw Error("PrimitiveVocabulary: duplicate primitive '" + p.name + "'");
    if (!p.chunk.finite()) throw Error("PrimitiveVocabulary: non-finite template for '" + p.name + "'");
    if (!items_.empty() && !p.chunk.same_shape(items_.front().chunk))
      throw Error("PrimitiveVocabulary: template shape mismatch for '" + p.name + "'");
    if (static_cast<int>(p.mask.size()) != p.chunk.dims) throw Error("PrimitiveVocabulary: mask length mismatch");
    index_[p.name] = items_.size();
    items_.push_back(std::move(p));
  }

  const Primitive* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  const std::vector<Primitive>& items() const { return items_; }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<Primitive> items_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {
inline Primitive constant_primitive(std::string name, int horizon, std::vector<std::optional<double>> values) {
  ActionChunk c(horizon, static_cast<int>(values.size()));
  DimMask mask(values.size(), false);
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!values[j]) continue;
    mask[j] = true;
    for (int t = 0; t < horizon; ++t) c.at(t, static_cast<int>(j)) = *values[j];
  }
  return {std::move(name), std::move(c), std::move(mask)};
}
}  // namespace detail

// Planar nudges translate at `magnitude` (normalized units) for the whole
// horizon and govern only the translation dims; gripper primitives govern
// only the gripper dim.
inline PrimitiveVocabulary nudge_vocabulary(int horizon, double magnitude = 1.0) {
  PrimitiveVocabulary v;
  v.add(detail::constant_primitive("Nudge Left", horizon, {-magnitude, 0.0, std::nullopt}));
  v.add(detail::constant_primitive("Nudge Right", horizon, {magnitude, 0.0, std::nullopt}));
  v.add(detail::constant_primitive("Nudge Forward", horizon, {0.0, magnitude, std::nullopt}));
  v.add(detail::constant_primitive("Retreat", horizon, {0.0, -magnitude, std::nullopt}));
  v.add(detail::constant_primitive("Gripper Open", horizon, {std::nullopt, std::nullopt, -1.0}));
  v.add(detail::constant_primitive("Gripper Close", horizon, {std::nullopt, std::nullopt, 1.0}));
  return v;
}

// Base-motion command in the move/rotate/grip schema; null fields leave the
// corresponding dimension to the policy.
struct BaseMotion {
  std::optional<double> move;
  std::optional<double> rotate;
  std::optional<double> grip;

  bool all_null() const { return !move && !rotate && !grip; }
};

// In the plane, move drives +y (forward), rotate 1 (counter-clockwise)
// turns toward -x, and grip -1 keeps holding (closed) while 1 releases.
inline Primitive base_motion_primitive(const BaseMotion& m, int horizon, double magnitude = 1.0) {
  std::optional<double> vx;
  std::optional<double> vy;
  std::optional<double> g;
  if (m.rotate) vx = -magnitude * std::clamp(*m.rotate, -1.0, 1.0);
  if (m.move) vy = magnitude * std::clamp(*m.move, -1.0, 1.0);
  if (m.grip) g = *m.grip > 0.0 ? -1.0 : 1.0;
  return detail::constant_primitive("base_motion", horizon, {vx, vy, g});
}

}  // namespace eve::verifiers
