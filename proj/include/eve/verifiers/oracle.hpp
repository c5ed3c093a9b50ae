#pragma once

#include "eve/sim/world.hpp"
#include "eve/verifiers/message.hpp"
#include "eve/verifiers/primitives.hpp"

#include <limits>
#include <string>

namespace eve::verifiers {

struct WorldTruth {
  const sim::TaskSpec* spec = nullptr;
  const sim::WorldState* state = nullptr;
};

enum class OracleMode { pivot, primitive };

struct RolloutOutcome {
  double terminal_distance = 0.0;
  int new_collisions = 0;
};

// The point the world truth says the agent should head for next.
inline Vec2 oracle_target(const sim::WorldState& s) { return s.held ? s.goal : s.object; }

// Executes a chunk on a private copy of the world.
inline RolloutOutcome simulate_chunk(const sim::TaskSpec& spec, const sim::WorldState& state, const ActionChunk& chunk) {
  sim::WorldState copy = state;
  const Vec2 target = oracle_target(state);
  for (int t = 0; t < chunk.horizon; ++t) sim::step(spec, copy, chunk.row(t));
  return {(copy.agent - target).norm(), copy.collisions - state.collisions};
}

// Fills the dims a primitive leaves to the policy with "keep doing what you
// are doing": zero motion, current gripper.
inline ActionChunk complete_primitive(const Primitive& p, const sim::WorldState& s) {
  ActionChunk c = p.chunk;
  for (int j = 0; j < c.dims; ++j) {
    if (p.mask[j]) continue;
    for (int t = 0; t < c.horizon; ++t) c.at(t, j) = j == sim::kGripDim ? s.gripper : 0.0;
  }
  return c;
}

// Deterministic test double with access to the true world. Pivot mode picks
// the collision-free candidate ending closest to the target; primitive mode
// picks the collision-free primitive that reduces the distance most. Either
// returns none when nothing gets closer.
inline VerifierMessage oracle_verify(const VerifierRequest& request, const WorldTruth& truth, OracleMode mode,
                                     const PrimitiveVocabulary* vocab = nullptr, const std::string& id = "oracle") {
  if (!truth.spec || !truth.state) throw Error("oracle_verify: world truth unavailable");
  const auto& s = *truth.state;
  const double now = (s.agent - oracle_target(s)).norm();
  constexpr double kMinGain = 1e-9;

  if (mode == OracleMode::pivot) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < request.candidates.size(); ++i) {
      const auto out = simulate_chunk(*truth.spec, s, request.candidates[i].chunk);
      if (out.new_collisions > 0 || out.terminal_distance > now - kMinGain) continue;
      if (out.terminal_distance < best_d) {
        best_d = out.terminal_distance;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return VerifierMessage::none(id, "no candidate gets closer to the target");
    const auto& c = request.candidates[best];
    VerifierMessage m;
    m.kind = MessageKind::trajectory_select;
    m.reference = c.chunk;
    m.mask.assign(c.chunk.dims, true);
    m.verifier_id = id;
    m.choice = c.id;
    m.rationale = "candidate " + c.id + " ends " + std::to_string(best_d) + " from the target";
    return m;
  }

  if (!vocab || vocab->empty()) throw Error("oracle_verify: primitive mode needs a vocabulary");
  const Primitive* best = nullptr;
  double best_gain = kMinGain;
  for (const auto& p : vocab->items()) {
    const auto out = simulate_chunk(*truth.spec, s, complete_primitive(p, s));
    const double gain = now - out.terminal_distance;
    if (out.new_collisions > 0 || gain <= best_gain) continue;
    best_gain = gain;
    best = &p;
  }
  if (!best) return VerifierMessage::none(id, "no primitive reduces the distance to the target");
  VerifierMessage m;
  m.kind = MessageKind::primitive_select;
  m.reference = best->chunk;
  m.mask = best->mask;
  m.verifier_id = id;
  m.choice = best->name;
  m.rationale = best->name + " reduces the distance by " + std::to_string(best_gain);
  return m;
}

}  // namespace eve::verifiers
