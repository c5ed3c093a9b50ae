#pragma once

#include "eve/core/types.hpp"
#include "eve/sim/world.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eve::verifiers {

using json = nlohmann::json;
using sim::Vec2;

enum class MessageKind { trajectory_select, primitive_select, none };

inline std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::trajectory_select: return "trajectory_select";
    case MessageKind::primitive_select: return "primitive_select";
    case MessageKind::none: return "none";
  }
  return "none";
}

inline MessageKind message_kind_from_string(std::string_view s) {
  if (s == "trajectory_select") return MessageKind::trajectory_select;
  if (s == "primitive_select") return MessageKind::primitive_select;
  if (s == "none") return MessageKind::none;
  throw Error("unknown message kind '" + std::string(s) + "'");
}

struct VerifierMessage {
  MessageKind kind = MessageKind::none;
  std::optional<ActionChunk> reference;
  DimMask mask;
  std::string rationale;
  std::string verifier_id;
  std::string choice;  // selected label or primitive name, if any

  static VerifierMessage none(std::string id, std::string why) {
    VerifierMessage m;
    m.verifier_id = std::move(id);
    m.rationale = std::move(why);
    return m;
  }

  bool is_none() const { return kind == MessageKind::none; }

  void validate(int horizon, int dims) const {
    if (is_none()) {
      if (reference) throw Error("VerifierMessage: kind none must not carry a reference");
      return;
    }
    if (!reference) throw Error("VerifierMessage: missing reference for " + to_string(kind));
    if (reference->horizon != horizon || reference->dims != dims)
      throw Error("VerifierMessage: reference shape does not match the policy");
    if (!reference->finite()) throw Error("VerifierMessage: non-finite reference");
    if (static_cast<int>(mask.size()) != dims) throw Error("VerifierMessage: mask length does not match dims");
  }
};

struct SceneDescription {
  Vec2 agent = Vec2::Zero();
  bool gripper_closed = false;
  bool holding = false;
  Vec2 object = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  std::vector<sim::Obstacle> obstacles;
  int step = 0;

  static SceneDescription from_world(const sim::WorldState& s) {
    return {s.agent, s.gripper > 0.0, s.held, s.object, s.goal, s.obstacles, s.step};
  }

  json to_json() const {
    auto pt = [](const Vec2& v) { return json::array({v.x(), v.y()}); };
    json obs = json::array();
    for (const auto& o : obstacles) obs.push_back({{"center", pt(o.center)}, {"radius", o.radius}});
    return {{"step", step},
            {"agent", pt(agent)},
            {"gripper", gripper_closed ? "closed" : "open"},
            {"holding_object", holding},
            {"object", pt(object)},
            {"goal", pt(goal)},
            {"obstacles", obs}};
  }
};

struct CandidateView {
  std::string id;  // display label, e.g. "red"
  int source_index = -1;
  ActionChunk chunk;
  std::vector<Vec2> rendered_path;
};

struct VerifierRequest {
  std::string instruction;
  SceneDescription scene;
  std::optional<std::string> image_data_url;
  std::vector<CandidateView> candidates;  // empty for generator-agnostic verifiers
  std::vector<SceneDescription> frame_history;
  int horizon = 0;
  int dims = 0;

  bool generator_agnostic() const { return candidates.empty(); }

  VerifierRequest without_candidates() const {
    VerifierRequest r = *this;
    r.candidates.clear();
    return r;
  }
};

}  // namespace eve::verifiers
