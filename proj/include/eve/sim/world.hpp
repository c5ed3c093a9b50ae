#pragma once

#include "eve/core/rng.hpp"
#include "eve/core/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eve::sim {

using Vec2 = Eigen::Vector2d;

// Action layout: (vx, vy, grip), each in [-1, 1]; grip > 0 closes.
inline constexpr int kActionDims = 3;
inline constexpr int kGripDim = 2;

struct Obstacle {
  Vec2 center = Vec2::Zero();
  double radius = 0.1;
};

enum class TaskKind { pick, place, latch };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::pick: return "pick";
    case TaskKind::place: return "place";
    case TaskKind::latch: return "latch";
  }
  return "pick";
}

inline TaskKind task_kind_from_string(std::string_view s) {
  if (s == "pick") return TaskKind::pick;
  if (s == "place") return TaskKind::place;
  if (s == "latch") return TaskKind::latch;
  throw Error("unknown task kind '" + std::string(s) + "'");
}

// Displacements applied at reset, after the policy was fit.
struct ShiftSpec {
  Vec2 goal_offset = Vec2::Zero();
  Vec2 object_offset = Vec2::Zero();
  std::vector<Vec2> obstacle_offsets;  // one per obstacle, or empty

  bool empty() const {
    if (!goal_offset.isZero() || !object_offset.isZero()) return false;
    for (const auto& o : obstacle_offsets)
      if (!o.isZero()) return false;
    return true;
  }
};

struct TaskSpec {
  TaskKind kind = TaskKind::pick;
  Vec2 agent_start{0.0, -1.0};
  Vec2 object_start{0.0, -0.5};
  Vec2 goal{0.0, 0.75};
  std::vector<Obstacle> obstacles;
  double success_radius = 0.15;
  double grasp_radius = 0.08;
  int collision_budget = 20;
  int max_steps = 200;
  double spawn_noise_std = 0.1;
  double spawn_noise_clip = 0.2;
  double max_speed = 0.05;
  double world_half_extent = 1.5;
  // Minimum agent clearance from a placed object for the place task's rest condition.
  double rest_clearance = 0.1;
  ShiftSpec shift;

  void validate() const {
    if (!(success_radius > 0.0)) throw Error("TaskSpec: success_radius must be positive");
    if (!(grasp_radius > 0.0)) throw Error("TaskSpec: grasp_radius must be positive");
    if (max_steps < 1) throw Error("TaskSpec: max_steps must be >= 1");
    if (collision_budget < 0) throw Error("TaskSpec: collision_budget must be >= 0");
    if (!(max_speed > 0.0)) throw Error("TaskSpec: max_speed must be positive");
    if (spawn_noise_std < 0.0 || spawn_noise_clip < 0.0) throw Error("TaskSpec: spawn noise must be nonnegative");
    if (!shift.obstacle_offsets.empty() && shift.obstacle_offsets.size() != obstacles.size())
      throw Error("TaskSpec: obstacle_offsets must match the obstacle count");
    for (const auto& o : obstacles)
      if (!(o.radius > 0.0)) throw Error("TaskSpec: obstacle radius must be positive");
  }
};

enum class Event {
  contact,
  grasped,
  dropped,
  at_goal,
  left_goal,
  released_at_goal,
  released_out_goal,
  excessive_collision,
  success
};

inline constexpr std::array<Event, 9> kAllEvents{Event::contact,          Event::grasped,          Event::dropped,
                                                Event::at_goal,          Event::left_goal,        Event::released_at_goal,
                                                Event::released_out_goal, Event::excessive_collision, Event::success};

inline std::string to_string(Event e) {
  switch (e) {
    case Event::contact: return "contact";
    case Event::grasped: return "grasped";
    case Event::dropped: return "dropped";
    case Event::at_goal: return "at_goal";
    case Event::left_goal: return "left_goal";
    case Event::released_at_goal: return "released_at_goal";
    case Event::released_out_goal: return "released_out_goal";
    case Event::excessive_collision: return "excessive_collision";
    case Event::success: return "success";
  }
  return "contact";
}

inline Event event_from_string(std::string_view s) {
  for (Event e : kAllEvents)
    if (to_string(e) == s) return e;
  throw Error("unknown event '" + std::string(s) + "'");
}

struct EventRecord {
  Event event;
  int step;
  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct WorldState {
  Vec2 agent = Vec2::Zero();
  double gripper = -1.0;  // -1 open, +1 closed
  bool held = false;
  Vec2 object = Vec2::Zero();
  Vec2 object_velocity = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  Vec2 object_origin = Vec2::Zero();  // latch track start
  std::vector<Obstacle> obstacles;
  int collisions = 0;
  int step = 0;
  bool contacted = false;
  bool object_in_goal = false;
  bool released = false;
  bool excessive = false;
  bool succeeded = false;

  friend bool operator==(const WorldState& a, const WorldState& b) {
    if (a.obstacles.size() != b.obstacles.size()) return false;
    for (std::size_t i = 0; i < a.obstacles.size(); ++i)
      if (a.obstacles[i].center != b.obstacles[i].center || a.obstacles[i].radius != b.obstacles[i].radius) return false;
    return a.agent == b.agent && a.gripper == b.gripper && a.held == b.held && a.object == b.object &&
           a.object_velocity == b.object_velocity && a.goal == b.goal && a.object_origin == b.object_origin && a.collisions == b.collisions &&
           a.step == b.step && a.contacted == b.contacted && a.object_in_goal == b.object_in_goal &&
           a.released == b.released && a.excessive == b.excessive && a.succeeded == b.succeeded;
  }
};

inline double clipped_noise(Rng& rng, double std, double clip) {
  if (std == 0.0) return 0.0;
  return std::clamp(std * rng.normal(), -clip, clip);
}

inline WorldState reset(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, {stream::kReset}));
  WorldState s;
  s.agent = spec.agent_start + Vec2(clipped_noise(rng, spec.spawn_noise_std, spec.spawn_noise_clip),
                                    clipped_noise(rng, spec.spawn_noise_std, spec.spawn_noise_clip));
  s.object = spec.object_start + spec.shift.object_offset +
             Vec2(clipped_noise(rng, spec.spawn_noise_std, spec.spawn_noise_clip),
                  clipped_noise(rng, spec.spawn_noise_std, spec.spawn_noise_clip));
  s.goal = spec.goal + spec.shift.goal_offset;
  s.obstacles = spec.obstacles;
  for (std::size_t i = 0; i < spec.shift.obstacle_offsets.size(); ++i)
    s.obstacles[i].center += spec.shift.obstacle_offsets[i];
  for (const auto& o : s.obstacles) {
    if ((s.goal - o.center).norm() < o.radius) throw Error("TaskSpec: goal lies inside an obstacle");
  }
  if (spec.kind == TaskKind::place) {
    s.object = s.agent;
    s.held = true;
    s.gripper = 1.0;
    s.contacted = true;
  }
  s.object_origin = s.object;
  s.object_in_goal = (s.object - s.goal).norm() <= spec.success_radius;
  return s;
}

struct StepResult {
  std::vector<Event> events;
  bool action_clamped = false;
};

namespace detail {
// Pushes p out of every obstacle; returns whether any penetration occurred.
inline bool resolve_obstacles(Vec2& p, const Vec2& came_from, const std::vector<Obstacle>& obstacles) {
  bool hit = false;
  for (const auto& o : obstacles) {
    Vec2 d = p - o.center;
    const double n = d.norm();
    if (n >= o.radius) continue;
    hit = true;
    if (n > 1e-12) {
      p = o.center + d * (o.radius / n);
    } else {
      Vec2 back = came_from - o.center;
      if (back.norm() < 1e-12) back = Vec2(1.0, 0.0);
      p = o.center + back.normalized() * o.radius;
    }
  }
  return hit;
}

inline Vec2 project_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}
}  // namespace detail

inline bool success_predicate(const TaskSpec& spec, const WorldState& s) {
  switch (spec.kind) {
    case TaskKind::pick: return s.held && (s.agent - s.goal).norm() <= spec.success_radius;
    case TaskKind::place:
      return s.released && !s.held && s.object_in_goal && s.object_velocity.norm() < 1e-3 &&
             (s.agent - s.object).norm() >= spec.rest_clearance;
    case TaskKind::latch: return (s.object - s.goal).norm() <= spec.success_radius;
  }
  return false;
}

// Advances the world by one control step. Out-of-range actions are clamped
// and flagged in the result.
inline StepResult step(const TaskSpec& spec, WorldState& s, const Vector& action) {
  if (action.size() != kActionDims) throw Error("step: expected " + std::to_string(kActionDims) + " action dims");
  StepResult out;
  std::array<double, kActionDims> a{};
  for (int i = 0; i < kActionDims; ++i) {
    double v = action[i];
    if (!std::isfinite(v)) v = 0.0;
    a[i] = std::clamp(v, -1.0, 1.0);
    if (a[i] != action[i]) out.action_clamped = true;
  }

  const Vec2 before = s.agent;
  Vec2 p = s.agent + spec.max_speed * Vec2(a[0], a[1]);
  p = p.cwiseMax(-spec.world_half_extent).cwiseMin(spec.world_half_extent);
  if (detail::resolve_obstacles(p, before, s.obstacles)) ++s.collisions;
  s.agent = p;
  const Vec2 agent_velocity = s.agent - before;

  const double grip = a[2] > 0.0 ? 1.0 : -1.0;
  const bool closing = s.gripper < 0.0 && grip > 0.0;
  const bool opening = s.gripper > 0.0 && grip < 0.0;
  s.gripper = grip;

  if (s.held) {
    if (spec.kind == TaskKind::latch) {
      s.object = detail::project_on_segment(s.agent, s.object_origin, s.goal);
    } else {
      s.object = s.agent;
    }
  } else if (s.released && spec.kind != TaskKind::latch) {
    const Vec2 from = s.object;
    s.object += s.object_velocity;
    detail::resolve_obstacles(s.object, from, s.obstacles);
    s.object_velocity *= 0.5;
    if (s.object_velocity.norm() < 1e-4) s.object_velocity.setZero();
  }

  if (!s.contacted && (s.agent - s.object).norm() <= spec.grasp_radius) {
    s.contacted = true;
    out.events.push_back(Event::contact);
  }
  if (closing && !s.held && (s.agent - s.object).norm() <= spec.grasp_radius) {
    s.held = true;
    s.released = false;
    s.object_velocity.setZero();
    out.events.push_back(Event::grasped);
  } else if (opening && s.held) {
    s.held = false;
    s.released = true;
    if (spec.kind != TaskKind::latch) s.object_velocity = 0.5 * agent_velocity;
    if ((s.object - s.goal).norm() <= spec.success_radius) {
      out.events.push_back(Event::released_at_goal);
    } else {
      out.events.push_back(spec.kind == TaskKind::place ? Event::released_out_goal : Event::dropped);
    }
  }

  const bool in_goal = (s.object - s.goal).norm() <= spec.success_radius;
  if (spec.kind != TaskKind::pick && in_goal != s.object_in_goal) {
    out.events.push_back(in_goal ? Event::at_goal : Event::left_goal);
  }
  s.object_in_goal = in_goal;

  if (!s.excessive && s.collisions > spec.collision_budget) {
    s.excessive = true;
    out.events.push_back(Event::excessive_collision);
  }
  if (!s.succeeded && success_predicate(spec, s)) {
    s.succeeded = true;
    out.events.push_back(Event::success);
  }
  ++s.step;
  return out;
}

}  // namespace eve::sim
