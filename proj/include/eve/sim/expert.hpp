#pragma once

#include "eve/core/rng.hpp"
#include "eve/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eve::sim {

enum class Phase { approach, carry };

inline char phase_letter(Phase p) { return p == Phase::approach ? 'A' : 'C'; }

struct ExpertConfig {
  double waypoint_margin = 0.12;
  double action_noise = 0.03;
  double arrive_tolerance = 0.03;
  int max_detours = 3;
};

struct Route {
  std::vector<Vec2> waypoints;  // excludes the start, ends at the destination
  std::string path_class;       // one letter per detour: L (counter-clockwise side) or R
};

namespace detail {
inline std::optional<std::size_t> first_blocking(const Vec2& a, const Vec2& b, const std::vector<Obstacle>& obstacles,
                                                 double margin, std::optional<std::size_t> skip) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  std::optional<std::size_t> best;
  double best_t = 2.0;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (skip && *skip == i) continue;
    const auto& o = obstacles[i];
    const double t = len2 > 0.0 ? std::clamp((o.center - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + t * ab - o.center).norm();
    if (d < o.radius + 0.5 * margin && t < best_t) {
      best_t = t;
      best = i;
    }
  }
  return best;
}
}  // namespace detail

// Detours around each blocking obstacle on the side given by `sides`
// (+1 left, -1 right), consumed in encounter order; missing entries are
// drawn from `rng` when given, else default to left.
inline Route plan_route(const Vec2& from, const Vec2& to, const std::vector<Obstacle>& obstacles,
                        const ExpertConfig& config, std::vector<int> sides = {}, Rng* rng = nullptr) {
  Route route;
  std::size_t used = 0;
  using Skip = std::optional<std::size_t>;
  std::function<void(const Vec2&, const Vec2&, int, Skip)> expand = [&](const Vec2& a, const Vec2& b, int depth,
                                                                        Skip skip) {
    auto hit = detail::first_blocking(a, b, obstacles, config.waypoint_margin, skip);
    if (!hit || depth >= config.max_detours) {
      route.waypoints.push_back(b);
      return;
    }
    int side = 1;
    if (used < sides.size()) side = sides[used];
    else if (rng) side = rng->uniform() < 0.5 ? 1 : -1;
    ++used;
    route.path_class += side > 0 ? 'L' : 'R';
    const auto& o = obstacles[*hit];
    Vec2 dir = b - a;
    dir = dir.norm() > 0.0 ? Vec2(dir.normalized()) : Vec2(0.0, 1.0);
    const Vec2 perp(-dir.y(), dir.x());
    const Vec2 wp = o.center + side * perp * (o.radius + config.waypoint_margin);
    expand(a, wp, depth + 1, hit);
    expand(wp, b, depth + 1, hit);
  };
  expand(from, to, 0, std::nullopt);
  return route;
}

struct DemoSegment {
  Phase phase;
  std::string path_class;
  int begin;  // index into Demo::steps
  int end;
  Vector pad;  // action used to pad chunks past the segment end
};

struct DemoStep {
  WorldState state;  // before the action
  Vector action;
};

struct Demo {
  std::vector<DemoStep> steps;
  std::vector<DemoSegment> segments;
  bool success = false;
};

namespace detail {
inline Vector motion_action(const Vec2& from, const Vec2& to, double max_speed, double grip, double noise, Rng& rng) {
  Vec2 d = (to - from) / max_speed;
  if (d.norm() > 1.0) d.normalize();
  Vector a(kActionDims);
  a[0] = std::clamp(d.x() + noise * rng.normal(), -1.0, 1.0);
  a[1] = std::clamp(d.y() + noise * rng.normal(), -1.0, 1.0);
  a[2] = grip;
  return a;
}

inline Vector hold_action(double grip) {
  Vector a = Vector::Zero(kActionDims);
  a[2] = grip;
  return a;
}
}  // namespace detail

// Scripted demonstrator: route to the object, grasp, route to the goal
// (release and back off for place). Detour sides are random per demo,
// which gives the demonstrations one homotopy class per side choice.
inline Demo generate_demo(const TaskSpec& spec, std::uint64_t seed, const ExpertConfig& config = {}) {
  WorldState s = reset(spec, seed);
  Rng rng(derive_seed(seed, {stream::kDemo}));
  Demo demo;
  const double tol = std::min(config.arrive_tolerance, 0.5 * spec.grasp_radius);

  auto push = [&](const Vector& a) {
    demo.steps.push_back({s, a});
    step(spec, s, a);
    return s.step < spec.max_steps;
  };
  auto follow = [&](const Route& route, double grip, bool stop_on_success) {
    for (const Vec2& wp : route.waypoints) {
      const bool last = &wp == &route.waypoints.back();
      while ((s.agent - wp).norm() > (last ? tol : 2.0 * tol)) {
        if (!push(detail::motion_action(s.agent, wp, spec.max_speed, grip, config.action_noise, rng))) return false;
        if (stop_on_success && s.succeeded) return true;
      }
    }
    return true;
  };

  bool ok = true;
  if (spec.kind != TaskKind::place) {
    const int begin = 0;
    const Route r = plan_route(s.agent, s.object, s.obstacles, config, {}, &rng);
    ok = follow(r, -1.0, false);
    if (ok) ok = push(detail::hold_action(1.0));
    demo.segments.push_back({Phase::approach, r.path_class, begin, static_cast<int>(demo.steps.size()),
                             detail::hold_action(1.0)});
  }
  if (ok) {
    const int begin = static_cast<int>(demo.steps.size());
    const Route r = spec.kind == TaskKind::latch ? Route{{s.goal}, ""}
                                                 : plan_route(s.agent, s.goal, s.obstacles, config, {}, &rng);
    ok = follow(r, 1.0, spec.kind != TaskKind::place);
    if (ok && spec.kind == TaskKind::place) {
      ok = push(detail::hold_action(-1.0));
      const Vec2 back = s.agent + Vec2(0.0, -2.0 * spec.rest_clearance);
      for (int i = 0; ok && i < 8 && !s.succeeded; ++i) {
        ok = push(detail::motion_action(s.agent, back, spec.max_speed, -1.0, 0.0, rng));
      }
    }
    const double pad_grip = spec.kind == TaskKind::place ? -1.0 : 1.0;
    demo.segments.push_back({Phase::carry, r.path_class, begin, static_cast<int>(demo.steps.size()),
                             detail::hold_action(pad_grip)});
  }
  demo.success = s.succeeded;
  return demo;
}

}  // namespace eve::sim
