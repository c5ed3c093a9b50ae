#include "eve/sim/expert.hpp"
#include "eve/sim/world.hpp"

#include <gtest/gtest.h>

using namespace eve;
using namespace eve::sim;

namespace {

TaskSpec central_obstacle() {
  TaskSpec s;
  s.obstacles = {{Vec2(0.0, 0.05), 0.3}};
  return s;
}

Vector act(double x, double y, double g) { return (Vector(3) << x, y, g).finished(); }

}  // namespace

TEST(World, ResetIsDeterministic) {
  const auto spec = central_obstacle();
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 123456789ull}) EXPECT_TRUE(reset(spec, seed) == reset(spec, seed));
  EXPECT_FALSE(reset(spec, 1) == reset(spec, 2));
}

TEST(World, SpawnNoiseStaysClipped) {
  const auto spec = central_obstacle();
  int at_clip = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto s = reset(spec, seed);
    const Vec2 da = s.agent - spec.agent_start;
    const Vec2 dobj = s.object - spec.object_start;
    ASSERT_LE(da.cwiseAbs().maxCoeff(), 0.2 + 1e-12);
    ASSERT_LE(dobj.cwiseAbs().maxCoeff(), 0.2 + 1e-12);
    at_clip += da.cwiseAbs().maxCoeff() > 0.2 - 1e-12;
  }
  // Two coordinates each beyond 2 std: about 9% of resets touch the clip.
  EXPECT_GT(at_clip, 500);
  EXPECT_LT(at_clip, 1400);
}

TEST(World, ShiftMovesGoalExactly) {
  auto spec = central_obstacle();
  spec.shift.goal_offset = Vec2(0.2, 0.0);
  const auto s = reset(spec, 5);
  EXPECT_EQ(s.goal, spec.goal + Vec2(0.2, 0.0));
  spec.shift.obstacle_offsets = {Vec2(0.1, -0.1)};
  EXPECT_EQ(reset(spec, 5).obstacles[0].center, Vec2(0.1, -0.05));
  spec.shift.goal_offset = Vec2(0.0, -0.7);
  spec.shift.obstacle_offsets.clear();
  EXPECT_THROW(reset(spec, 5), Error);
}

TEST(World, ZeroActionKeepsPosition) {
  const auto spec = central_obstacle();
  auto s = reset(spec, 3);
  const Vec2 p = s.agent;
  for (int i = 0; i < 10; ++i) step(spec, s, act(0, 0, -1));
  EXPECT_EQ(s.agent, p);
  EXPECT_EQ(s.step, 10);
}

TEST(World, DrivingIntoObstacleCountsCollisionsMonotonically) {
  auto spec = central_obstacle();
  spec.spawn_noise_std = 0.0;
  spec.object_start = Vec2(1.0, -1.0);
  auto s = reset(spec, 0);
  int prev = 0;
  int events = 0;
  for (int i = 0; i < 60; ++i) {
    auto r = step(spec, s, act(0, 1, -1));
    EXPECT_GE(s.collisions, prev);
    prev = s.collisions;
    EXPECT_GE((s.agent - spec.obstacles[0].center).norm(), spec.obstacles[0].radius - 1e-12);
    for (auto e : r.events) events += e == Event::excessive_collision;
  }
  EXPECT_GT(s.collisions, spec.collision_budget);
  EXPECT_EQ(events, 1);
}

TEST(World, ReleaseInsideSuccessRadiusEmitsReleasedAtGoal) {
  TaskSpec spec;
  spec.kind = TaskKind::place;
  spec.spawn_noise_std = 0.0;
  spec.agent_start = Vec2(0.0, 0.5);
  spec.goal = Vec2(0.0, 0.5 + 0.9 * spec.success_radius);
  auto s = reset(spec, 0);
  ASSERT_TRUE(s.held);
  auto r = step(spec, s, act(0, 0, -1));
  EXPECT_EQ(r.events, (std::vector<Event>{Event::released_at_goal}));

  spec.goal = Vec2(0.0, 0.5 + 1.1 * spec.success_radius);
  s = reset(spec, 0);
  r = step(spec, s, act(0, 0, -1));
  EXPECT_EQ(r.events, (std::vector<Event>{Event::released_out_goal}));
}

TEST(World, PickSequenceEmitsContactGraspSuccess) {
  TaskSpec spec;
  spec.spawn_noise_std = 0.0;
  spec.agent_start = Vec2(0.0, 0.0);
  spec.object_start = Vec2(0.0, 0.04);
  spec.goal = Vec2(0.0, 0.3);
  auto s = reset(spec, 0);
  std::vector<Event> seen;
  auto run = [&](const Vector& a) {
    for (auto e : step(spec, s, a).events) seen.push_back(e);
  };
  run(act(0, 0, -1));
  run(act(0, 0, 1));
  for (int i = 0; i < 10; ++i) run(act(0, 1, 1));
  EXPECT_EQ(seen, (std::vector<Event>{Event::contact, Event::grasped, Event::success}));
  EXPECT_TRUE(s.succeeded);
  for (int i = 0; i < 10; ++i) run(act(0, -1, 1));
  run(act(0, 0, -1));
  EXPECT_EQ(seen.back(), Event::dropped);
}

TEST(World, OutOfRangeActionsAreClampedAndFlagged) {
  const auto spec = central_obstacle();
  auto a = reset(spec, 1);
  auto b = a;
  const auto r = step(spec, a, act(5.0, -3.0, 0.5));
  EXPECT_TRUE(r.action_clamped);
  EXPECT_FALSE(step(spec, b, act(1.0, -1.0, 0.5)).action_clamped);
  EXPECT_TRUE(a == b);
  EXPECT_THROW(step(spec, a, Vector::Zero(2)), Error);
}

TEST(World, LatchFollowsTrack) {
  TaskSpec spec;
  spec.kind = TaskKind::latch;
  spec.spawn_noise_std = 0.0;
  spec.agent_start = Vec2(0.0, -0.5);
  spec.object_start = Vec2(0.0, -0.5);
  spec.goal = Vec2(0.5, -0.5);
  auto s = reset(spec, 0);
  step(spec, s, act(0, 0, 1));
  ASSERT_TRUE(s.held);
  for (int i = 0; i < 5; ++i) step(spec, s, act(1, 1, 1));
  EXPECT_NEAR(s.object.y(), -0.5, 1e-15);
  EXPECT_GT(s.object.x(), 0.0);
}

TEST(World, IdenticalActionSequencesGiveIdenticalTraces) {
  const auto spec = central_obstacle();
  Rng actions(4);
  std::vector<Vector> seq;
  for (int i = 0; i < 200; ++i) seq.push_back(act(actions.normal(), actions.normal(), actions.normal()));
  auto run = [&] {
    auto s = reset(spec, 17);
    std::vector<Event> ev;
    for (const auto& a : seq)
      for (auto e : step(spec, s, a).events) ev.push_back(e);
    return std::make_pair(s, ev);
  };
  const auto x = run();
  const auto y = run();
  EXPECT_TRUE(x.first == y.first);
  EXPECT_EQ(x.second, y.second);
}

TEST(World, TaskSpecValidation) {
  TaskSpec s;
  s.success_radius = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = TaskSpec{};
  s.obstacles = {{Vec2(0, 0), 0.3}};
  s.shift.obstacle_offsets = {Vec2(0, 0), Vec2(0, 0)};
  EXPECT_THROW(s.validate(), Error);
  EXPECT_EQ(task_kind_from_string("latch"), TaskKind::latch);
  EXPECT_THROW(task_kind_from_string("fly"), Error);
  for (auto e : kAllEvents) EXPECT_EQ(event_from_string(to_string(e)), e);
}

TEST(Expert, RoutesAroundObstacleOnEitherSide) {
  const std::vector<Obstacle> obs{{Vec2(0.0, 0.0), 0.3}};
  ExpertConfig cfg;
  const auto left = plan_route(Vec2(0, -1), Vec2(0, 1), obs, cfg, {1});
  const auto right = plan_route(Vec2(0, -1), Vec2(0, 1), obs, cfg, {-1});
  EXPECT_EQ(left.path_class, "L");
  EXPECT_EQ(right.path_class, "R");
  ASSERT_EQ(left.waypoints.size(), 2u);
  EXPECT_LT(left.waypoints[0].x(), 0.0);
  EXPECT_GT(right.waypoints[0].x(), 0.0);
  EXPECT_EQ(left.waypoints.back(), Vec2(0, 1));
  const auto clear = plan_route(Vec2(1, -1), Vec2(1, 1), obs, cfg);
  EXPECT_EQ(clear.path_class, "");
  EXPECT_EQ(clear.waypoints.size(), 1u);
}

TEST(Expert, DemosSucceedWithoutExcessiveCollisions) {
  const auto spec = central_obstacle();
  int left = 0, right = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto d = generate_demo(spec, seed);
    EXPECT_TRUE(d.success) << seed;
    ASSERT_GE(d.segments.size(), 2u);
    EXPECT_EQ(d.segments.front().phase, Phase::approach);
    EXPECT_EQ(d.segments.back().phase, Phase::carry);
    const auto& cls = d.segments.back().path_class;
    left += cls == "L";
    right += cls == "R";
    auto s = reset(spec, seed);
    for (const auto& st : d.steps) step(spec, s, st.action);
    EXPECT_TRUE(s.succeeded);
    EXPECT_LE(s.collisions, spec.collision_budget);
  }
  EXPECT_GT(left, 15);
  EXPECT_GT(right, 15);
}
