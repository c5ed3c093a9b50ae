#pragma once

#include "eve/cli/config.hpp"

#include <limits>
#include <string>
#include <vector>

namespace eve::cli {

// Pick around a single central obstacle. The base policy splits between the
// left and right detours; the shift moves the goal onto the right detour.
inline ExperimentConfig oracle_shifted_goal() {
  ExperimentConfig c;
  c.name = "oracle-shifted-goal";
  c.task.obstacles = {{sim::Vec2(0.0, 0.05), 0.3}};
  c.task.shift.goal_offset = sim::Vec2(0.42, -0.70);
  c.policy.detector.threshold = 0.8;
  c.verifiers = {{"pivot", VerifierKind::pivot, 0.5, verifiers::PrimitiveSchema::nudge, 1.0},
                 {"primitive", VerifierKind::primitive, 0.5, verifiers::PrimitiveSchema::nudge, 1.0}};
  c.backend = BackendKind::oracle;
  c.seed_base = 100000;
  c.episodes = 500;
  c.output_dir = "runs/oracle-shifted-goal";
  return c;
}

inline ExperimentConfig oracle_shifted_goal_no_steer() {
  auto c = oracle_shifted_goal();
  c.name = "oracle-shifted-goal-no-steer";
  c.policy.detector.threshold = std::numeric_limits<double>::infinity();
  c.output_dir = "runs/oracle-shifted-goal-no-steer";
  return c;
}

inline ExperimentConfig mshab_pick() {
  auto c = oracle_shifted_goal();
  c.name = "mshab-pick";
  c.policy.detector.threshold = 0.7;
  c.policy.guidance.beta = 10.0;
  c.policy.guidance.guided_steps = 8;
  c.policy.num_frames = 1;
  c.policy.perturb_std = 0.25;
  c.policy.k_pivot = 5;
  c.backend = BackendKind::live;
  c.episodes = 100;
  c.output_dir = "runs/mshab-pick";
  return c;
}

inline ExperimentConfig mshab_place() {
  auto c = mshab_pick();
  c.name = "mshab-place";
  c.task.kind = sim::TaskKind::place;
  c.policy.instruction = "carry the held object to the goal and set it down there";
  c.policy.detector.threshold = 0.48;
  c.output_dir = "runs/mshab-place";
  return c;
}

inline ExperimentConfig simpler_move_near() {
  auto c = oracle_shifted_goal();
  c.name = "simpler-move-near";
  c.policy.incorporator = runtime::Incorporator::flow;
  c.policy.flow_guidance.gamma = 40.0;
  c.policy.flow_guidance.num_steps = 10;
  c.policy.flow_guidance.first_guided_step = 8;
  c.policy.detector.threshold = 0.8;
  c.policy.perturb_std = 0.01;
  c.policy.k_pivot = 5;
  c.policy.instruction = "move the object next to the goal marker";
  c.backend = BackendKind::live;
  c.episodes = 100;
  c.output_dir = "runs/simpler-move-near";
  return c;
}

inline ExperimentConfig simpler_close_drawer() {
  auto c = simpler_move_near();
  c.name = "simpler-close-drawer";
  c.task.kind = sim::TaskKind::latch;
  c.policy.instruction = "push the handle along its track until it is closed";
  c.verifiers[0].weight = 0.9;
  c.verifiers[1].weight = 0.1;
  c.output_dir = "runs/simpler-close-drawer";
  return c;
}

struct NamedPreset {
  std::string name;
  ExperimentConfig (*make)();
};

inline const std::vector<NamedPreset>& presets() {
  static const std::vector<NamedPreset> all = {
      {"oracle-shifted-goal", oracle_shifted_goal},   {"oracle-shifted-goal-no-steer", oracle_shifted_goal_no_steer},
      {"mshab-pick", mshab_pick},                     {"mshab-place", mshab_place},
      {"simpler-move-near", simpler_move_near},       {"simpler-close-drawer", simpler_close_drawer},
  };
  return all;
}

inline ExperimentConfig preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.name == name) return p.make();
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace eve::cli
