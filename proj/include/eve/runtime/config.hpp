#pragma once

#include "eve/diffusion/sampler.hpp"
#include "eve/diffusion/schedule.hpp"
#include "eve/flow/flow.hpp"
#include "eve/mmd/mmd.hpp"

#include <string>
#include <string_view>

namespace eve::runtime {

enum class Incorporator { diffusion, flow };

inline std::string to_string(Incorporator i) { return i == Incorporator::diffusion ? "diffusion" : "flow"; }

inline Incorporator incorporator_from_string(std::string_view s) {
  if (s == "diffusion") return Incorporator::diffusion;
  if (s == "flow") return Incorporator::flow;
  throw Error("unknown incorporator '" + std::string(s) + "'");
}

struct PolicyConfig {
  int prediction_horizon = 16;
  int action_horizon = 8;
  int num_candidates = 40;
  Incorporator incorporator = Incorporator::diffusion;
  int diffusion_steps = 20;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::squared_cosine;
  diffusion::GuidanceConfig guidance;
  flow::FlowGuidanceConfig flow_guidance;
  mmd::MmdConfig detector;
  int k_pivot = 5;
  double perturb_std = 0.25;
  int num_frames = 1;  // scenes of history sent to verifiers, current one excluded
  std::string instruction = "pick up the object and carry it to the goal";
  bool parallel_verifiers = true;
  // Ends an episode at its first success; success-once is unaffected, later
  // events (and so some categories) are.
  bool stop_on_success = false;

  void validate() const {
    if (prediction_horizon < 1) throw Error("PolicyConfig: prediction_horizon must be >= 1");
    if (action_horizon < 1 || action_horizon > prediction_horizon)
      throw Error("PolicyConfig: action_horizon must lie in [1, prediction_horizon]");
    if (num_candidates < 1) throw Error("PolicyConfig: num_candidates must be >= 1");
    if (detector.num_samples < 1 || detector.num_samples > num_candidates)
      throw Error("PolicyConfig: mmd num_samples must lie in [1, num_candidates]");
    if (detector.bandwidth && !(*detector.bandwidth > 0.0)) throw Error("PolicyConfig: mmd bandwidth must be positive");
    if (diffusion_steps < 1) throw Error("PolicyConfig: diffusion_steps must be >= 1");
    if (guidance.beta < 0.0) throw Error("PolicyConfig: guidance beta must be nonnegative");
    if (guidance.guided_steps < 0 || guidance.guided_steps > diffusion_steps)
      throw Error("PolicyConfig: guided_steps must lie in [0, diffusion_steps]");
    if (flow_guidance.gamma < 0.0) throw Error("PolicyConfig: flow gamma must be nonnegative");
    if (flow_guidance.num_steps < 1) throw Error("PolicyConfig: flow num_steps must be >= 1");
    if (k_pivot < 1 || k_pivot > num_candidates) throw Error("PolicyConfig: k_pivot must lie in [1, num_candidates]");
    if (perturb_std < 0.0) throw Error("PolicyConfig: perturb_std must be nonnegative");
    if (num_frames < 0) throw Error("PolicyConfig: num_frames must be >= 0");
  }
};

}  // namespace eve::runtime
