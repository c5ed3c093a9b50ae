#pragma once

#include "eve/core/rng.hpp"
#include "eve/diffusion/sampler.hpp"
#include "eve/flow/flow.hpp"
#include "eve/mmd/mmd.hpp"
#include "eve/runtime/config.hpp"
#include "eve/sim/categorize.hpp"
#include "eve/sim/policy.hpp"
#include "eve/sim/world.hpp"
#include "eve/verifiers/verifier.hpp"

#include <algorithm>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <vector>

namespace eve::runtime {

struct StepLog {
  int step = 0;
  sim::Vec2 agent = sim::Vec2::Zero();
  sim::Vec2 object = sim::Vec2::Zero();
  double gripper = -1.0;
  bool held = false;
  int collisions = 0;
  Vector action;  // executed action
  bool action_clamped = false;

  friend bool operator==(const StepLog&, const StepLog&) = default;
};

struct ReplanLog {
  int step = 0;
  std::string obs_key;
  bool in_distribution = true;
  std::optional<double> mmd;
  double candidate_spread = 0.0;  // mean per-element std over the K candidates
  bool intervened = false;

  friend bool operator==(const ReplanLog&, const ReplanLog&) = default;
};

struct InterventionRecord {
  int step = 0;
  double mmd = 0.0;
  std::vector<verifiers::VerifierMessage> messages;
  std::optional<AggregatedFeedback> feedback;
  bool guided = false;
};

struct RolloutRecord {
  std::uint64_t seed = 0;
  bool steered = false;
  std::string incorporator;
  std::vector<StepLog> steps;
  std::vector<ReplanLog> replans;
  std::vector<InterventionRecord> interventions;
  sim::EventTrace events;
  sim::Category category = sim::Category::cant_reach;
  double terminal_goal_distance = 0.0;
  int ood_replans = 0;

  bool success_once() const {
    for (const auto& e : events.events)
      if (e.event == sim::Event::success) return true;
    return false;
  }

  std::vector<double> mmd_trace() const {
    std::vector<double> out;
    for (const auto& r : replans)
      if (r.mmd) out.push_back(*r.mmd);
    return out;
  }
};

// Same executed trajectory: steps, events, gate inputs and outcome.
// Intervention records and the steered flag are ignored.
inline bool same_trace(const RolloutRecord& a, const RolloutRecord& b) {
  if (a.replans.size() != b.replans.size()) return false;
  for (std::size_t i = 0; i < a.replans.size(); ++i) {
    const auto& x = a.replans[i];
    const auto& y = b.replans[i];
    if (x.step != y.step || x.obs_key != y.obs_key || x.mmd != y.mmd || x.candidate_spread != y.candidate_spread)
      return false;
  }
  return a.seed == b.seed && a.steps == b.steps && a.events.events == b.events.events && a.category == b.category &&
         a.terminal_goal_distance == b.terminal_goal_distance;
}

struct EpisodeContext {
  const sim::TaskSpec* spec = nullptr;
  const PolicyConfig* config = nullptr;
  const sim::BasePolicy* policy = nullptr;
  const std::vector<verifiers::RosterEntry>* roster = nullptr;
};

namespace detail {
inline double candidate_spread(const std::vector<ActionChunk>& cands) {
  if (cands.size() < 2) return 0.0;
  const Eigen::Index n = cands.front().values.size();
  Vector mean = Vector::Zero(n);
  for (const auto& c : cands) mean += c.values;
  mean /= static_cast<double>(cands.size());
  Vector var = Vector::Zero(n);
  for (const auto& c : cands) var += (c.values - mean).cwiseAbs2();
  var /= static_cast<double>(cands.size());
  return var.cwiseSqrt().mean();
}
}  // namespace detail

class Planner {
 public:
  Planner(const PolicyConfig& config, const sim::BasePolicy& policy)
      : config_(config),
        policy_(policy),
        schedule_(diffusion::build_schedule(config.diffusion_steps, config.schedule)) {
    if (policy.horizon() != config.prediction_horizon)
      throw Error("Planner: policy horizon " + std::to_string(policy.horizon()) + " != prediction_horizon " +
                  std::to_string(config.prediction_horizon));
  }

  std::vector<ActionChunk> candidates(const std::string& key, std::uint64_t stream) const {
    const int h = config_.prediction_horizon;
    const int d = policy_.dims();
    if (config_.incorporator == Incorporator::diffusion)
      return diffusion::sample_candidates(policy_.denoiser(), key, config_.num_candidates, schedule_, h, d, stream);
    return flow::sample_candidates(policy_.field(), key, config_.num_candidates, h, d, config_.flow_guidance, stream);
  }

  // Re-runs candidate 0's sampling stream with guidance toward the feedback.
  ActionChunk guided(const std::string& key, std::uint64_t stream, const AggregatedFeedback& feedback) const {
    const int h = config_.prediction_horizon;
    const int d = policy_.dims();
    Rng rng(diffusion::candidate_seed(stream, 0));
    if (config_.incorporator == Incorporator::diffusion)
      return diffusion::sample_chunk(policy_.denoiser(), key, schedule_, h, d, config_.guidance, &feedback, rng);
    return flow::integrate(policy_.field(), key, rng.normal_vector(static_cast<Eigen::Index>(h) * d), h, d,
                           config_.flow_guidance, &feedback);
  }

 private:
  const PolicyConfig& config_;
  const sim::BasePolicy& policy_;
  diffusion::NoiseSchedule schedule_;
};

inline std::vector<verifiers::VerifierMessage> query_roster(const std::vector<verifiers::RosterEntry>& roster,
                                                            const verifiers::VerifierRequest& with_candidates,
                                                            const verifiers::WorldTruth& truth, bool parallel) {
  const auto bare = with_candidates.without_candidates();
  auto call = [&](const verifiers::RosterEntry& e) {
    try {
      return e.verifier->verify(e.verifier->wants_candidates() ? with_candidates : bare, truth);
    } catch (const std::exception& ex) {
      return verifiers::VerifierMessage::none(e.verifier->id(), std::string("verifier failed: ") + ex.what());
    }
  };
  std::vector<verifiers::VerifierMessage> out;
  if (!parallel || roster.size() < 2) {
    for (const auto& e : roster) out.push_back(call(e));
    return out;
  }
  std::vector<std::future<verifiers::VerifierMessage>> futures;
  for (const auto& e : roster) futures.push_back(std::async(std::launch::async, call, std::cref(e)));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

// One receding-horizon rollout. With steer = false the gate is evaluated
// and logged but never acted on.
inline RolloutRecord run_episode(const EpisodeContext& ctx, std::uint64_t seed, bool steer) {
  const auto& spec = *ctx.spec;
  const auto& cfg = *ctx.config;
  const auto& policy = *ctx.policy;
  cfg.validate();
  const Planner planner(cfg, policy);
  // Zero-weight verifiers could never move the fused reference, so they are not consulted.
  std::vector<verifiers::RosterEntry> roster;
  if (ctx.roster)
    for (const auto& e : *ctx.roster)
      if (e.weight > 0.0) roster.push_back(e);
  const bool can_steer = steer && !roster.empty();

  RolloutRecord rec;
  rec.seed = seed;
  rec.steered = steer;
  rec.incorporator = to_string(cfg.incorporator);
  sim::WorldState world = sim::reset(spec, seed);
  std::vector<ActionChunk> previous;
  std::vector<double> history;
  std::vector<verifiers::SceneDescription> frames;
  int interventions = 0;
  const int m = cfg.detector.num_samples;

  for (std::uint64_t r = 0; world.step < spec.max_steps; ++r) {
    const auto lookup = policy.lookup(world);
    const std::uint64_t stream = derive_seed(seed, {stream::kSampling, r});
    auto cands = planner.candidates(lookup.key, stream);
    std::vector<ActionChunk> current(cands.begin(), cands.begin() + m);

    ReplanLog log{world.step, lookup.key, lookup.in_distribution, std::nullopt, detail::candidate_spread(cands), false};
    rec.ood_replans += lookup.in_distribution ? 0 : 1;
    if (!previous.empty()) {
      log.mmd = mmd::empirical_mmd(mmd::overlap_pair(previous, current, cfg.action_horizon), cfg.detector);
      history.push_back(*log.mmd);
    }
    previous = std::move(current);

    ActionChunk chunk = cands.front();
    if (can_steer && log.mmd && mmd::should_intervene(history, cfg.detector, interventions)) {
      Rng display(derive_seed(seed, {stream::kPivotDisplay, r}));
      verifiers::VerifierRequest req;
      req.instruction = cfg.instruction;
      req.scene = verifiers::SceneDescription::from_world(world);
      req.frame_history = frames;
      req.horizon = cfg.prediction_horizon;
      req.dims = policy.dims();
      req.candidates =
          verifiers::pivot_select_diverse(cands, cfg.k_pivot, cfg.perturb_std, display, {world.agent, spec.max_speed});
      const verifiers::WorldTruth truth{&spec, &world};

      InterventionRecord iv;
      iv.step = world.step;
      iv.mmd = *log.mmd;
      iv.messages = query_roster(roster, req, truth, cfg.parallel_verifiers);
      std::vector<double> weights;
      for (const auto& e : roster) weights.push_back(e.weight);
      iv.feedback = verifiers::aggregate(iv.messages, weights);
      if (iv.feedback) {
        chunk = planner.guided(lookup.key, stream, *iv.feedback);
        iv.guided = true;
        ++interventions;
        log.intervened = true;
      }
      rec.interventions.push_back(std::move(iv));
    }
    rec.replans.push_back(log);

    if (cfg.num_frames > 0) {
      frames.push_back(verifiers::SceneDescription::from_world(world));
      if (static_cast<int>(frames.size()) > cfg.num_frames) frames.erase(frames.begin());
    }

    for (int t = 0; t < cfg.action_horizon && world.step < spec.max_steps; ++t) {
      const Vector a = chunk.row(t);
      const auto res = sim::step(spec, world, a);
      for (sim::Event e : res.events) rec.events.append(e, world.step);
      rec.steps.push_back({world.step, world.agent, world.object, world.gripper, world.held, world.collisions, a,
                           res.action_clamped});
    }
    if (cfg.stop_on_success && world.succeeded) break;
  }
  rec.category = sim::categorize(rec.events);
  rec.terminal_goal_distance = (world.object - world.goal).norm();
  return rec;
}

struct PairedRecord {
  std::uint64_t seed = 0;
  RolloutRecord unsteered;
  RolloutRecord steered;
};

// Back-to-back unsteered and steered episodes per seed with identical rng
// derivation. Episodes are distributed over `workers` threads; output order
// follows `seeds`.
inline std::vector<PairedRecord> run_paired(const EpisodeContext& ctx, const std::vector<std::uint64_t>& seeds,
                                            int workers = 1) {
  std::vector<PairedRecord> out(seeds.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < seeds.size(); i += stride) {
      out[i].seed = seeds[i];
      out[i].unsteered = run_episode(ctx, seeds[i], false);
      out[i].steered = run_episode(ctx, seeds[i], true);
    }
  };
  if (workers <= 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, work, w, workers));
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace eve::runtime
