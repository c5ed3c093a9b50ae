#include "eve/cli/experiment.hpp"
#include "eve/cli/presets.hpp"
#include "eve/runtime/record_io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <set>

using namespace eve;
using namespace eve::runtime;
using verifiers::RosterEntry;

namespace {

// One fitted policy shared by every test; fitting dominates the setup cost.
const cli::Experiment& experiment() {
  static const cli::Experiment e(cli::oracle_shifted_goal());
  return e;
}

struct Scenario {
  sim::TaskSpec spec = experiment().config().task;
  PolicyConfig config = experiment().config().policy;
  std::vector<RosterEntry> roster = experiment().roster();

  EpisodeContext context() const { return {&spec, &config, &experiment().policy(), &roster}; }
};

std::vector<std::uint64_t> seeds(std::uint64_t base, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(base + i);
  return out;
}

std::shared_ptr<vlm::VlmClient> client_for(std::shared_ptr<vlm::Backend> backend) {
  vlm::ClientConfig cfg;
  cfg.backoff_initial_s = 0.0;
  cfg.max_retries = 1;
  return std::make_shared<vlm::VlmClient>(std::move(backend), cfg);
}

std::vector<RosterEntry> vlm_roster(const std::shared_ptr<vlm::VlmClient>& client, int horizon) {
  return {{std::make_shared<verifiers::PivotVerifier>("pivot", client), 0.5},
          {std::make_shared<verifiers::PrimitiveVerifier>("primitive", client, verifiers::nudge_vocabulary(horizon)), 0.5}};
}

int count_equal(const Scenario& s, int n) {
  int same = 0;
  for (auto seed : seeds(100000, n)) same += same_trace(run_episode(s.context(), seed, false), run_episode(s.context(), seed, true));
  return same;
}

std::set<std::string> keys(const nlohmann::ordered_json& j) {
  std::set<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
  return out;
}

}  // namespace

TEST(Runtime, SteeringChangesSomeEpisodes) {
  Scenario s;
  EXPECT_LT(count_equal(s, 10), 10);
}

TEST(Runtime, ZeroGuidanceLeavesEveryTraceUnchanged) {
  Scenario s;
  s.config.guidance.beta = 0.0;
  EXPECT_EQ(count_equal(s, 10), 10);
  s.config.incorporator = Incorporator::flow;
  s.config.flow_guidance.gamma = 0.0;
  EXPECT_EQ(count_equal(s, 10), 10);
}

TEST(Runtime, NoVerifiersLeavesEveryTraceUnchanged) {
  Scenario s;
  s.roster.clear();
  EXPECT_EQ(count_equal(s, 10), 10);
  s.roster = {{std::make_shared<verifiers::AbstainingVerifier>("a"), 1.0},
              {std::make_shared<verifiers::AbstainingVerifier>("b"), 1.0}};
  EXPECT_EQ(count_equal(s, 10), 10);
  s.roster = experiment().roster();
  for (auto& e : s.roster) e.weight = 0.0;
  EXPECT_EQ(count_equal(s, 10), 10);
}

TEST(Runtime, InfiniteThresholdNeverIntervenes) {
  Scenario s;
  s.config.detector.threshold = std::numeric_limits<double>::infinity();
  for (auto seed : seeds(100000, 10)) {
    const auto u = run_episode(s.context(), seed, false);
    const auto st = run_episode(s.context(), seed, true);
    EXPECT_TRUE(same_trace(u, st));
    EXPECT_TRUE(st.interventions.empty());
  }
}

TEST(Runtime, FailingBackendLeavesEveryTraceUnchanged) {
  Scenario s;
  auto backend = std::make_shared<vlm::FailingBackend>();
  s.roster = vlm_roster(client_for(backend), s.config.prediction_horizon);
  EXPECT_EQ(count_equal(s, 10), 10);
  EXPECT_GT(backend->calls(), 0);
  const auto r = run_episode(s.context(), 100000, true);
  for (const auto& iv : r.interventions) {
    EXPECT_FALSE(iv.guided);
    for (const auto& m : iv.messages) EXPECT_TRUE(m.is_none());
  }
}

TEST(Runtime, GateOnlyFiresAboveThresholdAndAtMostOnce) {
  Scenario s;
  int guided_total = 0;
  for (auto seed : seeds(100000, 30)) {
    const auto r = run_episode(s.context(), seed, true);
    int guided = 0;
    for (const auto& iv : r.interventions) {
      EXPECT_GT(iv.mmd, s.config.detector.threshold);
      guided += iv.guided;
    }
    EXPECT_LE(guided, 1);
    guided_total += guided;
    for (const auto& p : r.replans)
      if (p.intervened) EXPECT_GT(*p.mmd, s.config.detector.threshold);
    EXPECT_FALSE(r.replans.front().mmd.has_value());
    const auto u = run_episode(s.context(), seed, false);
    EXPECT_TRUE(u.interventions.empty());
  }
  EXPECT_GT(guided_total, 10);

  s.config.detector.single_intervention = false;
  int most = 0;
  for (auto seed : seeds(100000, 30)) {
    int guided = 0;
    for (const auto& iv : run_episode(s.context(), seed, true).interventions) guided += iv.guided;
    most = std::max(most, guided);
  }
  EXPECT_GT(most, 1);
}

TEST(Runtime, BothIncorporatorsWriteTheSameRecordSchema) {
  Scenario s;
  const auto d = to_json(run_episode(s.context(), 100003, true));
  s.config.incorporator = Incorporator::flow;
  s.config.flow_guidance.gamma = 40.0;
  const auto f = to_json(run_episode(s.context(), 100003, true));
  EXPECT_EQ(keys(d), keys(f));
  EXPECT_EQ(d["incorporator"], "diffusion");
  EXPECT_EQ(f["incorporator"], "flow");
  ASSERT_FALSE(d["replans"].empty());
  ASSERT_FALSE(f["replans"].empty());
  EXPECT_EQ(keys(d["replans"][0]), keys(f["replans"][0]));
  EXPECT_EQ(keys(d["steps"][0]), keys(f["steps"][0]));
}

TEST(Runtime, PairedRunsKeepSeedOrderAcrossWorkers) {
  Scenario s;
  s.spec.max_steps = 16;
  const auto many = seeds(7000, 500);
  const auto one = run_paired(s.context(), many, 1);
  const auto three = run_paired(s.context(), many, 3);
  ASSERT_EQ(one.size(), 500u);
  ASSERT_EQ(three.size(), 500u);
  for (std::size_t i = 0; i < many.size(); ++i) {
    ASSERT_EQ(one[i].seed, many[i]);
    ASSERT_FALSE(one[i].unsteered.steered);
    ASSERT_TRUE(one[i].steered.steered);
    ASSERT_EQ(to_json(one[i].steered).dump(), to_json(three[i].steered).dump());
    ASSERT_EQ(to_json(one[i].unsteered).dump(), to_json(three[i].unsteered).dump());
  }
}

TEST(Runtime, SteeringBringsTheObjectCloserToTheShiftedGoal) {
  Scenario s;
  std::vector<double> u, st;
  for (const auto& p : run_paired(s.context(), seeds(100000, 100))) {
    u.push_back(p.unsteered.terminal_goal_distance);
    st.push_back(p.steered.terminal_goal_distance);
  }
  std::nth_element(u.begin(), u.begin() + 50, u.end());
  std::nth_element(st.begin(), st.begin() + 50, st.end());
  EXPECT_LT(st[50], u[50]);
}

TEST(Runtime, RecordedExchangesReplayBitForBit) {
  Scenario s;
  const auto log = std::filesystem::temp_directory_path() / ("eve_runtime_replay_" + std::to_string(::getpid()) + ".jsonl");
  std::filesystem::remove(log);
  auto scripted = std::make_shared<vlm::ScriptedBackend>([](const vlm::ChatRequest& req, int) -> std::string {
    const std::string text = req.messages.at(0).content.at(0).text;
    if (text.find("Candidate paths") != std::string::npos) return R"({"reasoning": "r", "chosen_trajectory": "orange"})";
    return R"({"reasoning": "p", "chosen_trajectory": "Nudge Right", "gripper_state": "close"})";
  });
  s.config.parallel_verifiers = false;
  s.roster = vlm_roster(client_for(std::make_shared<vlm::RecordingBackend>(scripted, log.string())), s.config.prediction_horizon);
  std::vector<std::string> live;
  for (auto seed : seeds(100000, 5)) live.push_back(to_json(run_episode(s.context(), seed, true)).dump());
  ASSERT_GT(scripted->calls(), 0);

  s.roster = vlm_roster(client_for(std::make_shared<vlm::ReplayBackend>(log.string())), s.config.prediction_horizon);
  std::size_t i = 0;
  for (auto seed : seeds(100000, 5)) EXPECT_EQ(to_json(run_episode(s.context(), seed, true)).dump(), live[i++]);
  std::filesystem::remove(log);
}

TEST(Runtime, ScoreTracesReadBackFromRecords) {
  Scenario s;
  const auto path = std::filesystem::temp_directory_path() / ("eve_runtime_traces_" + std::to_string(::getpid()) + ".jsonl");
  const auto r = run_episode(s.context(), 100001, true);
  {
    std::ofstream out(path);
    out << to_json(r).dump() << "\n\n" << to_json(run_episode(s.context(), 100001, false)).dump() << "\n";
  }
  const auto traces = read_score_traces(path.string());
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces[0].seed, 100001u);
  EXPECT_EQ(traces[0].arm, "steered");
  EXPECT_EQ(traces[1].arm, "unsteered");
  EXPECT_EQ(traces[0].success, r.success_once());
  EXPECT_EQ(traces[0].mmd, r.mmd_trace());
  {
    std::ofstream out(path);
    out << "{\"seed\": 1}\n";
  }
  EXPECT_THROW(read_score_traces(path.string()), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(read_score_traces(path.string()), Error);
}

TEST(Runtime, ConfigValidationNamesTheField) {
  PolicyConfig c;
  c.action_horizon = 0;
  EXPECT_THROW(c.validate(), Error);
  c = PolicyConfig{};
  c.k_pivot = c.num_candidates + 1;
  EXPECT_THROW(c.validate(), Error);
  c = PolicyConfig{};
  c.guidance.guided_steps = c.diffusion_steps + 1;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(incorporator_from_string("flow"), Incorporator::flow);
  EXPECT_THROW(incorporator_from_string("ode"), Error);
}
