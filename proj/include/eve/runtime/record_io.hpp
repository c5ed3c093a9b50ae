#pragma once

#include "eve/runtime/episode.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace eve::runtime {

using ordered_json = nlohmann::ordered_json;

namespace detail {
inline ordered_json vec_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline ordered_json pt_json(const sim::Vec2& v) { return ordered_json::array({v.x(), v.y()}); }

inline ordered_json chunk_json(const ActionChunk& c) {
  return {{"horizon", c.horizon}, {"dims", c.dims}, {"values", vec_json(c.values)}};
}

inline ordered_json mask_json(const DimMask& m) {
  ordered_json a = ordered_json::array();
  for (bool b : m) a.push_back(b);
  return a;
}
}  // namespace detail

inline ordered_json to_json(const verifiers::VerifierMessage& m) {
  ordered_json j{{"verifier_id", m.verifier_id}, {"kind", verifiers::to_string(m.kind)}};
  if (!m.choice.empty()) j["choice"] = m.choice;
  j["rationale"] = m.rationale;
  if (m.reference) {
    j["mask"] = detail::mask_json(m.mask);
    j["reference"] = detail::chunk_json(*m.reference);
  }
  return j;
}

inline ordered_json to_json(const RolloutRecord& r) {
  using detail::pt_json;
  ordered_json j;
  j["seed"] = r.seed;
  j["arm"] = r.steered ? "steered" : "unsteered";
  j["incorporator"] = r.incorporator;
  j["category"] = sim::to_string(r.category);
  j["success_once"] = r.success_once();
  j["terminal_goal_distance"] = r.terminal_goal_distance;
  j["ood_replans"] = r.ood_replans;
  ordered_json events = ordered_json::array();
  for (const auto& e : r.events.events) events.push_back({{"step", e.step}, {"event", sim::to_string(e.event)}});
  j["events"] = events;
  ordered_json mmd = ordered_json::array();
  for (double v : r.mmd_trace()) mmd.push_back(v);
  j["mmd"] = mmd;
  ordered_json replans = ordered_json::array();
  for (const auto& p : r.replans) {
    ordered_json rp{{"step", p.step},
                    {"obs_key", p.obs_key},
                    {"in_distribution", p.in_distribution},
                    {"mmd", p.mmd ? ordered_json(*p.mmd) : ordered_json(nullptr)},
                    {"candidate_spread", p.candidate_spread},
                    {"intervened", p.intervened}};
    replans.push_back(rp);
  }
  j["replans"] = replans;
  ordered_json ivs = ordered_json::array();
  for (const auto& iv : r.interventions) {
    ordered_json msgs = ordered_json::array();
    for (const auto& m : iv.messages) msgs.push_back(to_json(m));
    ordered_json one{{"step", iv.step}, {"mmd", iv.mmd}, {"guided", iv.guided}, {"messages", msgs}};
    if (iv.feedback) {
      ordered_json w = ordered_json::array();
      for (double x : iv.feedback->weights_used) w.push_back(x);
      one["feedback"] = {{"mask", detail::mask_json(iv.feedback->mask)},
                         {"weights_used", w},
                         {"reference", detail::chunk_json(iv.feedback->reference)}};
    } else {
      one["feedback"] = nullptr;
    }
    ivs.push_back(one);
  }
  j["interventions"] = ivs;
  ordered_json steps = ordered_json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"agent", pt_json(s.agent)},
                     {"object", pt_json(s.object)},
                     {"gripper", s.gripper},
                     {"held", s.held},
                     {"collisions", s.collisions},
                     {"action", detail::vec_json(s.action)}});
  }
  j["steps"] = steps;
  return j;
}

// The fields calibration needs from a record line.
struct ScoreTrace {
  std::uint64_t seed = 0;
  bool success = false;
  std::string arm;  // empty when the line does not say
  std::vector<double> mmd;
};

inline std::vector<ScoreTrace> read_score_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<ScoreTrace> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoreTrace t;
      t.seed = j.at("seed").get<std::uint64_t>();
      t.success = j.at("success_once").get<bool>();
      t.mmd = j.at("mmd").get<std::vector<double>>();
      if (j.contains("arm")) t.arm = j.at("arm").get<std::string>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace eve::runtime
