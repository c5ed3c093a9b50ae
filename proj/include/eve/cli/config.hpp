#pragma once

#include "eve/runtime/config.hpp"
#include "eve/sim/expert.hpp"
#include "eve/sim/policy.hpp"
#include "eve/sim/world.hpp"
#include "eve/verifiers/primitive_steer.hpp"
#include "eve/vlm/client.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace eve::cli {

using ojson = nlohmann::ordered_json;

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class BackendKind { live, scripted, replay, oracle };

inline std::string to_string(BackendKind b) {
  switch (b) {
    case BackendKind::live: return "live";
    case BackendKind::scripted: return "scripted";
    case BackendKind::replay: return "replay";
    case BackendKind::oracle: return "oracle";
  }
  return "oracle";
}

inline BackendKind backend_from_string(std::string_view s) {
  if (s == "live") return BackendKind::live;
  if (s == "scripted") return BackendKind::scripted;
  if (s == "replay") return BackendKind::replay;
  if (s == "oracle") return BackendKind::oracle;
  throw ConfigError("unknown backend '" + std::string(s) + "' (expected live, scripted, replay or oracle)");
}

enum class VerifierKind { pivot, primitive, oracle_pivot, oracle_primitive, abstain };

inline std::string to_string(VerifierKind k) {
  switch (k) {
    case VerifierKind::pivot: return "pivot";
    case VerifierKind::primitive: return "primitive";
    case VerifierKind::oracle_pivot: return "oracle_pivot";
    case VerifierKind::oracle_primitive: return "oracle_primitive";
    case VerifierKind::abstain: return "abstain";
  }
  return "abstain";
}

inline VerifierKind verifier_kind_from_string(std::string_view s) {
  for (auto k : {VerifierKind::pivot, VerifierKind::primitive, VerifierKind::oracle_pivot,
                 VerifierKind::oracle_primitive, VerifierKind::abstain})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown verifier kind '" + std::string(s) + "'");
}

// With the oracle backend, pivot and primitive entries are answered by the
// simulator oracle in the matching mode.
struct VerifierSpec {
  std::string id;
  VerifierKind kind = VerifierKind::pivot;
  double weight = 1.0;
  verifiers::PrimitiveSchema schema = verifiers::PrimitiveSchema::nudge;
  double nudge_magnitude = 1.0;

  friend bool operator==(const VerifierSpec&, const VerifierSpec&) = default;
};

struct DemoConfig {
  int count = 400;
  std::uint64_t seed = 7;
  sim::FitConfig fit;
  sim::ExpertConfig expert;
};

struct VlmSettings {
  vlm::ClientConfig client;
  std::string replay_path;
  std::string record_path;
  std::vector<std::string> scripted_replies;
};

struct ExperimentConfig {
  std::string name = "experiment";
  sim::TaskSpec task;
  DemoConfig demos;
  runtime::PolicyConfig policy;
  std::vector<VerifierSpec> verifiers;
  BackendKind backend = BackendKind::oracle;
  VlmSettings vlm;
  std::uint64_t seed_base = 100000;
  int episodes = 500;
  std::vector<std::uint64_t> seed_list;  // overrides seed_base/episodes when non-empty
  std::string output_dir = "runs/experiment";
  int workers = 1;

  std::vector<std::uint64_t> seeds() const {
    if (!seed_list.empty()) return seed_list;
    std::vector<std::uint64_t> out;
    for (int i = 0; i < episodes; ++i) out.push_back(seed_base + static_cast<std::uint64_t>(i));
    return out;
  }

  void validate() const {
    try {
      task.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("task: ") + e.what());
    }
    try {
      policy.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("policy: ") + e.what());
    }
    if (episodes < 0) throw ConfigError("seeds.count: must be >= 0");
    if (workers < 1) throw ConfigError("workers: must be >= 1");
    if (demos.count < 1) throw ConfigError("demos.count: must be >= 1");
    if (demos.fit.num_modes < 1) throw ConfigError("demos.num_modes: must be >= 1");
    if (!(demos.fit.variance_floor > 0.0)) throw ConfigError("demos.variance_floor: must be positive");
    if (!(demos.fit.encoder.cell > 0.0)) throw ConfigError("demos.encoder.cell: must be positive");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < verifiers.size(); ++i) {
      const auto& v = verifiers[i];
      const std::string at = "verifiers[" + std::to_string(i) + "]";
      if (v.id.empty()) throw ConfigError(at + ".id: must not be empty");
      if (!(v.weight >= 0.0) || !std::isfinite(v.weight)) throw ConfigError(at + ".weight: must be finite and >= 0");
      if (!(v.nudge_magnitude > 0.0)) throw ConfigError(at + ".nudge_magnitude: must be positive");
      if (!ids.insert(v.id).second) throw ConfigError(at + ".id: duplicate id '" + v.id + "'");
    }
    if (backend == BackendKind::replay && vlm.replay_path.empty())
      throw ConfigError("vlm.replay_path: required by the replay backend");
    if (backend == BackendKind::scripted && vlm.scripted_replies.empty())
      throw ConfigError("vlm.scripted_replies: required by the scripted backend");
    try {
      vlm.client.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("vlm: ") + e.what());
    }
  }
};

// ---- serialization ---------------------------------------------------------

namespace detail {

inline ojson pt(const sim::Vec2& v) { return ojson::array({v.x(), v.y()}); }

inline ojson number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline std::string mask_mode_name(diffusion::MaskMode m) {
  return m == diffusion::MaskMode::respect_mask ? "respect_mask" : "ignore_mask";
}

}  // namespace detail

inline ojson to_json(const ExperimentConfig& c) {
  const auto& t = c.task;
  ojson obs = ojson::array();
  for (const auto& o : t.obstacles) obs.push_back({{"center", detail::pt(o.center)}, {"radius", o.radius}});
  ojson offs = ojson::array();
  for (const auto& o : t.shift.obstacle_offsets) offs.push_back(detail::pt(o));
  ojson task = {{"kind", sim::to_string(t.kind)},
                {"agent_start", detail::pt(t.agent_start)},
                {"object_start", detail::pt(t.object_start)},
                {"goal", detail::pt(t.goal)},
                {"obstacles", obs},
                {"success_radius", t.success_radius},
                {"grasp_radius", t.grasp_radius},
                {"collision_budget", t.collision_budget},
                {"max_steps", t.max_steps},
                {"spawn_noise_std", t.spawn_noise_std},
                {"spawn_noise_clip", t.spawn_noise_clip},
                {"max_speed", t.max_speed},
                {"world_half_extent", t.world_half_extent},
                {"rest_clearance", t.rest_clearance},
                {"shift",
                 {{"goal_offset", detail::pt(t.shift.goal_offset)},
                  {"object_offset", detail::pt(t.shift.object_offset)},
                  {"obstacle_offsets", offs}}}};

  const auto& d = c.demos;
  ojson demos = {{"count", d.count},
                 {"seed", d.seed},
                 {"num_modes", d.fit.num_modes},
                 {"variance_floor", d.fit.variance_floor},
                 {"encoder",
                  {{"cell", d.fit.encoder.cell},
                   {"approach_frame", sim::to_string(d.fit.encoder.approach_frame)},
                   {"carry_frame", sim::to_string(d.fit.encoder.carry_frame)}}},
                 {"expert",
                  {{"waypoint_margin", d.expert.waypoint_margin},
                   {"action_noise", d.expert.action_noise},
                   {"arrive_tolerance", d.expert.arrive_tolerance},
                   {"max_detours", d.expert.max_detours}}}};

  const auto& p = c.policy;
  ojson policy = {{"prediction_horizon", p.prediction_horizon},
                  {"action_horizon", p.action_horizon},
                  {"num_candidates", p.num_candidates},
                  {"incorporator", runtime::to_string(p.incorporator)},
                  {"diffusion_steps", p.diffusion_steps},
                  {"schedule", diffusion::to_string(p.schedule)},
                  {"guidance",
                   {{"beta", p.guidance.beta},
                    {"guided_steps", p.guidance.guided_steps},
                    {"mask_mode", detail::mask_mode_name(p.guidance.mask_mode)},
                    {"linear_ramp", p.guidance.linear_ramp}}},
                  {"flow",
                   {{"gamma", p.flow_guidance.gamma},
                    {"num_steps", p.flow_guidance.num_steps},
                    {"first_guided_step", p.flow_guidance.first_guided_step}}},
                  {"detector",
                   {{"threshold", detail::number_or_inf(p.detector.threshold)},
                    {"bandwidth", p.detector.bandwidth ? ojson(*p.detector.bandwidth) : ojson(nullptr)},
                    {"num_samples", p.detector.num_samples},
                    {"single_intervention", p.detector.single_intervention}}},
                  {"k_pivot", p.k_pivot},
                  {"perturb_std", p.perturb_std},
                  {"num_frames", p.num_frames},
                  {"instruction", p.instruction},
                  {"parallel_verifiers", p.parallel_verifiers},
                  {"stop_on_success", p.stop_on_success}};

  ojson roster = ojson::array();
  for (const auto& v : c.verifiers)
    roster.push_back({{"id", v.id},
                      {"kind", to_string(v.kind)},
                      {"weight", v.weight},
                      {"schema", verifiers::to_string(v.schema)},
                      {"nudge_magnitude", v.nudge_magnitude}});

  const auto& cc = c.vlm.client;
  ojson vlm = {{"endpoint", cc.endpoint},
               {"model", cc.model},
               {"api_key", cc.api_key},
               {"timeout_s", cc.timeout_s},
               {"max_concurrent", cc.max_concurrent},
               {"temperature", cc.temperature},
               {"max_tokens", cc.max_tokens},
               {"max_retries", cc.max_retries},
               {"backoff_initial_s", cc.backoff_initial_s},
               {"replay_path", c.vlm.replay_path},
               {"record_path", c.vlm.record_path},
               {"scripted_replies", c.vlm.scripted_replies}};

  ojson seeds;
  if (!c.seed_list.empty())
    seeds = c.seed_list;
  else
    seeds = {{"base", c.seed_base}, {"count", c.episodes}};

  return {{"name", c.name},     {"task", task},       {"demos", demos},
          {"policy", policy},   {"verifiers", roster}, {"backend", to_string(c.backend)},
          {"vlm", vlm},         {"seeds", seeds},     {"output_dir", c.output_dir},
          {"workers", c.workers}};
}

// ---- strict parsing ----------------------------------------------------------

namespace detail {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const ojson& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const ojson* find(std::string_view key) {
    auto it = j_.find(std::string(key));
    if (it == j_.end()) return nullptr;
    seen_.insert(std::string(key));
    return &*it;
  }

  template <class T>
  void get(std::string_view key, T& out) {
    const ojson* v = find(key);
    if (!v) return;
    out = convert<T>(*v, key_path(key));
  }

  Section child(std::string_view key) {
    static const ojson empty = ojson::object();
    const ojson* v = find(key);
    return Section(v ? *v : empty, key_path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()) + ": unknown key");
  }

  template <class T>
  static T convert(const ojson& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a nonnegative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(path + ": integer out of range");
      return static_cast<int>(x);
    } else if constexpr (std::is_same_v<T, sim::Vec2>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError(path + ": expected [x, y]");
      return sim::Vec2(v[0].get<double>(), v[1].get<double>());
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  const ojson& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto named(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void enum_field(Section& s, std::string_view key, auto& out, auto&& from_string) {
  const ojson* v = s.find(key);
  if (!v) return;
  const std::string path = s.key_path(key);
  const auto text = Section::convert<std::string>(*v, path);
  out = named(path, [&] { return from_string(text); });
}

inline double parse_threshold(const ojson& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError(path + ": expected a number or \"inf\"");
  }
  return Section::convert<double>(v, path);
}

inline std::pair<int, int> line_col(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline ExperimentConfig from_json(const ojson& root, ExperimentConfig c = {}) {
  using detail::Section;
  Section r(root, "");
  r.get("name", c.name);

  {
    Section t = r.child("task");
    auto& task = c.task;
    detail::enum_field(t, "kind", task.kind, sim::task_kind_from_string);
    t.get("agent_start", task.agent_start);
    t.get("object_start", task.object_start);
    t.get("goal", task.goal);
    if (const ojson* obs = t.find("obstacles")) {
      const std::string path = t.key_path("obstacles");
      if (!obs->is_array()) throw ConfigError(path + ": expected an array");
      task.obstacles.clear();
      for (std::size_t i = 0; i < obs->size(); ++i) {
        Section o((*obs)[i], path + "[" + std::to_string(i) + "]");
        sim::Obstacle ob;
        o.get("center", ob.center);
        o.get("radius", ob.radius);
        o.finish();
        task.obstacles.push_back(ob);
      }
    }
    t.get("success_radius", task.success_radius);
    t.get("grasp_radius", task.grasp_radius);
    t.get("collision_budget", task.collision_budget);
    t.get("max_steps", task.max_steps);
    t.get("spawn_noise_std", task.spawn_noise_std);
    t.get("spawn_noise_clip", task.spawn_noise_clip);
    t.get("max_speed", task.max_speed);
    t.get("world_half_extent", task.world_half_extent);
    t.get("rest_clearance", task.rest_clearance);
    {
      Section sh = t.child("shift");
      sh.get("goal_offset", task.shift.goal_offset);
      sh.get("object_offset", task.shift.object_offset);
      if (const ojson* offs = sh.find("obstacle_offsets")) {
        const std::string path = sh.key_path("obstacle_offsets");
        if (!offs->is_array()) throw ConfigError(path + ": expected an array");
        task.shift.obstacle_offsets.clear();
        for (std::size_t i = 0; i < offs->size(); ++i)
          task.shift.obstacle_offsets.push_back(
              Section::convert<sim::Vec2>((*offs)[i], path + "[" + std::to_string(i) + "]"));
      }
      sh.finish();
    }
    t.finish();
  }

  {
    Section d = r.child("demos");
    d.get("count", c.demos.count);
    d.get("seed", c.demos.seed);
    d.get("num_modes", c.demos.fit.num_modes);
    d.get("variance_floor", c.demos.fit.variance_floor);
    {
      Section e = d.child("encoder");
      e.get("cell", c.demos.fit.encoder.cell);
      detail::enum_field(e, "approach_frame", c.demos.fit.encoder.approach_frame, sim::frame_from_string);
      detail::enum_field(e, "carry_frame", c.demos.fit.encoder.carry_frame, sim::frame_from_string);
      e.finish();
    }
    {
      Section x = d.child("expert");
      x.get("waypoint_margin", c.demos.expert.waypoint_margin);
      x.get("action_noise", c.demos.expert.action_noise);
      x.get("arrive_tolerance", c.demos.expert.arrive_tolerance);
      x.get("max_detours", c.demos.expert.max_detours);
      x.finish();
    }
    d.finish();
  }

  {
    Section p = r.child("policy");
    auto& pc = c.policy;
    p.get("prediction_horizon", pc.prediction_horizon);
    p.get("action_horizon", pc.action_horizon);
    p.get("num_candidates", pc.num_candidates);
    detail::enum_field(p, "incorporator", pc.incorporator, runtime::incorporator_from_string);
    p.get("diffusion_steps", pc.diffusion_steps);
    detail::enum_field(p, "schedule", pc.schedule,
                       [](const std::string& s) { return diffusion::schedule_kind_from_string(s); });
    {
      Section g = p.child("guidance");
      g.get("beta", pc.guidance.beta);
      g.get("guided_steps", pc.guidance.guided_steps);
      detail::enum_field(g, "mask_mode", pc.guidance.mask_mode, [](const std::string& s) {
        if (s == "respect_mask") return diffusion::MaskMode::respect_mask;
        if (s == "ignore_mask") return diffusion::MaskMode::ignore_mask;
        throw ConfigError("expected respect_mask or ignore_mask, got '" + s + "'");
      });
      g.get("linear_ramp", pc.guidance.linear_ramp);
      g.finish();
    }
    {
      Section f = p.child("flow");
      f.get("gamma", pc.flow_guidance.gamma);
      f.get("num_steps", pc.flow_guidance.num_steps);
      f.get("first_guided_step", pc.flow_guidance.first_guided_step);
      f.finish();
    }
    {
      Section m = p.child("detector");
      if (const ojson* th = m.find("threshold")) pc.detector.threshold = detail::parse_threshold(*th, m.key_path("threshold"));
      if (const ojson* bw = m.find("bandwidth")) {
        if (bw->is_null())
          pc.detector.bandwidth.reset();
        else
          pc.detector.bandwidth = Section::convert<double>(*bw, m.key_path("bandwidth"));
      }
      m.get("num_samples", pc.detector.num_samples);
      m.get("single_intervention", pc.detector.single_intervention);
      m.finish();
    }
    p.get("k_pivot", pc.k_pivot);
    p.get("perturb_std", pc.perturb_std);
    p.get("num_frames", pc.num_frames);
    p.get("instruction", pc.instruction);
    p.get("parallel_verifiers", pc.parallel_verifiers);
    p.get("stop_on_success", pc.stop_on_success);
    p.finish();
  }

  if (const ojson* vs = r.find("verifiers")) {
    if (!vs->is_array()) throw ConfigError("verifiers: expected an array");
    c.verifiers.clear();
    for (std::size_t i = 0; i < vs->size(); ++i) {
      Section v((*vs)[i], "verifiers[" + std::to_string(i) + "]");
      VerifierSpec spec;
      v.get("id", spec.id);
      detail::enum_field(v, "kind", spec.kind, verifier_kind_from_string);
      v.get("weight", spec.weight);
      detail::enum_field(v, "schema", spec.schema, verifiers::primitive_schema_from_string);
      v.get("nudge_magnitude", spec.nudge_magnitude);
      v.finish();
      if (spec.id.empty()) spec.id = to_string(spec.kind);
      c.verifiers.push_back(spec);
    }
  }

  detail::enum_field(r, "backend", c.backend, backend_from_string);

  {
    Section v = r.child("vlm");
    auto& cc = c.vlm.client;
    v.get("endpoint", cc.endpoint);
    v.get("model", cc.model);
    v.get("api_key", cc.api_key);
    v.get("timeout_s", cc.timeout_s);
    v.get("max_concurrent", cc.max_concurrent);
    v.get("temperature", cc.temperature);
    v.get("max_tokens", cc.max_tokens);
    v.get("max_retries", cc.max_retries);
    v.get("backoff_initial_s", cc.backoff_initial_s);
    v.get("replay_path", c.vlm.replay_path);
    v.get("record_path", c.vlm.record_path);
    if (const ojson* rs = v.find("scripted_replies")) {
      const std::string path = v.key_path("scripted_replies");
      if (!rs->is_array()) throw ConfigError(path + ": expected an array of strings");
      c.vlm.scripted_replies.clear();
      for (std::size_t i = 0; i < rs->size(); ++i)
        c.vlm.scripted_replies.push_back(
            Section::convert<std::string>((*rs)[i], path + "[" + std::to_string(i) + "]"));
    }
    v.finish();
  }

  if (const ojson* s = r.find("seeds")) {
    if (s->is_array()) {
      if (s->empty()) throw ConfigError("seeds: list must not be empty");
      c.seed_list.clear();
      for (std::size_t i = 0; i < s->size(); ++i)
        c.seed_list.push_back(Section::convert<std::uint64_t>((*s)[i], "seeds[" + std::to_string(i) + "]"));
    } else {
      Section sd(*s, "seeds");
      c.seed_list.clear();
      sd.get("base", c.seed_base);
      sd.get("count", c.episodes);
      sd.finish();
    }
  }

  r.get("output_dir", c.output_dir);
  r.get("workers", c.workers);
  r.finish();
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>",
                                     ExperimentConfig base = {}) {
  ojson j;
  try {
    j = ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  return from_json(j, std::move(base));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, std::move(base));
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace eve::cli
