#pragma once

#include "eve/eval/posterior.hpp"
#include "eve/runtime/episode.hpp"
#include "eve/sim/categorize.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace eve::eval {

inline bool success_once(const runtime::RolloutRecord& record) { return record.success_once(); }

struct SwitchTable {
  static constexpr std::size_t kN = sim::kAllCategories.size();
  std::array<std::array<long, kN>, kN> counts{};  // [unsteered][steered]

  long at(sim::Category from, sim::Category to) const {
    return counts[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }

  long total() const {
    long t = 0;
    for (const auto& row : counts)
      for (long c : row) t += c;
    return t;
  }

  long unsteered_count(sim::Category c) const {
    long t = 0;
    for (long v : counts[static_cast<std::size_t>(c)]) t += v;
    return t;
  }

  long steered_count(sim::Category c) const {
    long t = 0;
    for (const auto& row : counts) t += row[static_cast<std::size_t>(c)];
    return t;
  }

  long unsteered_successes() const {
    long t = 0;
    for (auto c : sim::kAllCategories)
      if (sim::is_success(c)) t += unsteered_count(c);
    return t;
  }

  long steered_successes() const {
    long t = 0;
    for (auto c : sim::kAllCategories)
      if (sim::is_success(c)) t += steered_count(c);
    return t;
  }

  struct Flow {
    sim::Category from;
    sim::Category to;
    long count;
  };

  // Nonzero cells where the outcome class flips, in category order.
  std::vector<Flow> flows(bool failure_to_success) const {
    std::vector<Flow> out;
    for (auto f : sim::kAllCategories)
      for (auto t : sim::kAllCategories) {
        const bool wanted = failure_to_success ? (!sim::is_success(f) && sim::is_success(t))
                                               : (sim::is_success(f) && !sim::is_success(t));
        if (wanted && at(f, t) > 0) out.push_back({f, t, at(f, t)});
      }
    return out;
  }
};

inline SwitchTable switch_table(const std::vector<std::pair<sim::Category, sim::Category>>& pairs) {
  SwitchTable t;
  for (const auto& [u, s] : pairs) ++t.counts[static_cast<std::size_t>(u)][static_cast<std::size_t>(s)];
  return t;
}

inline SwitchTable switch_analysis(const std::vector<runtime::PairedRecord>& pairs) {
  std::vector<std::pair<sim::Category, sim::Category>> cats;
  for (const auto& p : pairs) {
    if (p.unsteered.seed != p.seed || p.steered.seed != p.seed || p.unsteered.steered || !p.steered.steered)
      throw Error("switch_analysis: unmatched pair for seed " + std::to_string(p.seed));
    cats.emplace_back(p.unsteered.category, p.steered.category);
  }
  return switch_table(cats);
}

struct ArmSummary {
  std::string arm;
  long episodes = 0;
  long successes = 0;

  double rate() const { return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0.0; }
  BetaPosterior post() const { return posterior(successes, episodes); }
};

inline std::vector<ArmSummary> summarize(const std::vector<runtime::PairedRecord>& pairs) {
  ArmSummary u{"unsteered"};
  ArmSummary s{"steered"};
  for (const auto& p : pairs) {
    ++u.episodes;
    ++s.episodes;
    u.successes += success_once(p.unsteered);
    s.successes += success_once(p.steered);
  }
  return {u, s};
}

enum class ReportFormat { csv, json };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw Error("unknown report format '" + std::string(s) + "'");
}

namespace detail {
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}
}  // namespace detail

// Writes summary, posterior grids, per-episode outcomes, MMD traces and the
// switch table into `dir`. Returns the written paths in a fixed order.
inline std::vector<std::filesystem::path> export_report(const std::vector<runtime::PairedRecord>& pairs,
                                                        const std::filesystem::path& dir, ReportFormat format,
                                                        int grid_points = 201) {
  using nlohmann::ordered_json;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  const auto arms = summarize(pairs);
  const auto table = switch_analysis(pairs);
  std::vector<std::filesystem::path> written;

  if (format == ReportFormat::csv) {
    {
      const auto p = dir / "summary.csv";
      auto out = detail::open_out(p);
      out << "arm,episodes,successes,success_rate,standard_error,posterior_mean,ci95_low,ci95_high\n";
      for (const auto& a : arms) {
        const auto post = a.post();
        const auto ci = post.credible_interval(0.95);
        out << a.arm << ',' << a.episodes << ',' << a.successes << ',' << detail::num(a.rate()) << ','
            << detail::num(standard_error(a.successes, a.episodes)) << ',' << detail::num(post.mean()) << ','
            << detail::num(ci.first) << ',' << detail::num(ci.second) << '\n';
      }
      written.push_back(p);
    }
    {
      const auto p = dir / "posterior_grid.csv";
      auto out = detail::open_out(p);
      out << "arm,x,density\n";
      for (const auto& a : arms) {
        const auto g = density_grid(a.post(), grid_points);
        for (std::size_t i = 0; i < g.x.size(); ++i)
          out << a.arm << ',' << detail::num(g.x[i]) << ',' << detail::num(g.density[i]) << '\n';
      }
      written.push_back(p);
    }
    {
      const auto p = dir / "episodes.csv";
      auto out = detail::open_out(p);
      out << "seed,arm,category,success_once,interventions,terminal_goal_distance\n";
      for (const auto& pr : pairs)
        for (const auto* r : {&pr.unsteered, &pr.steered})
          out << pr.seed << ',' << (r->steered ? "steered" : "unsteered") << ',' << sim::to_string(r->category) << ','
              << (r->success_once() ? 1 : 0) << ',' << r->interventions.size() << ','
              << detail::num(r->terminal_goal_distance) << '\n';
      written.push_back(p);
    }
    {
      const auto p = dir / "mmd_traces.csv";
      auto out = detail::open_out(p);
      out << "seed,arm,replan,step,mmd\n";
      for (const auto& pr : pairs)
        for (const auto* r : {&pr.unsteered, &pr.steered})
          for (std::size_t i = 0; i < r->replans.size(); ++i)
            if (r->replans[i].mmd)
              out << pr.seed << ',' << (r->steered ? "steered" : "unsteered") << ',' << i << ','
                  << r->replans[i].step << ',' << detail::num(*r->replans[i].mmd) << '\n';
      written.push_back(p);
    }
    {
      const auto p = dir / "switch_table.csv";
      auto out = detail::open_out(p);
      out << "unsteered,steered,count\n";
      for (auto f : sim::kAllCategories)
        for (auto t : sim::kAllCategories)
          out << sim::to_string(f) << ',' << sim::to_string(t) << ',' << table.at(f, t) << '\n';
      written.push_back(p);
    }
    return written;
  }

  ordered_json j;
  j["arms"] = ordered_json::array();
  for (const auto& a : arms) {
    const auto post = a.post();
    const auto ci = post.credible_interval(0.95);
    const auto g = density_grid(post, grid_points);
    j["arms"].push_back({{"arm", a.arm},
                         {"episodes", a.episodes},
                         {"successes", a.successes},
                         {"success_rate", a.rate()},
                         {"standard_error", standard_error(a.successes, a.episodes)},
                         {"posterior_mean", post.mean()},
                         {"ci95", {ci.first, ci.second}},
                         {"grid", {{"x", g.x}, {"density", g.density}}}});
  }
  j["episodes"] = ordered_json::array();
  for (const auto& pr : pairs)
    for (const auto* r : {&pr.unsteered, &pr.steered})
      j["episodes"].push_back({{"seed", pr.seed},
                               {"arm", r->steered ? "steered" : "unsteered"},
                               {"category", sim::to_string(r->category)},
                               {"success_once", r->success_once()},
                               {"interventions", r->interventions.size()},
                               {"terminal_goal_distance", r->terminal_goal_distance},
                               {"mmd", r->mmd_trace()}});
  j["switch_table"] = ordered_json::array();
  for (auto f : sim::kAllCategories)
    for (auto t : sim::kAllCategories)
      if (table.at(f, t) > 0)
        j["switch_table"].push_back({{"unsteered", sim::to_string(f)}, {"steered", sim::to_string(t)}, {"count", table.at(f, t)}});
  const auto p = dir / "report.json";
  auto out = detail::open_out(p);
  out << j.dump(2) << '\n';
  written.push_back(p);
  return written;
}

}  // namespace eve::eval
