#include "eve/cli/config.hpp"
#include "eve/cli/experiment.hpp"
#include "eve/cli/presets.hpp"
#include "eve/eval/report.hpp"
#include "eve/mmd/mmd.hpp"
#include "eve/runtime/record_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace eve;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kDegraded = 3 };

struct Source {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed_base;
  std::optional<int> episodes;
  std::optional<int> workers;
  std::string out;
  std::string backend;
  std::string format = "csv";

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config_path, "experiment config (JSON)");
    auto* p = cmd->add_option("--preset", preset_name, "start from a named preset");
    c->excludes(p);
    cmd->add_option("--seed-base", seed_base, "first episode seed");
    cmd->add_option("--episodes", episodes, "number of paired episodes");
    cmd->add_option("--workers", workers, "episode worker threads");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--backend", backend, "live, scripted, replay or oracle");
    cmd->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "json"}));
  }

  cli::ExperimentConfig resolve() const {
    cli::ExperimentConfig c;
    if (!config_path.empty())
      c = cli::load_config(config_path);
    else if (!preset_name.empty())
      c = cli::preset(preset_name);
    else
      throw cli::ConfigError("one of --config or --preset is required");
    if (seed_base) {
      c.seed_base = *seed_base;
      c.seed_list.clear();
    }
    if (episodes) {
      c.episodes = *episodes;
      c.seed_list.clear();
    }
    if (workers) c.workers = *workers;
    if (!out.empty()) c.output_dir = out;
    if (!backend.empty()) c.backend = cli::backend_from_string(backend);
    c.validate();
    return c;
  }
};

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

  void add(const fs::path& p) { files_.push_back(fs::relative(p, dir_).generic_string()); }

  fs::path write(ordered_json extra) {
    const auto path = dir_ / "manifest.json";
    add(path);
    extra["files"] = files_;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << extra.dump(2) << "\n";
    return path;
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

ordered_json arm_json(const eval::ArmSummary& a) {
  const auto post = a.post();
  const auto ci = post.credible_interval(0.95);
  return {{"episodes", a.episodes},     {"successes", a.successes},
          {"success_rate", a.rate()},   {"posterior_mean", post.mean()},
          {"ci95", {ci.first, ci.second}}};
}

struct RunOutcome {
  std::vector<runtime::PairedRecord> pairs;
  int failed_calls = 0;
  ordered_json summary;
};

// Runs one paired experiment and writes records, report, config and manifest into its output dir.
RunOutcome run_experiment(const cli::ExperimentConfig& cfg, eval::ReportFormat format, bool quiet = false) {
  const fs::path dir = cfg.output_dir;
  ensure_dir(dir);
  Manifest manifest(dir);

  const auto t0 = std::chrono::steady_clock::now();
  cli::Experiment exp(cfg);
  RunOutcome r;
  r.pairs = exp.run();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.failed_calls = cli::failed_verifier_calls(r.pairs);

  {
    const auto p = dir / "config.json";
    std::ofstream out(p);
    out << cli::dump_config(cfg);
    manifest.add(p);
  }
  {
    const auto p = dir / "records.jsonl";
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    for (const auto& pr : r.pairs) {
      out << runtime::to_json(pr.unsteered).dump() << "\n";
      out << runtime::to_json(pr.steered).dump() << "\n";
    }
    manifest.add(p);
  }
  for (const auto& p : eval::export_report(r.pairs, dir, format)) manifest.add(p);
  if (!cfg.vlm.record_path.empty() && fs::exists(cfg.vlm.record_path)) manifest.add(fs::absolute(cfg.vlm.record_path));

  const auto arms = eval::summarize(r.pairs);
  r.summary = {{"unsteered", arm_json(arms[0])},
               {"steered", arm_json(arms[1])},
               {"delta", arms[1].rate() - arms[0].rate()},
               {"failed_verifier_calls", r.failed_calls},
               {"seconds", secs}};
  manifest.write({{"name", cfg.name}, {"summary", r.summary}});

  if (!quiet) {
    std::printf("%s: %zu paired episodes in %.1f s\n", cfg.name.c_str(), r.pairs.size(), secs);
    for (const auto& a : arms)
      std::printf("  %-9s success-once %ld/%ld = %.3f  posterior mean %.4f\n", a.arm.c_str(), a.successes, a.episodes,
                  a.rate(), a.post().mean());
    std::printf("  delta %+.3f\n", arms[1].rate() - arms[0].rate());
    if (r.failed_calls) std::printf("  %d verifier calls failed\n", r.failed_calls);
    std::printf("  wrote %s\n", (dir / "manifest.json").string().c_str());
  }
  return r;
}

int cmd_run(const Source& src) {
  const auto cfg = src.resolve();
  const auto r = run_experiment(cfg, eval::report_format_from_string(src.format));
  return r.failed_calls ? kDegraded : kOk;
}

int cmd_calibrate(const std::string& logs, const std::string& arm, const std::string& out_path) {
  std::vector<fs::path> files;
  if (fs::is_directory(logs)) {
    for (const auto& e : fs::directory_iterator(logs))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(logs)) {
    files.push_back(logs);
  } else {
    throw cli::ConfigError(logs + ": no such file or directory");
  }
  if (files.empty()) throw cli::ConfigError(logs + ": no .jsonl record files");

  std::vector<std::vector<double>> succ, fail;
  for (const auto& f : files)
    for (const auto& t : runtime::read_score_traces(f.string())) {
      if (!arm.empty() && !t.arm.empty() && t.arm != arm) continue;
      (t.success ? succ : fail).push_back(t.mmd);
    }
  if (succ.empty()) throw cli::ConfigError(logs + ": logs hold no successful episodes");
  if (fail.empty()) throw cli::ConfigError(logs + ": logs hold no failed episodes");

  const auto cal = mmd::calibrate_threshold(succ, fail);
  std::printf("threshold %.10g  balanced accuracy %.4f  (%zu successes, %zu failures)\n", cal.threshold,
              cal.balanced_accuracy, succ.size(), fail.size());

  const fs::path out = out_path.empty() ? (fs::is_directory(logs) ? fs::path(logs) : fs::path(logs).parent_path()) / "calibration.json"
                                        : fs::path(out_path);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  std::ofstream o(out);
  if (!o) throw Error("cannot write " + out.string());
  ordered_json j{{"threshold", cal.threshold},
                 {"balanced_accuracy", cal.balanced_accuracy},
                 {"winning_cut", cal.winning_cut},
                 {"successes", succ.size()},
                 {"failures", fail.size()}};
  o << j.dump(2) << "\n";
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

void apply_sweep(cli::ExperimentConfig& c, const std::string& param, double v) {
  if (param == "guidance_ratio") {
    c.policy.guidance.beta = v;
    c.policy.flow_guidance.gamma = v;
  } else if (param == "ensemble_weight") {
    if (c.verifiers.size() != 2) throw cli::ConfigError("ensemble_weight needs exactly two verifiers in the roster");
    if (v < 0.0 || v > 1.0) throw cli::ConfigError("ensemble_weight values must lie in [0, 1]");
    c.verifiers[0].weight = v;
    c.verifiers[1].weight = 1.0 - v;
  } else if (param == "mmd_threshold") {
    c.policy.detector.threshold = v;
  } else if (param == "k_pivot") {
    c.policy.k_pivot = static_cast<int>(v);
    if (c.policy.k_pivot != v) throw cli::ConfigError("k_pivot values must be integers");
  } else if (param == "num_frames") {
    c.policy.num_frames = static_cast<int>(v);
    if (c.policy.num_frames != v) throw cli::ConfigError("num_frames values must be integers");
  } else {
    throw cli::ConfigError("unknown sweep parameter '" + param +
                           "' (expected guidance_ratio, ensemble_weight, mmd_threshold, k_pivot or num_frames)");
  }
}

int cmd_sweep(const Source& src, const std::string& param, const std::vector<double>& values) {
  if (values.empty()) throw cli::ConfigError("--values must list at least one value");
  const auto base = src.resolve();
  {
    auto probe = base;
    apply_sweep(probe, param, values.front());
  }
  const fs::path root = base.output_dir;
  ensure_dir(root);
  Manifest manifest(root);
  const auto format = eval::report_format_from_string(src.format);
  const auto table_path = root / "sweep.csv";
  std::ofstream table(table_path);
  if (!table) throw Error("cannot write " + table_path.string());
  table << "parameter,value,episodes,unsteered_successes,steered_successes,unsteered_rate,steered_rate,delta,"
           "unsteered_posterior_mean,steered_posterior_mean\n";
  std::printf("%-16s %10s %10s %10s %8s\n", param.c_str(), "unsteered", "steered", "delta", "failed");
  int failed = 0;
  ordered_json runs = ordered_json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto cfg = base;
    apply_sweep(cfg, param, values[i]);
    cfg.validate();
    char sub[64];
    std::snprintf(sub, sizeof sub, "%s_%02zu", param.c_str(), i);
    cfg.output_dir = (root / sub).string();
    const auto r = run_experiment(cfg, format, true);
    failed += r.failed_calls;
    const auto arms = eval::summarize(r.pairs);
    table << param << ',' << eval::detail::num(values[i]) << ',' << arms[0].episodes << ',' << arms[0].successes << ','
          << arms[1].successes << ',' << eval::detail::num(arms[0].rate()) << ',' << eval::detail::num(arms[1].rate())
          << ',' << eval::detail::num(arms[1].rate() - arms[0].rate()) << ',' << eval::detail::num(arms[0].post().mean())
          << ',' << eval::detail::num(arms[1].post().mean()) << '\n';
    std::printf("%-16.6g %10.3f %10.3f %+10.3f %8d\n", values[i], arms[0].rate(), arms[1].rate(),
                arms[1].rate() - arms[0].rate(), r.failed_calls);
    manifest.add(fs::path(cfg.output_dir) / "manifest.json");
    runs.push_back({{"value", values[i]}, {"dir", sub}, {"summary", r.summary}});
  }
  table.close();
  manifest.add(table_path);
  manifest.write({{"name", base.name}, {"parameter", param}, {"runs", runs}});
  std::printf("wrote %s\n", (root / "manifest.json").string().c_str());
  return failed ? kDegraded : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generator-verifier steering experiments on a planar manipulation simulator"};
  app.require_subcommand(1);

  Source run_src;
  auto* run = app.add_subcommand("run", "paired unsteered/steered episodes with records and report");
  run_src.add_to(run);

  std::string logs, arm = "unsteered", cal_out;
  auto* calibrate = app.add_subcommand("calibrate", "fit an MMD threshold from record logs");
  calibrate->add_option("logs", logs, "records directory or .jsonl file")->required();
  calibrate->add_option("--arm", arm, "only use records from this arm (empty for all)");
  calibrate->add_option("--out", cal_out, "where to write calibration.json");

  Source sweep_src;
  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "one paired run per parameter value");
  sweep_src.add_to(sweep);
  sweep->add_option("--parameter", param, "guidance_ratio, ensemble_weight, mmd_threshold, k_pivot or num_frames")
      ->required();
  sweep->add_option("--values", values, "comma-separated values")->delimiter(',');

  auto* show = app.add_subcommand("show-config", "print a preset or config file as resolved JSON");
  Source show_src;
  show_src.add_to(show);

  auto* list = app.add_subcommand("presets", "list named presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_src);
    if (*calibrate) return cmd_calibrate(logs, arm, cal_out);
    if (*sweep) return cmd_sweep(sweep_src, param, values);
    if (*show) {
      std::cout << cli::dump_config(show_src.resolve());
      return kOk;
    }
    if (*list) {
      for (const auto& p : cli::presets()) std::cout << p.name << "\n";
      return kOk;
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
