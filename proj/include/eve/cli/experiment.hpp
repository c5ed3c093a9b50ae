#pragma once

#include "eve/cli/config.hpp"
#include "eve/runtime/episode.hpp"
#include "eve/sim/policy.hpp"
#include "eve/verifiers/verifier.hpp"
#include "eve/vlm/client.hpp"
#include "eve/vlm/http_backend.hpp"

#include <memory>
#include <string>
#include <vector>

namespace eve::cli {

// Everything an episode context points at, owned in one place.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config)
      : config_(std::move(config)),
        policy_(sim::fit_base_policy(
            sim::generate_demos(config_.task, config_.demos.count, config_.demos.seed, config_.demos.expert),
            fit_config())) {
    if (config_.backend != BackendKind::oracle) client_ = make_client();
    const int h = config_.policy.prediction_horizon;
    for (const auto& v : config_.verifiers) {
      const bool oracle = config_.backend == BackendKind::oracle;
      std::shared_ptr<const verifiers::Verifier> ver;
      switch (v.kind) {
        case VerifierKind::pivot:
          if (oracle)
            ver = std::make_shared<verifiers::OracleVerifier>(v.id, verifiers::OracleMode::pivot);
          else
            ver = std::make_shared<verifiers::PivotVerifier>(v.id, client_);
          break;
        case VerifierKind::primitive:
          if (oracle)
            ver = std::make_shared<verifiers::OracleVerifier>(v.id, verifiers::OracleMode::primitive,
                                                              verifiers::nudge_vocabulary(h, v.nudge_magnitude));
          else
            ver = std::make_shared<verifiers::PrimitiveVerifier>(v.id, client_, verifiers::nudge_vocabulary(h, v.nudge_magnitude), v.schema);
          break;
        case VerifierKind::oracle_pivot:
          ver = std::make_shared<verifiers::OracleVerifier>(v.id, verifiers::OracleMode::pivot);
          break;
        case VerifierKind::oracle_primitive:
          ver = std::make_shared<verifiers::OracleVerifier>(v.id, verifiers::OracleMode::primitive,
                                                            verifiers::nudge_vocabulary(h, v.nudge_magnitude));
          break;
        case VerifierKind::abstain:
          ver = std::make_shared<verifiers::AbstainingVerifier>(v.id);
          break;
      }
      roster_.push_back({ver, v.weight});
    }
  }

  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const { return config_; }
  const sim::BasePolicy& policy() const { return policy_; }
  const std::vector<verifiers::RosterEntry>& roster() const { return roster_; }
  const std::shared_ptr<vlm::VlmClient>& client() const { return client_; }

  runtime::EpisodeContext context() const { return {&config_.task, &config_.policy, &policy_, &roster_}; }

  std::vector<runtime::PairedRecord> run() const {
    return runtime::run_paired(context(), config_.seeds(), config_.workers);
  }

 private:
  sim::FitConfig fit_config() const {
    sim::FitConfig f = config_.demos.fit;
    f.horizon = config_.policy.prediction_horizon;
    return f;
  }

  std::shared_ptr<vlm::VlmClient> make_client() const {
    vlm::ClientConfig cc = config_.vlm.client;
    std::shared_ptr<vlm::Backend> backend;
    switch (config_.backend) {
      case BackendKind::live:
        cc.apply_environment();
        backend = std::make_shared<vlm::HttpBackend>(cc);
        break;
      case BackendKind::scripted:
        backend = std::make_shared<vlm::ScriptedBackend>(config_.vlm.scripted_replies);
        break;
      case BackendKind::replay:
        backend = std::make_shared<vlm::ReplayBackend>(config_.vlm.replay_path);
        break;
      case BackendKind::oracle:
        return nullptr;
    }
    if (!config_.vlm.record_path.empty())
      backend = std::make_shared<vlm::RecordingBackend>(backend, config_.vlm.record_path);
    return std::make_shared<vlm::VlmClient>(backend, cc);
  }

  ExperimentConfig config_;
  sim::BasePolicy policy_;
  std::vector<verifiers::RosterEntry> roster_;
  std::shared_ptr<vlm::VlmClient> client_;
};

// Verifier calls that ended in an error rather than an answer or abstention.
inline int failed_verifier_calls(const std::vector<runtime::PairedRecord>& pairs) {
  int n = 0;
  for (const auto& p : pairs)
    for (const auto& iv : p.steered.interventions)
      for (const auto& m : iv.messages)
        if (m.rationale.rfind("verifier failed", 0) == 0) ++n;
  return n;
}

}  // namespace eve::cli
