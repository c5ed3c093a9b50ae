#pragma once

#include "eve/verifiers/aggregate.hpp"
#include "eve/verifiers/message.hpp"
#include "eve/verifiers/oracle.hpp"
#include "eve/verifiers/pivot.hpp"
#include "eve/verifiers/primitive_steer.hpp"
#include "eve/verifiers/primitives.hpp"

#include <memory>
#include <string>

namespace eve::verifiers {

// Stateless between calls; verify() may run concurrently.
class Verifier {
 public:
  explicit Verifier(std::string id) : id_(std::move(id)) {}
  virtual ~Verifier() = default;

  const std::string& id() const { return id_; }
  // Generator-conditioned verifiers receive the diverse candidate subset.
  virtual bool wants_candidates() const = 0;
  virtual VerifierMessage verify(const VerifierRequest& request, const WorldTruth& truth) const = 0;

 private:
  std::string id_;
};

class PivotVerifier final : public Verifier {
 public:
  PivotVerifier(std::string id, std::shared_ptr<vlm::VlmClient> client, std::string prompt_dir = prompt_directory())
      : Verifier(std::move(id)), client_(std::move(client)), prompt_dir_(std::move(prompt_dir)) {}
  bool wants_candidates() const override { return true; }
  VerifierMessage verify(const VerifierRequest& request, const WorldTruth&) const override {
    return pivot_verify(request, *client_, {id(), 3, prompt_dir_});
  }

 private:
  std::shared_ptr<vlm::VlmClient> client_;
  std::string prompt_dir_;
};

class PrimitiveVerifier final : public Verifier {
 public:
  PrimitiveVerifier(std::string id, std::shared_ptr<vlm::VlmClient> client, PrimitiveVocabulary vocab,
                    PrimitiveSchema schema = PrimitiveSchema::nudge, std::string prompt_dir = prompt_directory())
      : Verifier(std::move(id)),
        client_(std::move(client)),
        vocab_(std::move(vocab)),
        schema_(schema),
        prompt_dir_(std::move(prompt_dir)) {}
  bool wants_candidates() const override { return false; }
  VerifierMessage verify(const VerifierRequest& request, const WorldTruth&) const override {
    return primitive_verify(request, vocab_, *client_, schema_, {id(), 3, prompt_dir_});
  }

 private:
  std::shared_ptr<vlm::VlmClient> client_;
  PrimitiveVocabulary vocab_;
  PrimitiveSchema schema_;
  std::string prompt_dir_;
};

class OracleVerifier final : public Verifier {
 public:
  OracleVerifier(std::string id, OracleMode mode, PrimitiveVocabulary vocab = {})
      : Verifier(std::move(id)), mode_(mode), vocab_(std::move(vocab)) {}
  bool wants_candidates() const override { return mode_ == OracleMode::pivot; }
  VerifierMessage verify(const VerifierRequest& request, const WorldTruth& truth) const override {
    return oracle_verify(request, truth, mode_, &vocab_, id());
  }

 private:
  OracleMode mode_;
  PrimitiveVocabulary vocab_;
};

// Always abstains.
class AbstainingVerifier final : public Verifier {
 public:
  using Verifier::Verifier;
  bool wants_candidates() const override { return false; }
  VerifierMessage verify(const VerifierRequest&, const WorldTruth&) const override {
    return VerifierMessage::none(id(), "abstained");
  }
};

struct RosterEntry {
  std::shared_ptr<const Verifier> verifier;
  double weight = 1.0;
};

}  // namespace eve::verifiers
