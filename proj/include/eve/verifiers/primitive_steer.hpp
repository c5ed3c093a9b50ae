#pragma once

#include "eve/verifiers/message.hpp"
#include "eve/verifiers/pivot.hpp"
#include "eve/verifiers/primitives.hpp"
#include "eve/verifiers/prompt.hpp"
#include "eve/vlm/client.hpp"

#include <optional>
#include <string>

namespace eve::verifiers {

// nudge: pick a name from the vocabulary; base_motion: move/rotate/grip.
enum class PrimitiveSchema { nudge, base_motion };

inline std::string to_string(PrimitiveSchema s) { return s == PrimitiveSchema::nudge ? "nudge" : "base_motion"; }

inline PrimitiveSchema primitive_schema_from_string(std::string_view s) {
  if (s == "nudge") return PrimitiveSchema::nudge;
  if (s == "base_motion") return PrimitiveSchema::base_motion;
  throw Error("unknown primitive schema '" + std::string(s) + "'");
}

inline vlm::ChatRequest build_primitive_request(const VerifierRequest& request, const PrimitiveVocabulary& vocab,
                                                PrimitiveSchema schema, const vlm::VlmClient& client,
                                                const std::string& prompt_dir = prompt_directory()) {
  std::map<std::string, std::string> values{{"TASK_DESCRIPTION", request.instruction},
                                            {"SCENE_JSON", request.scene.to_json().dump()},
                                            {"HISTORY_JSON", detail::history_json(request)}};
  std::string name = "primitive_base";
  if (schema == PrimitiveSchema::nudge) {
    name = "primitive_nudge";
    std::string list;
    for (const auto& p : vocab.items()) list += "- \"" + p.name + "\"\n";
    values["PRIMITIVES"] = list;
  }
  vlm::ChatMessage msg{"user", {vlm::ContentPart::make_text(render_template(load_prompt_template(name, prompt_dir), values))}};
  if (request.image_data_url) msg.content.push_back(vlm::ContentPart::make_image(*request.image_data_url));
  return client.make_request({std::move(msg)});
}

namespace detail {
inline std::optional<std::optional<double>> nullable_number(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::optional<double>{};
  if (!obj[key].is_number()) return std::nullopt;
  return std::optional<double>{obj[key].get<double>()};
}

inline VerifierMessage primitive_message(const Primitive& p, std::string id, std::string rationale) {
  VerifierMessage m;
  m.kind = MessageKind::primitive_select;
  m.reference = p.chunk;
  m.mask = p.mask;
  m.rationale = std::move(rationale);
  m.verifier_id = std::move(id);
  m.choice = p.name;
  return m;
}
}  // namespace detail

// Interprets a parsed reply. nullopt means the reply does not fit either
// schema and should be retried.
inline std::optional<VerifierMessage> interpret_primitive_reply(const json& j, const PrimitiveVocabulary& vocab,
                                                                int horizon, const std::string& id,
                                                                double magnitude = 1.0) {
  const std::string reasoning = j.contains("reasoning") && j["reasoning"].is_string() ? j["reasoning"].get<std::string>() : "";
  if (j.contains("action") && j["action"].is_object()) {
    const auto& a = j["action"];
    auto move = detail::nullable_number(a, "move");
    auto rotate = detail::nullable_number(a, "rotate");
    auto grip = detail::nullable_number(a, "grip");
    if (!move || !rotate || !grip) return std::nullopt;
    BaseMotion bm{*move, *rotate, *grip};
    if (bm.all_null()) return VerifierMessage::none(id, reasoning.empty() ? "all-null action" : reasoning);
    Primitive p = base_motion_primitive(bm, horizon, magnitude);
    return detail::primitive_message(p, id, reasoning);
  }
  if (j.contains("chosen_trajectory") && j["chosen_trajectory"].is_string()) {
    const std::string raw = j["chosen_trajectory"].get<std::string>();
    if (detail::trim_lower(raw) == "none") return VerifierMessage::none(id, reasoning);
    const Primitive* p = vocab.find(raw);
    if (!p) {
      for (const auto& item : vocab.items())
        if (detail::trim_lower(item.name) == detail::trim_lower(raw)) p = &item;
    }
    if (!p) return VerifierMessage::none(id, "unknown primitive '" + raw + "'");
    return detail::primitive_message(*p, id, reasoning);
  }
  return std::nullopt;
}

inline VerifierMessage primitive_verify(const VerifierRequest& request, const PrimitiveVocabulary& vocab,
                                        vlm::VlmClient& client, PrimitiveSchema schema = PrimitiveSchema::nudge,
                                        const VlmVerifierOptions& options = {"primitive"}) {
  if (!request.generator_agnostic()) throw Error("primitive_verify: request must not carry candidates");
  if (vocab.empty() && schema == PrimitiveSchema::nudge) throw Error("primitive_verify: empty vocabulary");
  const int horizon = vocab.empty() ? request.horizon : vocab.items().front().chunk.horizon;
  const auto chat = build_primitive_request(request, vocab, schema, client, options.prompt_dir);
  return query_with_retries(client, chat, options, [&](const json& j) {
    return interpret_primitive_reply(j, vocab, horizon, options.id);
  });
}

}  // namespace eve::verifiers
