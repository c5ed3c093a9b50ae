#pragma once

#include "eve/core/rng.hpp"
#include "eve/core/types.hpp"
#include "eve/verifiers/message.hpp"
#include "eve/verifiers/prompt.hpp"
#include "eve/vlm/client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace eve::verifiers {

inline std::string color_label(std::size_t i) {
  static const char* const kColors[] = {"red",    "orange", "blue",  "cyan", "magenta", "green",
                                        "yellow", "purple", "brown", "pink", "gray",    "olive"};
  constexpr std::size_t n = sizeof(kColors) / sizeof(kColors[0]);
  return i < n ? kColors[i] : "path_" + std::to_string(i + 1);
}

// 1 - cosine similarity of the flattened chunks; a zero vector is at
// distance 1 from everything, itself included.
inline double cosine_distance(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 1.0;
  return 1.0 - u.dot(v) / (nu * nv);
}

// Greedy farthest-point selection under cosine distance, seeded with the
// largest-norm candidate. Ties go to the lower index.
inline std::vector<int> select_diverse_indices(const std::vector<ActionChunk>& candidates, int k) {
  const int n = static_cast<int>(candidates.size());
  if (k < 0) throw Error("pivot selection: k_pivot must be nonnegative");
  if (k > n) throw Error("pivot selection: k_pivot " + std::to_string(k) + " exceeds " + std::to_string(n) + " candidates");
  std::vector<int> chosen;
  if (k == 0) return chosen;
  int first = 0;
  for (int i = 1; i < n; ++i)
    if (candidates[i].values.norm() > candidates[first].values.norm()) first = i;
  chosen.push_back(first);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[first] = true;
  while (static_cast<int>(chosen.size()) < k) {
    const int last = chosen.back();
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(nearest[i], cosine_distance(candidates[i].values, candidates[last].values));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    taken[best] = true;
    chosen.push_back(best);
  }
  return chosen;
}

struct RenderConfig {
  Vec2 origin = Vec2::Zero();
  double max_speed = 0.05;
};

// Open-loop planar preview of a chunk: cumulative translation from origin.
inline std::vector<Vec2> render_path(const ActionChunk& chunk, const RenderConfig& render) {
  std::vector<Vec2> path;
  path.reserve(chunk.horizon + 1);
  Vec2 p = render.origin;
  path.push_back(p);
  for (int t = 0; t < chunk.horizon; ++t) {
    p += render.max_speed * Vec2(std::clamp(chunk.at(t, 0), -1.0, 1.0), std::clamp(chunk.at(t, 1), -1.0, 1.0));
    path.push_back(p);
  }
  return path;
}

// Diverse subset with color labels. The display perturbation touches only
// the rendered path; the executable chunk is copied untouched.
inline std::vector<CandidateView> pivot_select_diverse(const std::vector<ActionChunk>& candidates, int k_pivot,
                                                       double perturb_std, Rng& rng, const RenderConfig& render = {}) {
  if (perturb_std < 0.0) throw Error("pivot selection: perturb_std must be nonnegative");
  std::vector<CandidateView> out;
  const auto idx = select_diverse_indices(candidates, k_pivot);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CandidateView v{color_label(i), idx[i], candidates[idx[i]], render_path(candidates[idx[i]], render)};
    if (perturb_std > 0.0) {
      for (std::size_t p = 1; p < v.rendered_path.size(); ++p)
        v.rendered_path[p] += perturb_std * Vec2(rng.normal(), rng.normal());
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace detail {
inline std::string trim_lower(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string path_json(const std::vector<Vec2>& path) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << '[';
  for (std::size_t i = 0; i < path.size(); ++i) os << (i ? ", " : "") << '[' << path[i].x() << ", " << path[i].y() << ']';
  os << ']';
  return os.str();
}

inline std::string history_json(const VerifierRequest& r) {
  json h = json::array();
  for (const auto& s : r.frame_history) h.push_back(s.to_json());
  return h.dump();
}
}  // namespace detail

inline vlm::ChatRequest build_pivot_request(const VerifierRequest& request, const vlm::VlmClient& client,
                                            const std::string& prompt_dir = prompt_directory()) {
  std::string listing;
  std::string choices;
  for (const auto& c : request.candidates) {
    listing += "- \"" + c.id + "\": " + detail::path_json(c.rendered_path) + "\n";
    choices += (choices.empty() ? "" : ", ") + ("\"" + c.id + "\"");
  }
  const std::string text = render_template(load_prompt_template("pivot", prompt_dir),
                                           {{"TASK_DESCRIPTION", request.instruction},
                                            {"SCENE_JSON", request.scene.to_json().dump()},
                                            {"HISTORY_JSON", detail::history_json(request)},
                                            {"CANDIDATES", listing},
                                            {"CHOICES", choices},
                                            {"EXAMPLE_CHOICE", request.candidates.front().id}});
  vlm::ChatMessage msg{"user", {vlm::ContentPart::make_text(text)}};
  if (request.image_data_url) msg.content.push_back(vlm::ContentPart::make_image(*request.image_data_url));
  return client.make_request({std::move(msg)});
}

struct VlmVerifierOptions {
  std::string id;
  int attempts = 3;
  std::string prompt_dir = prompt_directory();
};

// Runs up to `attempts` exchanges until `interpret` accepts a reply; any
// backend or parse failure on the last attempt becomes a none message.
template <typename Interpret>
VerifierMessage query_with_retries(vlm::VlmClient& client, const vlm::ChatRequest& chat,
                                   const VlmVerifierOptions& options, Interpret interpret) {
  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt < options.attempts; ++attempt) {
    try {
      const auto reply = client.complete(chat);
      const json parsed = vlm::extract_json_object(reply.text);
      if (auto msg = interpret(parsed)) return *msg;
      last_error = "reply did not match the response schema: " + parsed.dump();
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  return VerifierMessage::none(options.id, "no usable reply after " + std::to_string(options.attempts) +
                                               " attempts: " + last_error);
}

inline VerifierMessage pivot_verify(const VerifierRequest& request, vlm::VlmClient& client,
                                    const VlmVerifierOptions& options = {"pivot"}) {
  if (request.candidates.empty()) throw Error("pivot_verify: request carries no candidates");
  const auto chat = build_pivot_request(request, client, options.prompt_dir);
  return query_with_retries(client, chat, options, [&](const json& j) -> std::optional<VerifierMessage> {
    if (!j.contains("chosen_trajectory") || !j["chosen_trajectory"].is_string()) return std::nullopt;
    const std::string choice = detail::trim_lower(j["chosen_trajectory"].get<std::string>());
    const std::string reasoning = j.value("reasoning", std::string{});
    if (choice == "none") return VerifierMessage::none(options.id, reasoning);
    for (const auto& c : request.candidates) {
      if (c.id != choice) continue;
      VerifierMessage m;
      m.kind = MessageKind::trajectory_select;
      m.reference = c.chunk;
      m.mask.assign(c.chunk.dims, true);
      m.rationale = reasoning;
      m.verifier_id = options.id;
      m.choice = c.id;
      return m;
    }
    return std::nullopt;
  });
}

}  // namespace eve::verifiers
