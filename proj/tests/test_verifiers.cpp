#include "eve/core/rng.hpp"
#include "eve/verifiers/verifier.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace eve;
using namespace eve::verifiers;

namespace {

constexpr int kH = 4;
constexpr int kD = 3;

ActionChunk random_chunk(Rng& rng, double scale = 1.0) {
  ActionChunk c(kH, kD);
  for (int i = 0; i < c.values.size(); ++i) c.values[i] = scale * rng.normal();
  return c;
}

VerifierMessage message(std::string id, ActionChunk c, DimMask mask) {
  VerifierMessage m;
  m.kind = MessageKind::trajectory_select;
  m.reference = std::move(c);
  m.mask = std::move(mask);
  m.verifier_id = std::move(id);
  return m;
}

std::shared_ptr<vlm::VlmClient> scripted(std::vector<std::string> replies, std::shared_ptr<vlm::ScriptedBackend>* out = nullptr) {
  auto backend = std::make_shared<vlm::ScriptedBackend>(std::move(replies));
  if (out) *out = backend;
  vlm::ClientConfig cfg;
  cfg.backoff_initial_s = 0.0;
  return std::make_shared<vlm::VlmClient>(backend, cfg);
}

VerifierRequest request_with(const std::vector<ActionChunk>& chunks) {
  VerifierRequest r;
  r.instruction = "pick up the object";
  r.horizon = kH;
  r.dims = kD;
  Rng rng(1);
  r.candidates = pivot_select_diverse(chunks, static_cast<int>(chunks.size()), 0.0, rng);
  return r;
}

double min_pairwise(const std::vector<ActionChunk>& c, const std::vector<int>& idx) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j) m = std::min(m, cosine_distance(c[idx[i]].values, c[idx[j]].values));
  return m;
}

sim::TaskSpec open_field() {
  sim::TaskSpec s;
  s.spawn_noise_std = 0.0;
  return s;
}

}  // namespace

TEST(Aggregate, SingleMessageIsReturnedUnchanged) {
  Rng rng(3);
  const auto c = random_chunk(rng);
  const auto out = aggregate({message("a", c, {true, true, true})}, {0.3});
  ASSERT_TRUE(out);
  EXPECT_EQ(out->reference.values, c.values);
  EXPECT_EQ(out->mask, (DimMask{true, true, true}));
  EXPECT_EQ(out->weights_used, (std::vector<double>{1.0}));
}

TEST(Aggregate, IdenticalMessagesFuseToTheSameChunk) {
  Rng rng(4);
  const auto c = random_chunk(rng);
  std::vector<VerifierMessage> ms;
  for (int i = 0; i < 5; ++i) ms.push_back(message("v" + std::to_string(i), c, {true, true, true}));
  EXPECT_EQ(aggregate(ms, {0.1, 0.7, 0.2, 1.3, 0.01})->reference.values, c.values);
}

TEST(Aggregate, ScalingAllWeightsChangesNothing) {
  Rng rng(5);
  const std::vector<VerifierMessage> ms{message("a", random_chunk(rng), {true, true, false}),
                                        message("b", random_chunk(rng), {true, false, true}),
                                        message("c", random_chunk(rng), {false, true, true})};
  const auto x = aggregate(ms, {0.2, 0.5, 0.3});
  const auto y = aggregate(ms, {2.0, 5.0, 3.0});
  EXPECT_LT((x->reference.values - y->reference.values).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(x->mask, y->mask);
}

TEST(Aggregate, DisjointMasksTakeEachDimFromItsOwner) {
  Rng rng(6);
  const auto a = random_chunk(rng);
  const auto b = random_chunk(rng);
  const auto out = aggregate({message("a", a, {true, true, false}), message("b", b, {false, false, true})}, {0.9, 0.1});
  EXPECT_EQ(out->mask, (DimMask{true, true, true}));
  for (int t = 0; t < kH; ++t) {
    EXPECT_EQ(out->reference.at(t, 0), a.at(t, 0));
    EXPECT_EQ(out->reference.at(t, 1), a.at(t, 1));
    EXPECT_EQ(out->reference.at(t, 2), b.at(t, 2));
  }
}

TEST(Aggregate, UngovernedDimsStayMaskedOut) {
  Rng rng(7);
  const auto a = random_chunk(rng);
  const auto b = random_chunk(rng);
  const auto out = aggregate({message("a", a, {true, false, false}), message("b", b, {true, false, false})}, {1.0, 3.0});
  EXPECT_EQ(out->mask, (DimMask{true, false, false}));
  for (int t = 0; t < kH; ++t) EXPECT_NEAR(out->reference.at(t, 2), 0.25 * a.at(t, 2) + 0.75 * b.at(t, 2), 1e-14);
}

TEST(Aggregate, InputOrderDoesNotMatter) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.bits() % 4);
    std::vector<VerifierMessage> ms;
    std::vector<double> ws;
    for (int i = 0; i < n; ++i) {
      DimMask mask(kD);
      for (int j = 0; j < kD; ++j) mask[j] = rng.uniform() < 0.6;
      ms.push_back(message("v" + std::to_string(i), random_chunk(rng), mask));
      ws.push_back(rng.uniform());
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.bits() % (i + 1)]);
    std::vector<VerifierMessage> pm;
    std::vector<double> pw;
    for (int i : perm) {
      pm.push_back(ms[i]);
      pw.push_back(ws[i]);
    }
    const auto x = aggregate(ms, ws);
    const auto y = aggregate(pm, pw);
    ASSERT_EQ(x->reference.values, y->reference.values);
    ASSERT_EQ(x->mask, y->mask);
    for (int i = 0; i < n; ++i) ASSERT_EQ(y->weights_used[i], x->weights_used[perm[i]]);
  }
}

TEST(Aggregate, FusedValuesStayWithinContributorBounds) {
  Rng rng(9);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.bits() % 6);
    std::vector<VerifierMessage> ms;
    std::vector<double> ws;
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < 0.15) {
        ms.push_back(VerifierMessage::none("v" + std::to_string(i), "abstain"));
      } else {
        DimMask mask(kD);
        for (int j = 0; j < kD; ++j) mask[j] = rng.uniform() < 0.5;
        ms.push_back(message("v" + std::to_string(i), random_chunk(rng, std::exp(4.0 * rng.normal())), mask));
      }
      ws.push_back(rng.uniform() < 0.1 ? 0.0 : rng.uniform());
    }
    double live_weight = 0.0;
    bool any_live = false;
    for (int i = 0; i < n; ++i)
      if (!ms[i].is_none()) {
        any_live = true;
        live_weight += ws[i];
      }
    if (!any_live) {
      ASSERT_FALSE(aggregate(ms, ws).has_value());
      continue;
    }
    if (live_weight == 0.0) {
      ASSERT_THROW(aggregate(ms, ws), Error);
      continue;
    }
    const auto out = aggregate(ms, ws);
    for (int j = 0; j < kD; ++j) {
      bool governed = false;
      for (int i = 0; i < n; ++i) governed |= !ms[i].is_none() && ms[i].mask[j] && ws[i] > 0.0;
      ASSERT_EQ(out->mask[j], governed);
      for (int t = 0; t < kH; ++t) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i = 0; i < n; ++i) {
          if (ms[i].is_none() || ws[i] == 0.0 || (governed && !ms[i].mask[j])) continue;
          lo = std::min(lo, ms[i].reference->at(t, j));
          hi = std::max(hi, ms[i].reference->at(t, j));
        }
        ASSERT_GE(out->reference.at(t, j), lo);
        ASSERT_LE(out->reference.at(t, j), hi);
      }
    }
  }
}

TEST(Aggregate, EqualWeightFullMaskFusionIsTheMidpoint) {
  Rng rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_chunk(rng, 10.0);
    const auto b = random_chunk(rng, 10.0);
    const auto out = aggregate({message("a", a, {true, true, true}), message("b", b, {true, true, true})}, {0.5, 0.5});
    ASSERT_LT((out->reference.values - 0.5 * (a.values + b.values)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Aggregate, RejectsBadInputs) {
  Rng rng(11);
  const auto m = message("a", random_chunk(rng), {true, true, true});
  EXPECT_THROW(aggregate({m}, {}), Error);
  EXPECT_THROW(aggregate({m}, {-1.0}), Error);
  EXPECT_THROW(aggregate({m}, {std::nan("")}), Error);
  EXPECT_THROW(aggregate({m}, {0.0}), Error);
  auto bad = m;
  bad.mask = {true};
  EXPECT_THROW(aggregate({m, bad}, {1.0, 1.0}), Error);
  auto shape = message("b", ActionChunk(kH + 1, kD), {true, true, true});
  EXPECT_THROW(aggregate({m, shape}, {1.0, 1.0}), Error);
  EXPECT_FALSE(aggregate({VerifierMessage::none("a", "")}, {1.0}).has_value());
}

TEST(Pivot, FarthestPointSubsetIsMoreDiverseThanRandomSubsets) {
  Rng rng(12);
  std::vector<ActionChunk> cands;
  for (int i = 0; i < 40; ++i) {
    ActionChunk c(kH, kD);
    const double side = i % 4 == 0 ? -1.0 : 1.0;
    for (int t = 0; t < kH; ++t) {
      c.at(t, 0) = side + 0.2 * rng.normal();
      c.at(t, 1) = 1.0 + 0.2 * rng.normal();
      c.at(t, 2) = 1.0;
    }
    cands.push_back(c);
  }
  const int k = 5;
  const double chosen = min_pairwise(cands, select_diverse_indices(cands, k));
  std::vector<double> base;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> all(cands.size());
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < k; ++i) std::swap(all[i], all[i + rng.bits() % (all.size() - i)]);
    base.push_back(min_pairwise(cands, std::vector<int>(all.begin(), all.begin() + k)));
  }
  std::sort(base.begin(), base.end());
  EXPECT_GT(chosen, base[950]);
}

TEST(Pivot, SelectingAsManyAsAvailableTakesEveryCandidate) {
  Rng rng(13);
  std::vector<ActionChunk> cands;
  for (int i = 0; i < 5; ++i) cands.push_back(random_chunk(rng));
  auto idx = select_diverse_indices(cands, 5);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_THROW(select_diverse_indices(cands, 6), Error);
  EXPECT_THROW(select_diverse_indices(cands, -1), Error);
  EXPECT_TRUE(select_diverse_indices(cands, 0).empty());
}

TEST(Pivot, DisplayPerturbationLeavesChunksAlone) {
  Rng data(14);
  std::vector<ActionChunk> cands;
  for (int i = 0; i < 8; ++i) cands.push_back(random_chunk(data));
  Rng a(1), b(1);
  const auto plain = pivot_select_diverse(cands, 4, 0.0, a);
  const auto noisy = pivot_select_diverse(cands, 4, 0.05, b);
  ASSERT_EQ(plain.size(), noisy.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_EQ(noisy[i].id, color_label(i));
    EXPECT_EQ(noisy[i].source_index, plain[i].source_index);
    EXPECT_EQ(noisy[i].chunk.values, cands[noisy[i].source_index].values);
    EXPECT_EQ(plain[i].rendered_path, render_path(plain[i].chunk, {}));
    EXPECT_EQ(noisy[i].rendered_path.front(), plain[i].rendered_path.front());
    EXPECT_NE(noisy[i].rendered_path.back(), plain[i].rendered_path.back());
  }
  Rng c(1);
  EXPECT_THROW(pivot_select_diverse(cands, 4, -0.1, c), Error);
}

TEST(Pivot, ScriptedChoiceSelectsTheLabelledChunk) {
  Rng rng(15);
  const std::vector<ActionChunk> cands{random_chunk(rng), random_chunk(rng), random_chunk(rng)};
  const auto req = request_with(cands);
  const auto m = pivot_verify(req, *scripted({"Thinking... {\"reasoning\": \"clear\", \"chosen_trajectory\": \" Red \"}"}));
  ASSERT_EQ(m.kind, MessageKind::trajectory_select);
  EXPECT_EQ(m.choice, "red");
  EXPECT_EQ(m.reference->values, req.candidates[0].chunk.values);
  EXPECT_EQ(m.mask, (DimMask{true, true, true}));
  EXPECT_EQ(m.rationale, "clear");

  EXPECT_TRUE(pivot_verify(req, *scripted({R"({"reasoning": "all bad", "chosen_trajectory": "none"})"})).is_none());
}

TEST(Pivot, ThreeUnusableRepliesGiveNone) {
  Rng rng(16);
  const auto req = request_with({random_chunk(rng), random_chunk(rng)});
  std::shared_ptr<vlm::ScriptedBackend> backend;
  const auto client = scripted({"no json here", R"({"chosen_trajectory": "violet"})", R"({"chosen_trajectory": 3})"}, &backend);
  const auto m = pivot_verify(req, *client);
  EXPECT_TRUE(m.is_none());
  EXPECT_EQ(backend->calls(), 3);
  EXPECT_NE(m.rationale.find("3 attempts"), std::string::npos);

  std::shared_ptr<vlm::ScriptedBackend> second;
  const auto recovering = scripted({"garbage", R"({"chosen_trajectory": "orange"})"}, &second);
  EXPECT_EQ(pivot_verify(req, *recovering).choice, "orange");
  EXPECT_EQ(second->calls(), 2);
  EXPECT_THROW(pivot_verify(req.without_candidates(), *recovering), Error);
}

TEST(Pivot, FailingBackendGivesNone) {
  Rng rng(17);
  const auto req = request_with({random_chunk(rng)});
  vlm::ClientConfig cfg;
  cfg.backoff_initial_s = 0.0;
  cfg.max_retries = 0;
  vlm::VlmClient client(std::make_shared<vlm::FailingBackend>(), cfg);
  const auto m = pivot_verify(req, client);
  EXPECT_TRUE(m.is_none());
  EXPECT_NE(m.rationale.find("backend unavailable"), std::string::npos);
}

TEST(Primitive, NudgeNamesMapToVocabularyTemplates) {
  const auto vocab = nudge_vocabulary(kH, 0.8);
  VerifierRequest req;
  req.horizon = kH;
  req.dims = kD;
  const auto m = primitive_verify(req, vocab, *scripted({R"({"reasoning": "drifted", "chosen_trajectory": "nudge left", "gripper_state": "close"})"}));
  ASSERT_EQ(m.kind, MessageKind::primitive_select);
  EXPECT_EQ(m.choice, "Nudge Left");
  EXPECT_EQ(m.mask, (DimMask{true, true, false}));
  for (int t = 0; t < kH; ++t) {
    EXPECT_EQ(m.reference->at(t, 0), -0.8);
    EXPECT_EQ(m.reference->at(t, 1), 0.0);
  }
  EXPECT_TRUE(primitive_verify(req, vocab, *scripted({R"({"chosen_trajectory": "None"})"})).is_none());
  const auto unknown = primitive_verify(req, vocab, *scripted({R"({"chosen_trajectory": "Jump"})"}));
  EXPECT_TRUE(unknown.is_none());
  EXPECT_NE(unknown.rationale.find("Jump"), std::string::npos);
  EXPECT_THROW(primitive_verify(req, PrimitiveVocabulary{}, *scripted({"{}"})), Error);
}

TEST(Primitive, BaseMotionGovernsOnlyNonNullFields) {
  const auto vocab = nudge_vocabulary(kH);
  VerifierRequest req;
  req.horizon = kH;
  req.dims = kD;
  const auto m = primitive_verify(req, vocab, *scripted({R"({"reasoning": "go", "action": {"move": 1, "rotate": null, "grip": -1}})"}),
                                  PrimitiveSchema::base_motion);
  ASSERT_EQ(m.kind, MessageKind::primitive_select);
  EXPECT_EQ(m.mask, (DimMask{false, true, true}));
  for (int t = 0; t < kH; ++t) {
    EXPECT_EQ(m.reference->at(t, 1), 1.0);
    EXPECT_EQ(m.reference->at(t, 2), 1.0);
  }
  const auto turn = interpret_primitive_reply(json::parse(R"({"action": {"move": null, "rotate": 1, "grip": 1}})"), vocab, kH, "p");
  EXPECT_EQ(turn->mask, (DimMask{true, false, true}));
  EXPECT_EQ(turn->reference->at(0, 0), -1.0);
  EXPECT_EQ(turn->reference->at(0, 2), -1.0);

  const auto idle = primitive_verify(req, vocab, *scripted({R"({"action": {"move": null, "rotate": null, "grip": null}})"}),
                                     PrimitiveSchema::base_motion);
  EXPECT_TRUE(idle.is_none());
  EXPECT_FALSE(interpret_primitive_reply(json::parse(R"({"action": {"move": "fast"}})"), vocab, kH, "p").has_value());
  EXPECT_FALSE(interpret_primitive_reply(json::parse(R"({"reasoning": "?"})"), vocab, kH, "p").has_value());
}

TEST(Primitive, RejectsRequestsWithCandidates) {
  Rng rng(18);
  EXPECT_THROW(primitive_verify(request_with({random_chunk(rng)}), nudge_vocabulary(kH), *scripted({"{}"})), Error);
}

TEST(Primitive, CompletionFillsUngovernedDims) {
  const auto vocab = nudge_vocabulary(kH);
  sim::WorldState s;
  s.gripper = 1.0;
  const auto c = complete_primitive(*vocab.find("Nudge Forward"), s);
  for (int t = 0; t < kH; ++t) {
    EXPECT_EQ(c.at(t, 1), 1.0);
    EXPECT_EQ(c.at(t, 2), 1.0);
  }
  const auto g = complete_primitive(*vocab.find("Gripper Open"), s);
  EXPECT_EQ(g.at(0, 0), 0.0);
  EXPECT_EQ(g.at(0, 2), -1.0);
  PrimitiveVocabulary v;
  v.add(*vocab.find("Retreat"));
  EXPECT_THROW(v.add(*vocab.find("Retreat")), Error);
  EXPECT_THROW(v.add({"short", ActionChunk(kH - 1, kD), {true, true, true}}), Error);
}

TEST(Oracle, PivotPicksTheClosestCollisionFreeCandidate) {
  const auto spec = open_field();
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    auto state = sim::reset(spec, trial);
    std::vector<ActionChunk> cands;
    for (int i = 0; i < 6; ++i) cands.push_back(random_chunk(rng, 0.7));
    const auto req = request_with(cands);
    const auto m = oracle_verify(req, {&spec, &state}, OracleMode::pivot);
    const double now = (state.agent - oracle_target(state)).norm();
    int best = -1;
    double best_d = now;
    for (std::size_t i = 0; i < req.candidates.size(); ++i) {
      const auto out = simulate_chunk(spec, state, req.candidates[i].chunk);
      if (out.new_collisions == 0 && out.terminal_distance < best_d) {
        best_d = out.terminal_distance;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) {
      EXPECT_TRUE(m.is_none());
    } else {
      EXPECT_EQ(m.choice, req.candidates[best].id);
      EXPECT_EQ(m.reference->values, req.candidates[best].chunk.values);
    }
    EXPECT_EQ(oracle_verify(req, {&spec, &state}, OracleMode::pivot).choice, m.choice);
  }
}

TEST(Oracle, PivotAbstainsWhenEveryCandidateMovesAway) {
  const auto spec = open_field();
  auto state = sim::reset(spec, 0);
  ActionChunk away(kH, kD);
  for (int t = 0; t < kH; ++t) away.at(t, 1) = -1.0;
  const auto m = oracle_verify(request_with({away}), {&spec, &state}, OracleMode::pivot);
  EXPECT_TRUE(m.is_none());
  EXPECT_THROW(oracle_verify(request_with({away}), {}, OracleMode::pivot), Error);
}

TEST(Oracle, PrimitiveNudgesTowardTheTarget) {
  auto spec = open_field();
  spec.object_start = Vec2(-0.5, -1.0);
  auto state = sim::reset(spec, 0);
  const auto vocab = nudge_vocabulary(kH);
  VerifierRequest req;
  const auto m = oracle_verify(req, {&spec, &state}, OracleMode::primitive, &vocab);
  EXPECT_EQ(m.choice, "Nudge Left");
  spec.object_start = Vec2(0.0, -0.5);
  state = sim::reset(spec, 0);
  EXPECT_EQ(oracle_verify(req, {&spec, &state}, OracleMode::primitive, &vocab).choice, "Nudge Forward");
  EXPECT_THROW(oracle_verify(req, {&spec, &state}, OracleMode::primitive, nullptr), Error);
}

TEST(Verifier, AbstainingVerifierAlwaysReturnsNone) {
  AbstainingVerifier v("quiet");
  EXPECT_FALSE(v.wants_candidates());
  const auto m = v.verify({}, {});
  EXPECT_TRUE(m.is_none());
  EXPECT_EQ(m.verifier_id, "quiet");
  EXPECT_TRUE(OracleVerifier("o", OracleMode::pivot).wants_candidates());
  EXPECT_FALSE(OracleVerifier("o", OracleMode::primitive, nudge_vocabulary(kH)).wants_candidates());
}

TEST(Prompts, TemplatesRenderWithEveryPlaceholderFilled) {
  Rng rng(20);
  auto req = request_with({random_chunk(rng), random_chunk(rng)});
  req.scene.obstacles = {{Vec2(0.0, 0.05), 0.3}};
  req.image_data_url = "data:image/png;base64,AAAA";
  vlm::VlmClient client(std::make_shared<vlm::FailingBackend>(), {});
  const auto pivot = build_pivot_request(req, client).messages.at(0);
  ASSERT_EQ(pivot.content.size(), 2u);
  const std::string& text = pivot.content[0].text;
  EXPECT_EQ(text.find("{{"), std::string::npos);
  EXPECT_NE(text.find("\"chosen_trajectory\""), std::string::npos);
  EXPECT_NE(text.find("\"red\", \"orange\""), std::string::npos);
  EXPECT_NE(text.find(req.instruction), std::string::npos);

  const auto plain = req.without_candidates();
  const auto nudge = build_primitive_request(plain, nudge_vocabulary(kH), PrimitiveSchema::nudge, client);
  EXPECT_NE(nudge.messages[0].content[0].text.find("\"Gripper Close\""), std::string::npos);
  EXPECT_NE(nudge.messages[0].content[0].text.find("\"gripper_state\""), std::string::npos);
  const auto base = build_primitive_request(plain, {}, PrimitiveSchema::base_motion, client);
  for (const char* key : {"\"move\"", "\"rotate\"", "\"grip\"", "\"action\""})
    EXPECT_NE(base.messages[0].content[0].text.find(key), std::string::npos) << key;
}

TEST(Prompts, RenderingRejectsMissingValues) {
  EXPECT_EQ(render_template("a {{X}} b {{X}}", {{"X", "1"}}), "a 1 b 1");
  EXPECT_THROW(render_template("a {{X}} {{Y}}", {{"X", "1"}}), Error);
  EXPECT_THROW(render_template("a {{X", {{"X", "1"}}), Error);
  EXPECT_THROW(render_template(load_prompt_template("pivot"), {{"TASK_DESCRIPTION", "t"}}), Error);
  EXPECT_THROW(load_prompt_template("does_not_exist"), Error);
}
