#pragma once

#include "eve/diffusion/mixture.hpp"
#include "eve/flow/flow.hpp"
#include "eve/sim/expert.hpp"
#include "eve/sim/world.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace eve::sim {

// Reference point the agent position is measured from when bucketing.
enum class Frame { world, object, goal, obstacle };

inline std::string to_string(Frame f) {
  switch (f) {
    case Frame::world: return "world";
    case Frame::object: return "object";
    case Frame::goal: return "goal";
    case Frame::obstacle: return "obstacle";
  }
  return "world";
}

inline Frame frame_from_string(std::string_view s) {
  if (s == "world") return Frame::world;
  if (s == "object") return Frame::object;
  if (s == "goal") return Frame::goal;
  if (s == "obstacle") return Frame::obstacle;
  throw Error("unknown frame '" + std::string(s) + "'");
}

struct EncoderConfig {
  double cell = 0.2;
  Frame approach_frame = Frame::object;
  Frame carry_frame = Frame::obstacle;
};

struct ObservationKey {
  Phase phase = Phase::approach;
  int ix = 0;
  int iy = 0;

  std::string str() const {
    return std::string(1, phase_letter(phase)) + ":" + std::to_string(ix) + ":" + std::to_string(iy);
  }
};

inline Phase phase_of(const WorldState& s) { return s.held ? Phase::carry : Phase::approach; }

inline ObservationKey encode(const EncoderConfig& config, const WorldState& s) {
  const Phase phase = phase_of(s);
  const Frame frame = phase == Phase::approach ? config.approach_frame : config.carry_frame;
  Vec2 anchor = Vec2::Zero();
  switch (frame) {
    case Frame::world: break;
    case Frame::object: anchor = s.object; break;
    case Frame::goal: anchor = s.goal; break;
    case Frame::obstacle:
      if (!s.obstacles.empty()) anchor = s.obstacles.front().center;
      break;
  }
  const Vec2 off = (s.agent - anchor) / config.cell;
  return {phase, static_cast<int>(std::floor(off.x())), static_cast<int>(std::floor(off.y()))};
}

struct PolicyLookup {
  std::string key;
  bool in_distribution = true;
};

// A fitted mixture per observation bucket, usable by both incorporators.
class BasePolicy {
 public:
  BasePolicy(std::shared_ptr<const diffusion::MixtureTable> table, EncoderConfig encoder, int horizon)
      : table_(std::move(table)), encoder_(encoder), horizon_(horizon), denoiser_(table_), field_(table_) {
    for (const auto& [key, m] : *table_) {
      ObservationKey k;
      char p = 0;
      if (std::sscanf(key.c_str(), "%c:%d:%d", &p, &k.ix, &k.iy) != 3) throw Error("BasePolicy: bad key " + key);
      known_[p].push_back({k.ix, k.iy, key});
    }
  }

  int horizon() const { return horizon_; }
  int dims() const { return kActionDims; }
  const EncoderConfig& encoder() const { return encoder_; }
  const diffusion::MixtureDenoiser& denoiser() const { return denoiser_; }
  const flow::MixtureVelocityField& field() const { return field_; }
  const diffusion::MixtureTable& table() const { return *table_; }
  std::shared_ptr<const diffusion::MixtureTable> shared_table() const { return table_; }

  // Unseen buckets fall back to the nearest seen bucket of the same phase
  // (squared cell distance, ties to the smaller key string).
  PolicyLookup lookup(const WorldState& s) const {
    const ObservationKey k = encode(encoder_, s);
    std::string key = k.str();
    if (table_->count(key)) return {key, true};
    auto it = known_.find(phase_letter(k.phase));
    if (it == known_.end()) {
      it = known_.begin();
      if (it == known_.end()) throw Error("BasePolicy: empty table");
    }
    long best = std::numeric_limits<long>::max();
    const std::string* pick = nullptr;
    for (const auto& e : it->second) {
      const long d = static_cast<long>(e.ix - k.ix) * (e.ix - k.ix) + static_cast<long>(e.iy - k.iy) * (e.iy - k.iy);
      if (d < best || (d == best && e.key < *pick)) {
        best = d;
        pick = &e.key;
      }
    }
    return {*pick, false};
  }

  // Log density of a clean chunk under the bucket's mixture.
  double log_likelihood(std::string_view key, const ActionChunk& chunk) const {
    return diffusion::noised_log_density(denoiser_.mixture(key), chunk.values, 1.0);
  }

 private:
  struct Known {
    int ix;
    int iy;
    std::string key;
  };
  std::shared_ptr<const diffusion::MixtureTable> table_;
  EncoderConfig encoder_;
  int horizon_;
  diffusion::MixtureDenoiser denoiser_;
  flow::MixtureVelocityField field_;
  std::map<char, std::vector<Known>> known_;
};

struct FitConfig {
  int num_modes = 2;
  int horizon = 16;
  double variance_floor = 1e-3;
  EncoderConfig encoder;
};

// First H actions from index t of a segment, padded past its end.
inline ActionChunk demo_chunk(const Demo& demo, const DemoSegment& seg, int t, int horizon) {
  ActionChunk c(horizon, kActionDims);
  for (int j = 0; j < horizon; ++j) {
    const int idx = t + j;
    const Vector& a = idx < seg.end ? demo.steps[idx].action : seg.pad;
    for (int d = 0; d < kActionDims; ++d) c.at(j, d) = a[d];
  }
  return c;
}

namespace detail {
struct Moments {
  double count = 0.0;
  Vector mean;
  Vector m2;

  void add(const Vector& x) {
    if (count == 0.0) {
      mean = Vector::Zero(x.size());
      m2 = Vector::Zero(x.size());
    }
    count += 1.0;
    const Vector delta = x - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(x - mean);
  }

  // Pooled moments (Chan et al. parallel update).
  void merge(const Moments& o) {
    const double n = count + o.count;
    const Vector delta = o.mean - mean;
    m2 += o.m2 + delta.cwiseProduct(delta) * (count * o.count / n);
    mean += delta * (o.count / n);
    count = n;
  }
};
}  // namespace detail

// Groups every demo chunk by (bucket, path class); each class becomes one
// diagonal Gaussian component. Buckets with more classes than num_modes
// have their closest class means merged.
inline BasePolicy fit_base_policy(const std::vector<Demo>& demos, const FitConfig& config) {
  if (config.num_modes < 1) throw Error("fit_base_policy: num_modes must be >= 1");
  if (config.horizon < 1) throw Error("fit_base_policy: horizon must be >= 1");
  std::map<std::string, std::map<std::string, detail::Moments>> groups;
  std::map<char, std::set<std::string>> classes_per_phase;
  for (const auto& demo : demos) {
    for (const auto& seg : demo.segments) {
      classes_per_phase[phase_letter(seg.phase)].insert(seg.path_class);
      for (int t = seg.begin; t < seg.end; ++t) {
        const std::string key = encode(config.encoder, demo.steps[t].state).str();
        groups[key][seg.path_class].add(demo_chunk(demo, seg, t, config.horizon).values);
      }
    }
  }
  if (groups.empty()) throw Error("fit_base_policy: no demonstration steps");
  std::size_t distinct = 0;
  for (const auto& [p, cls] : classes_per_phase) distinct = std::max(distinct, cls.size());
  if (distinct < static_cast<std::size_t>(config.num_modes)) {
    throw Error("fit_base_policy: requested " + std::to_string(config.num_modes) + " modes but demos contain only " +
                std::to_string(distinct) + " distinct path classes");
  }

  auto table = std::make_shared<diffusion::MixtureTable>();
  for (auto& [key, by_class] : groups) {
    std::vector<detail::Moments> comps;
    double total = 0.0;
    for (auto& [cls, m] : by_class) {
      comps.push_back(m);
      total += m.count;
    }
    while (comps.size() > static_cast<std::size_t>(config.num_modes)) {
      std::size_t bi = 0;
      std::size_t bj = 1;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < comps.size(); ++i)
        for (std::size_t j = i + 1; j < comps.size(); ++j) {
          const double d = (comps[i].mean - comps[j].mean).squaredNorm();
          if (d < bd) {
            bd = d;
            bi = i;
            bj = j;
          }
        }
      comps[bi].merge(comps[bj]);
      comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    diffusion::GaussianMixture mix;
    for (const auto& m : comps) {
      Vector var = m.m2 / m.count;
      var = var.cwiseMax(0.0).array() + config.variance_floor;
      mix.components.push_back({m.count / total, m.mean, var});
    }
    mix.normalize_weights();
    (*table)[key] = std::move(mix);
  }
  return BasePolicy(table, config.encoder, config.horizon);
}

inline std::vector<Demo> generate_demos(const TaskSpec& spec, int count, std::uint64_t seed_base,
                                        const ExpertConfig& config = {}) {
  TaskSpec train = spec;
  train.shift = ShiftSpec{};
  std::vector<Demo> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_demo(train, derive_seed(seed_base, {static_cast<std::uint64_t>(i)}), config));
  return out;
}

}  // namespace eve::sim
