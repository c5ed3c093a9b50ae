#pragma once

#include "eve/sim/world.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eve::sim {

enum class Category {
  straightforward_success,
  success_then_collision,
  winding_success,
  cant_reach,
  cant_grasp,
  drop_failure,
  place_in_goal_failure,
  excessive_collision,
  too_slow
};

inline constexpr std::array<Category, 9> kAllCategories{
    Category::straightforward_success, Category::success_then_collision, Category::winding_success,
    Category::cant_reach,              Category::cant_grasp,             Category::drop_failure,
    Category::place_in_goal_failure,   Category::excessive_collision,    Category::too_slow};

inline std::string to_string(Category c) {
  switch (c) {
    case Category::straightforward_success: return "straightforward_success";
    case Category::success_then_collision: return "success_then_collision";
    case Category::winding_success: return "winding_success";
    case Category::cant_reach: return "cant_reach";
    case Category::cant_grasp: return "cant_grasp";
    case Category::drop_failure: return "drop_failure";
    case Category::place_in_goal_failure: return "place_in_goal_failure";
    case Category::excessive_collision: return "excessive_collision";
    case Category::too_slow: return "too_slow";
  }
  return "too_slow";
}

inline Category category_from_string(std::string_view s) {
  for (Category c : kAllCategories)
    if (to_string(c) == s) return c;
  throw Error("unknown category '" + std::string(s) + "'");
}

inline bool is_success(Category c) {
  return c == Category::straightforward_success || c == Category::success_then_collision ||
         c == Category::winding_success;
}

struct EventTrace {
  std::vector<EventRecord> events;

  void append(Event e, int step) {
    if (!events.empty() && events.back().step > step) throw Error("EventTrace: events out of step order");
    events.push_back({e, step});
  }

  std::vector<Event> sequence() const {
    std::vector<Event> out;
    out.reserve(events.size());
    for (const auto& r : events) out.push_back(r.event);
    return out;
  }
};

namespace detail {
inline std::optional<std::size_t> first_index(const std::vector<Event>& seq, Event e) {
  auto it = std::find(seq.begin(), seq.end(), e);
  if (it == seq.end()) return std::nullopt;
  return static_cast<std::size_t>(it - seq.begin());
}
inline std::optional<std::size_t> last_index(const std::vector<Event>& seq, Event e) {
  auto it = std::find(seq.rbegin(), seq.rend(), e);
  if (it == seq.rend()) return std::nullopt;
  return static_cast<std::size_t>(seq.rend() - it - 1);
}
}  // namespace detail

// Total over event sequences: every sequence lands in exactly one category.
inline Category categorize(const std::vector<Event>& seq) {
  using detail::first_index;
  using detail::last_index;
  const bool excessive = first_index(seq, Event::excessive_collision).has_value();

  if (auto s = first_index(seq, Event::success)) {
    if (excessive) return Category::success_then_collision;
    int grasps = 0;
    for (std::size_t i = 0; i < *s; ++i) {
      const Event e = seq[i];
      if (e == Event::dropped || e == Event::released_out_goal || e == Event::left_goal)
        return Category::winding_success;
      if (e == Event::grasped && ++grasps > 1) return Category::winding_success;
    }
    return Category::straightforward_success;
  }

  if (excessive) return Category::excessive_collision;
  if (seq.empty()) return Category::cant_reach;
  const auto grasped = last_index(seq, Event::grasped);
  const bool ever_released = first_index(seq, Event::dropped) || first_index(seq, Event::released_at_goal) ||
                             first_index(seq, Event::released_out_goal);
  if (first_index(seq, Event::contact) && !grasped && !ever_released) return Category::cant_grasp;

  const auto rel_goal = last_index(seq, Event::released_at_goal);
  const auto left = last_index(seq, Event::left_goal);
  const auto at = last_index(seq, Event::at_goal);
  if (rel_goal && left && *left > *rel_goal && (!at || *left > *at)) return Category::place_in_goal_failure;

  std::optional<std::size_t> drop = last_index(seq, Event::dropped);
  if (auto out = last_index(seq, Event::released_out_goal); out && (!drop || *out > *drop)) drop = out;
  if (drop && (!grasped || *drop > *grasped)) return Category::drop_failure;
  return Category::too_slow;
}

inline Category categorize(const EventTrace& trace) { return categorize(trace.sequence()); }

// The event vocabulary already encodes the task kind, so the spec only
// matters for validation.
inline Category categorize(const EventTrace& trace, const TaskSpec& spec) {
  spec.validate();
  return categorize(trace.sequence());
}

}  // namespace eve::sim
