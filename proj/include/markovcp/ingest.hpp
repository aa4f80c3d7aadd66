#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "markovcp/markov.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

/// Calendar month with arithmetic over a contiguous index.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  int index() const noexcept { return year * 12 + (month - 1); }
  YearMonth next() const noexcept {
    return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1};
  }
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
  friend auto operator<=>(const YearMonth& a, const YearMonth& b) {
    return a.index() <=> b.index();
  }
};

/// Monthly fatality counts for one country over contiguous months.
struct CountrySeries {
  std::string country_id;
  YearMonth start;
  std::vector<std::int64_t> fatalities;

  YearMonth month_at(std::size_t idx) const noexcept {
    const int i = start.index() + static_cast<int>(idx);
    return YearMonth{i / 12, i % 12 + 1};
  }
};

/// Conflict-state labels for one country: 1 peacetime, 2 escalation, 3 war,
/// 4 deescalation.
struct LabeledSeries {
  std::string country_id;
  YearMonth start;
  StateSequence states;

  YearMonth month_at(std::size_t idx) const noexcept {
    const int i = start.index() + static_cast<int>(idx);
    return YearMonth{i / 12, i % 12 + 1};
  }
};

constexpr int kNumConflictStates = 4;
constexpr int kPeacetime = 1;

/// Allowed consecutive state pairs implied by the labeling rules.
constexpr std::array<std::array<int, 4>, 4> kAllowedTransitions{{
    {1, 1, 0, 0},
    {0, 0, 1, 1},
    {0, 0, 1, 1},
    {1, 1, 0, 0},
}};

/// Deterministic state labels from consecutive fatality counts:
/// (0,0) -> 1, (0,>0) -> 2, (>0,>0) -> 3, (>0,0) -> 4; the first month is 1
/// when zero and 3 otherwise.
LabeledSeries label_states(const CountrySeries& series);

struct CleaningThresholds {
  int min_nonpeace = 5;
  double max_peace_proportion = 0.99;
};

struct ExclusionRecord {
  std::string country_id;
  std::string rule_failed;  // min_nonpeace | peace_proportion | single_state
};

struct CleaningResult {
  std::vector<LabeledSeries> retained;
  std::vector<ExclusionRecord> excluded;
};

/// Keeps countries with enough non-peace observations, a peacetime share not
/// above the threshold, and more than one distinct state. The exclusion
/// report names the first failed rule, checked in that order.
CleaningResult clean_corpus(std::vector<LabeledSeries> corpus,
                            const CleaningThresholds& thresholds = {});

struct PopulationEstimate {
  TransitionMatrix matrix;
  InitialDistribution init;
};

/// Entrywise average of the per-country estimated transition matrices; each
/// row averages only over countries that visited it. The initial distribution
/// is uniform over the four states.
PopulationEstimate derive_population_matrix(const std::vector<LabeledSeries>& retained);

}  // namespace markovcp
