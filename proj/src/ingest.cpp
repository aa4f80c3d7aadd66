#include "markovcp/ingest.hpp"

#include <algorithm>
#include <string>

#include "markovcp/errors.hpp"

namespace markovcp {

LabeledSeries label_states(const CountrySeries& series) {
  if (series.fatalities.empty()) {
    throw ValidationError("country " + series.country_id + " has no observations");
  }
  LabeledSeries labeled;
  labeled.country_id = series.country_id;
  labeled.start = series.start;
  labeled.states.reserve(series.fatalities.size());
  labeled.states.push_back(series.fatalities.front() == 0 ? 1 : 3);
  for (std::size_t t = 1; t < series.fatalities.size(); ++t) {
    const bool prev = series.fatalities[t - 1] > 0;
    const bool cur = series.fatalities[t] > 0;
    int state;
    if (!prev && !cur) {
      state = 1;
    } else if (!prev && cur) {
      state = 2;
    } else if (prev && cur) {
      state = 3;
    } else {
      state = 4;
    }
    labeled.states.push_back(state);
  }
  return labeled;
}

CleaningResult clean_corpus(std::vector<LabeledSeries> corpus,
                            const CleaningThresholds& thresholds) {
  CleaningResult result;
  for (LabeledSeries& series : corpus) {
    const auto n = static_cast<double>(series.states.size());
    const auto peace = static_cast<double>(
        std::count(series.states.begin(), series.states.end(), kPeacetime));
    const auto nonpeace = static_cast<int>(series.states.size()) - static_cast<int>(peace);
    const bool single_state =
        std::adjacent_find(series.states.begin(), series.states.end(), std::not_equal_to<>()) ==
        series.states.end();

    if (nonpeace < thresholds.min_nonpeace) {
      result.excluded.push_back({series.country_id, "min_nonpeace"});
    } else if (peace / n > thresholds.max_peace_proportion) {
      result.excluded.push_back({series.country_id, "peace_proportion"});
    } else if (single_state) {
      result.excluded.push_back({series.country_id, "single_state"});
    } else {
      result.retained.push_back(std::move(series));
    }
  }
  return result;
}

PopulationEstimate derive_population_matrix(const std::vector<LabeledSeries>& retained) {
  if (retained.empty()) throw ValidationError("no retained countries to average over");
  const StateSpace space(kNumConflictStates);
  const int m = space.size;

  std::vector<double> sums(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<int> contributors(static_cast<std::size_t>(m), 0);
  std::vector<std::int64_t> visits(static_cast<std::size_t>(m), 0);

  for (const LabeledSeries& series : retained) {
    if (series.states.size() < 2) {
      throw ValidationError("country " + series.country_id +
                            " has fewer than 2 observations; cannot estimate transitions");
    }
    const TransitionMatrix estimate = estimate_transition_matrix(series.states, space);
    for (int i = 1; i <= m; ++i) {
      if (estimate.row_unvisited(i)) continue;
      ++contributors[static_cast<std::size_t>(i - 1)];
      visits[static_cast<std::size_t>(i - 1)] += estimate.row_visits(i);
      for (int j = 1; j <= m; ++j) {
        sums[static_cast<std::size_t>(i - 1) * m + (j - 1)] += estimate.prob(i, j);
      }
    }
  }

  std::vector<double> probs(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    if (contributors[static_cast<std::size_t>(i)] == 0) {
      throw ValidationError("state " + std::to_string(i + 1) +
                            " was never visited in any retained country");
    }
    double row_sum = 0.0;
    for (int j = 0; j < m; ++j) row_sum += sums[static_cast<std::size_t>(i) * m + j];
    for (int j = 0; j < m; ++j) {
      probs[static_cast<std::size_t>(i) * m + j] = sums[static_cast<std::size_t>(i) * m + j] / row_sum;
    }
  }

  return PopulationEstimate{TransitionMatrix(m, std::move(probs), std::move(visits)),
                            InitialDistribution::uniform(m)};
}

}  // namespace markovcp
