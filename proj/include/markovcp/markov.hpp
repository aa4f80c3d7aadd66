#pragma once

#include <cstdint>
#include <vector>

#include "markovcp/rng.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

/// Row-stochastic transition matrix plus the per-row visit counts recorded by
/// the estimator. Rows never observed in the data are stored as uniform rows
/// and flagged through a zero visit count so accidental use is detectable.
/// Immutable after construction.
class TransitionMatrix {
 public:
  /// Build from explicit rows (ground-truth matrices, fixture files).
  /// Validates row-stochasticity; all rows are marked as specified.
  static TransitionMatrix from_rows(const std::vector<std::vector<double>>& rows);

  /// Build from raw estimates. Visited rows must sum to 1 within 1e-12;
  /// rows with zero visits must be uniform.
  TransitionMatrix(int m, std::vector<double> probs, std::vector<std::int64_t> row_visits);

  int size() const noexcept { return m_; }

  /// Transition probability, 1-based labels.
  double prob(int from, int to) const noexcept {
    return probs_[static_cast<std::size_t>(from - 1) * m_ + (to - 1)];
  }

  std::int64_t row_visits(int from) const noexcept {
    return visits_[static_cast<std::size_t>(from - 1)];
  }

  bool row_unvisited(int from) const noexcept { return row_visits(from) == 0; }

  bool any_row_unvisited() const noexcept;

  /// Row-major m*m storage.
  const std::vector<double>& data() const noexcept { return probs_; }
  const std::vector<std::int64_t>& visits() const noexcept { return visits_; }

 private:
  int m_ = 0;
  std::vector<double> probs_;
  std::vector<std::int64_t> visits_;
};

/// Maximum-likelihood transition estimate from consecutive pairs:
/// prob(i,j) = #{t : X_t = i and X_{t+1} = j} / #{t < len : X_t = i}.
/// Requires seq length >= 2. Unvisited rows become flagged uniform rows.
TransitionMatrix estimate_transition_matrix(const StateSequence& seq, const StateSpace& space);

/// Log probability of stepping through `forecast` starting from `last_state`.
/// Returns -infinity when any transition factor is zero.
double sequence_log_probability(const StateSequence& forecast, int last_state,
                                const TransitionMatrix& matrix);

/// Log probability of the transitions inside a full path (no initial term).
/// Returns -infinity when any factor is zero.
double path_log_probability(const StateSequence& path, const TransitionMatrix& matrix);

/// init * P^steps, renormalized. Computed by iterated vector-matrix products.
InitialDistribution matrix_power_distribution(const InitialDistribution& init,
                                              const TransitionMatrix& matrix, int steps);

/// Dense j-step transition matrices [P^0, P^1, ..., P^max_power], row-major.
std::vector<std::vector<double>> transition_powers(const TransitionMatrix& matrix, int max_power);

/// Simulate a chain of `length` states: X_1 ~ init, X_{t+1} ~ row X_t.
/// Deterministic given the seed. Throws if the walk reaches a state whose
/// row was never observed by the estimator.
StateSequence simulate_chain(const InitialDistribution& init, const TransitionMatrix& matrix,
                             int length, std::uint64_t seed);
StateSequence simulate_chain(const InitialDistribution& init, const TransitionMatrix& matrix,
                             int length, Rng& rng);

}  // namespace markovcp
