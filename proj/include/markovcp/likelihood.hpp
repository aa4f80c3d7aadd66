#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "markovcp/markov.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

struct RankedCandidate {
  StateSequence forecast;
  double mass = 0.0;
};

/// The positive-mass forecast universe under a calibration-estimated matrix,
/// ordered by descending mass with exact ties broken uniformly at random.
/// Zero-mass candidates never enter the ranking.
struct RankedCandidates {
  std::vector<RankedCandidate> entries;
  std::vector<double> cumulative;  // running mass, same length as entries

  double total_mass() const noexcept { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Ranks all length-`horizon` forecasts with positive mass under the matrix
/// estimated from the calibration sequence alone. Throws when the last
/// calibration state has an unobserved row (no conditional distribution) or
/// when the positive-mass support exceeds `support_cap`.
RankedCandidates rank_candidates(const StateSequence& calibration, int horizon,
                                 const StateSpace& space, std::uint64_t seed,
                                 std::uint64_t support_cap = 1'048'576);

struct LikelihoodPredictionSet {
  std::vector<RankedCandidate> members;
  double attained_mass = 0.0;
  std::size_t k = 0;
  /// Requested coverage exceeded the total rankable mass; members then hold
  /// the full support.
  bool mass_deficit = false;
  /// Randomized variant only: the draw removed the single member.
  bool emptied = false;
};

/// Highest-density prefix: the smallest K whose cumulative mass reaches
/// 1 - alpha. Accepts alpha = 0 as the full-support endpoint.
LikelihoodPredictionSet hdr_set(const RankedCandidates& ranked, double alpha);

/// Prefix length K of hdr_set without materializing the members. Sets
/// *deficit when the full support cannot reach 1 - alpha.
std::size_t hdr_prefix_size(const RankedCandidates& ranked, double alpha,
                            bool* deficit = nullptr);

/// Prefix length of randomized_hdr_set (K, K-1, or the full support under a
/// mass deficit) without materializing the members.
std::size_t randomized_prefix_size(const RankedCandidates& ranked, double alpha, double u_star);

/// Randomized variant: keeps the K-th ranked candidate only when
/// u_star <= (1 - alpha - mass of the first K-1) / mass of the K-th, which
/// makes the expected attained mass exactly 1 - alpha.
LikelihoodPredictionSet randomized_hdr_set(const RankedCandidates& ranked, double alpha,
                                           double u_star);

/// Position of a forecast in the ranking, if it has positive mass.
std::optional<std::size_t> rank_of(const RankedCandidates& ranked, const StateSequence& forecast);

}  // namespace markovcp
