#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "markovcp/iblocks.hpp"
#include "markovcp/markov.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

/// How the predicted probability of forecast-window states is read off the
/// estimated matrix. OneStep multiplies consecutive transitions; JStep
/// conditions every term on the state at the forecast origin through the
/// j-step matrix power.
enum class ScoreMode { OneStep, JStep };

struct ConformalConfig {
  double alpha = 0.2;
  int horizon = 6;
  int max_permutations = 5000;
  ScoreMode score_mode = ScoreMode::OneStep;
  /// Append an artificial post-horizon anchor state to the augmented
  /// sequence. Restores efficiency on single-state calibration data at the
  /// cost of conditioning the set on that anchor.
  bool plus_one = false;
  int plus_one_state = 1;
  std::uint64_t seed = 0;
  std::uint64_t enumeration_cap = 1'000'000;
  int threads = 1;
};

struct ScoredCandidate {
  StateSequence forecast;
  double p_value = 0.0;
  double identity_score = 0.0;
  std::int64_t num_permutations = 0;
  std::int64_t tie_count = 0;
};

struct ConformalPredictionSet {
  double level = 0.0;  // 1 - alpha
  std::uint64_t universe_size = 0;
  /// Candidates with p-value > alpha, in lexicographic forecast order.
  std::vector<ScoredCandidate> members;
  /// Every enumerated candidate, in lexicographic forecast order.
  std::vector<ScoredCandidate> scored;
};

/// Nonconformity of a (possibly permuted) augmented sequence: one minus the
/// average predicted probability of the T1 forecast-window states, clamped to
/// [0,1]. `permuted` must hold at least calibration_length + horizon states.
double nonconformity_score(const StateSequence& permuted, int calibration_length, int horizon,
                           const TransitionMatrix& matrix, ScoreMode mode);

/// Randomized permutation p-value for one candidate forecast. The augmented
/// sequence is calibration + candidate (+ the plus-one anchor when enabled);
/// the matrix is re-estimated from it, the identity arrangement is scored
/// once, and ties share a single uniform draw. The identity belongs to the
/// compared sample whether the group is enumerated or sampled, so the
/// p-value is almost surely positive. Deterministic given the config; the
/// candidate's lexicographic index selects its random substream.
ScoredCandidate p_value(const StateSequence& candidate, const StateSequence& calibration,
                        const ConformalConfig& config, const StateSpace& space);

/// Scores every candidate in the m^horizon universe and keeps those with
/// p-value > alpha. Throws ResourceError when the universe exceeds
/// config.enumeration_cap.
ConformalPredictionSet conformal_prediction_set(const StateSequence& calibration,
                                                const ConformalConfig& config,
                                                const StateSpace& space);

/// Streaming variant: calls sink(index, scored) for every candidate without
/// retaining the enumeration. The sink runs on worker threads and must be
/// thread-safe; per-candidate results are independent of the thread count.
void scan_conformal_candidates(
    const StateSequence& calibration, const ConformalConfig& config, const StateSpace& space,
    const std::function<void(std::uint64_t, const ScoredCandidate&)>& sink);

/// Number of length-`horizon` sequences over the alphabet; throws
/// ResourceError if it exceeds `cap`.
std::uint64_t candidate_universe_size(const StateSpace& space, int horizon, std::uint64_t cap);

/// Lexicographic enumeration of the candidate universe (step 1 varies
/// slowest). candidate_at(0, ...) is the all-ones sequence.
StateSequence candidate_at(std::uint64_t index, int horizon, const StateSpace& space);
std::uint64_t candidate_index(const StateSequence& forecast, const StateSpace& space);

}  // namespace markovcp
