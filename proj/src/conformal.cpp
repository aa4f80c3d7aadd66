#include "markovcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "markovcp/errors.hpp"
#include "markovcp/parallel.hpp"

namespace markovcp {

namespace {

constexpr double kScoreTolerance = 1e-12;

// Stream tags separating the per-candidate uniform draw from the permutation
// sampler, so the two are independent and order of use does not matter.
constexpr std::uint64_t kStreamTie = 0x7131'0001;
constexpr std::uint64_t kStreamPermutation = 0x7131'0002;

// Above this block count the group size dwarfs any sample size and sampled
// permutations are materialized lazily, suffix first (21! > 5e19).
constexpr int kLazyBlockThreshold = 21;

double score_from_terms(double term_sum, int horizon) {
  const double s = 1.0 - term_sum / horizon;
  return std::min(1.0, std::max(0.0, s));
}

// Scores block permutations of one augmented sequence by materializing only
// the forecast window (the last horizon+1 scored positions). Equivalent to
// apply_permutation followed by nonconformity_score, but O(window) per
// permutation instead of O(sequence).
class WindowScorer {
 public:
  WindowScorer(const IBlockDecomposition& dec, const TransitionMatrix& matrix,
               int calibration_length, int horizon, ScoreMode mode)
      : dec_(dec),
        matrix_(matrix),
        horizon_(horizon),
        mode_(mode),
        window_begin_(static_cast<std::size_t>(calibration_length) - 1),
        window_end_(static_cast<std::size_t>(calibration_length) + static_cast<std::size_t>(horizon)),
        window_(static_cast<std::size_t>(horizon) + 1, 0) {
    if (mode_ == ScoreMode::JStep) powers_ = transition_powers(matrix, horizon);
    cover_lo_ = std::max(window_begin_, dec.head_length());
    cover_hi_ = std::min(window_end_, dec.tail_start());
    // Window positions inside the head or tail never move.
    for (std::size_t p = window_begin_; p < std::min(window_end_, dec.head_length()); ++p) {
      window_[p - window_begin_] = dec.sequence[p];
    }
    for (std::size_t p = std::max(window_begin_, dec.tail_start()); p < window_end_; ++p) {
      window_[p - window_begin_] = dec.sequence[p];
    }
  }

  double identity_score() {
    for (std::size_t p = window_begin_; p < window_end_; ++p) {
      window_[p - window_begin_] = dec_.sequence[p];
    }
    return evaluate_window();
  }

  double score(const std::vector<std::uint32_t>& order) {
    std::size_t pos_end = dec_.tail_start();
    for (std::size_t k = order.size(); k-- > 0 && pos_end > cover_lo_;) {
      pos_end = place_block(order[k], pos_end);
    }
    return evaluate_window();
  }

  /// Draws a uniformly random permutation lazily, materializing only the
  /// trailing blocks needed to cover the window, and scores it. The pool is
  /// restored afterwards, so draws are independent and the stream advances
  /// only by the blocks actually placed.
  double sample_score(Rng& rng) {
    if (pool_.empty() && dec_.block_count() > 0) {
      pool_.resize(static_cast<std::size_t>(dec_.block_count()));
      for (std::size_t b = 0; b < pool_.size(); ++b) pool_[b] = static_cast<std::uint32_t>(b);
    }
    swaps_.clear();
    std::size_t pos_end = dec_.tail_start();
    std::size_t k = 0;
    const std::size_t d = pool_.size();
    while (pos_end > cover_lo_ && k < d) {
      const std::size_t j = d - 1 - k;
      const std::size_t r = static_cast<std::size_t>(rng.below(j + 1));
      std::swap(pool_[j], pool_[r]);
      swaps_.emplace_back(j, r);
      pos_end = place_block(pool_[j], pos_end);
      ++k;
    }
    for (auto it = swaps_.rbegin(); it != swaps_.rend(); ++it) {
      std::swap(pool_[it->first], pool_[it->second]);
    }
    return evaluate_window();
  }

 private:
  std::size_t place_block(std::uint32_t block, std::size_t pos_end) {
    const std::size_t start = dec_.starts[block];
    const std::size_t len = dec_.starts[block + 1] - start;
    const std::size_t pos_begin = pos_end - len;
    const std::size_t lo = std::max(pos_begin, cover_lo_);
    const std::size_t hi = std::min(pos_end, cover_hi_);
    for (std::size_t p = lo; p < hi; ++p) {
      window_[p - window_begin_] = dec_.sequence[start + (p - pos_begin)];
    }
    return pos_begin;
  }

  double evaluate_window() const {
    double total = 0.0;
    if (mode_ == ScoreMode::OneStep) {
      for (int j = 1; j <= horizon_; ++j) {
        total += matrix_.prob(window_[static_cast<std::size_t>(j) - 1],
                              window_[static_cast<std::size_t>(j)]);
      }
    } else {
      const int m = matrix_.size();
      const int origin = window_[0] - 1;
      for (int j = 1; j <= horizon_; ++j) {
        total += powers_[static_cast<std::size_t>(j)]
                        [static_cast<std::size_t>(origin) * m + (window_[static_cast<std::size_t>(j)] - 1)];
      }
    }
    return score_from_terms(total, horizon_);
  }

  const IBlockDecomposition& dec_;
  const TransitionMatrix& matrix_;
  int horizon_;
  ScoreMode mode_;
  std::size_t window_begin_;
  std::size_t window_end_;
  std::size_t cover_lo_ = 0;
  std::size_t cover_hi_ = 0;
  std::vector<int> window_;
  std::vector<std::vector<double>> powers_;
  std::vector<std::uint32_t> pool_;
  std::vector<std::pair<std::size_t, std::size_t>> swaps_;
};

ScoredCandidate score_candidate(const StateSequence& candidate, const StateSequence& calibration,
                                const ConformalConfig& config, const StateSpace& space,
                                std::uint64_t candidate_idx) {
  StateSequence augmented;
  augmented.reserve(calibration.size() + candidate.size() + 1);
  augmented.insert(augmented.end(), calibration.begin(), calibration.end());
  augmented.insert(augmented.end(), candidate.begin(), candidate.end());
  if (config.plus_one) {
    if (!space.contains(config.plus_one_state)) {
      throw ValidationError("plus-one state " + std::to_string(config.plus_one_state) +
                            " outside alphabet");
    }
    augmented.push_back(config.plus_one_state);
  }

  const TransitionMatrix matrix = estimate_transition_matrix(augmented, space);
  const int anchor = augmented.back();
  const int calibration_length = static_cast<int>(calibration.size());
  const IBlockDecomposition dec = decompose(std::move(augmented), anchor);

  WindowScorer scorer(dec, matrix, calibration_length, config.horizon, config.score_mode);
  const double identity = scorer.identity_score();

  const double u = Rng::from_stream(config.seed, {kStreamTie, candidate_idx}).uniform();
  Rng perm_rng = Rng::from_stream(config.seed, {kStreamPermutation, candidate_idx});

  std::int64_t greater = 0;
  std::int64_t ties = 0;
  std::int64_t total = 0;
  auto tally = [&](double s) {
    if (s > identity + kScoreTolerance) {
      ++greater;
    } else if (s >= identity - kScoreTolerance) {
      ++ties;
    }
    ++total;
  };

  const std::uint64_t n = static_cast<std::uint64_t>(config.max_permutations);
  if (permutation_group_fits(dec.block_count(), n)) {
    // the whole group, identity included
    for (const BlockPermutation& perm : sample_permutations(dec, n, perm_rng)) {
      tally(scorer.score(perm.order));
    }
  } else {
    // Sampled regime: the identity is a member of the sample by construction
    // and ties with itself, so the p-value stays strictly positive and the
    // target-1.0 endpoint covers exactly. The remaining n-1 draws are
    // uniform over the non-identity permutations.
    ++ties;
    ++total;
    if (n > 1) {
      if (dec.block_count() < kLazyBlockThreshold) {
        for (const BlockPermutation& perm : sample_permutations(dec, n - 1, perm_rng, true)) {
          tally(scorer.score(perm.order));
        }
      } else {
        for (std::uint64_t i = 0; i + 1 < n; ++i) tally(scorer.sample_score(perm_rng));
      }
    }
  }

  ScoredCandidate out;
  out.forecast = candidate;
  out.identity_score = identity;
  out.num_permutations = total;
  out.tie_count = ties;
  out.p_value = (static_cast<double>(greater) + u * static_cast<double>(ties)) /
                static_cast<double>(total);
  return out;
}

}  // namespace

double nonconformity_score(const StateSequence& permuted, int calibration_length, int horizon,
                           const TransitionMatrix& matrix, ScoreMode mode) {
  if (calibration_length < 1 || horizon < 1) {
    throw ValidationError("calibration length and horizon must be positive");
  }
  if (permuted.size() < static_cast<std::size_t>(calibration_length) + static_cast<std::size_t>(horizon)) {
    throw ValidationError("sequence shorter than calibration length plus horizon");
  }
  double total = 0.0;
  if (mode == ScoreMode::OneStep) {
    for (int j = 1; j <= horizon; ++j) {
      total += matrix.prob(permuted[static_cast<std::size_t>(calibration_length + j) - 2],
                           permuted[static_cast<std::size_t>(calibration_length + j) - 1]);
    }
  } else {
    const auto powers = transition_powers(matrix, horizon);
    const int m = matrix.size();
    const int origin = permuted[static_cast<std::size_t>(calibration_length) - 1] - 1;
    for (int j = 1; j <= horizon; ++j) {
      const int target = permuted[static_cast<std::size_t>(calibration_length + j) - 1] - 1;
      total += powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(origin) * m + target];
    }
  }
  return score_from_terms(total, horizon);
}

std::uint64_t candidate_universe_size(const StateSpace& space, int horizon, std::uint64_t cap) {
  if (horizon < 1) throw ValidationError("horizon must be positive");
  std::uint64_t total = 1;
  for (int t = 0; t < horizon; ++t) {
    if (total > cap / static_cast<std::uint64_t>(space.size)) {
      throw ResourceError("candidate universe " + std::to_string(space.size) + "^" +
                          std::to_string(horizon) + " exceeds the enumeration cap of " +
                          std::to_string(cap) + " candidates");
    }
    total *= static_cast<std::uint64_t>(space.size);
  }
  return total;
}

StateSequence candidate_at(std::uint64_t index, int horizon, const StateSpace& space) {
  StateSequence seq(static_cast<std::size_t>(horizon), 1);
  const auto m = static_cast<std::uint64_t>(space.size);
  for (int t = horizon - 1; t >= 0; --t) {
    seq[static_cast<std::size_t>(t)] = static_cast<int>(index % m) + 1;
    index /= m;
  }
  return seq;
}

std::uint64_t candidate_index(const StateSequence& forecast, const StateSpace& space) {
  validate_sequence(forecast, space);
  std::uint64_t index = 0;
  for (int s : forecast) {
    index = index * static_cast<std::uint64_t>(space.size) + static_cast<std::uint64_t>(s - 1);
  }
  return index;
}

ScoredCandidate p_value(const StateSequence& candidate, const StateSequence& calibration,
                        const ConformalConfig& config, const StateSpace& space) {
  if (static_cast<int>(candidate.size()) != config.horizon) {
    throw ValidationError("candidate length " + std::to_string(candidate.size()) +
                          " does not match the configured horizon " + std::to_string(config.horizon));
  }
  validate_sequence(candidate, space);
  validate_sequence(calibration, space);
  if (config.max_permutations < 1) throw ValidationError("max_permutations must be positive");
  if (config.alpha <= 0.0 || config.alpha >= 1.0) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  return score_candidate(candidate, calibration, config, space, candidate_index(candidate, space));
}

void scan_conformal_candidates(
    const StateSequence& calibration, const ConformalConfig& config, const StateSpace& space,
    const std::function<void(std::uint64_t, const ScoredCandidate&)>& sink) {
  validate_sequence(calibration, space);
  if (calibration.size() < 2) {
    throw ValidationError("calibration sequence needs at least 2 observations");
  }
  if (config.max_permutations < 1) throw ValidationError("max_permutations must be positive");
  const std::uint64_t universe =
      candidate_universe_size(space, config.horizon, config.enumeration_cap);
  parallel_for(static_cast<std::size_t>(universe), config.threads, [&](std::size_t idx) {
    const StateSequence candidate = candidate_at(idx, config.horizon, space);
    const ScoredCandidate scored =
        score_candidate(candidate, calibration, config, space, static_cast<std::uint64_t>(idx));
    sink(static_cast<std::uint64_t>(idx), scored);
  });
}

ConformalPredictionSet conformal_prediction_set(const StateSequence& calibration,
                                                const ConformalConfig& config,
                                                const StateSpace& space) {
  if (config.alpha <= 0.0 || config.alpha >= 1.0) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  const std::uint64_t universe =
      candidate_universe_size(space, config.horizon, config.enumeration_cap);

  ConformalPredictionSet set;
  set.level = 1.0 - config.alpha;
  set.universe_size = universe;
  set.scored.resize(static_cast<std::size_t>(universe));
  scan_conformal_candidates(calibration, config, space,
                            [&](std::uint64_t idx, const ScoredCandidate& scored) {
                              set.scored[static_cast<std::size_t>(idx)] = scored;
                            });
  for (const ScoredCandidate& scored : set.scored) {
    if (scored.p_value > config.alpha) set.members.push_back(scored);
  }
  return set;
}

}  // namespace markovcp
