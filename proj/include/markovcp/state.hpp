#pragma once

#include <vector>

#include "markovcp/errors.hpp"

namespace markovcp {

/// Finite state alphabet {1, ..., size}. Labels are dense and 1-based.
struct StateSpace {
  int size = 0;

  StateSpace() = default;
  explicit StateSpace(int m) : size(m) {
    if (m < 2) throw ValidationError("state space needs at least 2 states, got " + std::to_string(m));
  }

  bool contains(int label) const noexcept { return label >= 1 && label <= size; }
};

/// Ordered state labels. Always 1-based, always interpreted against a StateSpace.
using StateSequence = std::vector<int>;

inline void validate_sequence(const StateSequence& seq, const StateSpace& space) {
  if (seq.empty()) throw ValidationError("state sequence must be nonempty");
  for (int s : seq) {
    if (!space.contains(s)) {
      throw ValidationError("state label " + std::to_string(s) + " outside alphabet 1.." +
                            std::to_string(space.size));
    }
  }
}

/// Probability vector over the state alphabet.
class InitialDistribution {
 public:
  explicit InitialDistribution(std::vector<double> probs);

  /// Uniform distribution over m states.
  static InitialDistribution uniform(int m);

  /// Point mass at `state` (1-based) in an m-state alphabet.
  static InitialDistribution point_mass(int state, int m);

  int size() const noexcept { return static_cast<int>(probs_.size()); }
  double prob(int state) const { return probs_.at(static_cast<std::size_t>(state - 1)); }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

}  // namespace markovcp
