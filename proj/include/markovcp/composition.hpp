#pragma once

#include <vector>

#include "markovcp/conformal.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

/// Per-step state proportions of a prediction set, each member sequence
/// weighted equally. Flagged empty when the set has no members.
struct CompositionTable {
  int horizon = 0;
  int num_states = 0;
  bool empty_set = false;
  /// horizon x num_states, row-major; rows sum to 1 unless empty_set.
  std::vector<double> proportions;

  double at(int step, int state) const {
    return proportions.at(static_cast<std::size_t>(step - 1) * num_states + (state - 1));
  }
};

/// Composition over an explicit list of member sequences (each of length
/// `horizon`).
CompositionTable composition_of(const std::vector<StateSequence>& members, int horizon,
                                const StateSpace& space);

CompositionTable set_composition(const ConformalPredictionSet& set, const StateSpace& space);

/// Shannon entropy (nats) of the state proportions at one step.
double composition_entropy(const CompositionTable& table, int step);

}  // namespace markovcp
