#include "markovcp/composition.hpp"

#include <cmath>

#include "markovcp/errors.hpp"

namespace markovcp {

CompositionTable composition_of(const std::vector<StateSequence>& members, int horizon,
                                const StateSpace& space) {
  CompositionTable table;
  table.horizon = horizon;
  table.num_states = space.size;
  table.proportions.assign(static_cast<std::size_t>(horizon) * space.size, 0.0);
  if (members.empty()) {
    table.empty_set = true;
    return table;
  }
  for (const StateSequence& seq : members) {
    if (static_cast<int>(seq.size()) != horizon) {
      throw ValidationError("set member length does not match the horizon");
    }
    for (int t = 0; t < horizon; ++t) {
      table.proportions[static_cast<std::size_t>(t) * space.size +
                        (seq[static_cast<std::size_t>(t)] - 1)] += 1.0;
    }
  }
  const double n = static_cast<double>(members.size());
  for (double& p : table.proportions) p /= n;
  return table;
}

CompositionTable set_composition(const ConformalPredictionSet& set, const StateSpace& space) {
  std::vector<StateSequence> members;
  members.reserve(set.members.size());
  for (const ScoredCandidate& c : set.members) members.push_back(c.forecast);
  int horizon = 0;
  if (!members.empty()) {
    horizon = static_cast<int>(members.front().size());
  } else if (!set.scored.empty()) {
    horizon = static_cast<int>(set.scored.front().forecast.size());
  }
  return composition_of(members, horizon, space);
}

double composition_entropy(const CompositionTable& table, int step) {
  double h = 0.0;
  for (int s = 1; s <= table.num_states; ++s) {
    const double p = table.at(step, s);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace markovcp
