#include "markovcp/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "markovcp/errors.hpp"
#include "markovcp/rng.hpp"

namespace markovcp {

namespace {

constexpr double kTieRelTolerance = 1e-12;
constexpr double kMassTolerance = 1e-9;

bool masses_tie(double a, double b) {
  return std::abs(a - b) <= kTieRelTolerance * std::max(std::abs(a), std::abs(b));
}

}  // namespace

RankedCandidates rank_candidates(const StateSequence& calibration, int horizon,
                                 const StateSpace& space, std::uint64_t seed,
                                 std::uint64_t support_cap) {
  validate_sequence(calibration, space);
  if (calibration.size() < 2) {
    throw ValidationError("calibration sequence needs at least 2 observations");
  }
  if (horizon < 1) throw ValidationError("horizon must be positive");

  const TransitionMatrix matrix = estimate_transition_matrix(calibration, space);
  const int last = calibration.back();
  if (matrix.row_unvisited(last)) {
    throw ValidationError("last calibration state " + std::to_string(last) +
                          " has no observed transitions; no conditional distribution exists");
  }

  struct Item {
    StateSequence forecast;
    double mass;
    std::uint64_t lex;
  };
  std::vector<Item> items;

  // Depth-first enumeration over positive-probability transitions only.
  StateSequence path(static_cast<std::size_t>(horizon), 0);
  auto extend = [&](auto&& self, int depth, int from, double mass, std::uint64_t lex) -> void {
    if (depth == horizon) {
      if (items.size() >= support_cap) {
        throw ResourceError("positive-mass support exceeds the cap of " +
                            std::to_string(support_cap) + " candidates");
      }
      items.push_back({path, mass, lex});
      return;
    }
    for (int next = 1; next <= space.size; ++next) {
      const double p = matrix.prob(from, next);
      if (p <= 0.0) continue;
      path[static_cast<std::size_t>(depth)] = next;
      self(self, depth + 1, next, mass * p,
           lex * static_cast<std::uint64_t>(space.size) + static_cast<std::uint64_t>(next - 1));
    }
  };
  extend(extend, 0, last, 1.0, 0);

  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.mass != b.mass) return a.mass > b.mass;
    return a.lex < b.lex;
  });

  // Exact-mass ties (within relative tolerance) get a uniformly random order.
  Rng rng(derive_seed(seed, {0x4c1e'0001}));
  std::size_t lo = 0;
  while (lo < items.size()) {
    std::size_t hi = lo + 1;
    while (hi < items.size() && masses_tie(items[hi - 1].mass, items[hi].mass)) ++hi;
    if (hi - lo > 1) rng.shuffle(items.begin() + lo, items.begin() + hi);
    lo = hi;
  }

  RankedCandidates ranked;
  ranked.entries.reserve(items.size());
  ranked.cumulative.reserve(items.size());
  double running = 0.0;
  for (Item& item : items) {
    running += item.mass;
    ranked.entries.push_back({std::move(item.forecast), item.mass});
    ranked.cumulative.push_back(running);
  }
  return ranked;
}

std::size_t hdr_prefix_size(const RankedCandidates& ranked, double alpha, bool* deficit) {
  if (alpha < 0.0 || alpha >= 1.0) throw ValidationError("alpha must lie in [0, 1)");
  if (ranked.entries.empty()) throw ValidationError("ranking is empty");
  const double target = 1.0 - alpha;
  if (deficit) *deficit = false;
  for (std::size_t j = 0; j < ranked.cumulative.size(); ++j) {
    if (ranked.cumulative[j] >= target - kMassTolerance) return j + 1;
  }
  if (deficit) *deficit = true;
  return ranked.entries.size();
}

std::size_t randomized_prefix_size(const RankedCandidates& ranked, double alpha, double u_star) {
  bool deficit = false;
  const std::size_t k = hdr_prefix_size(ranked, alpha, &deficit);
  if (deficit) return k;
  const double mass_k = ranked.entries[k - 1].mass;
  const double below = k > 1 ? ranked.cumulative[k - 2] : 0.0;
  const double p = (1.0 - alpha - below) / mass_k;
  return u_star <= p ? k : k - 1;
}

LikelihoodPredictionSet hdr_set(const RankedCandidates& ranked, double alpha) {
  LikelihoodPredictionSet set;
  const std::size_t k = hdr_prefix_size(ranked, alpha, &set.mass_deficit);
  set.k = k;
  set.members.assign(ranked.entries.begin(), ranked.entries.begin() + static_cast<std::ptrdiff_t>(k));
  set.attained_mass = ranked.cumulative[k - 1];
  return set;
}

LikelihoodPredictionSet randomized_hdr_set(const RankedCandidates& ranked, double alpha,
                                           double u_star) {
  if (u_star < 0.0 || u_star > 1.0) throw ValidationError("u_star must lie in [0, 1]");
  LikelihoodPredictionSet set = hdr_set(ranked, alpha);
  if (set.mass_deficit) return set;

  const double target = 1.0 - alpha;
  const std::size_t k = set.k;
  const double mass_k = ranked.entries[k - 1].mass;
  const double below = k > 1 ? ranked.cumulative[k - 2] : 0.0;
  const double p = (target - below) / mass_k;
  if (u_star <= p) return set;

  set.members.pop_back();
  set.k = k - 1;
  if (k == 1) {
    set.attained_mass = 0.0;
    set.emptied = true;
  } else {
    set.attained_mass = ranked.cumulative[k - 2];
  }
  return set;
}

std::optional<std::size_t> rank_of(const RankedCandidates& ranked, const StateSequence& forecast) {
  for (std::size_t j = 0; j < ranked.entries.size(); ++j) {
    if (ranked.entries[j].forecast == forecast) return j;
  }
  return std::nullopt;
}

}  // namespace markovcp
