#include "markovcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "markovcp/composition.hpp"
#include "markovcp/errors.hpp"
#include "markovcp/likelihood.hpp"
#include "test_support.hpp"

using namespace markovcp;
using markovcp::testing::conflict_matrix;
using markovcp::testing::uniform4;

namespace {

constexpr double kTol = 1e-12;

// Brute-force reference: enumerate the whole permutation group, score each
// rearranged sequence with the public nonconformity_score, and count
// comparisons against the identity arrangement.
struct NaiveCounts {
  double identity_score = 0.0;
  std::int64_t greater = 0;
  std::int64_t ties = 0;
  std::int64_t total = 0;
};

NaiveCounts naive_counts(const StateSequence& calibration, const StateSequence& candidate,
                         const ConformalConfig& cfg, const StateSpace& space) {
  StateSequence augmented = calibration;
  augmented.insert(augmented.end(), candidate.begin(), candidate.end());
  if (cfg.plus_one) augmented.push_back(cfg.plus_one_state);
  const auto matrix = estimate_transition_matrix(augmented, space);
  const auto dec = decompose(augmented, augmented.back());
  NaiveCounts counts;
  counts.identity_score = nonconformity_score(augmented, static_cast<int>(calibration.size()),
                                              cfg.horizon, matrix, cfg.score_mode);
  const auto perms = sample_permutations(dec, static_cast<std::uint64_t>(cfg.max_permutations), 0ULL);
  for (const auto& perm : perms) {
    const auto rearranged = apply_permutation(dec, perm);
    const double s = nonconformity_score(rearranged, static_cast<int>(calibration.size()),
                                         cfg.horizon, matrix, cfg.score_mode);
    if (s > counts.identity_score + kTol) {
      ++counts.greater;
    } else if (s >= counts.identity_score - kTol) {
      ++counts.ties;
    }
    ++counts.total;
  }
  return counts;
}

}  // namespace

TEST_SUITE("conformal") {
  TEST_CASE("score: both modes agree at horizon one") {
    const StateSequence seq{1, 2, 4, 1, 2, 3, 4, 1};
    const auto matrix = estimate_transition_matrix(seq, StateSpace(4));
    const double one = nonconformity_score(seq, 7, 1, matrix, ScoreMode::OneStep);
    const double jay = nonconformity_score(seq, 7, 1, matrix, ScoreMode::JStep);
    CHECK(one == doctest::Approx(1.0 - matrix.prob(4, 1)).epsilon(1e-12));
    CHECK(one == doctest::Approx(jay).epsilon(1e-12));
  }

  TEST_CASE("score: certain transitions give zero nonconformity") {
    const auto identity2 = TransitionMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const StateSequence constant{1, 1, 1, 1, 1, 1};
    CHECK(nonconformity_score(constant, 2, 4, identity2, ScoreMode::OneStep) == 0.0);
    CHECK(nonconformity_score(constant, 2, 4, identity2, ScoreMode::JStep) == 0.0);
  }

  TEST_CASE("score: estimator-certain window scores zero in one-step mode") {
    const StateSequence seq{1, 2, 3, 4};
    const auto matrix = estimate_transition_matrix(seq, StateSpace(4));
    CHECK(nonconformity_score(seq, 2, 2, matrix, ScoreMode::OneStep) == 0.0);
  }

  TEST_CASE("p-value matches the brute-force group enumeration") {
    Rng rng(808);
    int checked = 0;
    while (checked < 24) {
      const int m = 3 + static_cast<int>(rng.below(2));
      const StateSpace space(m);
      StateSequence calibration;
      const int calib_len = 6 + static_cast<int>(rng.below(9));
      for (int t = 0; t < calib_len; ++t) calibration.push_back(1 + static_cast<int>(rng.below(m)));
      const int horizon = 2 + static_cast<int>(rng.below(2));
      StateSequence candidate;
      for (int t = 0; t < horizon; ++t) candidate.push_back(1 + static_cast<int>(rng.below(m)));

      ConformalConfig cfg;
      cfg.horizon = horizon;
      cfg.max_permutations = 720;
      cfg.seed = derive_seed(4242, {static_cast<std::uint64_t>(checked)});
      cfg.score_mode = (checked % 2 == 0) ? ScoreMode::OneStep : ScoreMode::JStep;

      StateSequence augmented = calibration;
      augmented.insert(augmented.end(), candidate.begin(), candidate.end());
      if (decompose(augmented, augmented.back()).block_count() > 5) continue;
      ++checked;

      const NaiveCounts expected = naive_counts(calibration, candidate, cfg, space);
      const ScoredCandidate got = p_value(candidate, calibration, cfg, space);

      CHECK(got.identity_score == doctest::Approx(expected.identity_score).epsilon(1e-12));
      CHECK(got.num_permutations == expected.total);
      CHECK(got.tie_count == expected.ties);
      CHECK(got.tie_count >= 1);  // the identity arrangement sits in the enumerated group
      REQUIRE(expected.ties > 0);
      const double u_implied = (got.p_value * static_cast<double>(expected.total) -
                                static_cast<double>(expected.greater)) /
                               static_cast<double>(expected.ties);
      CHECK(u_implied >= -1e-9);
      CHECK(u_implied <= 1.0 + 1e-9);
    }
  }

  TEST_CASE("p-value with no permutable blocks is the uniform draw") {
    // Anchor occurs only at the augmented end: the group is trivial, every
    // comparison ties, and the p-value equals u.
    ConformalConfig cfg;
    cfg.horizon = 1;
    cfg.seed = 31;
    const ScoredCandidate scored = p_value({3}, {1, 2, 1, 2}, cfg, StateSpace(3));
    CHECK(scored.num_permutations == 1);
    CHECK(scored.tie_count == 1);
    CHECK(scored.p_value >= 0.0);
    CHECK(scored.p_value <= 1.0);

    // Same candidate index and seed, different all-tie calibration: the same
    // u must come out.
    const ScoredCandidate other = p_value({3}, {2, 1, 2, 1, 2}, cfg, StateSpace(3));
    CHECK(other.tie_count == other.num_permutations);
    CHECK(other.p_value == scored.p_value);

    // One permutable block: the group is again just the identity arrangement.
    const ScoredCandidate single = p_value({1}, {3, 1}, cfg, StateSpace(3));
    CHECK(single.num_permutations == 1);
    CHECK(single.tie_count == 1);
  }

  TEST_CASE("p-value on the sampled path: placement distribution of a marked block") {
    // All-ones calibration with candidate (2,1,1): the lone block carrying
    // the 2 lands in the scored window for exactly 2 of the 101 block slots,
    // scoring a tie there and strictly below the identity elsewhere.
    StateSequence calibration(100, 1);
    ConformalConfig cfg;
    cfg.horizon = 3;
    cfg.max_permutations = 5000;
    cfg.seed = 7;
    const ScoredCandidate scored = p_value({2, 1, 1}, calibration, cfg, StateSpace(4));
    CHECK(scored.num_permutations == 5000);
    const double tie_rate = static_cast<double>(scored.tie_count) / 5000.0;
    const double expected = 2.0 / 101.0;
    const double se = std::sqrt(expected * (1 - expected) / 5000.0);
    CHECK(std::abs(tie_rate - expected) < 3 * se + 1e-9);
    CHECK(scored.p_value <= tie_rate + 1e-12);  // q = u * tie share, no exceedances
    const ScoredCandidate again = p_value({2, 1, 1}, calibration, cfg, StateSpace(4));
    CHECK(again.p_value == scored.p_value);
    CHECK(again.tie_count == scored.tie_count);
  }

  TEST_CASE("p-value: single-state calibration ties everywhere") {
    StateSequence calibration(420, 1);
    ConformalConfig cfg;
    cfg.horizon = 6;
    cfg.max_permutations = 2000;
    cfg.seed = 11;
    const ScoredCandidate scored =
        p_value({1, 1, 1, 1, 1, 1}, calibration, cfg, StateSpace(4));
    CHECK(scored.tie_count == scored.num_permutations);
    CHECK(scored.p_value > 0.2);  // equals u under this seed
  }

  TEST_CASE("candidate enumeration is lexicographic and sized m^horizon") {
    const StateSpace space(4);
    CHECK(candidate_universe_size(space, 6, 1'000'000) == 4096);
    CHECK(candidate_at(0, 3, space) == StateSequence{1, 1, 1});
    CHECK(candidate_at(1, 3, space) == StateSequence{1, 1, 2});
    CHECK(candidate_at(4, 3, space) == StateSequence{1, 2, 1});
    CHECK(candidate_index({1, 2, 1}, space) == 4);
    for (std::uint64_t idx : {0ULL, 17ULL, 63ULL}) {
      CHECK(candidate_index(candidate_at(idx, 3, space), space) == idx);
    }
  }

  TEST_CASE("prediction set: enumeration cap is enforced and named") {
    ConformalConfig cfg;
    cfg.horizon = 6;
    cfg.enumeration_cap = 100;
    try {
      conformal_prediction_set({1, 2, 1}, cfg, StateSpace(4));
      FAIL("expected ResourceError");
    } catch (const ResourceError& e) {
      CHECK(std::string(e.what()).find("100") != std::string::npos);
    }
  }

  TEST_CASE("prediction set: nested across alpha") {
    const auto chain = simulate_chain(uniform4(), conflict_matrix(), 80, 404ULL);
    ConformalConfig strict;
    strict.horizon = 2;
    strict.alpha = 0.4;
    strict.max_permutations = 400;
    strict.seed = 99;
    ConformalConfig loose = strict;
    loose.alpha = 0.1;
    const auto small = conformal_prediction_set(chain, strict, StateSpace(4));
    const auto large = conformal_prediction_set(chain, loose, StateSpace(4));
    std::set<StateSequence> in_large;
    for (const auto& c : large.members) in_large.insert(c.forecast);
    for (const auto& c : small.members) CHECK(in_large.count(c.forecast) == 1);
    // identical q-values underneath: thresholding is the only difference
    for (std::size_t i = 0; i < small.scored.size(); ++i) {
      CHECK(small.scored[i].p_value == large.scored[i].p_value);
    }
  }

  TEST_CASE("prediction set: invariant to permuting the calibration blocks") {
    // Full-enumeration regime: scoring depends on the augmented sequence only
    // through its transition counts, first state, and block structure.
    const StateSequence calibration{1, 2, 4, 1, 2, 3, 4};
    const StateSequence permuted_calibration{1, 2, 3, 4, 1, 2, 4};
    ConformalConfig cfg;
    cfg.horizon = 1;
    cfg.max_permutations = 720;
    cfg.seed = 5;
    const ScoredCandidate a = p_value({1}, calibration, cfg, StateSpace(4));
    const ScoredCandidate b = p_value({1}, permuted_calibration, cfg, StateSpace(4));
    CHECK(a.p_value == b.p_value);
    CHECK(a.tie_count == b.tie_count);
    CHECK(a.num_permutations == b.num_permutations);
  }

  TEST_CASE("prediction set: single-state calibration with the plus-one anchor") {
    StateSequence calibration(60, 1);
    ConformalConfig cfg;
    cfg.horizon = 3;
    cfg.alpha = 0.2;
    cfg.max_permutations = 1000;
    cfg.plus_one = true;
    cfg.plus_one_state = 1;
    cfg.seed = 3;
    const auto set = conformal_prediction_set(calibration, cfg, StateSpace(4));
    REQUIRE(set.members.size() == 1);
    CHECK(set.members.front().forecast == StateSequence{1, 1, 1});

    // Without the anchor the set floods with sequences that do not end in
    // the calibration state, while all-but-one of the 1-terminal candidates
    // are rejected.
    ConformalConfig bare = cfg;
    bare.plus_one = false;
    const auto wide = conformal_prediction_set(calibration, bare, StateSpace(4));
    std::size_t ones_terminal = 0;
    std::size_t other_terminal = 0;
    for (const auto& c : wide.members) {
      if (c.forecast.back() == 1) {
        ++ones_terminal;
        CHECK(c.forecast == StateSequence{1, 1, 1});
      } else {
        ++other_terminal;
      }
    }
    CHECK(ones_terminal == 1);
    CHECK(other_terminal > 20);
  }

  TEST_CASE("prediction set: bit-identical across thread counts") {
    const auto chain = simulate_chain(uniform4(), conflict_matrix(), 60, 2121ULL);
    ConformalConfig cfg;
    cfg.horizon = 2;
    cfg.alpha = 0.2;
    cfg.max_permutations = 300;
    cfg.seed = 17;
    cfg.threads = 1;
    const auto serial = conformal_prediction_set(chain, cfg, StateSpace(4));
    cfg.threads = 3;
    const auto threaded = conformal_prediction_set(chain, cfg, StateSpace(4));
    REQUIRE(serial.scored.size() == threaded.scored.size());
    for (std::size_t i = 0; i < serial.scored.size(); ++i) {
      CHECK(serial.scored[i].p_value == threaded.scored[i].p_value);
      CHECK(serial.scored[i].identity_score == threaded.scored[i].identity_score);
    }
  }

  TEST_CASE("p-value input validation") {
    ConformalConfig cfg;
    cfg.horizon = 2;
    CHECK_THROWS_AS(p_value({1, 2, 3}, {1, 2}, cfg, StateSpace(4)), ValidationError);
    CHECK_THROWS_AS(p_value({1, 9}, {1, 2}, cfg, StateSpace(4)), ValidationError);
    CHECK_THROWS_AS(conformal_prediction_set({1}, cfg, StateSpace(4)), ValidationError);
  }

  TEST_CASE("composition: singleton and two-member sets") {
    const StateSpace space(4);
    ConformalPredictionSet set;
    set.members.push_back({{1, 1}, 0.9, 0.0, 10, 1});
    auto table = set_composition(set, space);
    CHECK(table.at(1, 1) == 1.0);
    CHECK(table.at(2, 1) == 1.0);

    set.members = {{{1, 2}, 0.9, 0.0, 10, 1}, {{1, 4}, 0.8, 0.0, 10, 1}};
    table = set_composition(set, space);
    CHECK(table.at(1, 1) == 1.0);
    CHECK(table.at(2, 2) == doctest::Approx(0.5));
    CHECK(table.at(2, 4) == doctest::Approx(0.5));
    CHECK(table.at(2, 1) == doctest::Approx(0.0));
  }

  TEST_CASE("composition: empty set raises the marker") {
    ConformalPredictionSet set;
    set.scored.push_back({{1, 1}, 0.0, 0.5, 10, 0});
    const auto table = set_composition(set, StateSpace(4));
    CHECK(table.empty_set);
  }

  TEST_CASE("composition: conformal sets are more diverse than likelihood sets") {
    const auto chain = simulate_chain(uniform4(), conflict_matrix(), 206, 60601ULL);
    const StateSequence calibration(chain.begin(), chain.begin() + 200);
    ConformalConfig cfg;
    cfg.horizon = 6;
    cfg.alpha = 0.2;
    cfg.max_permutations = 500;
    cfg.seed = 23;
    const auto cp_set = conformal_prediction_set(calibration, cfg, StateSpace(4));
    const auto cp_table = set_composition(cp_set, StateSpace(4));

    const auto ranked = rank_candidates(calibration, 6, StateSpace(4), 23);
    const auto like_set = hdr_set(ranked, cfg.alpha);
    std::vector<StateSequence> members;
    for (const auto& entry : like_set.members) members.push_back(entry.forecast);
    const auto like_table = composition_of(members, 6, StateSpace(4));

    CHECK(composition_entropy(cp_table, 6) > composition_entropy(like_table, 6));
  }
}
