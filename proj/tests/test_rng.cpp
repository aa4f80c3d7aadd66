#include "markovcp/rng.hpp"

#include <set>
#include <vector>

#include "doctest.h"

using namespace markovcp;

TEST_SUITE("rng") {
  TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  }

  TEST_CASE("derived streams differ by any id") {
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
    CHECK(derive_seed(1, {2}) != derive_seed(1, {2, 0}));
  }

  TEST_CASE("uniform lies in the unit interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
      const double u = rng.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("below produces every residue") {
    Rng rng(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(rng.below(7));
    CHECK(seen.size() == 7);
    for (std::uint64_t v : seen) CHECK(v < 7);
  }

  TEST_CASE("shuffle is a permutation") {
    Rng rng(13);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    rng.shuffle(v.begin(), v.end());
    std::set<int> s(v.begin(), v.end());
    CHECK(s.size() == 8);
  }
}
