#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "markovcp/rng.hpp"
#include "markovcp/state.hpp"

namespace markovcp {

/// Decomposition of a sequence ending in the anchor state into a fixed head,
/// permutable blocks, and a fixed tail. Each permutable block starts with the
/// anchor and contains no further occurrence of it; the final occurrence of
/// the anchor opens the tail. Reordering the permutable blocks preserves the
/// sequence's pairwise transition counts and its first and last states.
struct IBlockDecomposition {
  int anchor = 0;
  StateSequence sequence;
  /// Offsets of the anchor occurrences: starts[d] begins block d for
  /// d < block_count(), and starts.back() begins the tail.
  std::vector<std::size_t> starts;

  int block_count() const noexcept { return static_cast<int>(starts.size()) - 1; }
  std::size_t head_length() const noexcept { return starts.front(); }
  std::size_t tail_start() const noexcept { return starts.back(); }

  std::span<const int> head() const noexcept { return {sequence.data(), head_length()}; }
  std::span<const int> block(int d) const noexcept {
    return {sequence.data() + starts[static_cast<std::size_t>(d)],
            starts[static_cast<std::size_t>(d) + 1] - starts[static_cast<std::size_t>(d)]};
  }
  std::span<const int> tail() const noexcept {
    return {sequence.data() + tail_start(), sequence.size() - tail_start()};
  }
};

/// Reordering of the permutable blocks; `order[k]` is the 0-based index of the
/// block placed at slot k.
struct BlockPermutation {
  std::vector<std::uint32_t> order;

  bool is_identity() const noexcept {
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (order[k] != k) return false;
    }
    return true;
  }
};

/// Unique decomposition of `seq` on `anchor`. Requires `seq` to end with the
/// anchor state. Takes the sequence by value; move it in to avoid the copy.
IBlockDecomposition decompose(StateSequence seq, int anchor);

/// Concatenates head, the blocks in permuted order, and tail.
StateSequence apply_permutation(const IBlockDecomposition& dec, const BlockPermutation& perm);

/// True when block_count! fits within `limit` (overflow-safe).
bool permutation_group_fits(int block_count, std::uint64_t limit);

/// All block permutations when the group is no larger than `max_n`; otherwise
/// `max_n` distinct permutations sampled uniformly without replacement. Full
/// enumeration contains the identity; a sample may or may not, unless
/// `exclude_identity` removes it from the sampled population (used by callers
/// that account for the identity separately).
std::vector<BlockPermutation> sample_permutations(const IBlockDecomposition& dec,
                                                  std::uint64_t max_n, Rng& rng,
                                                  bool exclude_identity = false);
std::vector<BlockPermutation> sample_permutations(const IBlockDecomposition& dec,
                                                  std::uint64_t max_n, std::uint64_t seed,
                                                  bool exclude_identity = false);

}  // namespace markovcp
