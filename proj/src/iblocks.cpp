#include "markovcp/iblocks.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "markovcp/errors.hpp"

namespace markovcp {

IBlockDecomposition decompose(StateSequence seq, int anchor) {
  if (seq.empty()) throw ValidationError("cannot decompose an empty sequence");
  if (seq.back() != anchor) {
    throw ValidationError("sequence must end with the anchor state " + std::to_string(anchor) +
                          ", ends with " + std::to_string(seq.back()));
  }
  IBlockDecomposition dec;
  dec.anchor = anchor;
  dec.sequence = std::move(seq);
  for (std::size_t t = 0; t < dec.sequence.size(); ++t) {
    if (dec.sequence[t] == anchor) dec.starts.push_back(t);
  }
  return dec;
}

StateSequence apply_permutation(const IBlockDecomposition& dec, const BlockPermutation& perm) {
  const int d = dec.block_count();
  if (static_cast<int>(perm.order.size()) != d) {
    throw ValidationError("permutation has " + std::to_string(perm.order.size()) +
                          " entries, decomposition has " + std::to_string(d) + " blocks");
  }
  StateSequence out;
  out.reserve(dec.sequence.size());
  const auto head = dec.head();
  out.insert(out.end(), head.begin(), head.end());
  for (std::uint32_t b : perm.order) {
    if (b >= static_cast<std::uint32_t>(d)) {
      throw ValidationError("permutation references block " + std::to_string(b));
    }
    const auto block = dec.block(static_cast<int>(b));
    out.insert(out.end(), block.begin(), block.end());
  }
  const auto tail = dec.tail();
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

bool permutation_group_fits(int block_count, std::uint64_t limit) {
  std::uint64_t total = 1;
  for (int k = 2; k <= block_count; ++k) {
    if (total > limit / static_cast<std::uint64_t>(k)) return false;
    total *= static_cast<std::uint64_t>(k);
  }
  return total <= limit;
}

namespace {

std::uint64_t order_hash(const std::vector<std::uint32_t>& order) {
  std::uint64_t h = 0x243f'6a88'85a3'08d3ULL;
  for (std::uint32_t v : order) h = mix64(h ^ (v + 0x9e3779b9U));
  return h;
}

}  // namespace

std::vector<BlockPermutation> sample_permutations(const IBlockDecomposition& dec,
                                                  std::uint64_t max_n, Rng& rng,
                                                  bool exclude_identity) {
  if (max_n < 1) throw ValidationError("max_n must be positive");
  const int d = dec.block_count();
  std::vector<BlockPermutation> out;

  if (permutation_group_fits(d, max_n + (exclude_identity ? 1 : 0))) {
    std::vector<std::uint32_t> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0U);
    if (exclude_identity) {
      if (!std::next_permutation(order.begin(), order.end())) return out;
    }
    do {
      out.push_back(BlockPermutation{order});
    } while (std::next_permutation(order.begin(), order.end()));
    return out;
  }

  // Uniform sample without replacement; duplicates are rejected via a 64-bit
  // hash of the index order.
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(static_cast<std::size_t>(max_n) * 2);
  std::vector<std::uint32_t> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0U);
  if (exclude_identity) seen.insert(order_hash(order));
  out.reserve(static_cast<std::size_t>(max_n));
  while (out.size() < max_n) {
    rng.shuffle(order.begin(), order.end());
    if (seen.insert(order_hash(order)).second) {
      out.push_back(BlockPermutation{order});
    }
  }
  return out;
}

std::vector<BlockPermutation> sample_permutations(const IBlockDecomposition& dec,
                                                  std::uint64_t max_n, std::uint64_t seed,
                                                  bool exclude_identity) {
  Rng rng(seed);
  return sample_permutations(dec, max_n, rng, exclude_identity);
}

}  // namespace markovcp
