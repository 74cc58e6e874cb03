#pragma once

#include <cstdint>
#include <random>

namespace snptree {

// Independent RNG substream keyed by (seed, id0, id1, id2). Work units (splits,
// replicates, columns, ...) each draw from their own substream, so results do
// not depend on how work is scheduled across threads.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1 = 0,
                                 std::uint64_t id2 = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id0),  static_cast<std::uint32_t>(id0 >> 32),
                    static_cast<std::uint32_t>(id1),  static_cast<std::uint32_t>(id1 >> 32),
                    static_cast<std::uint32_t>(id2),  static_cast<std::uint32_t>(id2 >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace snptree
