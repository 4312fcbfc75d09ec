#pragma once

// Counter-based seeding: every replication gets its own generator derived from
// (master seed, stream id), so serial and parallel runs draw identical numbers.

#include <cstdint>
#include <random>

#include "egreg/matrixcore.hpp"

namespace egreg::sim {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream) {
  return Rng(stream_seed(master, stream));
}

inline MatrixXd standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatrixXd z(rows, cols);
  // Row-major fill so that appending columns never changes earlier rows' draws.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) z(i, j) = dist(rng);
  }
  return z;
}

}  // namespace egreg::sim
