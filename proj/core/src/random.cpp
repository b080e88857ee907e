// SPDX-License-Identifier: Apache-2.0
#include "gsnp/random.hpp"

#include <cmath>
#include <limits>

#include "gsnp/error.hpp"

namespace gsnp {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::size_t EpisodeRng::index(std::size_t n) {
  if (n == 0) throw Error("EpisodeRng::index on an empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double EpisodeRng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

NoiseStream NoiseStream::replay(std::vector<double> draws) {
  NoiseStream s;
  s.replaying_ = true;
  s.replay_ = std::move(draws);
  return s;
}

double NoiseStream::uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double NoiseStream::emit(double x) {
  if (recording_) recorded_.push_back(x);
  return x;
}

double NoiseStream::next_replayed() {
  if (cursor_ >= replay_.size()) throw Error("noise replay exhausted after " + std::to_string(cursor_) + " draws");
  return replay_[cursor_++];
}

double NoiseStream::normal() {
  if (replaying_) return next_replayed();
  return emit(normal_(engine_));
}

double NoiseStream::gumbel() {
  if (replaying_) return next_replayed();
  return emit(-std::log(-std::log(uniform_open())));
}

}  // namespace gsnp
