// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace gsnp {

/// SplitMix64 finalizer; derives independent seeds from (seed, stream index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded pseudo-random stream for discrete episode construction
/// (shuffles, coin flips, pool draws). Identical seeds give identical streams.
class EpisodeRng {
 public:
  explicit EpisodeRng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed, 0)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Independent child stream, e.g. one per episode.
  EpisodeRng split(std::uint64_t index) const { return EpisodeRng(mix_seed(seed_, index + 1)); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool coin() { return index(2) == 1; }
  /// Uniform in the open interval (0, 1).
  double uniform();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Continuous noise for reparameterized sampling (Gaussian epsilon and
/// Gumbel draws). A stream can record every draw it hands out and a replay
/// stream returns a recording verbatim, which freezes the noise of a forward
/// pass for finite-difference checks.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(mix_seed(seed, 0x6e6f697365ull)) {}

  static NoiseStream replay(std::vector<double> draws);

  double normal();
  double gumbel();

  void start_recording() {
    recording_ = true;
    recorded_.clear();
  }
  const std::vector<double>& recorded() const noexcept { return recorded_; }
  bool replaying() const noexcept { return replaying_; }

 private:
  NoiseStream() : engine_(0) {}
  double uniform_open();
  double emit(double x);
  double next_replayed();

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  bool recording_ = false;
  bool replaying_ = false;
  std::vector<double> recorded_;
  std::vector<double> replay_;
  std::size_t cursor_ = 0;
};

}  // namespace gsnp
