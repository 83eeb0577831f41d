// Copyright 2026 The grfda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace grfda {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure function of
/// (key, counter); used as the core of every random stream in the library.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// SplitMix64 finalizer, used to derive substream identifiers.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Purposes for top-level streams. Keeping them distinct means the truth,
/// observation and filter draws never overlap even when seeds coincide.
enum class StreamPurpose : std::uint64_t {
  kTruth = 1,
  kObservation = 2,
  kEnsembleInit = 3,
  kForecast = 4,
  kResample = 5,
  kTest = 99,
};

/// Counter-based random stream identified by (seed, stream id).
///
/// Draw i of a given stream is a pure function of (seed, stream, i), so
/// any computation that derives its stream from stable identifiers (particle
/// index, cycle, purpose) is reproducible regardless of scheduling order.
/// A stream object carries a draw position and must not be shared across
/// concurrent callers; derive one substream per task instead.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  RngStream(std::uint64_t seed, StreamPurpose purpose)
      : RngStream(seed, mix64(static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t position() const { return counter_; }

  /// Child stream; independent of the parent's draw position.
  RngStream substream(std::uint64_t id) const {
    return RngStream(seed_, mix64(stream_ ^ mix64(id + 0x632BE59BD9B4E019ull)));
  }

  /// Raw 128-bit block for the current counter; advances by one block.
  std::array<std::uint32_t, 4> next_block() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    ++counter_;
    return philox4x32(ctr, {static_cast<std::uint32_t>(seed_),
                            static_cast<std::uint32_t>(seed_ >> 32)});
  }

  /// Uniform on (0, 1], 53-bit resolution. One block per call.
  double uniform() {
    const auto blk = next_block();
    return to_unit(blk[0], blk[1]);
  }

  /// Standard normal pair via Box-Muller from one block.
  std::pair<double, double> normal_pair() {
    const auto blk = next_block();
    const double u1 = to_unit(blk[0], blk[1]);
    const double u2 = to_unit(blk[2], blk[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  double normal() { return normal_pair().first; }

  /// Standard circularly symmetric complex normal: E|z|^2 = 1.
  std::complex<double> complex_normal() {
    const auto [re, im] = normal_pair();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

 private:
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace grfda
