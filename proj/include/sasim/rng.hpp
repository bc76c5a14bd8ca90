#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace sasim {

/// Seeded deterministic uniform random stream (xoshiro256** behind a
/// splitmix64 seeding chain). The same seed always reproduces the same
/// sequence. Sub-streams derived from (seed, stream id) are independent
/// generators; every stochastic routine in this library takes a stream
/// explicitly so experiments replay bit-identically.
///
/// A stream is single-owner: never share one instance across concurrent
/// work. Derive one sub-stream per replication instead.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Independent child stream identified by an integer id.
  RngStream substream(std::uint64_t id) const;
  /// Independent child stream identified by a stage name.
  RngStream substream(std::string_view name) const;

  std::uint64_t next_u64();

  /// Uniform draw on [0, 1).
  double uniform();

  /// Standard normal via Box-Muller; consumes two uniforms.
  double normal();

  /// Inverse-CDF categorical draw from one uniform. Cumulative sums are
  /// taken left to right in index order; returns the first index i with
  /// u < sum(weights[0..i]). This exact convention is what lets two chains
  /// driven by the same uniforms couple, so it must not change.
  int categorical(std::span<const double> weights);

  /// Uniform integer in {0, ..., n-1}.
  int uniform_int(int n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;       // seeding material, preserved for substream derivation
  std::uint64_t state_[4];  // xoshiro256** state
};

/// The inverse-CDF index for an externally supplied uniform: the first i
/// with u < sum(weights[0..i]). RngStream::categorical delegates here;
/// coupled chains call it directly so two samplers can share one uniform.
int inverse_cdf_index(std::span<const double> weights, double u);

}  // namespace sasim
