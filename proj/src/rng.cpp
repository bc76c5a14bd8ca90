#include "sasim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sasim {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_key(std::uint64_t key, std::uint64_t id) {
  std::uint64_t x = key ^ (0x9e3779b97f4a7c15ULL + id * 0xbf58476d1ce4e5b9ULL);
  splitmix64(x);
  return splitmix64(x);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : key_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

RngStream RngStream::substream(std::uint64_t id) const {
  return RngStream(mix_key(key_, id));
}

RngStream RngStream::substream(std::string_view name) const {
  return RngStream(mix_key(key_, fnv1a(name)));
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int RngStream::categorical(std::span<const double> weights) {
  return inverse_cdf_index(weights, uniform());
}

int inverse_cdf_index(std::span<const double> weights, double u) {
  if (weights.empty()) throw std::invalid_argument("categorical: empty pmf");
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  // u landed in residual round-off mass; return the last positive-weight index
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  return static_cast<int>(uniform() * n) % n;
}

}  // namespace sasim
