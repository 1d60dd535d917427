#include "operant/rng.hpp"

#include <cmath>

namespace operant::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void philox_round(std::array<std::uint32_t, 2>& key,
                         std::array<std::uint32_t, 4>& ctr) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 2> key,
                                               std::array<std::uint32_t, 4> ctr) {
  for (int round = 0; round < 10; ++round) philox_round(key, ctr);
  return ctr;
}

Stream::Stream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

Stream Stream::child(std::uint64_t purpose) const {
  // Hash chaining keeps child ids independent of draw position and, for
  // distinct purpose paths, pairwise distinct with overwhelming probability.
  return Stream(seed_, splitmix64(stream_id_ ^ splitmix64(purpose)));
}

std::uint64_t Stream::next_u64() {
  if (buffered_ == 0) {
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed_),
        static_cast<std::uint32_t>(seed_ >> 32)};
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_index_),
        static_cast<std::uint32_t>(block_index_ >> 32),
        static_cast<std::uint32_t>(stream_id_),
        static_cast<std::uint32_t>(stream_id_ >> 32)};
    const auto words = Philox4x32::block(key, ctr);
    buffer_[0] = (std::uint64_t{words[1]} << 32) | words[0];
    buffer_[1] = (std::uint64_t{words[3]} << 32) | words[2];
    buffered_ = 2;
    ++block_index_;
  }
  return buffer_[--buffered_];
}

double Stream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform_open() { return 1.0 - uniform(); }

double Stream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Rejection over the largest multiple of n keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Stream::normal() {
  if (cached_normal_) {
    const double z = *cached_normal_;
    cached_normal_.reset();
    return z;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_open()));
  const double phi = 2.0 * M_PI * uniform();
  cached_normal_ = r * std::sin(phi);
  return r * std::cos(phi);
}

}  // namespace operant::rng
