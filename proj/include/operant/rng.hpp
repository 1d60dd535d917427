#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace operant::rng {

// Counter-based random numbers built on Philox4x32-10 (Salmon, Moraes, Dror,
// Shaw: "Parallel random numbers: as easy as 1, 2, 3", SC'11).
//
// Every stream is a pure function of (seed, stream_id): the n-th draw is fully
// determined by those two integers, independent of thread schedule or call
// site.  Streams split without coordination: child(purpose) derives a new
// stream_id by a splitmix64 hash, so (seed, purpose path) names a stream.
//
// Draw layout: one Philox block yields four 32-bit words, consumed as two
// 64-bit integers.  uniform() keeps the top 53 bits, normal() applies
// Box-Muller to a uniform pair and caches the second variate.  The integer
// stream is bitwise reproducible everywhere; floating-point draws additionally
// depend on the platform's libm (sqrt/log/cos), which is fixed within a build.

struct Philox4x32 {
  // One 10-round keyed permutation of a 128-bit counter.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key,
                                            std::array<std::uint32_t, 4> ctr);
};

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id);

  // Derives an independent stream; identical (seed, purpose path) gives an
  // identical stream regardless of how many draws this one has produced.
  [[nodiscard]] Stream child(std::uint64_t purpose) const;

  std::uint64_t next_u64();
  double uniform();       // [0, 1), 53-bit resolution
  double uniform_open();  // (0, 1], safe under log()
  double uniform(double lo, double hi);
  std::uint64_t below(std::uint64_t n);  // uniform on [0, n), rejection-exact
  double normal();        // standard normal, Box-Muller

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  std::optional<double> cached_normal_;
};

// Stream purposes used throughout the library.  Fixed numbers: renumbering
// would silently change every sampled dataset and initialization.
namespace purpose {
inline constexpr std::uint64_t field_values = 1;     // GRF coefficient draws
inline constexpr std::uint64_t output_scale = 2;     // per-sample amplitude
inline constexpr std::uint64_t query_points = 3;     // targets' locations
inline constexpr std::uint64_t collocation = 4;      // residual points
inline constexpr std::uint64_t boundary_points = 5;  // initial/boundary points
inline constexpr std::uint64_t init_branch = 6;
inline constexpr std::uint64_t init_trunk = 7;
inline constexpr std::uint64_t init_encoder = 8;
inline constexpr std::uint64_t minibatch = 9;        // epoch reshuffles
inline constexpr std::uint64_t sample = 10;          // per-sample substreams
}  // namespace purpose

}  // namespace operant::rng
