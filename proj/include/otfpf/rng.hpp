#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace otfpf {

// Counter-based random numbers (Philox4x32-10).  Every draw is a pure
// function of (master seed, stream id, step, draw index), so simulations
// are bit-reproducible no matter how work is scheduled across threads.
//
// Layout: key = master seed (64 bit), counter = (stream lo, stream hi,
// step, block).  One block yields two N(0,1) variates via Box-Muller.

namespace philox {

struct Block {
  uint32_t x[4];
};

inline constexpr uint32_t kMul0 = 0xD2511F53u;
inline constexpr uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline Block generate(uint64_t key, uint64_t stream, uint32_t step,
                      uint32_t block) {
  uint32_t c0 = static_cast<uint32_t>(stream);
  uint32_t c1 = static_cast<uint32_t>(stream >> 32);
  uint32_t c2 = step;
  uint32_t c3 = block;
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * c0;
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * c2;
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return Block{{c0, c1, c2, c3}};
}

}  // namespace philox

namespace detail {

// (0,1]: never zero, safe under log().
inline double uniform_open(uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// [0,1).
inline double uniform_half_open(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

// i-th standard normal of the (seed, stream, step) sequence.
inline double standard_normal(uint64_t seed, uint64_t stream, uint32_t step,
                              uint32_t i) {
  const philox::Block b = philox::generate(seed, stream, step, i >> 1);
  const uint64_t u = (static_cast<uint64_t>(b.x[0]) << 32) | b.x[1];
  const uint64_t v = (static_cast<uint64_t>(b.x[2]) << 32) | b.x[3];
  const double r = std::sqrt(-2.0 * std::log(detail::uniform_open(u)));
  const double theta =
      2.0 * 3.14159265358979323846 * detail::uniform_half_open(v);
  return (i & 1u) ? r * std::sin(theta) : r * std::cos(theta);
}

// Fills n consecutive normals starting at draw index `offset`.
inline Eigen::VectorXd normal_vector(uint64_t seed, uint64_t stream,
                                     uint32_t step, int n,
                                     uint32_t offset = 0) {
  Eigen::VectorXd out(n);
  uint32_t i = offset;
  int k = 0;
  if (i & 1u) out[k++] = standard_normal(seed, stream, step, i++);
  while (k + 1 < n) {
    const philox::Block b = philox::generate(seed, stream, step, i >> 1);
    const uint64_t u = (static_cast<uint64_t>(b.x[0]) << 32) | b.x[1];
    const uint64_t v = (static_cast<uint64_t>(b.x[2]) << 32) | b.x[3];
    const double r = std::sqrt(-2.0 * std::log(detail::uniform_open(u)));
    const double theta =
        2.0 * 3.14159265358979323846 * detail::uniform_half_open(v);
    out[k++] = r * std::cos(theta);
    out[k++] = r * std::sin(theta);
    i += 2;
  }
  if (k < n) out[k] = standard_normal(seed, stream, step, i);
  return out;
}

// Named noise sources.  Distinct kinds never share a stream.
enum class StreamKind : uint64_t {
  TruthInit = 1,
  TruthProcess = 2,
  ObsNoise = 3,
  ParticleInit = 4,
  ParticleProcess = 5,
  ObsPerturb = 6,
};

// Stream id packing: kind | dim tag | trial | unit (e.g. particle index).
// The dim tag keeps sweeps over the state dimension on disjoint streams.
inline uint64_t stream_id(StreamKind kind, uint64_t dim_tag, uint64_t trial,
                          uint64_t unit = 0) {
  return (static_cast<uint64_t>(kind) << 56) | ((dim_tag & 0xFFu) << 48) |
         ((trial & 0xFFFFFFu) << 24) | (unit & 0xFFFFFFu);
}

// Per-step noise for particle systems: particle i always reads from its own
// substream, which makes the per-particle loop schedule-independent.
struct ParticleRng {
  uint64_t seed = 0;
  uint64_t dim_tag = 0;
  uint64_t trial = 0;
  uint32_t step = 0;

  Eigen::VectorXd process_noise(int particle, int n) const {
    return normal_vector(
        seed, stream_id(StreamKind::ParticleProcess, dim_tag, trial,
                        static_cast<uint64_t>(particle)),
        step, n);
  }
  Eigen::VectorXd perturb_noise(int particle, int n) const {
    return normal_vector(seed,
                         stream_id(StreamKind::ObsPerturb, dim_tag, trial,
                                   static_cast<uint64_t>(particle)),
                         step, n);
  }
};

}  // namespace otfpf
