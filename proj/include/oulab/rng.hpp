#pragma once

// Counter-based random numbers: Philox4x32-10 plus Box-Muller.  A stream is
// addressed by (key, path, draw) so any path can be generated independently
// of every other path and of the worker that runs it.

#include <array>
#include <cmath>
#include <cstdint>

namespace oulab {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Counter block(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Key for sub-experiment `index` (e.g. a grid point) under a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

/// Two independent standard normals per Philox block.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path)),
        path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

  void pair(std::uint64_t draw, double& z0, double& z1) const {
    const auto r = Philox4x32::block(
        {static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32), path_lo_, path_hi_}, key_);
    // 53-bit uniforms; u1 in (0, 1], u2 in [0, 1).
    const double u1 = 1.0 - to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    double s, c;
    sincos_turn(u2, s, c);
    z0 = rad * c;
    z1 = rad * s;
  }

  /// pair(draw) for many paths under one key: z0[i], z1[i] belong to paths[i].
  static void pairs(std::uint64_t seed, std::uint64_t draw, const std::uint64_t* paths, int count, double* z0,
                    double* z1) {
    constexpr int kChunk = 16;
    alignas(64) std::uint32_t r0[kChunk], r1[kChunk], r2[kChunk], r3[kChunk];
    const std::uint32_t k0 = static_cast<std::uint32_t>(seed), k1 = static_cast<std::uint32_t>(seed >> 32);
    const std::uint32_t d0 = static_cast<std::uint32_t>(draw), d1 = static_cast<std::uint32_t>(draw >> 32);
    for (int base = 0; base < count; base += kChunk) {
      const int n = count - base < kChunk ? count - base : kChunk;
      for (int i = 0; i < n; ++i) {
        std::uint32_t c0 = d0, c1 = d1;
        std::uint32_t c2 = static_cast<std::uint32_t>(paths[base + i]);
        std::uint32_t c3 = static_cast<std::uint32_t>(paths[base + i] >> 32);
        std::uint32_t q0 = k0, q1 = k1;
#pragma GCC unroll 10
        for (int r = 0; r < 10; ++r) {
          if (r > 0) {
            q0 += Philox4x32::kW0;
            q1 += Philox4x32::kW1;
          }
          const std::uint64_t p0 = static_cast<std::uint64_t>(Philox4x32::kM0) * c0;
          const std::uint64_t p1 = static_cast<std::uint64_t>(Philox4x32::kM1) * c2;
          const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ q0;
          const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ q1;
          c1 = static_cast<std::uint32_t>(p1);
          c3 = static_cast<std::uint32_t>(p0);
          c0 = n0;
          c2 = n2;
        }
        r0[i] = c0;
        r1[i] = c1;
        r2[i] = c2;
        r3[i] = c3;
      }
      alignas(64) double u1[kChunk], sn[kChunk], cs[kChunk];
      for (int i = 0; i < n; ++i) {
        u1[i] = 1.0 - to_unit(r0[i], r1[i]);
        sincos_turn(to_unit(r2[i], r3[i]), sn[i], cs[i]);
      }
      for (int i = 0; i < n; ++i) {
        const double rad = std::sqrt(-2.0 * std::log(u1[i]));
        z0[base + i] = rad * cs[i];
        z1[base + i] = rad * sn[i];
      }
    }
  }

  /// sin and cos of 2 pi u for u in [0, 1).  u - j/4 is exact for 53-bit
  /// dyadic u, so only the Taylor tail on [-pi/4, pi/4] rounds.
  static void sincos_turn(double u, double& s, double& c) {
    const int j = static_cast<int>(u * 4.0 + 0.5);
    const double a = 6.283185307179586 * (u - 0.25 * j);
    const double a2 = a * a;
    const double ps =
        a * (1.0 + a2 * (-1.0 / 6 + a2 * (1.0 / 120 + a2 * (-1.0 / 5040 + a2 * (1.0 / 362880 +
             a2 * (-1.0 / 39916800 + a2 * (1.0 / 6227020800 + a2 * (-1.0 / 1307674368000 +
             a2 * (1.0 / 355687428096000)))))))));
    const double pc =
        1.0 + a2 * (-0.5 + a2 * (1.0 / 24 + a2 * (-1.0 / 720 + a2 * (1.0 / 40320 + a2 * (-1.0 / 3628800 +
              a2 * (1.0 / 479001600 + a2 * (-1.0 / 87178291200 + a2 * (1.0 / 20922789888000))))))));
    // quadrant j: (s, c) = (ps, pc), (pc, -ps), (-ps, -pc), (-pc, ps)
    const bool swap = (j & 1) != 0;
    const double s0 = swap ? pc : ps;
    const double c0 = swap ? ps : pc;
    s = (j & 2) ? -s0 : s0;
    c = ((j + 1) & 2) ? -c0 : c0;
  }

 private:
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    return ((a >> 5) * 67108864.0 + (b >> 6)) * (1.0 / 9007199254740992.0);
  }

  Philox4x32::Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
};

/// Sequential convenience generator over the same counter space (used for
/// seeded test data, not for path increments).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : normals_(seed, stream), seed_(seed), stream_(stream) {}

  double uniform() {
    if (cached_ == 0) refill();
    return buf_[--cached_];
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double a, b;
    normals_.pair(draw_++, a, b);
    return a;
  }
  int integer(int lo, int hi) {  // inclusive
    const double u = uniform();
    int v = lo + static_cast<int>(u * (hi - lo + 1));
    return v > hi ? hi : v;
  }

 private:
  void refill() {
    const auto r = Philox4x32::block({static_cast<std::uint32_t>(udraw_), static_cast<std::uint32_t>(udraw_ >> 32),
                                      static_cast<std::uint32_t>(stream_) ^ 0xA5A5A5A5u,
                                      static_cast<std::uint32_t>(stream_ >> 32) ^ 0x5A5A5A5Au},
                                     {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++udraw_;
    buf_[0] = ((r[0] >> 5) * 67108864.0 + (r[1] >> 6)) * (1.0 / 9007199254740992.0);
    buf_[1] = ((r[2] >> 5) * 67108864.0 + (r[3] >> 6)) * (1.0 / 9007199254740992.0);
    cached_ = 2;
  }

  NormalStream normals_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t draw_ = 1ull << 40;
  std::uint64_t udraw_ = 0;
  double buf_[2] = {0.0, 0.0};
  int cached_ = 0;
};

}  // namespace oulab
