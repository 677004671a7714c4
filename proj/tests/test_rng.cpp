#include <doctest.h>

#include <cmath>
#include <vector>

#include "oulab/rng.hpp"

using namespace oulab;

TEST_SUITE("rng") {

// Random123 known-answer vectors for philox4x32-10.
TEST_CASE("philox known answers") {
  auto a = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  CHECK(a[0] == 0x6627e8d5u);
  CHECK(a[1] == 0xe169c58du);
  CHECK(a[2] == 0xbc57ac4cu);
  CHECK(a[3] == 0x9b00dbd8u);
  auto b = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(b[0] == 0x408f276du);
  CHECK(b[1] == 0x41c83b0eu);
  CHECK(b[2] == 0xa20bc7c6u);
  CHECK(b[3] == 0x6d5451fdu);
  auto c = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  CHECK(c[0] == 0xd16cfe09u);
  CHECK(c[1] == 0x94fdccebu);
  CHECK(c[2] == 0x5001e420u);
  CHECK(c[3] == 0x24126ea1u);
}

TEST_CASE("sincos_turn against libm") {
  double worst = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double u = i / 100001.0;
    double s, c;
    NormalStream::sincos_turn(u, s, c);
    worst = std::max(worst, std::abs(s - std::sin(2 * M_PI * u)));
    worst = std::max(worst, std::abs(c - std::cos(2 * M_PI * u)));
  }
  CHECK(worst < 1e-15);
  double s, c;
  NormalStream::sincos_turn(0.25, s, c);
  CHECK(s == 1.0);
  CHECK(c == 0.0);
}

TEST_CASE("batched pairs match single pairs bit for bit") {
  std::vector<std::uint64_t> paths;
  for (std::uint64_t i = 0; i < 37; ++i) paths.push_back(i * 7919 + (i << 33));
  std::vector<double> z0(paths.size()), z1(paths.size());
  for (std::uint64_t draw : {0ull, 1ull, 12345ull, 1ull << 35}) {
    NormalStream::pairs(42, draw, paths.data(), static_cast<int>(paths.size()), z0.data(), z1.data());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      double a, b;
      NormalStream(42, paths[i]).pair(draw, a, b);
      CHECK(a == z0[i]);
      CHECK(b == z1[i]);
    }
  }
}

TEST_CASE("normal moments") {
  const NormalStream s(7, 3);
  const int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int k = 0; k < n / 2; ++k) {
    double a, b;
    s.pair(k, a, b);
    for (double z : {a, b}) {
      m1 += z;
      m2 += z * z;
      m4 += z * z * z * z;
    }
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("streams are addressed, not sequential") {
  double a, b, c, d;
  NormalStream(1, 5).pair(9, a, b);
  NormalStream(1, 5).pair(9, c, d);
  CHECK(a == c);
  CHECK(b == d);
  NormalStream(1, 6).pair(9, c, d);
  CHECK(a != c);
  NormalStream(2, 5).pair(9, c, d);
  CHECK(a != c);
}

}
