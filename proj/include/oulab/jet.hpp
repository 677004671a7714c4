#pragma once

// Forward-mode dual numbers carrying first (Jet1) and second (Jet2)
// derivatives with respect to up to kMaxVars independent variables.

#include <array>
#include <cmath>

namespace oulab {

inline constexpr int kMaxVars = 4;

struct Jet1 {
  double v = 0.0;
  std::array<double, kMaxVars> d{};

  static Jet1 constant(double c) { return Jet1{c, {}}; }
  static Jet1 variable(double value, int i) {
    Jet1 j{value, {}};
    j.d[i] = 1.0;
    return j;
  }
};

struct Jet2 {
  double v = 0.0;
  std::array<double, kMaxVars> d{};
  std::array<double, kMaxVars * kMaxVars> h{};

  static Jet2 constant(double c) { return Jet2{c, {}, {}}; }
  static Jet2 variable(double value, int i) {
    Jet2 j{value, {}, {}};
    j.d[i] = 1.0;
    return j;
  }
  double hess(int i, int k) const { return h[i * kMaxVars + k]; }
};

// chain(g, f0, f1, f2) composes a univariate f with f(g.v) = f0, f'(g.v) = f1,
// f''(g.v) = f2.
inline double chain(const double& /*g*/, double f0, double, double) { return f0; }

// --- Jet1 -------------------------------------------------------------------

inline Jet1 operator+(const Jet1& a, const Jet1& b) {
  Jet1 r{a.v + b.v, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
inline Jet1 operator-(const Jet1& a, const Jet1& b) {
  Jet1 r{a.v - b.v, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
inline Jet1 operator-(const Jet1& a) {
  Jet1 r{-a.v, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = -a.d[i];
  return r;
}
inline Jet1 operator*(const Jet1& a, const Jet1& b) {
  Jet1 r{a.v * b.v, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
  return r;
}
inline Jet1 chain(const Jet1& g, double f0, double f1, double) {
  Jet1 r{f0, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = f1 * g.d[i];
  return r;
}

// --- Jet2 -------------------------------------------------------------------

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r{a.v + b.v, {}, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.d[i] + b.d[i];
  for (int i = 0; i < kMaxVars * kMaxVars; ++i) r.h[i] = a.h[i] + b.h[i];
  return r;
}
inline Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 r{a.v - b.v, {}, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.d[i] - b.d[i];
  for (int i = 0; i < kMaxVars * kMaxVars; ++i) r.h[i] = a.h[i] - b.h[i];
  return r;
}
inline Jet2 operator-(const Jet2& a) {
  Jet2 r{-a.v, {}, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = -a.d[i];
  for (int i = 0; i < kMaxVars * kMaxVars; ++i) r.h[i] = -a.h[i];
  return r;
}
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r{a.v * b.v, {}, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
  for (int i = 0; i < kMaxVars; ++i) {
    for (int k = 0; k < kMaxVars; ++k) {
      const int ik = i * kMaxVars + k;
      r.h[ik] = a.v * b.h[ik] + b.v * a.h[ik] + a.d[i] * b.d[k] + b.d[i] * a.d[k];
    }
  }
  return r;
}
inline Jet2 chain(const Jet2& g, double f0, double f1, double f2) {
  Jet2 r{f0, {}, {}};
  for (int i = 0; i < kMaxVars; ++i) r.d[i] = f1 * g.d[i];
  for (int i = 0; i < kMaxVars; ++i) {
    for (int k = 0; k < kMaxVars; ++k) {
      const int ik = i * kMaxVars + k;
      r.h[ik] = f1 * g.h[ik] + f2 * g.d[i] * g.d[k];
    }
  }
  return r;
}

// --- generic helpers used by the expression evaluator ------------------------

template <class T>
T make_constant(double c);
template <>
inline double make_constant<double>(double c) { return c; }
template <>
inline Jet1 make_constant<Jet1>(double c) { return Jet1::constant(c); }
template <>
inline Jet2 make_constant<Jet2>(double c) { return Jet2::constant(c); }

template <class T>
T make_variable(double value, int i);
template <>
inline double make_variable<double>(double value, int) { return value; }
template <>
inline Jet1 make_variable<Jet1>(double value, int i) { return Jet1::variable(value, i); }
template <>
inline Jet2 make_variable<Jet2>(double value, int i) { return Jet2::variable(value, i); }

/// Value f0 of a function of variable i alone, with d/dx_i = f1, d2/dx_i2 = f2.
template <class T>
T make_univariate(double f0, double f1, double f2, int i);
template <>
inline double make_univariate<double>(double f0, double, double, int) { return f0; }
template <>
inline Jet1 make_univariate<Jet1>(double f0, double f1, double, int i) {
  Jet1 r{f0, {}};
  r.d[i] = f1;
  return r;
}
template <>
inline Jet2 make_univariate<Jet2>(double f0, double f1, double f2, int i) {
  Jet2 r{f0, {}, {}};
  r.d[i] = f1;
  r.h[i * kMaxVars + i] = f2;
  return r;
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet1& x) { return x.v; }
inline double value_of(const Jet2& x) { return x.v; }

inline double int_pow(double b, unsigned k) {
  double r = 1.0;
  while (k) {
    if (k & 1u) r *= b;
    b *= b;
    k >>= 1u;
  }
  return r;
}

template <class T>
T jet_pow(const T& base, unsigned k) {
  if (k == 0) return make_constant<T>(1.0);
  const double b = value_of(base);
  const double f0 = int_pow(b, k);
  const double f1 = k * int_pow(b, k - 1);
  const double f2 = k >= 2 ? double(k) * double(k - 1) * int_pow(b, k - 2) : 0.0;
  return chain(base, f0, f1, f2);
}

}  // namespace oulab
