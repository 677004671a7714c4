#include "oulab/geometry.hpp"

#include <cmath>
#include <numbers>

#include "oulab/errors.hpp"
#include "oulab/rng.hpp"

namespace oulab {

double LocalJet::grad_norm2() const {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += grad[a] * grad[a];
  return s;
}

double LocalJet::hess_norm() const {
  double s = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) s += h(a, b) * h(a, b);
  return std::sqrt(s);
}

double LocalJet::laplacian() const {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s -= h(a, a);
  return s;
}

// ---------------------------------------------------------------------------
// Checked API

void Manifold::retract_batch(const double* y, double* out, int count) const {
  const int l = ambient_dim();
  for (int i = 0; i < count; ++i) retract_raw(y + i * l, out + i * l);
}

void Manifold::project_batch(const double* x, const double* v, double* out, int count) const {
  const int l = ambient_dim();
  for (int i = 0; i < count; ++i) project_raw(x + i * l, v + i * l, out + i * l);
}

void Manifold::frame_batch(const double* x, double* e, int count) const {
  const int l = ambient_dim(), n = dim();
  for (int i = 0; i < count; ++i) frame_raw(x + i * l, e + i * l * n);
}

void Manifold::fill_inputs_batch(const double* x, BatchInputs& in, bool raw_values, int count) const {
  const int l = ambient_dim();
  in.resize(count);
  for (int i = 0; i < count; ++i) {
    VarInputs p;
    fill_inputs(x + i * l, p, raw_values);
    in.set(i, p);
  }
}

AVec Manifold::retract(const AVec& y) const {
  if (y.size() != ambient_dim()) throw DegenerateInputError("ambient dimension mismatch in retract");
  AVec out(ambient_dim());
  retract_raw(y.data(), out.data());
  return out;
}

double Manifold::distance_to(const AVec& x) const {
  if (x.size() != ambient_dim()) return std::numeric_limits<double>::infinity();
  if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  try {
    return (retract(x) - x).norm();
  } catch (const DegenerateInputError&) {
    return std::numeric_limits<double>::infinity();
  }
}

bool Manifold::on_manifold(const AVec& x, double tol) const { return distance_to(x) <= tol; }

void Manifold::require_chart_point(const AVec& x) const {
  if (!on_manifold(x)) throw ChartDomainError("point is outside the chart domain of " + name());
}

AMat Manifold::projector(const AVec& x) const {
  const int l = ambient_dim();
  AMat p(l, l);
  AVec e = AVec::Zero(l), col(l);
  for (int j = 0; j < l; ++j) {
    e.setZero();
    e[j] = 1.0;
    project_raw(x.data(), e.data(), col.data());
    p.col(j) = col;
  }
  return p;
}

AVec Manifold::project_tangent(const AVec& x, const AVec& v) const {
  if (!on_manifold(x)) throw PointOffManifoldError("point is not on " + name() + " (|retract(x) - x| > 1e-9)");
  if (v.size() != ambient_dim()) throw PointOffManifoldError("vector has wrong ambient dimension");
  AVec out(ambient_dim());
  project_raw(x.data(), v.data(), out.data());
  return out;
}

AMat Manifold::frame(const AVec& x) const {
  AMat e(ambient_dim(), dim());
  frame_raw(x.data(), e.data());
  return e;
}

namespace {

void check_finite(const double* y, int l) {
  for (int i = 0; i < l; ++i)
    if (!std::isfinite(y[i])) throw DegenerateInputError("non-finite point");
}

double wrap_angle(double t) {
  double r = std::fmod(t, 2.0 * std::numbers::pi);
  if (r < 0) r += 2.0 * std::numbers::pi;
  if (r >= 2.0 * std::numbers::pi) r = 0.0;
  return r;
}

/// Flat chart: frame index == variable slot, metric identity.
LocalJet flat_jet(const Manifold& m, const double* x, const Expr& f, int order) {
  VarInputs in;
  m.fill_inputs(x, in, f.needs_raw_values());
  LocalJet j;
  j.n = m.dim();
  if (order <= 0) {
    j.value = f.eval(in);
  } else if (order == 1) {
    const Jet1 r = f.eval1(in);
    j.value = r.v;
    j.grad = r.d;
  } else {
    const Jet2 r = f.eval2(in);
    j.value = r.v;
    j.grad = r.d;
    j.hess = r.h;
  }
  return j;
}

void flat_vector_field(const Manifold& m, const double* x, const std::vector<Expr>& comps, double* fc, double* div) {
  VarInputs in;
  bool raw = false;
  for (const auto& c : comps) raw = raw || c.needs_raw_values();
  m.fill_inputs(x, in, raw);
  const int n = m.dim();
  double d = 0.0;
  for (int a = 0; a < n; ++a) {
    if (div) {
      const Jet1 r = comps[a].eval1(in);
      fc[a] = r.v;
      d += r.d[a];
    } else {
      fc[a] = comps[a].eval(in);
    }
  }
  if (div) *div = d;
}

// Batch kernels that call the final class directly.
template <class M>
class Batched : public Manifold {
 public:
  void retract_batch(const double* y, double* out, int count) const override {
    const M& m = static_cast<const M&>(*this);
    const int l = m.M::ambient_dim();
    for (int i = 0; i < count; ++i) m.M::retract_raw(y + i * l, out + i * l);
  }
  void project_batch(const double* x, const double* v, double* out, int count) const override {
    const M& m = static_cast<const M&>(*this);
    const int l = m.M::ambient_dim();
    for (int i = 0; i < count; ++i) m.M::project_raw(x + i * l, v + i * l, out + i * l);
  }
  void frame_batch(const double* x, double* e, int count) const override {
    const M& m = static_cast<const M&>(*this);
    const int l = m.M::ambient_dim(), n = m.M::dim();
    for (int i = 0; i < count; ++i) m.M::frame_raw(x + i * l, e + i * l * n);
  }
  void fill_inputs_batch(const double* x, BatchInputs& in, bool raw_values, int count) const override {
    const M& m = static_cast<const M&>(*this);
    const int l = m.M::ambient_dim(), n = m.M::vars().count;
    in.resize(count);
    for (int i = 0; i < count; ++i) {
      VarInputs p;
      m.M::fill_inputs(x + i * l, p, raw_values);
      if (i == 0) in.has_trig = p.has_trig;
      for (int v = 0; v < n; ++v) {
        in.value[v][i] = p.value[v];
        in.cosv[v][i] = p.cosv[v];
        in.sinv[v][i] = p.sinv[v];
      }
    }
  }
};

// ---------------------------------------------------------------------------

class Circle final : public Batched<Circle> {
 public:
  Circle() : vars_(VarSpace::angles({"theta"})) {}
  std::string name() const override { return "circle"; }
  int dim() const override { return 1; }
  int ambient_dim() const override { return 2; }
  double ricci_lower() const override { return 0.0; }
  bool is_compact() const override { return true; }
  const VarSpace& vars() const override { return vars_; }

  void retract_raw(const double* y, double* out) const override {
    check_finite(y, 2);
    const double r = std::sqrt(y[0] * y[0] + y[1] * y[1]);
    if (r == 0.0) throw DegenerateInputError("closest point on the circle is not unique at the origin");
    out[0] = y[0] / r;
    out[1] = y[1] / r;
  }
  void project_raw(const double* x, const double* v, double* out) const override {
    const double d = x[0] * v[0] + x[1] * v[1];
    out[0] = v[0] - d * x[0];
    out[1] = v[1] - d * x[1];
  }
  void frame_raw(const double* x, double* e) const override {
    e[0] = -x[1];
    e[1] = x[0];
  }
  void fill_inputs(const double* x, VarInputs& in, bool raw) const override {
    in.n = 1;
    in.cosv[0] = x[0];
    in.sinv[0] = x[1];
    in.has_trig[0] = true;
    in.value[0] = raw ? std::atan2(x[1], x[0]) : 0.0;
  }
  void var_differential(const double* x, const double* v, double* out) const override {
    out[0] = -x[1] * v[0] + x[0] * v[1];
  }
  LocalJet jet(const double* x, const Expr& f, int order) const override { return flat_jet(*this, x, f, order); }
  bool flat_chart() const override { return true; }
  void vector_field(const double* x, const std::vector<Expr>& c, double* fc, double* div) const override {
    flat_vector_field(*this, x, c, fc, div);
  }
  ChartPoint chart(const AVec& x) const override {
    require_chart_point(x);
    ChartPoint c;
    c.q.resize(1);
    c.q[0] = wrap_angle(std::atan2(x[1], x[0]));
    return c;
  }
  AVec chart_inverse(const ChartPoint& c) const override {
    if (c.patch != 0 || c.q.size() != 1 || !std::isfinite(c.q[0])) throw ChartDomainError("invalid circle chart point");
    AVec x(2);
    x << std::cos(c.q[0]), std::sin(c.q[0]);
    return x;
  }
  std::vector<AVec> sample_points(int count, std::uint64_t) const override {
    std::vector<AVec> pts;
    for (int i = 0; i < count; ++i) {
      const double t = 2.0 * std::numbers::pi * i / count;
      AVec x(2);
      x << std::cos(t), std::sin(t);
      pts.push_back(x);
    }
    return pts;
  }

 private:
  VarSpace vars_;
};

class Torus2 final : public Batched<Torus2> {
 public:
  Torus2() : vars_(VarSpace::angles({"theta1", "theta2"})) {}
  std::string name() const override { return "torus2"; }
  int dim() const override { return 2; }
  int ambient_dim() const override { return 4; }
  double ricci_lower() const override { return 0.0; }
  bool is_compact() const override { return true; }
  const VarSpace& vars() const override { return vars_; }

  void retract_raw(const double* y, double* out) const override {
    check_finite(y, 4);
    const double r1 = std::sqrt(y[0] * y[0] + y[1] * y[1]);
    const double r2 = std::sqrt(y[2] * y[2] + y[3] * y[3]);
    if (r1 == 0.0 || r2 == 0.0) throw DegenerateInputError("closest point on the torus is not unique");
    out[0] = y[0] / r1;
    out[1] = y[1] / r1;
    out[2] = y[2] / r2;
    out[3] = y[3] / r2;
  }
  void project_raw(const double* x, const double* v, double* out) const override {
    const double d1 = x[0] * v[0] + x[1] * v[1];
    const double d2 = x[2] * v[2] + x[3] * v[3];
    out[0] = v[0] - d1 * x[0];
    out[1] = v[1] - d1 * x[1];
    out[2] = v[2] - d2 * x[2];
    out[3] = v[3] - d2 * x[3];
  }
  void frame_raw(const double* x, double* e) const override {
    e[0] = -x[1];
    e[1] = x[0];
    e[2] = 0.0;
    e[3] = 0.0;
    e[4] = 0.0;
    e[5] = 0.0;
    e[6] = -x[3];
    e[7] = x[2];
  }
  void fill_inputs(const double* x, VarInputs& in, bool raw) const override {
    in.n = 2;
    in.cosv[0] = x[0];
    in.sinv[0] = x[1];
    in.cosv[1] = x[2];
    in.sinv[1] = x[3];
    in.has_trig[0] = in.has_trig[1] = true;
    in.value[0] = raw ? std::atan2(x[1], x[0]) : 0.0;
    in.value[1] = raw ? std::atan2(x[3], x[2]) : 0.0;
  }
  void var_differential(const double* x, const double* v, double* out) const override {
    out[0] = -x[1] * v[0] + x[0] * v[1];
    out[1] = -x[3] * v[2] + x[2] * v[3];
  }
  LocalJet jet(const double* x, const Expr& f, int order) const override { return flat_jet(*this, x, f, order); }
  bool flat_chart() const override { return true; }
  void vector_field(const double* x, const std::vector<Expr>& c, double* fc, double* div) const override {
    flat_vector_field(*this, x, c, fc, div);
  }
  ChartPoint chart(const AVec& x) const override {
    require_chart_point(x);
    ChartPoint c;
    c.q.resize(2);
    c.q[0] = wrap_angle(std::atan2(x[1], x[0]));
    c.q[1] = wrap_angle(std::atan2(x[3], x[2]));
    return c;
  }
  AVec chart_inverse(const ChartPoint& c) const override {
    if (c.patch != 0 || c.q.size() != 2 || !c.q.allFinite()) throw ChartDomainError("invalid torus chart point");
    AVec x(4);
    x << std::cos(c.q[0]), std::sin(c.q[0]), std::cos(c.q[1]), std::sin(c.q[1]);
    return x;
  }
  std::vector<AVec> sample_points(int count, std::uint64_t) const override {
    const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))));
    std::vector<AVec> pts;
    for (int i = 0; i < side && static_cast<int>(pts.size()) < count; ++i) {
      for (int k = 0; k < side && static_cast<int>(pts.size()) < count; ++k) {
        const double a = 2.0 * std::numbers::pi * i / side, b = 2.0 * std::numbers::pi * k / side;
        AVec x(4);
        x << std::cos(a), std::sin(a), std::cos(b), std::sin(b);
        pts.push_back(x);
      }
    }
    return pts;
  }

 private:
  VarSpace vars_;
};

class Euclidean final : public Batched<Euclidean> {
 public:
  explicit Euclidean(int n) : n_(n) {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
    vars_ = VarSpace::plain(names);
    if (n <= 3) {
      const char* alias[] = {"x", "y", "z"};
      for (int i = 0; i < n; ++i) {
        vars_.names.emplace_back(alias[i]);
        vars_.slot.push_back(i);
      }
    }
  }
  std::string name() const override { return "euclidean:" + std::to_string(n_); }
  int dim() const override { return n_; }
  int ambient_dim() const override { return n_; }
  double ricci_lower() const override { return 0.0; }
  bool is_compact() const override { return false; }
  const VarSpace& vars() const override { return vars_; }

  void retract_raw(const double* y, double* out) const override {
    check_finite(y, n_);
    for (int i = 0; i < n_; ++i) out[i] = y[i];
  }
  void project_raw(const double*, const double* v, double* out) const override {
    for (int i = 0; i < n_; ++i) out[i] = v[i];
  }
  void frame_raw(const double*, double* e) const override {
    for (int i = 0; i < n_ * n_; ++i) e[i] = 0.0;
    for (int i = 0; i < n_; ++i) e[i * n_ + i] = 1.0;
  }
  void fill_inputs(const double* x, VarInputs& in, bool) const override {
    in.n = n_;
    for (int i = 0; i < n_; ++i) in.value[i] = x[i];
  }
  void var_differential(const double*, const double* v, double* out) const override {
    for (int i = 0; i < n_; ++i) out[i] = v[i];
  }
  LocalJet jet(const double* x, const Expr& f, int order) const override { return flat_jet(*this, x, f, order); }
  bool flat_chart() const override { return true; }
  void vector_field(const double* x, const std::vector<Expr>& c, double* fc, double* div) const override {
    flat_vector_field(*this, x, c, fc, div);
  }
  ChartPoint chart(const AVec& x) const override {
    require_chart_point(x);
    return ChartPoint{0, x};
  }
  AVec chart_inverse(const ChartPoint& c) const override {
    if (c.patch != 0 || c.q.size() != n_ || !c.q.allFinite()) throw ChartDomainError("invalid Euclidean chart point");
    return c.q;
  }
  std::vector<AVec> sample_points(int count, std::uint64_t seed) const override {
    CounterRng rng(seed, 0x5A3B1E);
    std::vector<AVec> pts;
    for (int i = 0; i < count; ++i) {
      AVec x(n_);
      for (int k = 0; k < n_; ++k) x[k] = rng.uniform(-5.0, 5.0);
      pts.push_back(x);
    }
    return pts;
  }

 private:
  int n_;
  VarSpace vars_;
};

class Sphere2 final : public Batched<Sphere2> {
 public:
  Sphere2() : vars_(VarSpace::plain({"x", "y", "z"})) {}
  std::string name() const override { return "sphere2"; }
  int dim() const override { return 2; }
  int ambient_dim() const override { return 3; }
  double ricci_lower() const override { return 1.0; }
  bool is_compact() const override { return true; }
  const VarSpace& vars() const override { return vars_; }

  void retract_raw(const double* y, double* out) const override {
    check_finite(y, 3);
    const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    if (r == 0.0) throw DegenerateInputError("closest point on the sphere is not unique at the origin");
    for (int i = 0; i < 3; ++i) out[i] = y[i] / r;
  }
  void project_raw(const double* x, const double* v, double* out) const override {
    const double d = x[0] * v[0] + x[1] * v[1] + x[2] * v[2];
    for (int i = 0; i < 3; ++i) out[i] = v[i] - d * x[i];
  }
  void frame_raw(const double* x, double* e) const override {
    int ref = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(x[i]) < std::abs(x[ref])) ref = i;
    double t1[3] = {0.0, 0.0, 0.0};
    t1[ref] = 1.0;
    const double d = x[ref];
    for (int i = 0; i < 3; ++i) t1[i] -= d * x[i];
    const double nrm = std::sqrt(t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]);
    for (double& c : t1) c /= nrm;
    const double t2[3] = {x[1] * t1[2] - x[2] * t1[1], x[2] * t1[0] - x[0] * t1[2], x[0] * t1[1] - x[1] * t1[0]};
    for (int i = 0; i < 3; ++i) {
      e[i] = t1[i];
      e[3 + i] = t2[i];
    }
  }
  void fill_inputs(const double* x, VarInputs& in, bool) const override {
    in.n = 3;
    for (int i = 0; i < 3; ++i) in.value[i] = x[i];
  }
  void var_differential(const double*, const double* v, double* out) const override {
    for (int i = 0; i < 3; ++i) out[i] = v[i];
  }

  LocalJet jet(const double* x, const Expr& f, int order) const override {
    VarInputs in;
    fill_inputs(x, in, false);
    double e[6];
    frame_raw(x, e);
    LocalJet j;
    j.n = 2;
    if (order <= 0) {
      j.value = f.eval(in);
      return j;
    }
    const Jet2 r = order >= 2 ? f.eval2(in) : [&] {
      const Jet1 r1 = f.eval1(in);
      Jet2 t;
      t.v = r1.v;
      t.d = r1.d;
      return t;
    }();
    j.value = r.v;
    double xg = 0.0;
    for (int i = 0; i < 3; ++i) xg += x[i] * r.d[i];
    for (int a = 0; a < 2; ++a) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += e[3 * a + i] * r.d[i];
      j.grad[a] = s;
    }
    if (order >= 2) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double s = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) s += e[3 * a + i] * r.h[i * kMaxVars + k] * e[3 * b + k];
          if (a == b) s -= xg;
          j.hess[a * kMaxVars + b] = s;
        }
      }
    }
    return j;
  }

  void vector_field(const double* x, const std::vector<Expr>& comps, double* fc, double* div) const override {
    VarInputs in;
    fill_inputs(x, in, false);
    double e[6];
    frame_raw(x, e);
    double a[3];
    double da[3][3] = {};
    for (int i = 0; i < 3; ++i) {
      if (div) {
        const Jet1 r = comps[i].eval1(in);
        a[i] = r.v;
        for (int k = 0; k < 3; ++k) da[i][k] = r.d[k];
      } else {
        a[i] = comps[i].eval(in);
      }
    }
    for (int b = 0; b < 2; ++b) fc[b] = e[3 * b] * a[0] + e[3 * b + 1] * a[1] + e[3 * b + 2] * a[2];
    if (div) {
      // div(P a) = tr(P Da) - 2 <x, a> on the unit sphere.
      double tr = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) tr += ((i == k ? 1.0 : 0.0) - x[i] * x[k]) * da[k][i];
      *div = tr - 2.0 * (x[0] * a[0] + x[1] * a[1] + x[2] * a[2]);
    }
  }

  ChartPoint chart(const AVec& x) const override {
    require_chart_point(x);
    ChartPoint c;
    c.q.resize(2);
    if (x[2] <= 0.0) {
      c.patch = 0;  // from the north pole
      c.q << x[0] / (1.0 - x[2]), x[1] / (1.0 - x[2]);
    } else {
      c.patch = 1;  // from the south pole
      c.q << x[0] / (1.0 + x[2]), x[1] / (1.0 + x[2]);
    }
    return c;
  }
  AVec chart_inverse(const ChartPoint& c) const override {
    if ((c.patch != 0 && c.patch != 1) || c.q.size() != 2 || !c.q.allFinite())
      throw ChartDomainError("invalid stereographic chart point");
    const double s = c.q.squaredNorm();
    AVec x(3);
    x[0] = 2.0 * c.q[0] / (1.0 + s);
    x[1] = 2.0 * c.q[1] / (1.0 + s);
    x[2] = c.patch == 0 ? (s - 1.0) / (s + 1.0) : (1.0 - s) / (1.0 + s);
    return x;
  }
  std::vector<AVec> sample_points(int count, std::uint64_t) const override {
    std::vector<AVec> pts;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      AVec x(3);
      x << r * std::cos(golden * i), r * std::sin(golden * i), z;
      pts.push_back(x);
    }
    return pts;
  }

 private:
  VarSpace vars_;
};

}  // namespace

ManifoldPtr make_manifold(const std::string& name) {
  if (name == "circle") return std::make_shared<Circle>();
  if (name == "torus2") return std::make_shared<Torus2>();
  if (name == "sphere2") return std::make_shared<Sphere2>();
  const std::string prefix = "euclidean:";
  if (name.rfind(prefix, 0) == 0) {
    const std::string rest = name.substr(prefix.size());
    if (rest.size() == 1 && rest[0] >= '1' && rest[0] <= '4') return std::make_shared<Euclidean>(rest[0] - '0');
    throw UnsupportedManifoldError("Euclidean dimension must be between 1 and 4: " + name);
  }
  throw UnsupportedManifoldError("unknown manifold '" + name + "'");
}

double apply_generator(const Manifold& m, const Expr& f, const std::vector<Expr>& z, const AVec& x) {
  m.require_chart_point(x);
  const LocalJet j = m.jet(x.data(), f, 2);
  double zc[kMaxVars] = {};
  if (!z.empty()) m.vector_field(x.data(), z, zc, nullptr);
  double zf = 0.0;
  for (int a = 0; a < m.dim(); ++a) zf += zc[a] * j.grad[a];
  return -j.laplacian() + zf;
}

AVec point_from_coords(const Manifold& m, const std::vector<double>& q) {
  const std::string n = m.name();
  if (n == "sphere2") {
    if (q.size() != 2) throw ChartDomainError("sphere2 point needs (polar, azimuth)");
    AVec x(3);
    x << std::sin(q[0]) * std::cos(q[1]), std::sin(q[0]) * std::sin(q[1]), std::cos(q[0]);
    return x;
  }
  ChartPoint c;
  c.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
  return m.chart_inverse(c);
}

}  // namespace oulab
