#include "oulab/expression.hpp"

#include <charconv>
#include <cmath>
#include <complex>
#include <optional>

#include "oulab/errors.hpp"

namespace oulab {

// ---------------------------------------------------------------------------
// VarSpace / VarInputs

VarSpace VarSpace::plain(const std::vector<std::string>& names) {
  VarSpace vs;
  vs.count = static_cast<int>(names.size());
  vs.names = names;
  for (int i = 0; i < vs.count; ++i) vs.slot.push_back(i);
  vs.angle.assign(vs.count, false);
  return vs;
}

VarSpace VarSpace::angles(const std::vector<std::string>& names) {
  VarSpace vs = plain(names);
  vs.angle.assign(vs.count, true);
  return vs;
}

int VarSpace::lookup(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return slot[i];
  return -1;
}

const std::string& VarSpace::canonical(int s) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (slot[i] == s) return names[i];
  static const std::string unknown = "?";
  return unknown;
}

VarInputs VarInputs::from_values(const VarSpace& vs, const double* values) {
  VarInputs in;
  in.n = vs.count;
  for (int i = 0; i < vs.count; ++i) {
    in.value[i] = values[i];
    if (vs.angle[i]) {
      in.cosv[i] = std::cos(values[i]);
      in.sinv[i] = std::sin(values[i]);
      in.has_trig[i] = true;
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// AST

struct ExprNode {
  enum Kind { Num, Var, Add, Sub, Mul, Neg, Pow, Sin, Cos, Exp } kind;
  double value = 0.0;
  int slot = -1;
  unsigned k = 0;
  std::size_t offset = 0;
  std::shared_ptr<const ExprNode> a, b;
};

using NodePtr = std::shared_ptr<const ExprNode>;

namespace {

NodePtr make_node(ExprNode::Kind kind, std::size_t off, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->offset = off;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_num(double v, std::size_t off) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Num;
  n->value = v;
  n->offset = off;
  return n;
}

class Parser {
 public:
  Parser(std::string_view s, const VarSpace& vs) : s_(s), vs_(vs) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[pos_]) + "'", pos_);
    return e;
  }

 private:
  std::string_view s_;
  const VarSpace& vs_;
  std::size_t pos_ = 0;
  int depth_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
    if (s_[pos_] != c) throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  NodePtr expr() {
    if (++depth_ > 200) throw ParseError("expression nested too deeply", pos_);
    NodePtr lhs = term();
    for (;;) {
      if (peek('+')) {
        std::size_t off = pos_++;
        lhs = make_node(ExprNode::Add, off, lhs, term());
      } else if (peek('-')) {
        std::size_t off = pos_++;
        lhs = make_node(ExprNode::Sub, off, lhs, term());
      } else {
        break;
      }
    }
    --depth_;
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (peek('*')) {
      std::size_t off = pos_++;
      lhs = make_node(ExprNode::Mul, off, lhs, factor());
    }
    return lhs;
  }

  NodePtr factor() {
    if (peek('-')) {
      std::size_t off = pos_++;
      if (++depth_ > 200) throw ParseError("expression nested too deeply", pos_);
      NodePtr inner = factor();
      --depth_;
      return make_node(ExprNode::Neg, off, inner);
    }
    NodePtr base = atom();
    if (peek('^')) {
      std::size_t off = pos_++;
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
      if (start == pos_) throw ParseError("expected nonnegative integer exponent", start);
      unsigned k = 0;
      auto res = std::from_chars(s_.data() + start, s_.data() + pos_, k);
      if (res.ec != std::errc()) throw ParseError("exponent out of range", start);
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Pow;
      n->offset = off;
      n->k = k;
      n->a = base;
      return n;
    }
    return base;
  }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

  NodePtr atom() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
      const std::string_view name = s_.substr(start, pos_ - start);
      if (peek('(')) {
        ExprNode::Kind kind;
        if (name == "sin") kind = ExprNode::Sin;
        else if (name == "cos") kind = ExprNode::Cos;
        else if (name == "exp") kind = ExprNode::Exp;
        else throw ParseError("unknown function '" + std::string(name) + "'", start);
        ++pos_;
        NodePtr arg = expr();
        expect(')');
        return make_node(kind, start, arg);
      }
      const int slot = vs_.lookup(name);
      if (slot < 0) throw UnknownVariableError("unknown variable '" + std::string(name) + "'", start);
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Var;
      n->slot = slot;
      n->offset = start;
      return n;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t d = 0;
      while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_, ++d;
      return d;
    };
    std::size_t nd = digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) throw ParseError("malformed number", start);
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) throw ParseError("malformed number", start);
    return make_num(v, start);
  }
};

struct Affine {
  std::array<double, kMaxVars> coef{};
  double c = 0.0;
};

std::optional<Affine> affine_form(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Num: {
      Affine a;
      a.c = n.value;
      return a;
    }
    case ExprNode::Var: {
      Affine a;
      a.coef[n.slot] = 1.0;
      return a;
    }
    case ExprNode::Neg: {
      auto a = affine_form(*n.a);
      if (!a) return std::nullopt;
      for (double& x : a->coef) x = -x;
      a->c = -a->c;
      return a;
    }
    case ExprNode::Add:
    case ExprNode::Sub: {
      auto a = affine_form(*n.a);
      auto b = affine_form(*n.b);
      if (!a || !b) return std::nullopt;
      const double s = n.kind == ExprNode::Add ? 1.0 : -1.0;
      for (int i = 0; i < kMaxVars; ++i) a->coef[i] += s * b->coef[i];
      a->c += s * b->c;
      return a;
    }
    case ExprNode::Mul: {
      auto a = affine_form(*n.a);
      auto b = affine_form(*n.b);
      if (!a || !b) return std::nullopt;
      auto is_const = [](const Affine& f) {
        for (double x : f.coef)
          if (x != 0.0) return false;
        return true;
      };
      if (is_const(*a)) std::swap(a, b);
      if (!is_const(*b)) return std::nullopt;
      for (double& x : a->coef) x *= b->c;
      a->c *= b->c;
      return a;
    }
    default:
      return std::nullopt;
  }
}

bool integer_valued(double x) { return std::isfinite(x) && x == std::nearbyint(x); }

void check_periodic(const ExprNode& n, const VarSpace& vs) {
  switch (n.kind) {
    case ExprNode::Num:
      return;
    case ExprNode::Var:
      if (vs.angle[n.slot])
        throw NonPeriodicError("angle variable '" + vs.canonical(n.slot) +
                               "' must appear inside sin/cos with an integer multiple (offset " +
                               std::to_string(n.offset) + ")");
      return;
    case ExprNode::Sin:
    case ExprNode::Cos: {
      if (auto a = affine_form(*n.a)) {
        bool ok = true;
        for (int i = 0; i < vs.count; ++i)
          if (vs.angle[i] && !integer_valued(a->coef[i])) ok = false;
        if (ok) return;
      }
      check_periodic(*n.a, vs);
      return;
    }
    default:
      if (n.a) check_periodic(*n.a, vs);
      if (n.b) check_periodic(*n.b, vs);
  }
}

bool has_var(const ExprNode& n) {
  if (n.kind == ExprNode::Var) return true;
  return (n.a && has_var(*n.a)) || (n.b && has_var(*n.b));
}

double fold(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Num: return n.value;
    case ExprNode::Add: return fold(*n.a) + fold(*n.b);
    case ExprNode::Sub: return fold(*n.a) - fold(*n.b);
    case ExprNode::Mul: return fold(*n.a) * fold(*n.b);
    case ExprNode::Neg: return -fold(*n.a);
    case ExprNode::Pow: return int_pow(fold(*n.a), n.k);
    case ExprNode::Sin: return std::sin(fold(*n.a));
    case ExprNode::Cos: return std::cos(fold(*n.a));
    case ExprNode::Exp: return std::exp(fold(*n.a));
    case ExprNode::Var: break;
  }
  return 0.0;
}

void emit(const ExprNode& n, const VarSpace& vs, std::vector<Instr>& code, int depth, int& max_depth, bool& raw) {
  max_depth = std::max(max_depth, depth + 1);
  if (!has_var(n)) {
    code.push_back(Instr{OpCode::Const, 0, 0, fold(n)});
    return;
  }
  switch (n.kind) {
    case ExprNode::Var:
      if (vs.angle[n.slot]) raw = true;
      code.push_back(Instr{OpCode::Var, n.slot});
      return;
    case ExprNode::Add:
    case ExprNode::Sub:
    case ExprNode::Mul:
      emit(*n.a, vs, code, depth, max_depth, raw);
      emit(*n.b, vs, code, depth + 1, max_depth, raw);
      code.push_back(Instr{n.kind == ExprNode::Add ? OpCode::Add : n.kind == ExprNode::Sub ? OpCode::Sub : OpCode::Mul});
      return;
    case ExprNode::Neg:
      emit(*n.a, vs, code, depth, max_depth, raw);
      code.push_back(Instr{OpCode::Neg});
      return;
    case ExprNode::Pow: {
      emit(*n.a, vs, code, depth, max_depth, raw);
      Instr in{OpCode::Pow};
      in.k = static_cast<int>(n.k);
      code.push_back(in);
      return;
    }
    case ExprNode::Sin:
    case ExprNode::Cos: {
      if (auto a = affine_form(*n.a)) {
        int nz = 0, var = -1;
        for (int i = 0; i < vs.count; ++i)
          if (a->coef[i] != 0.0) ++nz, var = i;
        if (nz == 1 && vs.angle[var] && integer_valued(a->coef[var]) && std::abs(a->coef[var]) <= 4096.0) {
          Instr in{n.kind == ExprNode::Sin ? OpCode::SinVar : OpCode::CosVar, var};
          in.k = static_cast<int>(a->coef[var]);
          in.c = a->c;
          in.cc = std::cos(a->c);
          in.sc = std::sin(a->c);
          code.push_back(in);
          return;
        }
      }
      emit(*n.a, vs, code, depth, max_depth, raw);
      code.push_back(Instr{n.kind == ExprNode::Sin ? OpCode::Sin : OpCode::Cos});
      return;
    }
    case ExprNode::Exp:
      emit(*n.a, vs, code, depth, max_depth, raw);
      code.push_back(Instr{OpCode::Exp});
      return;
    case ExprNode::Num:
      break;
  }
}

void print(const ExprNode& n, const std::vector<std::string>& names, std::string& out) {
  auto bin = [&](const char* op) {
    out += '(';
    print(*n.a, names, out);
    out += op;
    print(*n.b, names, out);
    out += ')';
  };
  auto fn = [&](const char* name) {
    out += name;
    out += '(';
    print(*n.a, names, out);
    out += ')';
  };
  switch (n.kind) {
    case ExprNode::Num: {
      char buf[64];
      const double v = std::abs(n.value);
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      std::string num(buf, res.ptr);
      if (std::signbit(n.value)) out += "(-" + num + ")";
      else out += num;
      return;
    }
    case ExprNode::Var: out += names[n.slot]; return;
    case ExprNode::Add: bin(" + "); return;
    case ExprNode::Sub: bin(" - "); return;
    case ExprNode::Mul: bin(" * "); return;
    case ExprNode::Neg:
      out += "(-";
      print(*n.a, names, out);
      out += ')';
      return;
    case ExprNode::Pow:
      out += '(';
      print(*n.a, names, out);
      out += '^';
      out += std::to_string(n.k);
      out += ')';
      return;
    case ExprNode::Sin: fn("sin"); return;
    case ExprNode::Cos: fn("cos"); return;
    case ExprNode::Exp: fn("exp"); return;
  }
}

// cos(k t + c), sin(k t + c) from cos t, sin t.
inline void harmonic(double ct, double st, int k, double cc, double sc, double& ck, double& sk) {
  double br = ct, bi = k < 0 ? -st : st;
  double rr = 1.0, ri = 0.0;
  unsigned e = static_cast<unsigned>(k < 0 ? -k : k);
  if (e == 1u) {
    rr = br;
    ri = bi;
    e = 0;
  }
  while (e) {
    if (e & 1u) {
      const double t = rr * br - ri * bi;
      ri = rr * bi + ri * br;
      rr = t;
    }
    const double t = br * br - bi * bi;
    bi = 2.0 * br * bi;
    br = t;
    e >>= 1u;
  }
  ck = rr * cc - ri * sc;
  sk = ri * cc + rr * sc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expr

Expr::Expr() : root_(make_num(0.0, 0)), code_{Instr{OpCode::Const, 0, 0, 0.0}}, source_("0") {}

Expr Expr::parse(std::string_view src, const VarSpace& vars) {
  Expr e;
  Parser p(src, vars);
  e.root_ = p.parse();
  e.source_ = std::string(src);
  bool any_angle = false;
  for (bool a : vars.angle) any_angle = any_angle || a;
  if (any_angle) check_periodic(*e.root_, vars);
  e.compile(vars);
  return e;
}

Expr Expr::constant(double c, const VarSpace& vars) {
  Expr e;
  e.root_ = make_num(c, 0);
  std::string s;
  print(*e.root_, {}, s);
  e.source_ = s;
  e.compile(vars);
  return e;
}

void Expr::compile(const VarSpace& vars) {
  names_.clear();
  for (int i = 0; i < vars.count; ++i) names_.push_back(vars.canonical(i));
  code_.clear();
  needs_raw_ = false;
  max_stack_ = 1;
  emit(*root_, vars, code_, 0, max_stack_, needs_raw_);
  if (max_stack_ > 64) throw ParseError("expression requires too deep an evaluation stack", 0);
}

std::string Expr::to_string() const {
  std::string out;
  print(*root_, names_, out);
  return out;
}

bool Expr::is_zero() const { return code_.size() == 1 && code_[0].op == OpCode::Const && code_[0].c == 0.0; }
bool Expr::is_constant() const { return code_.size() == 1 && code_[0].op == OpCode::Const; }

template <class T>
T Expr::run(const VarInputs& in) const {
  union Slot {
    T v;
    Slot() {}
  };
  Slot slots[64];
  auto stack = [&slots](int i) -> T& { return slots[i].v; };
  int sp = 0;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case OpCode::Const: stack(sp++) = make_constant<T>(ins.c); break;
      case OpCode::Var: stack(sp++) = make_variable<T>(in.value[ins.var], ins.var); break;
      case OpCode::Add: --sp; stack(sp - 1) = stack(sp - 1) + stack(sp); break;
      case OpCode::Sub: --sp; stack(sp - 1) = stack(sp - 1) - stack(sp); break;
      case OpCode::Mul: --sp; stack(sp - 1) = stack(sp - 1) * stack(sp); break;
      case OpCode::Neg: stack(sp - 1) = -stack(sp - 1); break;
      case OpCode::Pow: stack(sp - 1) = jet_pow(stack(sp - 1), static_cast<unsigned>(ins.k)); break;
      case OpCode::Sin: {
        const double v = value_of(stack(sp - 1));
        const double s = std::sin(v), c = std::cos(v);
        stack(sp - 1) = chain(stack(sp - 1), s, c, -s);
        break;
      }
      case OpCode::Cos: {
        const double v = value_of(stack(sp - 1));
        const double s = std::sin(v), c = std::cos(v);
        stack(sp - 1) = chain(stack(sp - 1), c, -s, -c);
        break;
      }
      case OpCode::Exp: {
        const double e = std::exp(value_of(stack(sp - 1)));
        stack(sp - 1) = chain(stack(sp - 1), e, e, e);
        break;
      }
      case OpCode::SinVar:
      case OpCode::CosVar: {
        double ck, sk;
        if (in.has_trig[ins.var]) {
          harmonic(in.cosv[ins.var], in.sinv[ins.var], ins.k, ins.cc, ins.sc, ck, sk);
        } else {
          const double a = ins.k * in.value[ins.var] + ins.c;
          ck = std::cos(a);
          sk = std::sin(a);
        }
        const double k = ins.k;
        if (ins.op == OpCode::SinVar) stack(sp++) = make_univariate<T>(sk, k * ck, -k * k * sk, ins.var);
        else stack(sp++) = make_univariate<T>(ck, -k * sk, -k * k * ck, ins.var);
        break;
      }
    }
  }
  return stack(0);
}

void BatchInputs::resize(int n) {
  count = n;
  for (int v = 0; v < kMaxVars; ++v) {
    value[v].resize(n);
    cosv[v].resize(n);
    sinv[v].resize(n);
  }
}

void BatchInputs::set(int i, const VarInputs& in) {
  for (int v = 0; v < kMaxVars; ++v) {
    value[v][i] = in.value[v];
    cosv[v][i] = in.cosv[v];
    sinv[v][i] = in.sinv[v];
    if (i == 0) has_trig[v] = in.has_trig[v];
  }
}

template <class T>
void Expr::run_batch(const BatchInputs& in, T* out, T* scratch) const {
  const int count = in.count;
  int sp = 0;
  auto slot = [&](int s) { return scratch + static_cast<std::ptrdiff_t>(s) * count; };
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case OpCode::Const: {
        T* d = slot(sp++);
        for (int i = 0; i < count; ++i) d[i] = make_constant<T>(ins.c);
        break;
      }
      case OpCode::Var: {
        T* d = slot(sp++);
        const double* x = in.value[ins.var].data();
        for (int i = 0; i < count; ++i) d[i] = make_variable<T>(x[i], ins.var);
        break;
      }
      case OpCode::Add: {
        --sp;
        T *a = slot(sp - 1), *b = slot(sp);
        for (int i = 0; i < count; ++i) a[i] = a[i] + b[i];
        break;
      }
      case OpCode::Sub: {
        --sp;
        T *a = slot(sp - 1), *b = slot(sp);
        for (int i = 0; i < count; ++i) a[i] = a[i] - b[i];
        break;
      }
      case OpCode::Mul: {
        --sp;
        T *a = slot(sp - 1), *b = slot(sp);
        for (int i = 0; i < count; ++i) a[i] = a[i] * b[i];
        break;
      }
      case OpCode::Neg: {
        T* a = slot(sp - 1);
        for (int i = 0; i < count; ++i) a[i] = -a[i];
        break;
      }
      case OpCode::Pow: {
        T* a = slot(sp - 1);
        for (int i = 0; i < count; ++i) a[i] = jet_pow(a[i], static_cast<unsigned>(ins.k));
        break;
      }
      case OpCode::Sin: {
        T* a = slot(sp - 1);
        for (int i = 0; i < count; ++i) {
          const double v = value_of(a[i]);
          const double s = std::sin(v), c = std::cos(v);
          a[i] = chain(a[i], s, c, -s);
        }
        break;
      }
      case OpCode::Cos: {
        T* a = slot(sp - 1);
        for (int i = 0; i < count; ++i) {
          const double v = value_of(a[i]);
          const double s = std::sin(v), c = std::cos(v);
          a[i] = chain(a[i], c, -s, -c);
        }
        break;
      }
      case OpCode::Exp: {
        T* a = slot(sp - 1);
        for (int i = 0; i < count; ++i) {
          const double e = std::exp(value_of(a[i]));
          a[i] = chain(a[i], e, e, e);
        }
        break;
      }
      case OpCode::SinVar:
      case OpCode::CosVar: {
        T* d = slot(sp++);
        const double k = ins.k;
        const bool sine = ins.op == OpCode::SinVar;
        if (in.has_trig[ins.var]) {
          const double* ct = in.cosv[ins.var].data();
          const double* st = in.sinv[ins.var].data();
          for (int i = 0; i < count; ++i) {
            double ck, sk;
            harmonic(ct[i], st[i], ins.k, ins.cc, ins.sc, ck, sk);
            d[i] = sine ? make_univariate<T>(sk, k * ck, -k * k * sk, ins.var)
                        : make_univariate<T>(ck, -k * sk, -k * k * ck, ins.var);
          }
        } else {
          const double* x = in.value[ins.var].data();
          for (int i = 0; i < count; ++i) {
            const double a = ins.k * x[i] + ins.c;
            const double ck = std::cos(a), sk = std::sin(a);
            d[i] = sine ? make_univariate<T>(sk, k * ck, -k * k * sk, ins.var)
                        : make_univariate<T>(ck, -k * sk, -k * k * ck, ins.var);
          }
        }
        break;
      }
    }
  }
  for (int i = 0; i < count; ++i) out[i] = scratch[i];
}

template void Expr::run_batch<double>(const BatchInputs&, double*, double*) const;
template void Expr::run_batch<Jet1>(const BatchInputs&, Jet1*, Jet1*) const;

template double Expr::run<double>(const VarInputs&) const;
template Jet1 Expr::run<Jet1>(const VarInputs&) const;
template Jet2 Expr::run<Jet2>(const VarInputs&) const;

}  // namespace oulab
