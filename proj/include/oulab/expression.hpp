#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "oulab/jet.hpp"

namespace oulab {

/// Names accepted by the parser and the variable slot each one refers to.
/// Several names may share a slot (aliases).  Angle slots are 2*pi-periodic
/// chart coordinates; expressions must stay periodic in them.
struct VarSpace {
  int count = 0;
  std::vector<std::string> names;
  std::vector<int> slot;
  std::vector<bool> angle;  // per slot

  static VarSpace plain(const std::vector<std::string>& names);
  static VarSpace angles(const std::vector<std::string>& names);
  int lookup(std::string_view name) const;  // -1 if absent
  const std::string& canonical(int s) const;
};

/// Point data handed to the evaluator.  For angle slots the cosine and sine
/// are supplied directly so periodic terms never need the raw angle.
struct VarInputs {
  int n = 0;
  std::array<double, kMaxVars> value{};
  std::array<double, kMaxVars> cosv{};
  std::array<double, kMaxVars> sinv{};
  std::array<bool, kMaxVars> has_trig{};

  static VarInputs from_values(const VarSpace& vs, const double* values);
};

/// Inputs for `count` points stored per variable.  has_trig is shared since
/// every point of a batch comes from the same manifold.
struct BatchInputs {
  int count = 0;
  std::array<bool, kMaxVars> has_trig{};
  std::array<std::vector<double>, kMaxVars> value, cosv, sinv;

  void resize(int n);
  /// Stores point i.
  void set(int i, const VarInputs& in);
};

enum class OpCode : std::uint8_t { Const, Var, Add, Sub, Mul, Neg, Pow, Sin, Cos, Exp, SinVar, CosVar };

struct Instr {
  OpCode op;
  int var = 0;
  int k = 0;          // Pow exponent, or integer frequency for SinVar/CosVar
  double c = 0.0;     // Const value, or phase for SinVar/CosVar
  double cc = 1.0;    // cos(phase)
  double sc = 0.0;    // sin(phase)
};

struct ExprNode;

class Expr {
 public:
  Expr();  // the zero field

  static Expr parse(std::string_view src, const VarSpace& vars);
  static Expr constant(double c, const VarSpace& vars);

  double eval(const VarInputs& in) const { return run<double>(in); }
  Jet1 eval1(const VarInputs& in) const { return run<Jet1>(in); }
  Jet2 eval2(const VarInputs& in) const { return run<Jet2>(in); }

  template <class T>
  T run(const VarInputs& in) const;
  /// Evaluates at `count` points with the same arithmetic as run();
  /// `scratch` holds max_stack() * count values.
  template <class T>
  void run_batch(const BatchInputs& in, T* out, T* scratch) const;
  int max_stack() const { return max_stack_; }

  /// Fully parenthesised form that reparses to the same function.
  std::string to_string() const;
  const std::string& source() const { return source_; }

  bool is_zero() const;
  bool is_constant() const;
  /// True when evaluation reads raw angle values (not only cos/sin).
  bool needs_raw_values() const { return needs_raw_; }
  const std::vector<Instr>& code() const { return code_; }

 private:
  std::shared_ptr<const ExprNode> root_;
  std::vector<std::string> names_;  // canonical names by slot, for printing
  std::vector<Instr> code_;
  std::string source_;
  bool needs_raw_ = false;
  int max_stack_ = 1;

  void compile(const VarSpace& vars);
};

extern template double Expr::run<double>(const VarInputs&) const;
extern template Jet1 Expr::run<Jet1>(const VarInputs&) const;
extern template Jet2 Expr::run<Jet2>(const VarInputs&) const;
extern template void Expr::run_batch<double>(const BatchInputs&, double*, double*) const;
extern template void Expr::run_batch<Jet1>(const BatchInputs&, Jet1*, Jet1*) const;

}  // namespace oulab
