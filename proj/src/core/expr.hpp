#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/grid.hpp"

namespace mfg {

/// Arithmetic expression over x1, x2, x3, t, T and pi, compiled to a small
/// postfix program. Grammar: + - * / ^ (right-assoc), unary minus, parentheses,
/// and the usual single-argument functions (sin cos tan exp log sqrt sinh cosh
/// tanh abs) plus min/max/pow with two arguments. Parse errors throw
/// errc::config_error with position information.
class Expr {
 public:
  static Expr parse(const std::string& src);

  double eval(const std::array<double, 3>& x, double t, double horizon) const;
  bool depends_on_time() const { return uses_time_; }
  const std::string& source() const { return src_; }

  struct Op {
    int code;
    double value;
  };

 private:
  std::vector<Op> prog_;
  std::string src_;
  bool uses_time_ = false;
  mutable std::vector<double> stack_;
};

ScalarField sample(const Grid& g, const Expr& e);          // evaluated at t = 0
SpaceTimeField sample_spacetime(const Grid& g, const Expr& e);

}  // namespace mfg
