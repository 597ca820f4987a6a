#include "core/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

namespace mfg {

namespace {

enum OpCode {
  kPushConst,
  kPushX1,
  kPushX2,
  kPushX3,
  kPushT,
  kPushHorizon,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kFn1Base,   // kFn1Base + function id
  kFn2Base = kFn1Base + 32,
};

const char* kFn1Names[] = {"sin", "cos", "tan", "exp", "log", "sqrt",
                           "sinh", "cosh", "tanh", "abs"};
double (*const kFn1Ptrs[])(double) = {std::sin, std::cos, std::tan, std::exp, std::log,
                                      std::sqrt, std::sinh, std::cosh, std::tanh, std::fabs};
const char* kFn2Names[] = {"min", "max", "pow"};

struct Parser {
  const std::string& s;
  std::size_t pos = 0;
  std::vector<Expr::Op>* prog;
  bool uses_time = false;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void die(const std::string& msg) {
    fail(errc::config_error,
         "expression error at position " + std::to_string(pos) + " in '" + s + "': " + msg);
  }

  void emit(int code, double v = 0.0) { prog->push_back({code, v}); }

  void parse_expr() {
    parse_term();
    for (;;) {
      skip();
      if (eat('+')) {
        parse_term();
        emit(kAdd);
      } else if (eat('-')) {
        parse_term();
        emit(kSub);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_factor();
    for (;;) {
      skip();
      if (eat('*')) {
        parse_factor();
        emit(kMul);
      } else if (eat('/')) {
        parse_factor();
        emit(kDiv);
      } else {
        return;
      }
    }
  }

  // Unary minus binds looser than '^', so -x1^2 is -(x1^2).
  void parse_factor() {
    skip();
    if (eat('-')) {
      parse_factor();
      emit(kNeg);
      return;
    }
    if (eat('+')) {
      parse_factor();
      return;
    }
    parse_primary();
    skip();
    if (eat('^')) {
      parse_factor();  // right associative
      emit(kPow);
    }
  }

  void parse_primary() {
    skip();
    if (pos >= s.size()) die("unexpected end of input");
    const char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double v = std::strtod(s.c_str() + pos, &end);
      if (end == s.c_str() + pos) die("bad number");
      pos = end - s.c_str();
      emit(kPushConst, v);
      return;
    }
    if (eat('(')) {
      parse_expr();
      if (!eat(')')) die("expected ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      const std::string name = s.substr(start, pos - start);
      skip();
      if (pos < s.size() && s[pos] == '(') {
        ++pos;
        for (std::size_t f = 0; f < std::size(kFn1Names); ++f)
          if (name == kFn1Names[f]) {
            parse_expr();
            if (!eat(')')) die("expected ')' after " + name);
            emit(kFn1Base + static_cast<int>(f));
            return;
          }
        for (std::size_t f = 0; f < std::size(kFn2Names); ++f)
          if (name == kFn2Names[f]) {
            parse_expr();
            if (!eat(',')) die("expected ',' in " + name);
            parse_expr();
            if (!eat(')')) die("expected ')' after " + name);
            emit(kFn2Base + static_cast<int>(f));
            return;
          }
        die("unknown function '" + name + "'");
      }
      if (name == "x1") return emit(kPushX1);
      if (name == "x2") return emit(kPushX2);
      if (name == "x3") return emit(kPushX3);
      if (name == "t") {
        uses_time = true;
        return emit(kPushT);
      }
      if (name == "T") return emit(kPushHorizon);
      if (name == "pi") return emit(kPushConst, M_PI);
      if (name == "e") return emit(kPushConst, M_E);
      die("unknown identifier '" + name + "'");
    }
    die(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

Expr Expr::parse(const std::string& src) {
  Expr e;
  e.src_ = src;
  Parser p{src, 0, &e.prog_, false};
  p.parse_expr();
  p.skip();
  if (p.pos != src.size()) p.die("trailing input");
  e.uses_time_ = p.uses_time;
  return e;
}

double Expr::eval(const std::array<double, 3>& x, double t, double horizon) const {
  stack_.clear();
  auto pop = [&]() {
    double v = stack_.back();
    stack_.pop_back();
    return v;
  };
  for (const Op& op : prog_) {
    switch (op.code) {
      case kPushConst: stack_.push_back(op.value); break;
      case kPushX1: stack_.push_back(x[0]); break;
      case kPushX2: stack_.push_back(x[1]); break;
      case kPushX3: stack_.push_back(x[2]); break;
      case kPushT: stack_.push_back(t); break;
      case kPushHorizon: stack_.push_back(horizon); break;
      case kAdd: {
        double b = pop();
        stack_.back() += b;
        break;
      }
      case kSub: {
        double b = pop();
        stack_.back() -= b;
        break;
      }
      case kMul: {
        double b = pop();
        stack_.back() *= b;
        break;
      }
      case kDiv: {
        double b = pop();
        stack_.back() /= b;
        break;
      }
      case kPow: {
        double b = pop();
        stack_.back() = std::pow(stack_.back(), b);
        break;
      }
      case kNeg: stack_.back() = -stack_.back(); break;
      default:
        if (op.code >= kFn2Base) {
          double b = pop();
          double a = stack_.back();
          const int f = op.code - kFn2Base;
          stack_.back() = f == 0 ? std::min(a, b) : f == 1 ? std::max(a, b) : std::pow(a, b);
        } else {
          stack_.back() = kFn1Ptrs[op.code - kFn1Base](stack_.back());
        }
    }
  }
  return stack_.back();
}

ScalarField sample(const Grid& g, const Expr& e) {
  return sample(g, [&](const std::array<double, 3>& x) {
    return e.eval(x, 0.0, g.spec.horizon);
  });
}

SpaceTimeField sample_spacetime(const Grid& g, const Expr& e) {
  return sample(g, [&](const std::array<double, 3>& x, double t) {
    return e.eval(x, t, g.spec.horizon);
  });
}

}  // namespace mfg
