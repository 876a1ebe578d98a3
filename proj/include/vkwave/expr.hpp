#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "vkwave/common.hpp"

namespace vkwave {

// Minimal arithmetic expressions over the spatial variable x, enough to
// state closed-form initial data: numbers, x, pi, + - * /, parentheses,
// and the functions sin, cos, exp, pow(a, b).
class Expr {
 public:
  static Expr parse(const std::string& text) {
    Parser p(text);
    Expr e;
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (!p.done())
      throw std::invalid_argument("expression: trailing input at '" + p.rest() + "'");
    return e;
  }

  double eval(double x) const { return eval_node(*root_, x); }

  Vec eval_on(const Vec& xs) const {
    Vec out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = eval(xs[i]);
    return out;
  }

 private:
  struct Node {
    enum class Kind { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Pow };
    Kind kind;
    double value = 0.0;
    std::unique_ptr<Node> a, b;
  };

  static double eval_node(const Node& n, double x) {
    using K = Node::Kind;
    switch (n.kind) {
      case K::Const: return n.value;
      case K::Var: return x;
      case K::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
      case K::Sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
      case K::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
      case K::Div: return eval_node(*n.a, x) / eval_node(*n.b, x);
      case K::Neg: return -eval_node(*n.a, x);
      case K::Sin: return std::sin(eval_node(*n.a, x));
      case K::Cos: return std::cos(eval_node(*n.a, x));
      case K::Exp: return std::exp(eval_node(*n.a, x));
      case K::Pow: return std::pow(eval_node(*n.a, x), eval_node(*n.b, x));
    }
    return 0.0;
  }

  class Parser {
   public:
    explicit Parser(const std::string& s) : s_(s) {}

    std::unique_ptr<Node> parse_expr() {
      auto lhs = parse_term();
      for (;;) {
        skip_ws();
        if (accept('+')) {
          lhs = binary(Node::Kind::Add, std::move(lhs), parse_term());
        } else if (accept('-')) {
          lhs = binary(Node::Kind::Sub, std::move(lhs), parse_term());
        } else {
          return lhs;
        }
      }
    }

    void skip_ws() {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() const { return pos_ >= s_.size(); }
    std::string rest() const { return s_.substr(pos_); }

   private:
    std::unique_ptr<Node> parse_term() {
      auto lhs = parse_factor();
      for (;;) {
        skip_ws();
        if (accept('*')) {
          lhs = binary(Node::Kind::Mul, std::move(lhs), parse_factor());
        } else if (accept('/')) {
          lhs = binary(Node::Kind::Div, std::move(lhs), parse_factor());
        } else {
          return lhs;
        }
      }
    }

    std::unique_ptr<Node> parse_factor() {
      skip_ws();
      if (accept('-')) {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Neg;
        n->a = parse_factor();
        return n;
      }
      if (accept('+')) return parse_factor();
      return parse_primary();
    }

    std::unique_ptr<Node> parse_primary() {
      skip_ws();
      if (done()) throw std::invalid_argument("expression: unexpected end of input");
      char c = s_[pos_];
      if (c == '(') {
        ++pos_;
        auto n = parse_expr();
        expect(')');
        return n;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
      if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
      throw std::invalid_argument(std::string("expression: unexpected character '") + c +
                                  "'");
    }

    std::unique_ptr<Node> parse_number() {
      std::size_t end = 0;
      double v = std::stod(s_.substr(pos_), &end);
      pos_ += end;
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::Const;
      n->value = v;
      return n;
    }

    std::unique_ptr<Node> parse_ident() {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string name = s_.substr(start, pos_ - start);
      if (name == "x") {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Var;
        return n;
      }
      if (name == "pi") {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Const;
        n->value = 3.14159265358979323846;
        return n;
      }
      Node::Kind kind;
      if (name == "sin") kind = Node::Kind::Sin;
      else if (name == "cos") kind = Node::Kind::Cos;
      else if (name == "exp") kind = Node::Kind::Exp;
      else if (name == "pow") kind = Node::Kind::Pow;
      else throw std::invalid_argument("expression: unknown identifier '" + name + "'");
      expect('(');
      auto n = std::make_unique<Node>();
      n->kind = kind;
      n->a = parse_expr();
      if (kind == Node::Kind::Pow) {
        expect(',');
        n->b = parse_expr();
      }
      expect(')');
      return n;
    }

    static std::unique_ptr<Node> binary(Node::Kind k, std::unique_ptr<Node> a,
                                        std::unique_ptr<Node> b) {
      auto n = std::make_unique<Node>();
      n->kind = k;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }

    bool accept(char c) {
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == c) {
        ++pos_;
        return true;
      }
      return false;
    }

    void expect(char c) {
      if (!accept(c))
        throw std::invalid_argument(std::string("expression: expected '") + c + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
  };

  std::shared_ptr<Node> root_;
};

}  // namespace vkwave
