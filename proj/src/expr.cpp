#include "msteer/expr.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "msteer/errors.hpp"

namespace msteer {

namespace expr {

ExprPtr number(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Number;
  n->value = v;
  return n;
}

ExprPtr variable(std::size_t index) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Variable;
  n->variable = index;
  return n;
}

ExprPtr negate(ExprPtr x) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Negate;
  n->lhs = std::move(x);
  return n;
}

ExprPtr binary(ExprNode::Kind kind, ExprPtr l, ExprPtr r) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

ExprPtr call(ExprNode::Func f, ExprPtr x) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Call;
  n->func = f;
  n->lhs = std::move(x);
  return n;
}

}  // namespace expr

namespace {

constexpr double kMinDenominator = 1e-300;

double apply(ExprNode::Func f, double x) {
  switch (f) {
    case ExprNode::Func::Sin: return std::sin(x);
    case ExprNode::Func::Cos: return std::cos(x);
    case ExprNode::Func::Exp: return std::exp(x);
    case ExprNode::Func::Abs: return std::abs(x);
  }
  return x;
}

double divide(double num, double den) {
  if (std::abs(den) < kMinDenominator) throw DomainError("division by (near) zero in field expression");
  return num / den;
}

const char* func_name(ExprNode::Func f) {
  switch (f) {
    case ExprNode::Func::Sin: return "sin";
    case ExprNode::Func::Cos: return "cos";
    case ExprNode::Func::Exp: return "exp";
    case ExprNode::Func::Abs: return "abs";
  }
  return "?";
}

double interpret_node(const ExprNode& n, std::span<const double> x) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Number: return n.value;
    case K::Variable:
      if (n.variable >= x.size()) throw DimensionMismatch(n.variable + 1, x.size());
      return x[n.variable];
    case K::Negate: return -interpret_node(*n.lhs, x);
    case K::Add: return interpret_node(*n.lhs, x) + interpret_node(*n.rhs, x);
    case K::Sub: return interpret_node(*n.lhs, x) - interpret_node(*n.rhs, x);
    case K::Mul: return interpret_node(*n.lhs, x) * interpret_node(*n.rhs, x);
    case K::Div: return divide(interpret_node(*n.lhs, x), interpret_node(*n.rhs, x));
    case K::Call: return apply(n.func, interpret_node(*n.lhs, x));
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_node(const ExprNode& n, std::string& out) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Number:
      out += format_number(n.value);
      return;
    case K::Variable:
      if (n.variable == 0)
        out += 'a';
      else if (n.variable == 1)
        out += 'b';
      else
        out += "x" + std::to_string(n.variable + 1);
      return;
    case K::Negate:
      out += "-(";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case K::Call:
      out += func_name(n.func);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
    default: {
      const char op = n.kind == K::Add ? '+' : n.kind == K::Sub ? '-' : n.kind == K::Mul ? '*' : '/';
      out += '(';
      print_node(*n.lhs, out);
      out += ' ';
      out += op;
      out += ' ';
      print_node(*n.rhs, out);
      out += ')';
    }
  }
}

bool same_tree(const ExprNode* l, const ExprNode* r) {
  if (l == r) return true;
  if (!l || !r || l->kind != r->kind) return false;
  using K = ExprNode::Kind;
  switch (l->kind) {
    case K::Number: return l->value == r->value;
    case K::Variable: return l->variable == r->variable;
    case K::Call:
      return l->func == r->func && same_tree(l->lhs.get(), r->lhs.get());
    case K::Negate: return same_tree(l->lhs.get(), r->lhs.get());
    default:
      return same_tree(l->lhs.get(), r->lhs.get()) && same_tree(l->rhs.get(), r->rhs.get());
  }
}

// Recursive-descent parser over the DSL grammar; offsets are byte positions in `src`.
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  FieldExpr field() {
    FieldExpr f;
    expect('(', "'('");
    f.components.emplace_back(expression());
    while (peek() == ',') {
      ++pos_;
      f.components.emplace_back(expression());
    }
    expect(')', "',' or ')'");
    finish();
    return f;
  }

  ScalarExpr scalar() {
    ScalarExpr e(expression());
    finish();
    return e;
  }

 private:
  ExprPtr expression() {
    ExprPtr lhs = term();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      lhs = expr::binary(c == '+' ? ExprNode::Kind::Add : ExprNode::Kind::Sub, lhs, term());
    }
  }

  ExprPtr term() {
    ExprPtr lhs = factor();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      lhs = expr::binary(c == '*' ? ExprNode::Kind::Mul : ExprNode::Kind::Div, lhs, factor());
    }
  }

  ExprPtr factor() {
    if (peek() == '-') {
      ++pos_;
      return expr::negate(atom());
    }
    return atom();
  }

  ExprPtr atom() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      ExprPtr inner = expression();
      expect(')', "')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw SyntaxError(pos_, "number, identifier or '('");
  }

  ExprPtr number_literal() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t count = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) throw SyntaxError(start, "digits");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw SyntaxError(pos_, "exponent digits");
    }
    const std::string text(src_.substr(start, pos_ - start));
    return expr::number(std::strtod(text.c_str(), nullptr));
  }

  ExprPtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name == "a") return expr::variable(0);
    if (name == "b") return expr::variable(1);
    if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '9')
      return expr::variable(static_cast<std::size_t>(name[1] - '1'));
    ExprNode::Func f{};
    if (name == "sin")
      f = ExprNode::Func::Sin;
    else if (name == "cos")
      f = ExprNode::Func::Cos;
    else if (name == "exp")
      f = ExprNode::Func::Exp;
    else if (name == "abs")
      f = ExprNode::Func::Abs;
    else
      throw UnknownIdentifier(start, std::string(name));
    expect('(', "'(' after function name");
    ExprPtr arg = expression();
    expect(')', "')'");
    return expr::call(f, arg);
  }

  char peek() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  void expect(char c, const char* what) {
    if (peek() != c) throw SyntaxError(pos_, what);
    ++pos_;
  }

  void finish() {
    if (peek() != '\0') throw SyntaxError(pos_, "end of input");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

ScalarExpr::ScalarExpr(ExprPtr root) : root_(std::move(root)) {
  if (!root_) throw ValidationError("expression", "empty expression");
  // Post-order flattening into a stack program.
  std::size_t depth = 0;
  std::function<void(const ExprNode&)> emit = [&](const ExprNode& n) {
    using K = ExprNode::Kind;
    switch (n.kind) {
      case K::Number:
      case K::Variable:
        if (n.kind == K::Variable) arity_ = std::max(arity_, n.variable + 1);
        ++depth;
        break;
      case K::Negate:
      case K::Call:
        emit(*n.lhs);
        break;
      default:
        emit(*n.lhs);
        emit(*n.rhs);
        --depth;
        break;
    }
    depth_ = std::max(depth_, depth);
    program_.push_back({n.kind, n.func, n.value, n.variable});
  };
  emit(*root_);
}

double ScalarExpr::interpret(std::span<const double> x) const { return interpret_node(*root_, x); }

double ScalarExpr::operator()(std::span<const double> x) const {
  constexpr std::size_t kMaxStack = 64;
  if (depth_ > kMaxStack) return interpret(x);
  if (arity_ > x.size()) throw DimensionMismatch(arity_, x.size());
  std::array<double, kMaxStack> stack;
  std::size_t top = 0;
  using K = ExprNode::Kind;
  for (const Instr& in : program_) {
    switch (in.kind) {
      case K::Number: stack[top++] = in.value; break;
      case K::Variable: stack[top++] = x[in.variable]; break;
      case K::Negate: stack[top - 1] = -stack[top - 1]; break;
      case K::Call: stack[top - 1] = apply(in.func, stack[top - 1]); break;
      case K::Add: --top; stack[top - 1] += stack[top]; break;
      case K::Sub: --top; stack[top - 1] -= stack[top]; break;
      case K::Mul: --top; stack[top - 1] *= stack[top]; break;
      case K::Div: --top; stack[top - 1] = divide(stack[top - 1], stack[top]); break;
    }
  }
  return stack[0];
}

std::string ScalarExpr::to_string() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

bool ScalarExpr::operator==(const ScalarExpr& other) const {
  return same_tree(root_.get(), other.root_.get());
}

std::size_t FieldExpr::arity() const {
  std::size_t n = 0;
  for (const auto& c : components) n = std::max(n, c.arity());
  return n;
}

void FieldExpr::eval(std::span<const double> x, std::span<double> out) const {
  if (out.size() != components.size()) throw DimensionMismatch(components.size(), out.size());
  for (std::size_t k = 0; k < components.size(); ++k) out[k] = components[k](x);
}

std::string FieldExpr::to_string() const {
  std::string out = "(";
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (k) out += ", ";
    out += components[k].to_string();
  }
  return out + ")";
}

FieldExpr parse_field(std::string_view src) {
  if (src.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw SyntaxError(0, "field tuple");
  return Parser(src).field();
}

ScalarExpr parse_scalar(std::string_view src) {
  if (src.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw SyntaxError(0, "expression");
  return Parser(src).scalar();
}

}  // namespace msteer
