#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msteer {

/// Expression tree node of the field DSL. Variables are positional: a = x1, b = x2.
struct ExprNode {
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Call };
  enum class Func { Sin, Cos, Exp, Abs };

  Kind kind = Kind::Number;
  double value = 0.0;       // Number
  std::size_t variable = 0; // Variable (0-based)
  Func func = Func::Sin;    // Call
  std::shared_ptr<const ExprNode> lhs;  // Negate, Call, binary
  std::shared_ptr<const ExprNode> rhs;  // binary
};

using ExprPtr = std::shared_ptr<const ExprNode>;

namespace expr {
ExprPtr number(double v);
ExprPtr variable(std::size_t index);
ExprPtr negate(ExprPtr x);
ExprPtr binary(ExprNode::Kind kind, ExprPtr l, ExprPtr r);
ExprPtr call(ExprNode::Func f, ExprPtr x);
}  // namespace expr

/// Scalar expression, immutable after construction. Evaluation runs a compiled postfix
/// program; `interpret` walks the tree and serves as its reference.
class ScalarExpr {
 public:
  explicit ScalarExpr(ExprPtr root);

  double operator()(std::span<const double> x) const;
  double interpret(std::span<const double> x) const;

  const ExprPtr& root() const { return root_; }
  /// Number of variables referenced (1 + highest index), 0 for constants.
  std::size_t arity() const { return arity_; }
  std::string to_string() const;

  /// Structural equality of the trees.
  bool operator==(const ScalarExpr& other) const;

 private:
  struct Instr {
    ExprNode::Kind kind;
    ExprNode::Func func;
    double value;
    std::size_t variable;
  };

  ExprPtr root_;
  std::vector<Instr> program_;
  std::size_t depth_ = 0;
  std::size_t arity_ = 0;
};

/// Tuple of scalar expressions, one per output component.
struct FieldExpr {
  std::vector<ScalarExpr> components;

  std::size_t dim() const { return components.size(); }
  std::size_t arity() const;
  void eval(std::span<const double> x, std::span<double> out) const;
  std::string to_string() const;
  bool operator==(const FieldExpr& other) const = default;
};

/// field := "(" expr { "," expr } ")"
FieldExpr parse_field(std::string_view src);
/// A bare expression (used for scalar costs).
ScalarExpr parse_scalar(std::string_view src);

}  // namespace msteer
