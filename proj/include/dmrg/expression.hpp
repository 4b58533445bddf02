#pragma once

// Arithmetic expressions over x, t, y (alias y1), y1..y9 and z.
//   expr := term (('+' | '-') term)*      term := unary (('*' | '/') unary)*
//   unary := '-' unary | power            power := atom ('^' unary)?
//   atom := number | identifier | func '(' args ')' | '(' expr ')'
// Functions: tanh relu abs sin min max pow. "c:<number>" is a constant.

#include <array>
#include <memory>
#include <string>

namespace dmrg {

struct ExprVars {
    double x = 0.0;
    double t = 0.0;
    double z = 0.0;
    std::array<double, 9> y{};
};

class Expression {
public:
    /// Throws InvalidInput with the offending column on a syntax error.
    static Expression parse(const std::string& text);

    double operator()(const ExprVars& v) const;
    double operator()(double x, double t) const;
    const std::string& text() const noexcept { return text_; }
    /// Highest y index used (0 when none).
    int max_component() const noexcept { return max_component_; }
    bool uses_z() const noexcept { return uses_z_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
    int max_component_ = 0;
    bool uses_z_ = false;
};

}  // namespace dmrg
