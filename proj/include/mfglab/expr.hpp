#pragma once

// Minimal arithmetic expression evaluator for data fields given as strings
// in config files, e.g. "1 + 0.4*cos(pi*x)".  Supports + - * / ^ (right
// associative), parentheses, unary minus, the variables x and y, the
// constant pi, and one-argument functions cos sin exp tanh sqrt abs log.

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace mfglab {

class ExprError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Expression {
public:
    /// Parse; throws ExprError with position info on malformed input.
    static Expression parse(const std::string& text) {
        Parser p(text);
        Expression e;
        e.root_ = p.parse_expr();
        p.expect_end();
        e.text_ = text;
        return e;
    }

    double eval(double x, double y = 0.0) const { return root_(x, y); }
    const std::string& text() const { return text_; }

private:
    using Node = std::function<double(double, double)>;
    Node root_;
    std::string text_;

    class Parser {
    public:
        explicit Parser(const std::string& s) : s_(s) {}

        Node parse_expr() {
            Node lhs = parse_term();
            for (;;) {
                skip_ws();
                if (peek() == '+' || peek() == '-') {
                    const char op = get();
                    Node rhs = parse_term();
                    lhs = (op == '+')
                              ? Node([a = lhs, b = rhs](double x, double y) {
                                    return a(x, y) + b(x, y);
                                })
                              : Node([a = lhs, b = rhs](double x, double y) {
                                    return a(x, y) - b(x, y);
                                });
                } else {
                    return lhs;
                }
            }
        }

        void expect_end() {
            skip_ws();
            if (pos_ != s_.size())
                throw ExprError("expression: trailing input at position " +
                                std::to_string(pos_) + " in '" + s_ + "'");
        }

    private:
        Node parse_term() {
            Node lhs = parse_unary();
            for (;;) {
                skip_ws();
                if (peek() == '*' || peek() == '/') {
                    const char op = get();
                    Node rhs = parse_unary();
                    lhs = (op == '*')
                              ? Node([a = lhs, b = rhs](double x, double y) {
                                    return a(x, y) * b(x, y);
                                })
                              : Node([a = lhs, b = rhs](double x, double y) {
                                    return a(x, y) / b(x, y);
                                });
                } else {
                    return lhs;
                }
            }
        }

        // Unary minus binds looser than '^', so -x^2 means -(x^2); the
        // exponent position accepts a sign directly (2^-3).
        Node parse_unary() {
            skip_ws();
            if (peek() == '-') {
                get();
                Node inner = parse_unary();
                return [a = inner](double x, double y) { return -a(x, y); };
            }
            if (peek() == '+') {
                get();
                return parse_unary();
            }
            return parse_power();
        }

        Node parse_power() {
            Node base = parse_primary();
            skip_ws();
            if (peek() == '^') {
                get();
                Node expo = parse_unary();  // right associative
                return [a = base, b = expo](double x, double y) {
                    return std::pow(a(x, y), b(x, y));
                };
            }
            return base;
        }

        Node parse_primary() {
            skip_ws();
            const char c = peek();
            if (c == '(') {
                get();
                Node inner = parse_expr();
                skip_ws();
                if (get() != ')') throw ExprError("expression: missing ')' in '" + s_ + "'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
            throw ExprError("expression: unexpected character '" + std::string(1, c) +
                            "' at position " + std::to_string(pos_) + " in '" + s_ + "'");
        }

        Node parse_number() {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                throw ExprError("expression: bad number at position " + std::to_string(pos_) +
                                " in '" + s_ + "'");
            }
            pos_ += used;
            return [v](double, double) { return v; };
        }

        Node parse_name() {
            std::string name;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                name += s_[pos_++];
            skip_ws();
            if (peek() == '(') {
                get();
                Node arg = parse_expr();
                skip_ws();
                if (get() != ')')
                    throw ExprError("expression: missing ')' after " + name + " in '" + s_ + "'");
                return apply_function(name, std::move(arg));
            }
            if (name == "x") return [](double x, double) { return x; };
            if (name == "y") return [](double, double y) { return y; };
            if (name == "pi") return [](double, double) { return 3.14159265358979323846; };
            throw ExprError("expression: unknown symbol '" + name + "' in '" + s_ + "'");
        }

        Node apply_function(const std::string& name, Node arg) {
            double (*f)(double) = nullptr;
            if (name == "cos") f = std::cos;
            else if (name == "sin") f = std::sin;
            else if (name == "exp") f = std::exp;
            else if (name == "tanh") f = std::tanh;
            else if (name == "sqrt") f = std::sqrt;
            else if (name == "abs") f = std::fabs;
            else if (name == "log") f = std::log;
            else
                throw ExprError("expression: unknown function '" + name + "' in '" + s_ + "'");
            return [f, a = std::move(arg)](double x, double y) { return f(a(x, y)); };
        }

        void skip_ws() {
            while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
        char get() { return pos_ < s_.size() ? s_[pos_++] : '\0'; }

        const std::string& s_;
        std::size_t pos_ = 0;
    };
};

}  // namespace mfglab
