#pragma once

#include <cctype>
#include <charconv>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "stochemb/core/error.hpp"
#include "stochemb/fieldexpr/ast.hpp"

namespace stochemb::fieldexpr {

struct ParseOptions {
    int dim = 1;
    /// Named constants substituted at parse time (e.g. model parameters).
    std::map<std::string, double, std::less<>> constants;
};

struct ParsedField {
    std::vector<NodePtr> components;
    bool is_vector = false;
};

namespace detail {

class Parser {
public:
    Parser(std::string_view text, const ParseOptions& opts) : s_(text), opts_(opts) {}

    ParsedField parse_field() {
        ParsedField out;
        skip_ws();
        if (peek() == '[') {
            const std::size_t open = pos_;
            ++pos_;
            out.is_vector = true;
            out.components.push_back(parse_expr());
            skip_ws();
            while (peek() == ',') {
                ++pos_;
                out.components.push_back(parse_expr());
                skip_ws();
            }
            if (peek() != ']') {
                if (at_end()) throw ParseError("unclosed bracket", open);
                throw ParseError("expected ',' or ']'", pos_);
            }
            ++pos_;
        } else {
            out.components.push_back(parse_expr());
        }
        skip_ws();
        if (!at_end()) throw ParseError(std::string("unexpected character '") + s_[pos_] + "'", pos_);
        return out;
    }

private:
    std::string_view s_;
    const ParseOptions& opts_;
    std::size_t pos_ = 0;

    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            skip_ws();
            const char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos_;
            NodePtr rhs = parse_term();
            lhs = raw::binary(c == '+' ? Op::Add : Op::Sub, std::move(lhs), std::move(rhs));
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            skip_ws();
            const char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos_;
            NodePtr rhs = parse_unary();
            lhs = raw::binary(c == '*' ? Op::Mul : Op::Div, std::move(lhs), std::move(rhs));
        }
    }

    NodePtr parse_unary() {
        skip_ws();
        if (peek() == '-') {
            ++pos_;
            NodePtr operand = parse_unary();
            // A negated literal is a negative constant, so printed constants re-parse exactly.
            if (operand->op == Op::Const) return raw::constant(-operand->value);
            return raw::neg(std::move(operand));
        }
        if (peek() == '+') {
            ++pos_;
            return parse_unary();
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        skip_ws();
        if (peek() != '^') return base;
        ++pos_;
        return raw::pow(std::move(base), parse_integer_exponent());
    }

    int parse_integer_exponent() {
        skip_ws();
        bool paren = false;
        const std::size_t start = pos_;
        if (peek() == '(') {
            paren = true;
            ++pos_;
            skip_ws();
        }
        bool negative = false;
        if (peek() == '-') {
            negative = true;
            ++pos_;
        } else if (peek() == '+') {
            ++pos_;
        }
        const std::size_t digits = pos_;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (digits == pos_) throw ParseError("exponent must be an integer literal", start);
        if (!at_end() && (s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E'))
            throw ParseError("exponent must be an integer literal", start);
        int n = 0;
        auto [ptr, ec] = std::from_chars(s_.data() + digits, s_.data() + pos_, n);
        if (ec != std::errc{}) throw ParseError("exponent out of range", digits);
        if (paren) {
            skip_ws();
            if (peek() != ')') throw ParseError("unclosed parenthesis", start);
            ++pos_;
        }
        return negative ? -n : n;
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (!at_end() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
            if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
                pos_ = p;
                while (!at_end() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc{} || ptr != s_.data() + pos_) throw ParseError("malformed number", start);
        return raw::constant(v);
    }

    NodePtr parse_primary() {
        skip_ws();
        if (at_end()) throw ParseError("unexpected end of expression", pos_);
        const char c = peek();
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            NodePtr inner = parse_expr();
            skip_ws();
            if (peek() != ')') {
                if (at_end()) throw ParseError("unclosed parenthesis", open);
                throw ParseError("expected ')'", pos_);
            }
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view name = s_.substr(start, pos_ - start);
        skip_ws();
        if (peek() == '(') return parse_call(name, start);

        if (name == "t") return raw::var(0);
        if (name == "x" && opts_.dim == 1) return raw::var(1);
        if (name.size() >= 2 && name[0] == 'x') {
            int idx = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (ec == std::errc{} && ptr == name.data() + name.size()) {
                if (idx < 1 || idx > opts_.dim)
                    throw ParseError("unknown identifier '" + std::string(name) + "' (dimension is " +
                                         std::to_string(opts_.dim) + ")",
                                     start);
                return raw::var(idx);
            }
        }
        if (auto it = opts_.constants.find(name); it != opts_.constants.end()) return raw::constant(it->second);
        if (name == "pi") return raw::constant(std::numbers::pi);
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }

    NodePtr parse_call(std::string_view name, std::size_t start) {
        Func f{};
        if (name == "exp") f = Func::Exp;
        else if (name == "log") f = Func::Log;
        else if (name == "sin") f = Func::Sin;
        else if (name == "cos") f = Func::Cos;
        else if (name == "sqrt") f = Func::Sqrt;
        else if (name == "abs") f = Func::Abs;
        else throw ParseError("unknown function '" + std::string(name) + "'", start);
        const std::size_t open = pos_;
        ++pos_;  // '('
        NodePtr arg = parse_expr();
        skip_ws();
        if (peek() == ',') throw ParseError("arity mismatch: '" + std::string(name) + "' takes one argument", pos_);
        if (peek() != ')') {
            if (at_end()) throw ParseError("unclosed parenthesis", open);
            throw ParseError("expected ')'", pos_);
        }
        ++pos_;
        return raw::call(f, std::move(arg));
    }
};

}  // namespace detail

inline ParsedField parse(std::string_view text, const ParseOptions& opts) {
    if (opts.dim < 1) throw InvalidArgument("field dimension must be >= 1");
    return detail::Parser(text, opts).parse_field();
}

}  // namespace stochemb::fieldexpr
