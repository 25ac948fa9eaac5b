#include "grpokit/numeric_expression.hpp"

#include <cctype>
#include <cstdlib>

namespace grpokit {

namespace {

using boost::multiprecision::cpp_int;

constexpr int kMaxExponent = 64;
constexpr int kMaxScientificExponent = 400;
constexpr int kMaxDepth = 64;

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    std::optional<Rational> parse() {
        auto value = expression();
        skip_space();
        if (!value || pos_ != text_.size()) return std::nullopt;
        return value;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    void skip_space() {
        while (pos_ < text_.size()) {
            if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            } else if (text_.substr(pos_, 2) == "\\," || text_.substr(pos_, 2) == "\\!" ||
                       text_.substr(pos_, 2) == "\\;") {
                pos_ += 2;
            } else if (text_.substr(pos_, 5) == "\\left" || text_.substr(pos_, 6) == "\\right") {
                pos_ += text_[pos_ + 1] == 'l' ? 5 : 6;
            } else {
                break;
            }
        }
    }

    bool consume(std::string_view token) {
        skip_space();
        if (text_.substr(pos_, token.size()) == token) {
            // \frac must not match \fraction-like macros
            if (token.front() == '\\' && pos_ + token.size() < text_.size() &&
                std::isalpha(static_cast<unsigned char>(text_[pos_ + token.size()]))) {
                return false;
            }
            pos_ += token.size();
            return true;
        }
        return false;
    }

    std::optional<Rational> expression() {
        if (++depth_ > kMaxDepth) return std::nullopt;
        auto lhs = term();
        while (lhs) {
            if (consume("+")) {
                auto rhs = term();
                if (!rhs) return std::nullopt;
                *lhs += *rhs;
            } else if (consume("-")) {
                auto rhs = term();
                if (!rhs) return std::nullopt;
                *lhs -= *rhs;
            } else {
                break;
            }
        }
        --depth_;
        return lhs;
    }

    std::optional<Rational> term() {
        auto lhs = unary();
        while (lhs) {
            if (consume("*") || consume("\\cdot") || consume("\\times")) {
                auto rhs = unary();
                if (!rhs) return std::nullopt;
                *lhs *= *rhs;
            } else if (consume("/") || consume("\\div")) {
                auto rhs = unary();
                if (!rhs || *rhs == 0) return std::nullopt;
                *lhs /= *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<Rational> unary() {
        if (consume("-")) {
            auto v = unary();
            if (!v) return std::nullopt;
            return -*v;
        }
        if (consume("+")) return unary();
        return power();
    }

    std::optional<Rational> power() {
        auto base = primary();
        if (!base) return std::nullopt;
        if (!consume("^")) return base;
        std::optional<Rational> exponent;
        skip_space();
        if (consume("{")) {
            exponent = expression();
            if (!consume("}")) return std::nullopt;
        } else if (consume("(")) {
            exponent = expression();
            if (!consume(")")) return std::nullopt;
        } else if (consume("-")) {
            auto e = primary();
            if (!e) return std::nullopt;
            exponent = -*e;
        } else {
            exponent = primary();
        }
        if (!exponent) return std::nullopt;
        if (denominator(*exponent) != 1) return std::nullopt;
        const cpp_int e = numerator(*exponent);
        if (e > kMaxExponent || e < -kMaxExponent) return std::nullopt;
        const int n = e.convert_to<int>();
        if (n < 0 && *base == 0) return std::nullopt;
        Rational result = 1;
        for (int i = 0; i < std::abs(n); ++i) result *= *base;
        if (n < 0) result = Rational(1) / result;
        return result;
    }

    std::optional<Rational> primary() {
        skip_space();
        if (pos_ >= text_.size()) return std::nullopt;
        if (consume("(")) {
            auto v = expression();
            if (!consume(")")) return std::nullopt;
            return v;
        }
        if (consume("{")) {
            auto v = expression();
            if (!consume("}")) return std::nullopt;
            return v;
        }
        if (consume("\\frac") || consume("\\dfrac") || consume("\\tfrac")) {
            if (!consume("{")) return std::nullopt;
            auto num = expression();
            if (!num || !consume("}") || !consume("{")) return std::nullopt;
            auto den = expression();
            if (!den || !consume("}") || *den == 0) return std::nullopt;
            return *num / *den;
        }
        return number();
    }

    std::optional<Rational> number() {
        const std::size_t start = pos_;
        cpp_int digits = 0;
        int scale = 0;
        bool any = false;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            digits = digits * 10 + (text_[pos_] - '0');
            ++pos_;
            any = true;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                digits = digits * 10 + (text_[pos_] - '0');
                ++pos_;
                --scale;
                any = true;
            }
        }
        if (!any) {
            pos_ = start;
            return std::nullopt;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            int sign = 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) {
                sign = text_[p] == '-' ? -1 : 1;
                ++p;
            }
            int exp = 0;
            bool exp_digits = false;
            while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                exp = exp * 10 + (text_[p] - '0');
                if (exp > kMaxScientificExponent) return std::nullopt;
                ++p;
                exp_digits = true;
            }
            if (exp_digits) {
                scale += sign * exp;
                pos_ = p;
            }
        }
        Rational value(digits);
        cpp_int ten_pow = boost::multiprecision::pow(cpp_int(10), std::abs(scale));
        if (scale > 0) value *= Rational(ten_pow);
        if (scale < 0) value /= Rational(ten_pow);
        return value;
    }
};

// Exactly three digits not followed by a fourth.
bool is_thousands_group(std::string_view rest) {
    if (rest.size() < 3) return false;
    for (std::size_t i = 0; i < 3; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(rest[i]))) return false;
    }
    return rest.size() == 3 || !std::isdigit(static_cast<unsigned char>(rest[3]));
}

// Units begin, after optional whitespace, with a letter, '%', or a non-ASCII
// symbol such as the degree sign.
bool is_unit_start(std::string_view rest) {
    std::size_t i = 0;
    while (i < rest.size() && std::isspace(static_cast<unsigned char>(rest[i]))) ++i;
    if (i == rest.size()) return true;
    const auto c = static_cast<unsigned char>(rest[i]);
    return std::isalpha(c) || c == '%' || c >= 0x80;
}

}  // namespace

std::optional<Rational> evaluate_rational(std::string_view expression) {
    if (expression.empty()) return std::nullopt;
    try {
        return Parser(expression).parse();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<double> evaluate_numeric(std::string_view expression) {
    auto r = evaluate_rational(expression);
    if (!r) return std::nullopt;
    return r->convert_to<double>();
}

std::optional<NumberWithUnit> parse_number_with_unit(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t begin = pos;
    std::string token;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        if (text[pos] == '-') token.push_back('-');
        ++pos;
    }
    std::size_t int_digits = 0;
    std::size_t group_len = 0;
    bool grouped = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            token.push_back(c);
            ++int_digits;
            ++group_len;
            ++pos;
        } else if (c == ',' && int_digits > 0 && (grouped ? group_len == 3 : group_len <= 3) &&
                   is_thousands_group(text.substr(pos + 1))) {
            grouped = true;
            group_len = 0;
            ++pos;
        } else {
            break;
        }
    }
    bool frac_digits = false;
    if (pos < text.size() && text[pos] == '.' && pos + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[pos + 1]))) {
        token.push_back('.');
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            token.push_back(text[pos]);
            ++pos;
            frac_digits = true;
        }
    }
    if (int_digits == 0 && !frac_digits) return std::nullopt;
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        std::size_t p = pos + 1;
        std::string exp = "e";
        if (p < text.size() && (text[p] == '+' || text[p] == '-')) exp.push_back(text[p++]);
        bool any = false;
        while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
            exp.push_back(text[p++]);
            any = true;
        }
        // "3e" followed by nothing numeric is a unit-like suffix, not an exponent
        if (any && (p >= text.size() || !std::isalpha(static_cast<unsigned char>(text[p])))) {
            token += exp;
            pos = p;
        }
    }
    const std::size_t token_end = pos;
    std::string_view rest = text.substr(pos);
    if (!rest.empty() && !is_unit_start(rest)) return std::nullopt;

    std::size_t u = 0;
    while (u < rest.size() && std::isspace(static_cast<unsigned char>(rest[u]))) ++u;
    std::size_t e = rest.size();
    while (e > u && std::isspace(static_cast<unsigned char>(rest[e - 1]))) --e;
    std::string unit(rest.substr(u, e - u));

    auto value = evaluate_numeric(token);
    if (!value) return std::nullopt;
    NumberWithUnit out;
    out.number = token;
    out.value = *value;
    out.unit = std::move(unit);
    out.token_begin = begin;
    out.token_end = token_end;
    return out;
}

}  // namespace grpokit
