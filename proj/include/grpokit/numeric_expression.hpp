#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace grpokit {

using Rational = boost::multiprecision::cpp_rational;

// Exact evaluation of small arithmetic expressions: decimals, scientific
// notation, + - * / ^, parentheses, braces, \frac / \dfrac / \tfrac,
// \cdot and \times. Exponents must be integers with magnitude <= 64.
// Returns nullopt on any syntax error or division by zero.
std::optional<Rational> evaluate_rational(std::string_view expression);

std::optional<double> evaluate_numeric(std::string_view expression);

struct NumberWithUnit {
    std::string number;   // normalized token: commas and leading '+' removed
    double value = 0.0;
    std::string unit;     // empty when absent
    std::size_t token_begin = 0;
    std::size_t token_end = 0;
};

// Leading decimal token followed by an optional unit suffix. The suffix must
// start with whitespace or a letter (or %, degree sign); anything else, such
// as "/3", is rejected so that fractions fall through to evaluate_rational.
std::optional<NumberWithUnit> parse_number_with_unit(std::string_view text);

}  // namespace grpokit
