#pragma once

// Page-utility maximization over the reduced booklet size X1, in exact
// rational arithmetic.
//
//   U(X, X1) = 3 N1 (X - X1) / 4 + k,   k = N1 (X - X1) mod 4
//   subject to  N1 X c11 - N1 X1 c12 >= A0
//               4 N2 c21 + N1 (X - X1) / 4 * c22 <= A0
//               0 <= X1 <= X, integers

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trunc_count {

using Rational = boost::multiprecision::cpp_rational;

/// Exact value of a decimal literal such as "1.1", "-0.25", "3e2".
/// Throws validation_error on anything else.
Rational parse_decimal(std::string_view text);

/// "p/q" in lowest terms, or "p" for integers.
std::string to_string(const Rational& r);
double to_double(const Rational& r);

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

struct UtilityProblem {
    std::int64_t X = 1;
    std::int64_t N1 = 1;
    std::int64_t N2 = 0;
    Rational c11, c12, c21, c22, A0;
    IntRange x1_range{0, 1};
    /// When set, X is enumerated over this range too and x1_range is clipped to [0, X].
    std::optional<IntRange> x_range;

    /// Throws validation_error on X < 1, N1 < 1, N2 < 0, negative costs or A0,
    /// or an x1_range outside [0, X].
    void validate() const;
};

struct UtilityValue {
    Rational value;
    int k_adjust = 0;

    friend bool operator==(const UtilityValue&, const UtilityValue&) = default;
};

/// Throws std::domain_error unless 0 <= X1 <= X and N1 >= 0.
UtilityValue utility(std::int64_t X, std::int64_t X1, std::int64_t N1);

struct Feasibility {
    bool feasible = false;
    Rational main_slack;        // N1 X c11 - N1 X1 c12 - A0
    Rational additional_slack;  // A0 - 4 N2 c21 - N1 (X - X1) c22 / 4
};

Feasibility feasible(std::int64_t X, std::int64_t X1, const UtilityProblem& problem);

struct UtilitySolution {
    bool found = false;
    std::int64_t x_star = 0;
    std::int64_t x1_star = 0;
    UtilityValue utility;
    Feasibility constraints;
    std::int64_t feasible_count = 0;
    std::int64_t candidates = 0;
    std::vector<std::string> binding;  // constraints with zero slack at the optimum
};

/// Exhaustive enumeration; ties go to the larger X1, then the smaller X.
/// An empty feasible set gives found = false.
UtilitySolution optimize(const UtilityProblem& problem);

/// key = value lines with '#' comments; keys exactly
/// X, N1, N2, c11, c12, c21, c22, A0, X1_min, X1_max.
UtilityProblem parse_config(std::istream& in, std::string_view source = "<config>");
UtilityProblem load_config(const std::filesystem::path& path);

}  // namespace trunc_count
