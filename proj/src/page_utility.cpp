#include "trunc_count/page_utility.hpp"

#include "trunc_count/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <stdexcept>

namespace trunc_count {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool all_digits(std::string_view s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

Rational power_of_ten(long e) {
    boost::multiprecision::cpp_int p = 1;
    for (long i = 0; i < e; ++i) p *= 10;
    return Rational(p);
}

std::int64_t parse_integer(std::string_view text, std::string_view key, std::size_t line) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw validation_error("line " + std::to_string(line) + ": " + std::string(key) + " must be an integer, got '" +
                               std::string(text) + "'");
    }
    return v;
}

}  // namespace

Rational parse_decimal(std::string_view text) {
    const std::string original(text);
    auto bad = [&]() { return validation_error("not a decimal number: '" + original + "'"); };
    text = trim(text);
    bool negative = false;
    if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    long exponent = 0;
    if (const auto e = text.find_first_of("eE"); e != std::string_view::npos) {
        std::string_view exp = text.substr(e + 1);
        text = text.substr(0, e);
        bool neg_exp = false;
        if (!exp.empty() && (exp.front() == '+' || exp.front() == '-')) {
            neg_exp = exp.front() == '-';
            exp.remove_prefix(1);
        }
        if (!all_digits(exp) || exp.size() > 4) throw bad();
        exponent = std::stol(std::string(exp));
        if (neg_exp) exponent = -exponent;
    }
    std::string_view whole = text;
    std::string_view frac;
    if (const auto dot = text.find('.'); dot != std::string_view::npos) {
        whole = text.substr(0, dot);
        frac = text.substr(dot + 1);
    }
    if ((whole.empty() && frac.empty()) || (!whole.empty() && !all_digits(whole)) ||
        (!frac.empty() && !all_digits(frac))) {
        throw bad();
    }
    // no leading zeros: cpp_int would read them as an octal prefix
    std::string all = std::string(whole) + std::string(frac);
    all.erase(0, std::min(all.find_first_not_of('0'), all.size() - 1));
    const boost::multiprecision::cpp_int digits(all);
    Rational value(digits);
    exponent -= static_cast<long>(frac.size());
    value = exponent >= 0 ? value * power_of_ten(exponent) : value / power_of_ten(-exponent);
    return negative ? Rational(-value) : value;
}

std::string to_string(const Rational& r) {
    if (denominator(r) == 1) {
        return numerator(r).str();
    }
    return numerator(r).str() + "/" + denominator(r).str();
}

double to_double(const Rational& r) {
    return r.convert_to<double>();
}

void UtilityProblem::validate() const {
    if (X < 1) throw validation_error("X must be at least 1");
    if (N1 < 1) throw validation_error("N1 must be at least 1");
    if (N2 < 0) throw validation_error("N2 must be non-negative");
    const std::array<std::pair<const char*, const Rational*>, 5> costs = {
        {{"c11", &c11}, {"c12", &c12}, {"c21", &c21}, {"c22", &c22}, {"A0", &A0}}};
    for (const auto& [name, v] : costs) {
        if (*v < 0) throw validation_error(std::string(name) + " must be non-negative");
    }
    if (x_range) {
        if (x_range->lo < 1 || x_range->hi < x_range->lo) {
            throw validation_error("X range must satisfy 1 <= X_min <= X_max");
        }
        if (x1_range.lo < 0 || x1_range.hi < x1_range.lo) {
            throw validation_error("X1 range must satisfy 0 <= X1_min <= X1_max");
        }
    } else if (x1_range.lo < 0 || x1_range.hi < x1_range.lo || x1_range.hi > X) {
        throw validation_error("X1 range [" + std::to_string(x1_range.lo) + ", " + std::to_string(x1_range.hi) +
                               "] must be non-empty and inside [0, X=" + std::to_string(X) + "]");
    }
}

UtilityValue utility(std::int64_t X, std::int64_t X1, std::int64_t N1) {
    if (X1 < 0 || X1 > X) {
        throw std::domain_error("X1 must lie in [0, X]");
    }
    if (N1 < 0) {
        throw std::domain_error("N1 must be non-negative");
    }
    const boost::multiprecision::cpp_int reduction = boost::multiprecision::cpp_int(N1) * (X - X1);
    UtilityValue u;
    u.k_adjust = static_cast<int>(reduction % 4);
    u.value = Rational(3 * reduction, 4) + u.k_adjust;
    return u;
}

Feasibility feasible(std::int64_t X, std::int64_t X1, const UtilityProblem& p) {
    if (X1 < 0 || X1 > X) {
        throw std::domain_error("X1 must lie in [0, X]");
    }
    using boost::multiprecision::cpp_int;
    const cpp_int n1(p.N1);
    Feasibility f;
    f.main_slack = Rational(n1 * X) * p.c11 - Rational(n1 * X1) * p.c12 - p.A0;
    f.additional_slack = p.A0 - (Rational(cpp_int(p.N2) * 4) * p.c21 + Rational(n1 * (X - X1), 4) * p.c22);
    f.feasible = f.main_slack >= 0 && f.additional_slack >= 0;
    return f;
}

UtilitySolution optimize(const UtilityProblem& problem) {
    problem.validate();
    UtilitySolution best;
    const IntRange xs = problem.x_range.value_or(IntRange{problem.X, problem.X});
    for (std::int64_t x = xs.lo; x <= xs.hi; ++x) {
        const std::int64_t hi = std::min(problem.x1_range.hi, x);
        for (std::int64_t x1 = problem.x1_range.lo; x1 <= hi; ++x1) {
            ++best.candidates;
            auto f = feasible(x, x1, problem);
            if (!f.feasible) continue;
            ++best.feasible_count;
            auto u = utility(x, x1, problem.N1);
            const bool better = !best.found || u.value > best.utility.value ||
                                (u.value == best.utility.value &&
                                 (x1 > best.x1_star || (x1 == best.x1_star && x < best.x_star)));
            if (better) {
                best.found = true;
                best.x_star = x;
                best.x1_star = x1;
                best.utility = std::move(u);
                best.constraints = std::move(f);
            }
        }
    }
    if (best.found) {
        if (best.constraints.main_slack == 0) best.binding.emplace_back("main_cost");
        if (best.constraints.additional_slack == 0) best.binding.emplace_back("additional_cost");
    }
    return best;
}

UtilityProblem parse_config(std::istream& in, std::string_view source) {
    static constexpr std::array<std::string_view, 10> kKeys = {"X",   "N1",  "N2", "c11",    "c12",
                                                               "c21", "c22", "A0", "X1_min", "X1_max"};
    std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw validation_error(std::string(source) + " line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(view.substr(0, eq)));
        const std::string value(trim(view.substr(eq + 1)));
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
            throw validation_error(std::string(source) + " line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (value.empty()) {
            throw validation_error(std::string(source) + " line " + std::to_string(line_no) + ": empty value for " + key);
        }
        if (!values.emplace(key, std::make_pair(value, line_no)).second) {
            throw validation_error(std::string(source) + " line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    for (auto key : kKeys) {
        if (!values.contains(key)) {
            throw validation_error(std::string(source) + ": missing key '" + std::string(key) + "'");
        }
    }
    auto integer = [&](std::string_view key) {
        const auto& [v, l] = values.find(key)->second;
        return parse_integer(v, key, l);
    };
    auto decimal = [&](std::string_view key) {
        const auto& [v, l] = values.find(key)->second;
        try {
            return parse_decimal(v);
        } catch (const validation_error& e) {
            throw validation_error(std::string(source) + " line " + std::to_string(l) + ": " + std::string(key) + ": " +
                                   e.what());
        }
    };
    UtilityProblem p;
    p.X = integer("X");
    p.N1 = integer("N1");
    p.N2 = integer("N2");
    p.c11 = decimal("c11");
    p.c12 = decimal("c12");
    p.c21 = decimal("c21");
    p.c22 = decimal("c22");
    p.A0 = decimal("A0");
    p.x1_range = {integer("X1_min"), integer("X1_max")};
    p.validate();
    return p;
}

UtilityProblem load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw validation_error("cannot open " + path.string());
    }
    return parse_config(in, path.string());
}

}  // namespace trunc_count
