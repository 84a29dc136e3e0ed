#include "doctest.h"

#include "trunc_count/dataset.hpp"
#include "trunc_count/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace trunc_count;

namespace {

const std::string kFixtures = FIXTURE_DIR;
const std::string kHeader = "course_type,paper_type,pages_blank,lines_per_page,words_per_line\n";

Dataset parse(const std::string& text, int r = 25) {
    std::istringstream in(text);
    return parse_csv(in, TruncationBound(r));
}

std::string error_of(const std::string& text, int r = 25) {
    try {
        parse(text, r);
    } catch (const validation_error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("load valid fixtures") {
    const auto two = load(kFixtures + "/two_rows.csv", TruncationBound(25));
    CHECK(two.row_count() == 2);
    CHECK(two.r() == 25);
    CHECK(two.records()[1].course_type == CourseType::PG);
    CHECK(two.records()[1].paper_type == PaperType::NQ);
    CHECK(two.records()[1].pages_blank == 12);
    CHECK(two.records()[1].lines_per_page == doctest::Approx(18.33));

    // permuted header with CRLF line endings
    const auto perm = load(kFixtures + "/permuted_crlf.csv", TruncationBound(25));
    REQUIRE(perm.row_count() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(perm.records()[i].course_type == two.records()[i].course_type);
        CHECK(perm.records()[i].paper_type == two.records()[i].paper_type);
        CHECK(perm.records()[i].pages_blank == two.records()[i].pages_blank);
        CHECK(perm.records()[i].lines_per_page == two.records()[i].lines_per_page);
        CHECK(perm.records()[i].words_per_line == two.records()[i].words_per_line);
    }

    const auto full = load(kFixtures + "/booklets_200.csv", TruncationBound(25));
    CHECK(full.row_count() == 200);
    CHECK(full.response().size() == 200);
}

TEST_CASE("load errors name the offending line") {
    try {
        load(kFixtures + "/pages_over_r.csv", TruncationBound(25));
        FAIL("expected a validation error");
    } catch (const validation_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("26") != std::string::npos);
    }
    // the same file is fine with a wider bound
    CHECK(load(kFixtures + "/pages_over_r.csv", TruncationBound(26)).row_count() == 3);

    CHECK_THROWS_AS(load(kFixtures + "/does_not_exist.csv", TruncationBound(25)), validation_error);

    CHECK(error_of(kHeader + "UG,Q,-1,20,8\n").find("line 2") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,20,8\nUG,X,3,20,8\n").find("line 3") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,20,8\nMS,Q,3,20,8\n").find("course_type") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3.5,20,8\n").find("pages_blank") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,three,20,8\n").find("line 2") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,abc,8\n").find("lines_per_page") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,20,-8\n").find("words_per_line") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,nan,8\n").find("line 2") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,20\n").find("line 2") != std::string::npos);
    CHECK(error_of(kHeader + "UG,Q,3,20,8,1\n").find("line 2") != std::string::npos);
    CHECK(error_of("course_type,paper_type,pages_blank,lines_per_page\nUG,Q,3,20\n").find("words_per_line") !=
          std::string::npos);
    CHECK(error_of("course_type,paper_type,pages_blank,lines_per_page,words_per_line,extra\n")
              .find("extra") != std::string::npos);
    CHECK(error_of("course_type,course_type,pages_blank,lines_per_page,words_per_line\n").find("duplicate") !=
          std::string::npos);
    CHECK(error_of(kHeader).find("no data rows") != std::string::npos);
    CHECK(error_of("").find("header") != std::string::npos);

    // blank lines are skipped but still counted
    CHECK(error_of(kHeader + "UG,Q,3,20,8\n\nUG,Q,30,20,8\n").find("line 4") != std::string::npos);
}

TEST_CASE("parsing tolerates a BOM, whitespace and a missing final newline") {
    const auto d = parse("\xEF\xBB\xBF" + kHeader + " PG , NQ , 4 , 19.5 , 6.25 ");
    REQUIRE(d.row_count() == 1);
    CHECK(d.records()[0].course_type == CourseType::PG);
    CHECK(d.records()[0].words_per_line == 6.25);
}

TEST_CASE("Dataset validates records directly") {
    CHECK_THROWS_AS(Dataset({}, TruncationBound(25)), validation_error);
    StudentRecord bad;
    bad.pages_blank = 30;
    CHECK_THROWS_AS(Dataset({bad}, TruncationBound(25)), validation_error);
    bad.pages_blank = 1;
    bad.lines_per_page = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Dataset({bad}, TruncationBound(25)), validation_error);

    const auto d = parse(kHeader + "UG,Q,3,20,8\n");
    CHECK_THROWS_AS(d.numeric_column("paper_type"), validation_error);
    CHECK_THROWS_AS(d.factor_column("pages_blank"), validation_error);
    CHECK(is_numeric_column("words_per_line"));
    CHECK_FALSE(is_numeric_column("course_type"));
    CHECK(is_factor_column("course_type"));
}

TEST_CASE("write_csv round-trips exactly") {
    const auto d = simulate_dataset(TruncatedPoissonModel(12.0, TruncationBound(25)), 300, 5);
    std::ostringstream out;
    write_csv(out, d);
    const auto back = parse(out.str());
    REQUIRE(back.row_count() == d.row_count());
    for (std::size_t i = 0; i < d.row_count(); ++i) {
        CHECK(back.records()[i].pages_blank == d.records()[i].pages_blank);
        CHECK(back.records()[i].lines_per_page == d.records()[i].lines_per_page);
        CHECK(back.records()[i].words_per_line == d.records()[i].words_per_line);
        CHECK(back.records()[i].course_type == d.records()[i].course_type);
        CHECK(back.records()[i].paper_type == d.records()[i].paper_type);
    }
}

TEST_CASE("summarize proportions and moments") {
    const auto d = load(kFixtures + "/booklets_200.csv", TruncationBound(25));
    const auto s = summarize(d);
    CHECK(s.n == 200);
    REQUIRE(s.course_type.size() == 2);
    CHECK(s.course_type[1].level == "PG");
    CHECK(s.course_type[1].count == 48);
    CHECK(s.course_type[1].proportion == 0.24);
    CHECK(s.course_type[0].proportion == 0.76);
    CHECK(s.paper_type[0].count == 112);
    CHECK(s.paper_type[1].count == 88);
    CHECK(s.paper_type[0].proportion + s.paper_type[1].proportion == doctest::Approx(1.0).epsilon(1e-15));

    REQUIRE(s.columns.size() == 3);
    const auto blank = d.numeric_column("pages_blank");
    double sum = 0.0;
    for (double v : blank) sum += v;
    CHECK(s.columns[0].mean == doctest::Approx(sum / 200.0).epsilon(1e-14));
    for (const auto& h : s.histograms) {
        std::size_t total = 0;
        for (const auto& b : h.bins) total += b.count;
        CHECK(total == 200);
    }
}

TEST_CASE("describe") {
    const std::vector<double> constant(10, 4.5);
    const auto c = describe("c", constant);
    CHECK(c.sd == 0.0);
    CHECK_FALSE(c.skewness.has_value());

    const std::vector<double> v = {1, 2, 3, 4, 10};
    const auto s = describe("v", v);
    CHECK(s.mean == doctest::Approx(4.0));
    CHECK(s.sd == doctest::Approx(std::sqrt(50.0 / 4.0)));
    // m2 = 10, m3 = (-27 - 8 - 1 + 0 + 216) / 5 = 36
    CHECK(*s.skewness == doctest::Approx(36.0 / std::pow(10.0, 1.5)));
    CHECK(s.min == 1.0);
    CHECK(s.max == 10.0);

    // right-skewed sample has positive skewness
    CHECK(*describe("e", std::vector<double>{0, 0, 0, 1, 5}).skewness > 0.0);

    std::mt19937_64 rng(42);
    std::normal_distribution<double> normal(3.0, 2.0);
    std::vector<double> sym(4000);
    for (auto& x : sym) x = normal(rng);
    const auto n = describe("n", sym);
    CHECK(std::abs(*n.skewness) < 4.0 * std::sqrt(6.0 / 4000.0));
}

TEST_CASE("histogram") {
    const std::vector<double> v = {0.5, 1.0, 1.5, 2.0, 3.5, 4.0};
    for (int bins : {1, 2, 3, 7}) {
        const auto h = histogram(v, bins);
        REQUIRE(h.size() == static_cast<std::size_t>(bins));
        std::size_t total = 0;
        for (const auto& b : h) total += b.count;
        CHECK(total == v.size());
        CHECK(h.front().lower == 0.5);
        CHECK(h.back().upper == doctest::Approx(4.0));
        for (std::size_t i = 1; i < h.size(); ++i) {
            CHECK(h[i].lower == doctest::Approx(h[i - 1].upper));
        }
    }
    CHECK(histogram(v, 1)[0].count == 6);
    CHECK_THROWS_AS(histogram(v, 0), validation_error);
    CHECK_THROWS_AS(histogram(std::vector<double>{}, 3), validation_error);
    CHECK(histogram(std::vector<double>{2.0, 2.0}, 3)[0].count == 2);

    // integer column spanning 0..25 with 26 bins: one bin per value
    const auto sample = trunc_count::sample(TruncatedPoissonModel(12.0, TruncationBound(25)), 5000, 3);
    std::vector<double> values(sample.values().begin(), sample.values().end());
    values.push_back(0.0);
    values.push_back(25.0);
    std::vector<std::size_t> tally(26, 0);
    for (double x : values) ++tally[static_cast<std::size_t>(x)];
    const auto h = histogram(values, 26);
    REQUIRE(h.size() == 26);
    for (std::size_t x = 0; x < 26; ++x) {
        CHECK(h[x].count == tally[x]);
    }
}

TEST_CASE("fit_overlay") {
    const TruncationBound r(25);
    const auto d = simulate_dataset(TruncatedPoissonModel(12.0, r), 200, 77);
    const auto f = fit_mle(d.response());
    const auto rows = fit_overlay(d, f);
    REQUIRE(rows.size() == 26);

    double expected = 0.0;
    std::size_t observed = 0;
    for (std::size_t x = 0; x < rows.size(); ++x) {
        CHECK(rows[x].x == static_cast<int>(x));
        expected += rows[x].expected;
        observed += rows[x].observed;
    }
    CHECK(std::abs(expected - 200.0) < 1e-8);
    CHECK(observed == 200);
    CHECK(rows[0].observed == 0);  // P(0) ~ 6e-6 at lambda 12: the zero row is still emitted

    // chi-square with tails pooled until every cell expects at least 5
    std::vector<std::pair<double, double>> cells;  // (observed, expected)
    double o = 0.0;
    double e = 0.0;
    for (const auto& row : rows) {
        o += static_cast<double>(row.observed);
        e += row.expected;
        if (e >= 5.0) {
            cells.emplace_back(o, e);
            o = e = 0.0;
        }
    }
    cells.back().first += o;
    cells.back().second += e;
    double chi2 = 0.0;
    for (auto [oc, ec] : cells) chi2 += (oc - ec) * (oc - ec) / ec;
    const double df = static_cast<double>(cells.size()) - 2.0;
    const double critical = boost::math::quantile(boost::math::chi_squared(df), 0.99);
    CHECK(chi2 < critical);

    // boundary fits
    DistFit zero;
    zero.lambda_hat = 0.0;
    const auto z = fit_overlay(d, zero);
    CHECK(z[0].expected == 200.0);
    CHECK(z[5].expected == 0.0);
}

TEST_CASE("simulate_dataset") {
    const TruncatedPoissonModel model(12.0, TruncationBound(25));
    const auto a = simulate_dataset(model, 5000, 11);
    const auto b = simulate_dataset(model, 5000, 11);
    std::ostringstream sa;
    std::ostringstream sb;
    write_csv(sa, a);
    write_csv(sb, b);
    CHECK(sa.str() == sb.str());

    const auto s = summarize(a);
    CHECK(std::abs(s.course_type[1].proportion - 0.24) < 4.0 * std::sqrt(0.24 * 0.76 / 5000));
    for (const auto& rec : a.records()) {
        CHECK(rec.lines_per_page >= 8.0);
        CHECK(rec.lines_per_page <= 29.0);
        CHECK(rec.words_per_line >= 4.0);
        CHECK(rec.words_per_line <= 14.0);
    }
    CHECK(std::abs(s.columns[0].mean - truncated_mean(model)) < 0.15);
    CHECK_THROWS_AS(simulate_dataset(model, 0, 1), validation_error);
}

TEST_CASE("simulate, load, fit round trip") {
    const double lambda = 12.0;
    const TruncationBound r(25);
    const auto d = simulate_dataset(TruncatedPoissonModel(lambda, r), 200, 7);
    std::ostringstream out;
    write_csv(out, d);
    const auto f = fit_mle(parse(out.str()).response());
    REQUIRE(f.std_error.has_value());
    CHECK(std::abs(f.lambda_hat - lambda) < 3.0 * *f.std_error);
}
