#include "doctest.h"

#include "trunc_count/errors.hpp"
#include "trunc_count/truncated_poisson.hpp"

#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace trunc_count;

namespace {

using oracle::grid_argmax;
using oracle::naive_loglik;

std::vector<int> to_vector(const CountSample& s) {
    return {s.values().begin(), s.values().end()};
}

}  // namespace

TEST_CASE("pmf hand-evaluated values") {
    const TruncatedPoissonModel m(1.0, TruncationBound(2));
    CHECK(pmf(0, m) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(pmf(1, m) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(pmf(2, m) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(pmf(3, m) == 0.0);
    CHECK(pmf(-1, m) == 0.0);

    CHECK(pmf(0, TruncatedPoissonModel(5.0, TruncationBound(0))) == 1.0);

    const TruncatedPoissonModel survey(11.969, TruncationBound(25));
    double total = 0.0;
    for (int x = 0; x <= 25; ++x) {
        total += pmf(x, survey);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("invalid models are rejected") {
    CHECK_THROWS_AS(TruncatedPoissonModel(std::nan(""), TruncationBound(3)), validation_error);
    CHECK_THROWS_AS(TruncatedPoissonModel(INFINITY, TruncationBound(3)), validation_error);
    CHECK_THROWS_AS(TruncatedPoissonModel(0.0, TruncationBound(3)), validation_error);
    CHECK_THROWS_AS(TruncationBound(-1), validation_error);
    CHECK_THROWS_AS(CountSample({1, 4}, TruncationBound(3)), validation_error);
    CHECK_THROWS_AS(CountSample({-1}, TruncationBound(3)), validation_error);
}

TEST_CASE("log_pmf") {
    const TruncatedPoissonModel m(1.0, TruncationBound(2));
    CHECK(log_pmf(0, m) == doctest::Approx(std::log(0.4)).epsilon(1e-14));
    CHECK(log_pmf(0, TruncatedPoissonModel(5.0, TruncationBound(0))) == 0.0);
    CHECK_THROWS_AS(log_pmf(26, TruncatedPoissonModel(12.0, TruncationBound(25))), std::domain_error);

    // huge rate and bound: the direct form would overflow
    const TruncatedPoissonModel big(900.0, TruncationBound(1000));
    const double lp = log_pmf(900, big);
    CHECK(std::isfinite(lp));
    CHECK(lp < 0.0);
    CHECK(std::exp(lp) == doctest::Approx(pmf(900, big)).epsilon(1e-12));
}

TEST_CASE("cdf") {
    const TruncatedPoissonModel m(1.0, TruncationBound(2));
    CHECK(cdf(2, m) == 1.0);
    CHECK(cdf(7, m) == 1.0);
    CHECK(cdf(1, m) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(cdf(-1, m) == 0.0);

    const TruncatedPoissonModel p(11.969, TruncationBound(25));
    double prev = 0.0;
    for (int x = -2; x <= 27; ++x) {
        const double c = cdf(x, p);
        CHECK(c >= prev);
        prev = c;
    }
}

TEST_CASE("truncated mean") {
    CHECK(truncated_mean(TruncatedPoissonModel(1.0, TruncationBound(2))) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(truncated_mean(TruncatedPoissonModel(5.0, TruncationBound(0))) == 0.0);

    const TruncatedPoissonModel survey(11.969, TruncationBound(25));
    double direct = 0.0;
    for (int x = 0; x <= 25; ++x) {
        direct += x * pmf(x, survey);
    }
    const double mu = truncated_mean(survey);
    CHECK(mu == doctest::Approx(direct).epsilon(1e-12));
    CHECK(mu > 11.8);
    CHECK(mu < 11.969);

    // strictly increasing in lambda, strictly below lambda
    for (int r : {1, 5, 25, 60}) {
        double prev = -1.0;
        for (double lam = 0.1; lam <= 50.0; lam += 0.1) {
            const TruncatedPoissonModel model(lam, TruncationBound(r));
            const double m = truncated_mean(model);
            CHECK(m > prev);
            CHECK(m <= lam * (1.0 + 1e-14));
            // lambda - mean = lambda * pmf(r); strictness only visible when that gap is representable
            if (pmf(r, model) > 1e-13) {
                CHECK(m < lam);
            }
            prev = m;
        }
    }
}

TEST_CASE("normalization over random models") {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> lam_dist(0.1, 50.0);
    std::uniform_int_distribution<int> r_dist(0, 60);
    for (int t = 0; t < 200; ++t) {
        const TruncatedPoissonModel m(lam_dist(rng), TruncationBound(r_dist(rng)));
        double total = 0.0;
        for (int x = 0; x <= m.r(); ++x) {
            total += pmf(x, m);
        }
        CHECK(std::abs(total - 1.0) < 1e-10);
    }
}

TEST_CASE("log_likelihood") {
    const TruncationBound r2(2);
    CHECK(log_likelihood(CountSample({0}, r2), 1.0) == doctest::Approx(std::log(0.4)).epsilon(1e-14));
    CHECK(log_likelihood(CountSample({0, 0}, r2), 1.0) == doctest::Approx(2.0 * std::log(0.4)).epsilon(1e-14));
    CHECK_THROWS_AS(log_likelihood(CountSample({}, r2), 1.0), validation_error);

    const auto s = sample(TruncatedPoissonModel(7.0, TruncationBound(12)), 300, 11);
    for (double lam : {0.5, 3.0, 7.0, 20.0}) {
        CHECK(log_likelihood(s, lam) ==
              doctest::Approx(static_cast<double>(naive_loglik(to_vector(s), 12, lam))).epsilon(1e-12));
    }
}

TEST_CASE("score") {
    // truncation negligible: score reduces to n (xbar - lambda)
    const CountSample wide({5, 4, 6, 5}, TruncationBound(1000));
    CHECK(std::abs(score(5.0, wide)) < 1e-6);

    CHECK(score(1.0, CountSample({0, 0}, TruncationBound(5))) < 0.0);
    CHECK_THROWS_AS(score(0.0, wide), std::domain_error);
    CHECK_THROWS_AS(score(-1.0, wide), std::domain_error);

    // agrees with a finite difference of the log-likelihood in log(lambda)
    const auto s = sample(TruncatedPoissonModel(9.0, TruncationBound(14)), 200, 5);
    for (double lam : {2.0, 9.0, 17.0}) {
        const double h = 1e-5;
        const double fd = (log_likelihood(s, lam * std::exp(h)) - log_likelihood(s, lam * std::exp(-h))) / (2 * h);
        CHECK(score(lam, s) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("fit_mle boundary and recovery") {
    const auto zeros = fit_mle(CountSample(std::vector<int>(10, 0), TruncationBound(25)));
    CHECK(zeros.lambda_hat == 0.0);
    CHECK(zeros.converged);
    CHECK_FALSE(zeros.std_error.has_value());

    const auto at_bound = fit_mle(CountSample({3, 3, 3}, TruncationBound(3)));
    CHECK_FALSE(at_bound.converged);
    CHECK(std::isinf(at_bound.lambda_hat));

    CHECK_THROWS_AS(fit_mle(CountSample({}, TruncationBound(3))), validation_error);

    const auto big = sample(TruncatedPoissonModel(12.0, TruncationBound(25)), 10000, 42);
    const auto fit = fit_mle(big);
    CHECK(fit.converged);
    CHECK(fit.lambda_hat >= 11.7);
    CHECK(fit.lambda_hat <= 12.3);
    CHECK(fit.n == 10000);
    CHECK(fit.std_error.has_value());
    CHECK(fit.loglik == doctest::Approx(log_likelihood(big, fit.lambda_hat)).epsilon(1e-14));
}

TEST_CASE("fit_mle matches the grid-search oracle and is stationary") {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> lam_dist(0.5, 30.0);
    std::uniform_int_distribution<int> r_dist(3, 40);
    std::uniform_int_distribution<int> n_dist(20, 300);
    for (int t = 0; t < 20; ++t) {
        const TruncatedPoissonModel m(lam_dist(rng), TruncationBound(r_dist(rng)));
        const auto s = sample(m, static_cast<std::size_t>(n_dist(rng)), 1000 + t);
        const auto fit = fit_mle(s);
        REQUIRE(fit.converged);
        if (fit.lambda_hat == 0.0) {
            continue;
        }
        CHECK(std::abs(score(fit.lambda_hat, s)) <= 1e-8 * s.size());
        if (fit.lambda_hat < 49.0) {
            CHECK(std::abs(fit.lambda_hat - grid_argmax(to_vector(s), s.r())) < 1e-4);
        }
    }
}

TEST_CASE("untruncated limit") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto s = sample(TruncatedPoissonModel(4.0 + seed, TruncationBound(150)), 400, seed);
        REQUIRE(*std::max_element(s.values().begin(), s.values().end()) <= 50);
        const auto fit = fit_mle(s);
        CHECK(std::abs(fit.lambda_hat - s.mean()) <= 1e-6 * s.mean() + 1e-9);
    }
}

TEST_CASE("std_error anchors") {
    CHECK(std::abs(std_error(11.965, TruncationBound(1000), 200) - 0.24459) < 1e-4);
    CHECK(std::abs(std_error(11.969, TruncationBound(25), 200) - 0.24527) < 5e-4);

    const double se1 = std_error(8.0, TruncationBound(10), 50);
    const double se4 = std_error(8.0, TruncationBound(10), 200);
    CHECK(std::abs(se4 / se1 - 0.5) < 1e-10);

    // information var/lambda^2 equals -d/dlambda of the per-observation score
    // (mean(lambda0) - mean(lambda)) / lambda at lambda0, by central difference
    for (double lam : {0.7, 5.0, 11.969, 30.0}) {
        const TruncationBound r(25);
        const double h = 1e-5 * lam;
        auto per_obs_score = [&](double l) {
            return (truncated_mean(TruncatedPoissonModel(lam, r)) - truncated_mean(TruncatedPoissonModel(l, r))) / l;
        };
        const double info = -(per_obs_score(lam + h) - per_obs_score(lam - h)) / (2 * h);
        CHECK(std_error(lam, r, 1) == doctest::Approx(1.0 / std::sqrt(info)).epsilon(1e-6));
    }
}

TEST_CASE("moore estimator") {
    CHECK(moore_estimate(CountSample({0, 0}, TruncationBound(5))) == 0.0);
    CHECK(moore_estimate(CountSample({1, 2, 3}, TruncationBound(5))) == doctest::Approx(2.0));
    CHECK_THROWS_AS(moore_estimate(CountSample({4, 4}, TruncationBound(4))), validation_error);

    // Monte Carlo unbiasedness: n = 50, lambda = 3, r = 6
    const TruncatedPoissonModel m(3.0, TruncationBound(6));
    const int reps = 10000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < reps; ++i) {
        const double est = moore_estimate(sample(m, 50, 50000 + i));
        sum += est;
        sum_sq += est * est;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt((sum_sq - reps * mean * mean) / (reps - 1));
    CHECK(std::abs(mean - 3.0) <= 3.0 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("sampling") {
    const auto zeros = sample(TruncatedPoissonModel(5.0, TruncationBound(0)), 100, 3);
    CHECK(std::all_of(zeros.values().begin(), zeros.values().end(), [](int v) { return v == 0; }));

    const TruncatedPoissonModel m(12.0, TruncationBound(25));
    const auto s = sample(m, 10000, 99);
    CHECK(std::all_of(s.values().begin(), s.values().end(), [](int v) { return v >= 0 && v <= 25; }));
    const double sd = std::sqrt(truncated_variance(m));
    CHECK(std::abs(s.mean() - truncated_mean(m)) <= 3.0 * sd / 100.0);

    const auto again = sample(m, 10000, 99);
    CHECK(to_vector(s) == to_vector(again));
    CHECK(to_vector(sample(m, 100, 100)) != to_vector(sample(m, 100, 101)));
}

TEST_CASE("untruncated poisson fit") {
    const CountSample s({2, 4, 6}, TruncationBound(25));
    const auto fit = fit_untruncated_poisson(s);
    CHECK(fit.lambda_hat == 4.0);
    CHECK(*fit.std_error == doctest::Approx(std::sqrt(4.0 / 3.0)));
    const double expected = 12 * std::log(4.0) - 12.0 - std::lgamma(3.0) - std::lgamma(5.0) - std::lgamma(7.0);
    CHECK(fit.loglik == doctest::Approx(expected).epsilon(1e-14));
}
