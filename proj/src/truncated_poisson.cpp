#include "trunc_count/truncated_poisson.hpp"

#include "trunc_count/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace trunc_count {

namespace {

constexpr int kLogFactorialTable = 1024;

double log_factorial(int j) {
    static const std::vector<double> table = [] {
        std::vector<double> t(kLogFactorialTable);
        for (int i = 0; i < kLogFactorialTable; ++i) {
            t[static_cast<std::size_t>(i)] = std::lgamma(i + 1.0);
        }
        return t;
    }();
    return j < kLogFactorialTable ? table[static_cast<std::size_t>(j)] : std::lgamma(j + 1.0);
}

// log of lambda^j / j!
double log_weight(int j, double log_lambda) {
    return j * log_lambda - log_factorial(j);
}

std::vector<double> cdf_table(const TruncatedPoissonModel& model) {
    const int r = model.r();
    const double log_lambda = std::log(model.lambda());
    const double log_norm = truncated_moments(log_lambda, r).log_normalizer;
    std::vector<double> table(static_cast<std::size_t>(r) + 1);
    double acc = 0.0;
    for (int j = 0; j <= r; ++j) {
        acc += std::exp(log_weight(j, log_lambda) - log_norm);
        table[static_cast<std::size_t>(j)] = acc;
    }
    table.back() = 1.0;
    return table;
}

}  // namespace

TruncationBound::TruncationBound(int r) : r_(r) {
    if (r < 0) {
        throw validation_error("truncation bound must be non-negative, got " + std::to_string(r));
    }
}

TruncatedPoissonModel::TruncatedPoissonModel(double lambda, TruncationBound bound)
    : lambda_(lambda), bound_(bound) {
    if (!std::isfinite(lambda) || lambda <= 0.0) {
        throw validation_error("truncated Poisson rate must be positive and finite");
    }
}

CountSample::CountSample(std::vector<int> values, TruncationBound bound)
    : values_(std::move(values)), bound_(bound) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const int v = values_[i];
        if (v < 0 || v > bound_.value()) {
            throw validation_error("count " + std::to_string(v) + " at position " + std::to_string(i) +
                                   " is outside [0, " + std::to_string(bound_.value()) + "]");
        }
    }
}

long long CountSample::sum() const noexcept {
    return std::accumulate(values_.begin(), values_.end(), 0LL);
}

double CountSample::mean() const {
    if (values_.empty()) {
        throw validation_error("sample is empty");
    }
    return static_cast<double>(sum()) / static_cast<double>(values_.size());
}

const char* to_string(FitMethod method) noexcept {
    switch (method) {
        case FitMethod::mle: return "mle";
        case FitMethod::moore: return "moore";
        case FitMethod::untruncated_mle: return "untruncated_mle";
    }
    return "unknown";
}

TruncatedMoments truncated_moments(double log_lambda, int r) {
    if (std::isnan(log_lambda)) {
        throw std::domain_error("log rate is NaN");
    }
    if (r == 0) {
        return {};
    }
    thread_local std::vector<double> lw;
    lw.resize(static_cast<std::size_t>(r) + 1);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= r; ++j) {
        lw[static_cast<std::size_t>(j)] = log_weight(j, log_lambda);
        max_lw = std::max(max_lw, lw[static_cast<std::size_t>(j)]);
    }
    double s0 = 0.0;
    double s1 = 0.0;
    for (int j = 0; j <= r; ++j) {
        auto& w = lw[static_cast<std::size_t>(j)];
        w = std::exp(w - max_lw);
        s0 += w;
        s1 += j * w;
    }
    TruncatedMoments m;
    m.log_normalizer = max_lw + std::log(s0);
    m.mean = s1 / s0;
    // central form; E[X^2] - mean^2 cancels badly for small lambda
    double var = 0.0;
    for (int j = 0; j <= r; ++j) {
        const double d = j - m.mean;
        var += d * d * lw[static_cast<std::size_t>(j)];
    }
    m.variance = var / s0;
    return m;
}

double log_pmf(int x, const TruncatedPoissonModel& model) {
    if (x < 0 || x > model.r()) {
        throw std::domain_error("count " + std::to_string(x) + " outside support [0, " +
                                std::to_string(model.r()) + "]");
    }
    const double log_lambda = std::log(model.lambda());
    return log_weight(x, log_lambda) - truncated_moments(log_lambda, model.r()).log_normalizer;
}

double pmf(int x, const TruncatedPoissonModel& model) {
    if (x < 0 || x > model.r()) {
        return 0.0;
    }
    return std::exp(log_pmf(x, model));
}

double cdf(int x, const TruncatedPoissonModel& model) {
    if (x < 0) {
        return 0.0;
    }
    if (x >= model.r()) {
        return 1.0;
    }
    return cdf_table(model)[static_cast<std::size_t>(x)];
}

double truncated_mean(const TruncatedPoissonModel& model) {
    return truncated_moments(std::log(model.lambda()), model.r()).mean;
}

double truncated_variance(const TruncatedPoissonModel& model) {
    return truncated_moments(std::log(model.lambda()), model.r()).variance;
}

double log_likelihood(const CountSample& sample, double lambda) {
    if (sample.empty()) {
        throw validation_error("log-likelihood of an empty sample");
    }
    const TruncatedPoissonModel model(lambda, sample.bound());
    const double log_lambda = std::log(lambda);
    const double log_norm = truncated_moments(log_lambda, sample.r()).log_normalizer;
    double ll = 0.0;
    for (int x : sample.values()) {
        ll += log_weight(x, log_lambda);
    }
    return ll - static_cast<double>(sample.size()) * log_norm;
}

double score(double lambda, const CountSample& sample) {
    if (!(lambda > 0.0)) {
        throw std::domain_error("score requires a positive rate");
    }
    const double n = static_cast<double>(sample.size());
    return n * (sample.mean() - truncated_moments(std::log(lambda), sample.r()).mean);
}

double std_error(double lambda, TruncationBound bound, std::size_t n) {
    if (!(lambda > 0.0) || n == 0) {
        throw std::domain_error("standard error needs lambda > 0 and n >= 1");
    }
    const double var = truncated_moments(std::log(lambda), bound.value()).variance;
    if (var <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return lambda / std::sqrt(static_cast<double>(n) * var);
}

DistFit fit_mle(const CountSample& sample, const FitOptions& opts) {
    const double xbar = sample.mean();
    const int r = sample.r();

    DistFit fit;
    fit.n = sample.size();
    fit.method = FitMethod::mle;

    if (xbar == 0.0) {
        // supremum at lambda -> 0, where every observation has probability 1
        fit.lambda_hat = 0.0;
        fit.loglik = 0.0;
        fit.converged = true;
        return fit;
    }
    if (xbar >= r) {
        // every observation at the bound: likelihood increases without limit in lambda
        fit.lambda_hat = std::numeric_limits<double>::infinity();
        fit.loglik = 0.0;
        fit.converged = false;
        return fit;
    }

    // gap(lambda) = xbar - mean(lambda), strictly decreasing in lambda
    auto gap = [&](double lambda) { return xbar - truncated_moments(std::log(lambda), r).mean; };

    double lo = std::numeric_limits<double>::min() * 1e10;
    double hi = std::max(10.0 * xbar, static_cast<double>(r));
    int iter = 0;
    while (gap(hi) > 0.0) {
        // xbar at (or numerically at) r: the root escapes to infinity
        if (++iter >= opts.max_iter || hi > 1e300) {
            fit.lambda_hat = hi;
            fit.loglik = log_likelihood(sample, hi);
            fit.iterations = iter;
            fit.converged = false;
            return fit;
        }
        lo = hi;
        hi *= 2.0;
    }

    double lambda = 0.5 * (lo + hi);
    double g = gap(lambda);
    while (iter < opts.max_iter && std::abs(g) > opts.tol && (hi - lo) > 1e-6 * hi) {
        ++iter;
        if (g > 0.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
        g = gap(lambda);
    }

    // Newton polish in log(lambda): d mean / d log(lambda) = variance
    while (iter < opts.max_iter && std::abs(g) > opts.tol) {
        ++iter;
        if (g > 0.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        const double var = truncated_moments(std::log(lambda), r).variance;
        double next = var > 0.0 ? lambda * std::exp(g / var) : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (next == lambda) {
            break;
        }
        lambda = next;
        g = gap(lambda);
    }

    fit.lambda_hat = lambda;
    fit.iterations = iter;
    fit.converged = std::abs(g) <= opts.tol;
    fit.loglik = log_likelihood(sample, lambda);
    fit.std_error = std_error(lambda, sample.bound(), sample.size());
    return fit;
}

double moore_estimate(const CountSample& sample) {
    const int r = sample.r();
    const auto values = sample.values();
    const auto m = std::count_if(values.begin(), values.end(), [r](int x) { return x < r; });
    if (m == 0) {
        throw validation_error("Moore estimator undefined: no observation below the truncation bound");
    }
    return static_cast<double>(sample.sum()) / static_cast<double>(m);
}

DistFit fit_untruncated_poisson(const CountSample& sample) {
    const double xbar = sample.mean();
    DistFit fit;
    fit.n = sample.size();
    fit.method = FitMethod::untruncated_mle;
    fit.lambda_hat = xbar;
    fit.converged = true;
    if (xbar == 0.0) {
        return fit;
    }
    const double log_lambda = std::log(xbar);
    double ll = 0.0;
    for (int x : sample.values()) {
        ll += log_weight(x, log_lambda) - xbar;
    }
    fit.loglik = ll;
    fit.std_error = std::sqrt(xbar / static_cast<double>(sample.size()));
    return fit;
}

int draw(const TruncatedPoissonModel& model, rng_engine& rng) {
    const auto table = cdf_table(model);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const auto it = std::upper_bound(table.begin(), table.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - table.begin(), model.r()));
}

CountSample sample(const TruncatedPoissonModel& model, std::size_t n, std::uint64_t seed) {
    rng_engine rng(seed);
    const auto table = cdf_table(model);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> values(n);
    for (auto& v : values) {
        const auto it = std::upper_bound(table.begin(), table.end(), unif(rng));
        v = static_cast<int>(std::min<std::ptrdiff_t>(it - table.begin(), model.r()));
    }
    return CountSample(std::move(values), model.bound());
}

}  // namespace trunc_count
