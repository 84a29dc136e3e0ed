#pragma once

// Right-truncated Poisson distribution on the support {0, 1, ..., r}:
//
//   P(X = x) = (lambda^x / x!) / sum_{j=0}^{r} lambda^j / j!
//
// Everything is evaluated in log space; lambda^x / x! overflows long before
// the probabilities become uninteresting.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace trunc_count {

using rng_engine = std::mt19937_64;

/// Largest admissible count (pages available in a booklet, 25 in the survey data).
class TruncationBound {
public:
    explicit TruncationBound(int r);

    int value() const noexcept { return r_; }
    auto operator<=>(const TruncationBound&) const = default;

private:
    int r_;
};

class TruncatedPoissonModel {
public:
    /// Throws validation_error unless lambda is positive and finite.
    TruncatedPoissonModel(double lambda, TruncationBound bound);

    double lambda() const noexcept { return lambda_; }
    TruncationBound bound() const noexcept { return bound_; }
    int r() const noexcept { return bound_.value(); }

private:
    double lambda_;
    TruncationBound bound_;
};

/// Observed counts, all inside [0, r].
class CountSample {
public:
    CountSample(std::vector<int> values, TruncationBound bound);

    std::span<const int> values() const noexcept { return values_; }
    TruncationBound bound() const noexcept { return bound_; }
    int r() const noexcept { return bound_.value(); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    long long sum() const noexcept;
    /// Throws validation_error on an empty sample.
    double mean() const;

private:
    std::vector<int> values_;
    TruncationBound bound_;
};

enum class FitMethod { mle, moore, untruncated_mle };

const char* to_string(FitMethod method) noexcept;

struct DistFit {
    double lambda_hat = 0.0;
    std::optional<double> std_error;  // absent at the lambda_hat = 0 boundary
    double loglik = 0.0;
    std::size_t n = 0;
    bool converged = false;
    int iterations = 0;
    FitMethod method = FitMethod::mle;
};

struct FitOptions {
    double tol = 1e-10;  // on |mean - truncated_mean(lambda)|, i.e. score per observation
    int max_iter = 200;
};

/// Log normalizer, mean and variance of the truncated law, parameterized by
/// log(lambda) so that extreme linear predictors stay finite.
struct TruncatedMoments {
    double log_normalizer = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

TruncatedMoments truncated_moments(double log_lambda, int r);

double pmf(int x, const TruncatedPoissonModel& model);
/// Throws std::domain_error outside the support.
double log_pmf(int x, const TruncatedPoissonModel& model);
/// Clamps: 0 below the support, 1 at or above r.
double cdf(int x, const TruncatedPoissonModel& model);
double truncated_mean(const TruncatedPoissonModel& model);
double truncated_variance(const TruncatedPoissonModel& model);

double log_likelihood(const CountSample& sample, double lambda);

/// Derivative of the log-likelihood with respect to log(lambda):
/// n * (mean(sample) - truncated_mean(lambda)).
double score(double lambda, const CountSample& sample);

DistFit fit_mle(const CountSample& sample, const FitOptions& opts = {});

/// 1 / sqrt(n * I(lambda)) with I the per-observation information
/// var(lambda) / lambda^2 (observed information at the MLE).
double std_error(double lambda, TruncationBound bound, std::size_t n);

/// Ratio estimator sum(x) / m, where m counts observations below r.
/// Throws validation_error when m = 0.
double moore_estimate(const CountSample& sample);

/// Ordinary Poisson MLE ignoring the truncation (lambda_hat = mean).
DistFit fit_untruncated_poisson(const CountSample& sample);

/// One inverse-CDF draw.
int draw(const TruncatedPoissonModel& model, rng_engine& rng);

/// n independent draws, deterministic for a fixed seed.
CountSample sample(const TruncatedPoissonModel& model, std::size_t n, std::uint64_t seed);

}  // namespace trunc_count
