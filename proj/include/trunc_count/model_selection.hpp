#pragma once

// Information criteria for comparing fitted models. Lower is better for all three.

#include <cstddef>
#include <string>
#include <vector>

namespace trunc_count {

struct ModelScore {
    std::string label;
    double loglik = 0.0;
    int k = 0;           // estimated parameters
    std::size_t n = 0;   // observations
    double aic = 0.0;
    double caic = 0.0;
    double bic = 0.0;
};

/// 2k - 2 loglik
double aic(double loglik, int k);

/// aic + 2k(k+1)/(n-k-1). Throws std::domain_error when n <= k+1.
double caic(double aic_value, int k, std::size_t n);

/// k ln(n) - 2 loglik
double bic(double loglik, int k, std::size_t n);

/// Fills all three criteria from a log-likelihood.
ModelScore make_score(std::string label, double loglik, int k, std::size_t n);

struct Ranking {
    std::vector<ModelScore> ordered;  // ascending AIC, then BIC, then label
    std::string best_aic;
    std::string best_caic;
    std::string best_bic;
};

Ranking rank(std::vector<ModelScore> scores);

}  // namespace trunc_count
