#include "trunc_count/model_selection.hpp"

#include "trunc_count/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trunc_count {

double aic(double loglik, int k) {
    return 2.0 * k - 2.0 * loglik;
}

double caic(double aic_value, int k, std::size_t n) {
    const double kk = k;
    const double nn = static_cast<double>(n);
    if (nn <= kk + 1.0) {
        throw std::domain_error("cAIC needs n > k + 1");
    }
    return aic_value + 2.0 * kk * (kk + 1.0) / (nn - kk - 1.0);
}

double bic(double loglik, int k, std::size_t n) {
    if (n == 0) {
        throw std::domain_error("BIC needs n >= 1");
    }
    return k * std::log(static_cast<double>(n)) - 2.0 * loglik;
}

ModelScore make_score(std::string label, double loglik, int k, std::size_t n) {
    if (!std::isfinite(loglik)) {
        throw validation_error("model '" + label + "' has a non-finite log-likelihood");
    }
    ModelScore s;
    s.label = std::move(label);
    s.loglik = loglik;
    s.k = k;
    s.n = n;
    s.aic = aic(loglik, k);
    s.caic = caic(s.aic, k, n);
    s.bic = bic(loglik, k, n);
    return s;
}

Ranking rank(std::vector<ModelScore> scores) {
    if (scores.empty()) {
        throw validation_error("cannot rank an empty model list");
    }
    std::stable_sort(scores.begin(), scores.end(), [](const ModelScore& a, const ModelScore& b) {
        if (a.aic != b.aic) return a.aic < b.aic;
        if (a.bic != b.bic) return a.bic < b.bic;
        return a.label < b.label;
    });

    auto best_by = [&](auto member) {
        const auto it = std::min_element(scores.begin(), scores.end(),
                                         [&](const ModelScore& a, const ModelScore& b) { return a.*member < b.*member; });
        return it->label;
    };

    Ranking out;
    out.best_aic = scores.front().label;
    out.best_caic = best_by(&ModelScore::caic);
    out.best_bic = best_by(&ModelScore::bic);
    out.ordered = std::move(scores);
    return out;
}

}  // namespace trunc_count
