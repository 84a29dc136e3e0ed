#include "trunc_count/mixed_regression.hpp"

#include "trunc_count/errors.hpp"
#include "trunc_count/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

namespace trunc_count {

namespace {

constexpr int kMaxHalvings = 30;
constexpr int kMaxInnerSteps = 50;
constexpr double kRidge = 1e-8;

void check_dims(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                const RandomDesign& z, std::span<const int> y) {
    if (beta.size() != x.cols() || u.size() != z.cols() || x.rows() != z.rows() ||
        static_cast<std::size_t>(x.rows()) != y.size()) {
        throw validation_error("dimension mismatch: X is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                               ", Z is " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()) + ", beta " +
                               std::to_string(beta.size()) + ", u " + std::to_string(u.size()) + ", y " +
                               std::to_string(y.size()));
    }
}

void check_response(std::span<const int> y, TruncationBound r) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] > r.value()) {
            throw validation_error("response " + std::to_string(y[i]) + " in row " + std::to_string(i + 1) +
                                   " outside [0, " + std::to_string(r.value()) + "]");
        }
    }
}

// Per-row truncated moments at the current linear predictor.
struct RowMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    double l1 = 0.0;
};

RowMoments row_moments(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                       const RandomDesign& z, std::span<const int> y, TruncationBound r) {
    const Eigen::VectorXd xb = x * beta;
    RowMoments out;
    out.mean.resize(x.rows());
    out.var.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = xb(i) + u(z.cluster(i));
        const auto m = truncated_moments(eta, r.value());
        const int yi = y[static_cast<std::size_t>(i)];
        out.mean(i) = m.mean;
        out.var(i) = m.variance;
        out.l1 += yi * eta - std::lgamma(yi + 1.0) - m.log_normalizer;
    }
    return out;
}

double random_effect_logdensity(const Eigen::VectorXd& u, double sigma2) {
    if (!(sigma2 > 0.0)) {
        throw std::domain_error("sigma2 must be positive");
    }
    const double q = static_cast<double>(u.size());
    return -q * 0.5 * std::log(2.0 * std::numbers::pi) - q * 0.5 * std::log(sigma2) - u.squaredNorm() / (2.0 * sigma2);
}

std::string parameter_name(Eigen::Index idx, const std::vector<std::string>& beta_labels,
                           const std::vector<std::string>& cluster_labels) {
    const auto p = static_cast<Eigen::Index>(beta_labels.size());
    if (idx < p) {
        return beta_labels[static_cast<std::size_t>(idx)];
    }
    return "u[" + cluster_labels[static_cast<std::size_t>(idx - p)] + "]";
}

// Names the parameters that dominate the eigenvector of the smallest eigenvalue.
[[noreturn]] void throw_singular(const Eigen::MatrixXd& neg_hessian, const std::vector<std::string>& beta_labels,
                                 const std::vector<std::string>& cluster_labels) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg_hessian);
    std::string names;
    if (eig.info() == Eigen::Success) {
        const Eigen::VectorXd v = eig.eigenvectors().col(0).cwiseAbs();
        const double top = v.maxCoeff();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v(i) >= 0.3 * top) {
                if (!names.empty()) names += ", ";
                names += parameter_name(i, beta_labels, cluster_labels);
            }
        }
    }
    throw numerical_error("h-likelihood Hessian is singular along the direction of: " +
                          (names.empty() ? std::string("<unknown>") : names));
}

}  // namespace

double h_resolution(double h) noexcept {
    return 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(h));
}

void FixedDesign::validate() const {
    const auto n = matrix.rows();
    const auto p = matrix.cols();
    if (p < 1) {
        throw validation_error("fixed design needs at least the intercept column");
    }
    if (static_cast<std::size_t>(p) != labels.size()) {
        throw validation_error("fixed design has " + std::to_string(p) + " columns but " +
                               std::to_string(labels.size()) + " labels");
    }
    if (n < p) {
        throw validation_error("fixed design has fewer rows than columns");
    }
    if (!(matrix.col(0).array() == 1.0).all()) {
        throw validation_error("first fixed-design column must be the intercept (all ones)");
    }
    if (!matrix.allFinite()) {
        throw validation_error("fixed design contains non-finite values");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(matrix);
    if (qr.rank() < p) {
        std::string names;
        for (Eigen::Index k = qr.rank(); k < p; ++k) {
            if (!names.empty()) names += ", ";
            names += labels[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
        }
        throw validation_error("fixed design is rank deficient; linearly dependent column(s): " + names);
    }
}

RandomDesign::RandomDesign(std::vector<int> cluster_of_row, std::vector<std::string> labels)
    : cluster_(std::move(cluster_of_row)), labels_(std::move(labels)) {
    std::vector<std::size_t> sizes(labels_.size(), 0);
    for (std::size_t i = 0; i < cluster_.size(); ++i) {
        const int c = cluster_[i];
        if (c < 0 || static_cast<std::size_t>(c) >= labels_.size()) {
            throw validation_error("row " + std::to_string(i + 1) + " refers to unknown cluster " + std::to_string(c));
        }
        ++sizes[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (sizes[c] == 0) {
            throw validation_error("cluster '" + labels_[c] + "' has no rows");
        }
    }
}

RandomDesign RandomDesign::from_matrix(const Eigen::MatrixXd& z, std::vector<std::string> labels) {
    if (static_cast<std::size_t>(z.cols()) != labels.size()) {
        throw validation_error("random design column count does not match its labels");
    }
    std::vector<int> cluster(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int found = -1;
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            if (z(i, c) == 1.0) {
                if (found >= 0) {
                    throw validation_error("random design row " + std::to_string(i + 1) + " has more than one 1");
                }
                found = static_cast<int>(c);
            } else if (z(i, c) != 0.0) {
                throw validation_error("random design must be a 0/1 indicator matrix");
            }
        }
        if (found < 0) {
            throw validation_error("random design row " + std::to_string(i + 1) + " has no cluster");
        }
        cluster[static_cast<std::size_t>(i)] = found;
    }
    return RandomDesign(std::move(cluster), std::move(labels));
}

Eigen::MatrixXd RandomDesign::to_matrix() const {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(rows(), cols());
    for (Eigen::Index i = 0; i < rows(); ++i) {
        z(i, cluster(i)) = 1.0;
    }
    return z;
}

MixedDesign build_design(const Dataset& data, const MixedModelSpec& spec) {
    std::set<std::string> seen;
    for (const auto& name : spec.covariate_names) {
        if (name == "pages_blank") {
            throw validation_error("pages_blank is the response and cannot be a covariate");
        }
        if (!is_numeric_column(name)) {
            throw validation_error("unknown covariate column '" + name + "'");
        }
        if (!seen.insert(name).second) {
            throw validation_error("covariate '" + name + "' listed twice");
        }
    }
    const auto& cv = spec.cluster_variable;
    if (cv != "paper_type" && cv != "course_type" && cv != "student" && cv != "none") {
        throw validation_error("unknown cluster variable '" + cv + "' (expected paper_type, course_type, student or none)");
    }

    const auto n = static_cast<Eigen::Index>(data.row_count());
    const auto p = static_cast<Eigen::Index>(spec.covariate_names.size()) + 1;

    MixedDesign design{FixedDesign{Eigen::MatrixXd::Ones(n, p), {"(Intercept)"}}, RandomDesign({}, {}), {}};
    for (Eigen::Index j = 1; j < p; ++j) {
        const auto& name = spec.covariate_names[static_cast<std::size_t>(j - 1)];
        const auto col = data.numeric_column(name);
        if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); })) {
            throw validation_error("covariate '" + name + "' is constant and confounded with the intercept");
        }
        design.x.matrix.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), n);
        design.x.labels.push_back(name);
    }
    design.x.validate();

    std::vector<int> cluster(static_cast<std::size_t>(n));
    std::vector<std::string> labels;
    if (cv == "student") {
        for (Eigen::Index i = 0; i < n; ++i) {
            cluster[static_cast<std::size_t>(i)] = static_cast<int>(i);
            labels.push_back("row" + std::to_string(i + 1));
        }
    } else if (cv == "none") {
        labels.push_back("all");
    } else {
        const auto levels = data.factor_column(cv);
        const std::vector<std::string> order =
            cv == "paper_type" ? std::vector<std::string>{"Q", "NQ"} : std::vector<std::string>{"UG", "PG"};
        for (const auto& level : order) {
            if (std::find(levels.begin(), levels.end(), level) != levels.end()) {
                labels.push_back(level);
            }
        }
        for (std::size_t i = 0; i < levels.size(); ++i) {
            cluster[i] = static_cast<int>(std::find(labels.begin(), labels.end(), levels[i]) - labels.begin());
        }
    }
    design.z = RandomDesign(std::move(cluster), std::move(labels));

    design.y.reserve(static_cast<std::size_t>(n));
    for (const auto& rec : data.records()) {
        design.y.push_back(rec.pages_blank);
    }
    check_response(design.y, spec.r);
    return design;
}

Eigen::VectorXd rates(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                      const RandomDesign& z) {
    if (beta.size() != x.cols() || u.size() != z.cols() || x.rows() != z.rows()) {
        throw validation_error("dimension mismatch in rates()");
    }
    Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        eta(i) += u(z.cluster(i));
    }
    return eta.array().exp();
}

double conditional_loglik(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                          const RandomDesign& z, std::span<const int> y, TruncationBound r) {
    check_dims(beta, u, x, z, y);
    check_response(y, r);
    return row_moments(beta, u, x, z, y, r).l1;
}

double h_likelihood(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, double sigma2, const Eigen::MatrixXd& x,
                    const RandomDesign& z, std::span<const int> y, TruncationBound r) {
    if (!(sigma2 > 0.0)) {
        throw std::domain_error("sigma2 must be positive");
    }
    return conditional_loglik(beta, u, x, z, y, r) + random_effect_logdensity(u, sigma2);
}

Eigen::VectorXd score_beta(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                           const RandomDesign& z, std::span<const int> y, TruncationBound r) {
    check_dims(beta, u, x, z, y);
    check_response(y, r);
    const auto m = row_moments(beta, u, x, z, y, r);
    Eigen::VectorXd resid(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        resid(i) = y[static_cast<std::size_t>(i)] - m.mean(i);
    }
    return x.transpose() * resid;
}

Eigen::VectorXd score_u(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, double sigma2,
                        const Eigen::MatrixXd& x, const RandomDesign& z, std::span<const int> y, TruncationBound r) {
    if (!(sigma2 > 0.0)) {
        throw std::domain_error("sigma2 must be positive");
    }
    check_dims(beta, u, x, z, y);
    check_response(y, r);
    const auto m = row_moments(beta, u, x, z, y, r);
    Eigen::VectorXd g = -u / sigma2;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        g(z.cluster(i)) += y[static_cast<std::size_t>(i)] - m.mean(i);
    }
    return g;
}

MixedFit fit(const MixedModelSpec& spec, const Dataset& data) {
    const auto design = build_design(data, spec);
    return fit(design.x, design.z, design.y, spec);
}

MixedFit fit(const FixedDesign& xd, const RandomDesign& z, std::span<const int> y, const MixedModelSpec& spec) {
    xd.validate();
    const Eigen::MatrixXd& x = xd.matrix;
    const TruncationBound r = spec.r;
    const Eigen::Index p = x.cols();
    const Eigen::Index q = z.cols();
    const Eigen::Index dim = p + q;
    const std::size_t n = y.size();

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(q);
    check_dims(beta, u, x, z, y);
    check_response(y, r);
    if (n == 0) {
        throw validation_error("no observations");
    }

    double ybar = 0.0;
    for (int v : y) ybar += v;
    ybar /= static_cast<double>(n);
    beta(0) = ybar > 0.0 ? std::clamp(std::log(ybar), -10.0, 10.0) : -10.0;
    double sigma2 = spec.fixed_sigma2 ? std::max(*spec.fixed_sigma2, kSigma2Floor) : 0.1;

    MixedFit out;
    out.n = n;
    out.beta_labels = xd.labels;
    out.cluster_labels = z.labels();

    auto h_at = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& uu, double s2) {
        return row_moments(b, uu, x, z, y, r).l1 + random_effect_logdensity(uu, s2);
    };

    // Gradient and negative Hessian of h in (beta, u).
    Eigen::VectorXd grad(dim);
    Eigen::MatrixXd neg_h(dim, dim);
    auto assemble = [&]() {
        const auto m = row_moments(beta, u, x, z, y, r);
        Eigen::VectorXd resid(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            resid(i) = y[static_cast<std::size_t>(i)] - m.mean(i);
        }
        grad.head(p) = x.transpose() * resid;
        grad.tail(q) = -u / sigma2;
        neg_h.setZero();
        neg_h.topLeftCorner(p, p) = x.transpose() * m.var.asDiagonal() * x;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const Eigen::Index c = p + z.cluster(i);
            grad(c) += resid(i);
            neg_h.block(0, c, p, 1) += m.var(i) * x.row(i).transpose();
            neg_h(c, c) += m.var(i);
        }
        neg_h.bottomLeftCorner(q, p) = neg_h.topRightCorner(p, q).transpose();
        neg_h.diagonal().tail(q).array() += 1.0 / sigma2;
    };

    auto solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
        Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd ridged = neg_h;
            ridged.diagonal().array() += kRidge;
            llt.compute(ridged);
            if (llt.info() != Eigen::Success) {
                throw_singular(neg_h, out.beta_labels, out.cluster_labels);
            }
        }
        return llt.solve(rhs);
    };

    double h_cur = h_at(beta, u, sigma2);
    out.h_trace.push_back(h_cur);

    int steps = 0;
    bool converged = false;
    while (steps < spec.max_iter) {
        // (a) Newton-Raphson on (beta, u) at fixed sigma2
        double moved = 0.0;
        bool inner_ok = false;
        for (int inner = 0; inner < kMaxInnerSteps && steps < spec.max_iter; ++inner) {
            assemble();
            const Eigen::VectorXd delta = solve(grad);
            if (delta.cwiseAbs().maxCoeff() < spec.tol && grad.cwiseAbs().maxCoeff() < spec.tol) {
                inner_ok = true;
                break;
            }
            ++steps;
            double t = 1.0;
            bool accepted = false;
            for (int halving = 0; halving <= kMaxHalvings; ++halving, t *= 0.5) {
                const Eigen::VectorXd b_try = beta + t * delta.head(p);
                const Eigen::VectorXd u_try = u + t * delta.tail(q);
                const double h_try = h_at(b_try, u_try, sigma2);
                if (std::isfinite(h_try) && h_try >= h_cur - h_resolution(h_cur)) {
                    beta = b_try;
                    u = u_try;
                    h_cur = h_try;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                inner_ok = false;
                break;
            }
            out.h_trace.push_back(h_cur);
            moved = std::max(moved, t * delta.cwiseAbs().maxCoeff());
        }

        if (spec.fixed_sigma2) {
            converged = inner_ok;
            break;
        }

        // (b) sigma2 at the stationary point of L2 given u
        const double s2_new = std::max(u.squaredNorm() / static_cast<double>(q), kSigma2Floor);
        // keep the sigma2 that u is stationary for once the update is negligible
        if (inner_ok && moved < spec.tol && std::abs(s2_new - sigma2) < spec.tol) {
            converged = true;
            break;
        }
        sigma2 = s2_new;
        h_cur = h_at(beta, u, sigma2);
        out.h_trace.push_back(h_cur);
    }

    // final curvature for standard errors
    assemble();
    Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success) {
        throw_singular(neg_h, out.beta_labels, out.cluster_labels);
    }
    const Eigen::MatrixXd cov_beta = llt.solve(Eigen::MatrixXd::Identity(dim, dim)).topLeftCorner(p, p);

    out.beta = beta;
    out.u = u;
    out.sigma2_at_floor = sigma2 <= kSigma2Floor;
    out.sigma2 = out.sigma2_at_floor ? 0.0 : sigma2;
    out.beta_se = cov_beta.diagonal().cwiseSqrt();
    out.t_values = beta.cwiseQuotient(out.beta_se);
    out.p_values = out.t_values.unaryExpr([](double t) { return two_sided_normal_p(t); });
    out.cond_loglik = row_moments(beta, u, x, z, y, r).l1;
    out.h_value = h_cur;
    out.aic = aic(out.cond_loglik, static_cast<int>(p));
    out.bic = bic(out.cond_loglik, static_cast<int>(p), n);
    out.converged = converged;
    out.iterations = steps;
    return out;
}

std::vector<int> simulate(const Eigen::VectorXd& beta, double sigma2, const Eigen::MatrixXd& x, const RandomDesign& z,
                          TruncationBound r, std::uint64_t seed) {
    if (beta.size() != x.cols() || x.rows() != z.rows()) {
        throw validation_error("dimension mismatch in simulate()");
    }
    if (!(sigma2 >= 0.0)) {
        throw std::domain_error("sigma2 must be non-negative");
    }
    rng_engine rng(seed);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(z.cols());
    if (sigma2 > 0.0) {
        std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
        for (Eigen::Index c = 0; c < u.size(); ++c) {
            u(c) = normal(rng);
        }
    }
    const Eigen::VectorXd lambda = rates(beta, u, x, z);
    std::vector<int> y(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        // rates that underflow to 0 put all mass at zero
        y[static_cast<std::size_t>(i)] =
            lambda(i) > 0.0 ? draw(TruncatedPoissonModel(lambda(i), r), rng) : 0;
    }
    return y;
}

double two_sided_normal_p(double t) {
    return std::erfc(std::abs(t) / std::numbers::sqrt2);
}

std::string format_p_value(double p) {
    if (p < 1e-4) {
        return "< 0.0001";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p);
    return buf;
}

CoefficientTable summary(const MixedFit& fit) {
    CoefficientTable table;
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        CoefficientRow row;
        row.label = fit.beta_labels.at(static_cast<std::size_t>(j));
        row.estimate = fit.beta(j);
        row.std_error = fit.beta_se(j);
        row.t_value = fit.t_values(j);
        row.p_value = fit.p_values(j);
        table.rows.push_back(std::move(row));
    }
    table.loglik = fit.cond_loglik;
    table.k = static_cast<int>(fit.beta.size());
    table.n = fit.n;
    table.aic = aic(table.loglik, table.k);
    table.bic = bic(table.loglik, table.k, table.n);
    table.sigma2 = fit.sigma2;
    return table;
}

}  // namespace trunc_count
