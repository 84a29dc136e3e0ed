#pragma once

// Right-truncated Poisson regression with normal random cluster effects,
// fitted by maximizing the hierarchical likelihood
//
//   h(beta, u, sigma2) = L1(beta; y | u) + L2(sigma2, u)
//
// with log rates eta = X beta + Z u, L1 the truncated Poisson conditional
// log-likelihood and L2 the N(0, sigma2) log-density of the cluster effects.

#include "trunc_count/dataset.hpp"
#include "trunc_count/truncated_poisson.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trunc_count {

/// n x p fixed-effect design; first column is the intercept.
struct FixedDesign {
    Eigen::MatrixXd matrix;
    std::vector<std::string> labels;

    /// Throws validation_error unless the first column is all ones, n >= p,
    /// the labels match and the columns are linearly independent.
    void validate() const;
    Eigen::Index rows() const noexcept { return matrix.rows(); }
    Eigen::Index cols() const noexcept { return matrix.cols(); }
};

/// n x q cluster-indicator design, stored as the cluster index of each row.
class RandomDesign {
public:
    RandomDesign(std::vector<int> cluster_of_row, std::vector<std::string> labels);
    /// Accepts a dense 0/1 matrix with exactly one 1 per row.
    static RandomDesign from_matrix(const Eigen::MatrixXd& z, std::vector<std::string> labels);

    Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(cluster_.size()); }
    Eigen::Index cols() const noexcept { return static_cast<Eigen::Index>(labels_.size()); }
    int cluster(Eigen::Index row) const { return cluster_[static_cast<std::size_t>(row)]; }
    const std::vector<int>& clusters() const noexcept { return cluster_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    Eigen::MatrixXd to_matrix() const;

private:
    std::vector<int> cluster_;
    std::vector<std::string> labels_;
};

/// cluster_variable: paper_type, course_type, student (one cluster per row) or none.
struct MixedModelSpec {
    TruncationBound r{25};
    std::string cluster_variable = "paper_type";
    std::vector<std::string> covariate_names = {"lines_per_page", "words_per_line"};
    double tol = 1e-8;
    int max_iter = 500;
    /// Pins sigma2 instead of estimating it (values below the floor are raised to it).
    std::optional<double> fixed_sigma2;
};

struct MixedDesign {
    FixedDesign x;
    RandomDesign z;
    std::vector<int> y;
};

MixedDesign build_design(const Dataset& data, const MixedModelSpec& spec);

/// Lower bound for sigma2; a fit ending here means no detectable cluster effect.
inline constexpr double kSigma2Floor = 1e-8;

Eigen::VectorXd rates(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                      const RandomDesign& z);

/// L1 alone.
double conditional_loglik(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                          const RandomDesign& z, std::span<const int> y, TruncationBound r);

/// L1 + L2. Throws std::domain_error for sigma2 <= 0.
double h_likelihood(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, double sigma2, const Eigen::MatrixXd& x,
                    const RandomDesign& z, std::span<const int> y, TruncationBound r);

/// dh/dbeta = X^T (y - mu), mu the truncated means at each row's rate.
Eigen::VectorXd score_beta(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, const Eigen::MatrixXd& x,
                           const RandomDesign& z, std::span<const int> y, TruncationBound r);

/// dh/du_c = sum over rows of cluster c of (y - mu) - u_c / sigma2.
Eigen::VectorXd score_u(const Eigen::VectorXd& beta, const Eigen::VectorXd& u, double sigma2,
                        const Eigen::MatrixXd& x, const RandomDesign& z, std::span<const int> y, TruncationBound r);

/// Changes in h below this are rounding noise; the line search accepts them
/// so Newton can keep reducing the scores once h itself stops resolving.
double h_resolution(double h) noexcept;

struct MixedFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd beta_se;
    Eigen::VectorXd u;
    double sigma2 = 0.0;        // reported as 0 when the estimate sits at the floor
    bool sigma2_at_floor = false;
    double cond_loglik = 0.0;
    double h_value = 0.0;
    Eigen::VectorXd t_values;
    Eigen::VectorXd p_values;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t n = 0;
    bool converged = false;
    int iterations = 0;          // Newton steps
    std::vector<std::string> beta_labels;
    std::vector<std::string> cluster_labels;
    std::vector<double> h_trace; // h after every accepted update; non-decreasing up to h_resolution
};

MixedFit fit(const MixedModelSpec& spec, const Dataset& data);

MixedFit fit(const FixedDesign& x, const RandomDesign& z, std::span<const int> y, const MixedModelSpec& spec);

/// u_c ~ N(0, sigma2) per cluster, then y from the truncated Poisson at exp(X beta + Z u).
std::vector<int> simulate(const Eigen::VectorXd& beta, double sigma2, const Eigen::MatrixXd& x, const RandomDesign& z,
                          TruncationBound r, std::uint64_t seed);

/// 2 * (1 - Phi(|t|))
double two_sided_normal_p(double t);

/// "< 0.0001" below that threshold, else four significant decimals.
std::string format_p_value(double p);

struct CoefficientRow {
    std::string label;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_value = 0.0;
    double p_value = 0.0;
};

struct CoefficientTable {
    std::vector<CoefficientRow> rows;
    double loglik = 0.0;
    int k = 0;
    std::size_t n = 0;
    double aic = 0.0;
    double bic = 0.0;
    double sigma2 = 0.0;
};

CoefficientTable summary(const MixedFit& fit);

}  // namespace trunc_count
