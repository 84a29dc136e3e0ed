#pragma once

// Two-group linear discriminant analysis: Fisher direction, standardized
// coefficients, centroid cutoff, Box's M and Wilks' lambda.

#include "trunc_count/dataset.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace trunc_count {

/// n x p feature values with column names (pages_blank, lines_per_page,
/// words_per_line when built from a survey).
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;

    /// Throws validation_error unless n >= 4, p >= 1, names match and all values are finite.
    void validate() const;
    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index cols() const noexcept { return values.cols(); }
};

/// Two-level membership; label[i] is 0 or 1 and indexes levels.
struct Grouping {
    std::vector<int> label;
    std::array<std::string, 2> levels;

    /// Throws validation_error unless both levels have at least two members.
    void validate(Eigen::Index rows) const;
    std::array<Eigen::Index, 2> sizes() const;
};

FeatureMatrix features_from(const Dataset& data, const std::vector<std::string>& columns);

/// paper_type (levels Q, NQ) or course_type (levels UG, PG).
Grouping grouping_from(const Dataset& data, std::string_view column);

struct LdaModel {
    std::vector<std::string> feature_names;
    std::array<std::string, 2> levels;
    Eigen::MatrixXd group_means;               // 2 x p
    Eigen::MatrixXd pooled_cov;                // p x p, denominator n - 2
    Eigen::VectorXd raw_coefficients;          // S_w^{-1} (m_0 - m_1)
    Eigen::VectorXd standardized_coefficients; // unit within-group score variance, times pooled SDs
    std::array<double, 2> centroids{};         // mean score per group
    double cutoff = 0.0;                       // average of the centroids
    double mahalanobis_d2 = 0.0;
    bool degenerate = false;                   // group means coincide: no usable direction
    std::string warning;

    /// Index of the group whose centroid lies below the cutoff.
    int lower_group() const noexcept { return centroids[0] <= centroids[1] ? 0 : 1; }
};

/// Throws validation_error if the pooled within-group covariance is singular,
/// naming the collinear columns.
LdaModel fit_lda(const FeatureMatrix& features, const Grouping& grouping);

/// Dot product of coefficients and raw feature values.
double score(const Eigen::VectorXd& coefficients, const Eigen::VectorXd& record);

enum class PaperClass { quantitative, non_quantitative };
std::string_view to_string(PaperClass c) noexcept;

/// Quantitative iff score < cutoff; a tie is non-quantitative.
PaperClass classify(double cutoff, double record_score) noexcept;

/// Group index under a fitted model: the lower-centroid group iff score < cutoff.
int classify(const LdaModel& model, const Eigen::VectorXd& record);

struct BoxMResult {
    double m = 0.0;
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
};

/// Chi-square approximation with Box's scaling factor. Throws validation_error
/// if a group has no more rows than variables or a group covariance is singular.
BoxMResult box_m(const FeatureMatrix& features, const Grouping& grouping);

struct WilksResult {
    double lambda = 1.0;
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
};

/// det(W) / det(T) with Bartlett's chi-square. Throws validation_error if T is singular.
WilksResult wilks(const FeatureMatrix& features, const Grouping& grouping);

struct ConfusionMatrix {
    std::array<std::string, 2> levels;
    std::array<std::array<long, 2>, 2> counts{};      // [actual][predicted]
    std::array<std::array<double, 2>, 2> row_percent{};
    double accuracy = 0.0;                             // trace / n

    static ConfusionMatrix from_counts(const std::array<std::array<long, 2>, 2>& counts,
                                       std::array<std::string, 2> levels = {"0", "1"});
    long total() const noexcept;
};

ConfusionMatrix confusion(const LdaModel& model, const FeatureMatrix& features, const Grouping& grouping);

}  // namespace trunc_count
