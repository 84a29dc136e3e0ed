#include "trunc_count/discriminant.hpp"

#include "trunc_count/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace trunc_count {

namespace {

constexpr double kRankTol = 1e-10;

struct Scatter {
    Eigen::MatrixXd means;   // 2 x p
    Eigen::MatrixXd within;  // sum over groups of centered cross-products
    std::array<Eigen::MatrixXd, 2> group;
    std::array<Eigen::Index, 2> n{};
};

Scatter scatter(const FeatureMatrix& f, const Grouping& g) {
    const Eigen::Index p = f.cols();
    Scatter s;
    s.means = Eigen::MatrixXd::Zero(2, p);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const int k = g.label[static_cast<std::size_t>(i)];
        s.means.row(k) += f.values.row(i);
        ++s.n[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < 2; ++k) {
        s.means.row(k) /= static_cast<double>(s.n[static_cast<std::size_t>(k)]);
        s.group[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(p, p);
    }
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const int k = g.label[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd d = f.values.row(i) - s.means.row(k);
        s.group[static_cast<std::size_t>(k)] += d.transpose() * d;
    }
    s.within = s.group[0] + s.group[1];
    return s;
}

// log det of a symmetric matrix, or nullopt-like NaN if not positive definite
double log_det_spd(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
    if ((d.array() <= 0.0).any()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return 2.0 * d.array().log().sum();
}

// Names the columns involved in an exact linear dependency of a covariance matrix.
std::string collinear_columns(const Eigen::MatrixXd& cov, const std::vector<std::string>& names) {
    std::vector<std::string> found;
    const Eigen::VectorXd var = cov.diagonal();
    for (Eigen::Index j = 0; j < var.size(); ++j) {
        if (!(var(j) > 0.0)) {
            found.push_back(names[static_cast<std::size_t>(j)] + " (constant within groups)");
        }
    }
    if (found.empty()) {
        const Eigen::VectorXd inv_sd = var.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(corr);
        lu.setThreshold(kRankTol);
        const Eigen::MatrixXd kernel = lu.kernel();
        for (Eigen::Index j = 0; j < kernel.rows(); ++j) {
            if (kernel.row(j).cwiseAbs().maxCoeff() > 1e-8) {
                found.push_back(names[static_cast<std::size_t>(j)]);
            }
        }
    }
    std::string out;
    for (const auto& s : found) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out.empty() ? "<unknown>" : out;
}

bool is_singular(const Eigen::MatrixXd& cov) {
    const Eigen::VectorXd var = cov.diagonal();
    if (!(var.array() > 0.0).all()) {
        return true;
    }
    const Eigen::VectorXd inv_sd = var.cwiseSqrt().cwiseInverse();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(inv_sd.asDiagonal() * cov * inv_sd.asDiagonal());
    lu.setThreshold(kRankTol);
    return lu.rank() < cov.rows();
}

double chi2_upper(double chi2, int df) {
    if (!(chi2 > 0.0)) {
        return 1.0;
    }
    if (std::isinf(chi2)) {
        return 0.0;
    }
    return boost::math::gamma_q(df / 2.0, chi2 / 2.0);
}

}  // namespace

void FeatureMatrix::validate() const {
    if (rows() < 4) {
        throw validation_error("discriminant analysis needs at least 4 rows, got " + std::to_string(rows()));
    }
    if (cols() < 1) {
        throw validation_error("discriminant analysis needs at least one feature");
    }
    if (static_cast<std::size_t>(cols()) != names.size()) {
        throw validation_error("feature matrix has " + std::to_string(cols()) + " columns but " +
                               std::to_string(names.size()) + " names");
    }
    if (!values.allFinite()) {
        throw validation_error("feature matrix contains non-finite values");
    }
}

void Grouping::validate(Eigen::Index rows) const {
    if (static_cast<Eigen::Index>(label.size()) != rows) {
        throw validation_error("grouping has " + std::to_string(label.size()) + " labels for " +
                               std::to_string(rows) + " rows");
    }
    for (int l : label) {
        if (l != 0 && l != 1) {
            throw validation_error("group labels must be 0 or 1");
        }
    }
    const auto n = sizes();
    for (int k = 0; k < 2; ++k) {
        if (n[static_cast<std::size_t>(k)] < 2) {
            throw validation_error("group '" + levels[static_cast<std::size_t>(k)] + "' needs at least 2 members, has " +
                                   std::to_string(n[static_cast<std::size_t>(k)]));
        }
    }
}

std::array<Eigen::Index, 2> Grouping::sizes() const {
    std::array<Eigen::Index, 2> n{};
    for (int l : label) {
        if (l == 0 || l == 1) ++n[static_cast<std::size_t>(l)];
    }
    return n;
}

FeatureMatrix features_from(const Dataset& data, const std::vector<std::string>& columns) {
    if (columns.empty()) {
        throw validation_error("no feature columns given");
    }
    FeatureMatrix f{Eigen::MatrixXd(static_cast<Eigen::Index>(data.row_count()), static_cast<Eigen::Index>(columns.size())),
                    columns};
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (std::count(columns.begin(), columns.end(), columns[j]) > 1) {
            throw validation_error("feature '" + columns[j] + "' listed twice");
        }
        const auto col = data.numeric_column(columns[j]);
        f.values.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(col.data(), f.rows());
    }
    return f;
}

Grouping grouping_from(const Dataset& data, std::string_view column) {
    Grouping g;
    if (column == "paper_type") {
        g.levels = {"Q", "NQ"};
        for (const auto& rec : data.records()) g.label.push_back(rec.paper_type == PaperType::Q ? 0 : 1);
    } else if (column == "course_type") {
        g.levels = {"UG", "PG"};
        for (const auto& rec : data.records()) g.label.push_back(rec.course_type == CourseType::UG ? 0 : 1);
    } else {
        throw validation_error("grouping column must be paper_type or course_type, got '" + std::string(column) + "'");
    }
    return g;
}

LdaModel fit_lda(const FeatureMatrix& features, const Grouping& grouping) {
    features.validate();
    grouping.validate(features.rows());
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (n - 2 < p) {
        throw validation_error("pooled covariance needs at least p + 2 rows");
    }

    const auto s = scatter(features, grouping);
    LdaModel model;
    model.feature_names = features.names;
    model.levels = grouping.levels;
    model.group_means = s.means;
    model.pooled_cov = s.within / static_cast<double>(n - 2);
    if (is_singular(model.pooled_cov)) {
        throw validation_error("pooled within-group covariance is singular; collinear columns: " +
                               collinear_columns(model.pooled_cov, features.names));
    }

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(model.pooled_cov);
    const Eigen::VectorXd diff = (s.means.row(0) - s.means.row(1)).transpose();
    model.raw_coefficients = ldlt.solve(diff);
    model.mahalanobis_d2 = diff.dot(model.raw_coefficients);

    const Eigen::VectorXd sd = model.pooled_cov.diagonal().cwiseSqrt();
    if (!(model.mahalanobis_d2 > 1e-20)) {
        model.degenerate = true;
        model.warning = "group means coincide; no discriminating direction";
        model.standardized_coefficients = Eigen::VectorXd::Zero(p);
    } else {
        // a^T S_w a = d^T S_w^{-1} d = D^2
        const Eigen::VectorXd unit = model.raw_coefficients / std::sqrt(model.mahalanobis_d2);
        model.standardized_coefficients = unit.cwiseProduct(sd);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (model.standardized_coefficients(j) != 0.0) {
                if (model.standardized_coefficients(j) < 0.0) model.standardized_coefficients *= -1.0;
                break;
            }
        }
    }

    for (int k = 0; k < 2; ++k) {
        model.centroids[static_cast<std::size_t>(k)] =
            score(model.standardized_coefficients, s.means.row(k).transpose());
    }
    model.cutoff = 0.5 * (model.centroids[0] + model.centroids[1]);
    return model;
}

double score(const Eigen::VectorXd& coefficients, const Eigen::VectorXd& record) {
    if (coefficients.size() != record.size()) {
        throw validation_error("score: " + std::to_string(coefficients.size()) + " coefficients for " +
                               std::to_string(record.size()) + " values");
    }
    return coefficients.dot(record);
}

std::string_view to_string(PaperClass c) noexcept {
    return c == PaperClass::quantitative ? "quantitative" : "non-quantitative";
}

PaperClass classify(double cutoff, double record_score) noexcept {
    return record_score < cutoff ? PaperClass::quantitative : PaperClass::non_quantitative;
}

int classify(const LdaModel& model, const Eigen::VectorXd& record) {
    const int lower = model.lower_group();
    return score(model.standardized_coefficients, record) < model.cutoff ? lower : 1 - lower;
}

BoxMResult box_m(const FeatureMatrix& features, const Grouping& grouping) {
    features.validate();
    grouping.validate(features.rows());
    const Eigen::Index p = features.cols();
    const auto s = scatter(features, grouping);
    const double big_n = static_cast<double>(features.rows());
    constexpr double g = 2.0;

    double weighted = 0.0;
    double inv_sum = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        if (s.n[k] <= p) {
            throw validation_error("Box's M needs more rows than variables in group '" + grouping.levels[k] + "'");
        }
        const double dof = static_cast<double>(s.n[k] - 1);
        const double ld = log_det_spd(s.group[k] / dof);
        if (std::isnan(ld) || is_singular(s.group[k] / dof)) {
            throw validation_error("covariance of group '" + grouping.levels[k] + "' is singular");
        }
        weighted += dof * ld;
        inv_sum += 1.0 / dof;
    }
    const double ld_pooled = log_det_spd(s.within / (big_n - g));

    BoxMResult out;
    out.m = std::max(0.0, (big_n - g) * ld_pooled - weighted);
    const double pd = static_cast<double>(p);
    const double c = (2.0 * pd * pd + 3.0 * pd - 1.0) / (6.0 * (pd + 1.0) * (g - 1.0)) * (inv_sum - 1.0 / (big_n - g));
    out.chi2 = out.m * (1.0 - c);
    out.df = static_cast<int>(p * (p + 1) / 2);
    out.p = chi2_upper(out.chi2, out.df);
    return out;
}

WilksResult wilks(const FeatureMatrix& features, const Grouping& grouping) {
    features.validate();
    grouping.validate(features.rows());
    const Eigen::Index p = features.cols();
    const auto s = scatter(features, grouping);
    const Eigen::RowVectorXd grand = features.values.colwise().mean();
    const Eigen::MatrixXd centered = features.values.rowwise() - grand;
    const Eigen::MatrixXd total = centered.transpose() * centered;
    if (is_singular(total)) {
        throw validation_error("total scatter matrix is singular; collinear columns: " +
                               collinear_columns(total, features.names));
    }

    WilksResult out;
    const double ld_w = log_det_spd(s.within);
    out.lambda = std::isnan(ld_w) ? 0.0 : std::min(1.0, std::exp(ld_w - log_det_spd(total)));
    const double n = static_cast<double>(features.rows());
    const double factor = n - 1.0 - (static_cast<double>(p) + 2.0) / 2.0;
    out.chi2 = out.lambda > 0.0 ? -factor * std::log(out.lambda) : std::numeric_limits<double>::infinity();
    out.df = static_cast<int>(p);
    out.p = chi2_upper(out.chi2, out.df);
    return out;
}

ConfusionMatrix ConfusionMatrix::from_counts(const std::array<std::array<long, 2>, 2>& counts,
                                             std::array<std::string, 2> levels) {
    ConfusionMatrix cm;
    cm.levels = std::move(levels);
    cm.counts = counts;
    long diag = 0;
    for (std::size_t a = 0; a < 2; ++a) {
        if (counts[a][0] < 0 || counts[a][1] < 0) {
            throw validation_error("confusion counts must be non-negative");
        }
        const long row = counts[a][0] + counts[a][1];
        for (std::size_t b = 0; b < 2; ++b) {
            cm.row_percent[a][b] = row > 0 ? 100.0 * static_cast<double>(counts[a][b]) / static_cast<double>(row) : 0.0;
        }
        diag += counts[a][a];
    }
    const long n = cm.total();
    cm.accuracy = n > 0 ? static_cast<double>(diag) / static_cast<double>(n) : 0.0;
    return cm;
}

long ConfusionMatrix::total() const noexcept {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

ConfusionMatrix confusion(const LdaModel& model, const FeatureMatrix& features, const Grouping& grouping) {
    features.validate();
    grouping.validate(features.rows());
    std::array<std::array<long, 2>, 2> counts{};
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto actual = static_cast<std::size_t>(grouping.label[static_cast<std::size_t>(i)]);
        const auto predicted = static_cast<std::size_t>(classify(model, features.values.row(i).transpose()));
        ++counts[actual][predicted];
    }
    return ConfusionMatrix::from_counts(counts, grouping.levels);
}

}  // namespace trunc_count
