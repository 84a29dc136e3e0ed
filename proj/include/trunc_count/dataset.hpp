#pragma once

// Answer-booklet survey records: ingestion, validation and descriptive summaries.
//
// CSV schema (header mandatory, column order free):
//   course_type,paper_type,pages_blank,lines_per_page,words_per_line
// course_type in {UG, PG}; paper_type in {Q, NQ}; pages_blank an integer in
// [0, r]; the two measurement columns are non-negative reals (averages of
// three sampled pages).

#include "trunc_count/truncated_poisson.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trunc_count {

enum class CourseType { UG, PG };
enum class PaperType { Q, NQ };

std::string_view to_string(CourseType c) noexcept;
std::string_view to_string(PaperType p) noexcept;

struct StudentRecord {
    CourseType course_type = CourseType::UG;
    PaperType paper_type = PaperType::Q;
    int pages_blank = 0;
    double lines_per_page = 0.0;
    double words_per_line = 0.0;
};

inline constexpr std::array<std::string_view, 5> kColumns = {
    "course_type", "paper_type", "pages_blank", "lines_per_page", "words_per_line"};

inline constexpr std::array<std::string_view, 3> kNumericColumns = {
    "pages_blank", "lines_per_page", "words_per_line"};

class Dataset {
public:
    /// Throws validation_error on an empty record list or a record violating the schema.
    Dataset(std::vector<StudentRecord> records, TruncationBound bound, std::string source = {});

    const std::vector<StudentRecord>& records() const noexcept { return records_; }
    TruncationBound bound() const noexcept { return bound_; }
    int r() const noexcept { return bound_.value(); }
    const std::string& source() const noexcept { return source_; }
    std::size_t row_count() const noexcept { return records_.size(); }

    /// pages_blank, lines_per_page or words_per_line. Throws validation_error otherwise.
    std::vector<double> numeric_column(std::string_view name) const;
    /// course_type or paper_type, as level strings.
    std::vector<std::string> factor_column(std::string_view name) const;
    CountSample response() const;

private:
    std::vector<StudentRecord> records_;
    TruncationBound bound_;
    std::string source_;
};

bool is_numeric_column(std::string_view name) noexcept;
bool is_factor_column(std::string_view name) noexcept;

/// Errors carry the 1-based line number of the offending row.
Dataset parse_csv(std::istream& in, TruncationBound bound, std::string source = "<stream>");
Dataset load(const std::filesystem::path& path, TruncationBound bound);
void write_csv(std::ostream& out, const Dataset& data);

struct LevelShare {
    std::string level;
    std::size_t count = 0;
    double proportion = 0.0;
};

struct ColumnStats {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;                  // n - 1 denominator
    std::optional<double> skewness;   // m3 / m2^{3/2}; absent for a constant column
    double min = 0.0;
    double max = 0.0;
};

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

struct NamedHistogram {
    std::string column;
    std::vector<HistogramBin> bins;
};

struct SummaryReport {
    std::size_t n = 0;
    std::vector<LevelShare> course_type;
    std::vector<LevelShare> paper_type;
    std::vector<ColumnStats> columns;
    std::vector<NamedHistogram> histograms;
};

ColumnStats describe(std::string name, std::span<const double> values);

SummaryReport summarize(const Dataset& data);

/// Equal-width bins over [min, max]; the maximum lands in the last bin.
std::vector<HistogramBin> histogram(std::span<const double> values, int bin_count);
std::vector<HistogramBin> histogram(const Dataset& data, std::string_view column, int bin_count);

struct OverlayRow {
    int x = 0;
    std::size_t observed = 0;
    double expected = 0.0;
};

/// Observed tally against n * pmf(x; lambda_hat, r) for x = 0..r.
std::vector<OverlayRow> fit_overlay(const Dataset& data, const DistFit& fit);

/// Synthetic survey: pages_blank from the truncated Poisson, the other
/// columns drawn independently with the survey's factor proportions.
Dataset simulate_dataset(const TruncatedPoissonModel& model, std::size_t n, std::uint64_t seed);

}  // namespace trunc_count
