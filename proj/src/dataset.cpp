#include "trunc_count/dataset.hpp"

#include "trunc_count/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace trunc_count {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw validation_error("line " + std::to_string(line) + ": " + msg);
}

int parse_int(std::string_view cell, std::size_t line, std::string_view column) {
    int v = 0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (cell.empty() || ec != std::errc() || ptr != end) {
        fail(line, "column " + std::string(column) + ": '" + std::string(cell) + "' is not an integer");
    }
    return v;
}

double parse_real(std::string_view cell, std::size_t line, std::string_view column) {
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        fail(line, "column " + std::string(column) + ": '" + std::string(cell) + "' is not a finite number");
    }
    if (v < 0.0) {
        fail(line, "column " + std::string(column) + ": negative value " + std::string(cell));
    }
    return v;
}

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void validate_record(const StudentRecord& rec, int r, const std::string& where) {
    if (rec.pages_blank < 0 || rec.pages_blank > r) {
        throw validation_error(where + ": pages_blank " + std::to_string(rec.pages_blank) + " outside [0, " +
                               std::to_string(r) + "]");
    }
    if (!std::isfinite(rec.lines_per_page) || rec.lines_per_page < 0.0 || !std::isfinite(rec.words_per_line) ||
        rec.words_per_line < 0.0) {
        throw validation_error(where + ": measurements must be finite and non-negative");
    }
}

std::vector<LevelShare> shares(const std::vector<std::string>& levels, std::initializer_list<std::string_view> order) {
    std::vector<LevelShare> out;
    const double n = static_cast<double>(levels.size());
    for (auto level : order) {
        LevelShare s;
        s.level = std::string(level);
        s.count = static_cast<std::size_t>(std::count(levels.begin(), levels.end(), s.level));
        s.proportion = static_cast<double>(s.count) / n;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::string_view to_string(CourseType c) noexcept {
    return c == CourseType::UG ? "UG" : "PG";
}

std::string_view to_string(PaperType p) noexcept {
    return p == PaperType::Q ? "Q" : "NQ";
}

bool is_numeric_column(std::string_view name) noexcept {
    return std::find(kNumericColumns.begin(), kNumericColumns.end(), name) != kNumericColumns.end();
}

bool is_factor_column(std::string_view name) noexcept {
    return name == "course_type" || name == "paper_type";
}

Dataset::Dataset(std::vector<StudentRecord> records, TruncationBound bound, std::string source)
    : records_(std::move(records)), bound_(bound), source_(std::move(source)) {
    if (records_.empty()) {
        throw validation_error("dataset has no records");
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        validate_record(records_[i], bound_.value(), "record " + std::to_string(i + 1));
    }
}

std::vector<double> Dataset::numeric_column(std::string_view name) const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& rec : records_) {
        if (name == "pages_blank") {
            out.push_back(rec.pages_blank);
        } else if (name == "lines_per_page") {
            out.push_back(rec.lines_per_page);
        } else if (name == "words_per_line") {
            out.push_back(rec.words_per_line);
        } else {
            throw validation_error("unknown numeric column '" + std::string(name) + "'");
        }
    }
    return out;
}

std::vector<std::string> Dataset::factor_column(std::string_view name) const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& rec : records_) {
        if (name == "course_type") {
            out.emplace_back(to_string(rec.course_type));
        } else if (name == "paper_type") {
            out.emplace_back(to_string(rec.paper_type));
        } else {
            throw validation_error("unknown factor column '" + std::string(name) + "'");
        }
    }
    return out;
}

CountSample Dataset::response() const {
    std::vector<int> values;
    values.reserve(records_.size());
    for (const auto& rec : records_) {
        values.push_back(rec.pages_blank);
    }
    return CountSample(std::move(values), bound_);
}

Dataset parse_csv(std::istream& in, TruncationBound bound, std::string source) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) {
        throw validation_error(source + ": empty file, header row required");
    }
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }

    // header: column name -> position
    std::map<std::string, std::size_t, std::less<>> position;
    const auto header = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name(header[i]);
        if (std::find(kColumns.begin(), kColumns.end(), name) == kColumns.end()) {
            fail(line_no, "unknown column '" + name + "'");
        }
        if (!position.emplace(name, i).second) {
            fail(line_no, "duplicate column '" + name + "'");
        }
    }
    for (auto col : kColumns) {
        if (!position.contains(col)) {
            fail(line_no, "missing column '" + std::string(col) + "'");
        }
    }

    auto at = [&](const std::vector<std::string_view>& cells, std::string_view col) {
        return cells[position.find(col)->second];
    };

    std::vector<StudentRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            fail(line_no, "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        }
        StudentRecord rec;
        const auto course = at(cells, "course_type");
        if (course == "UG") {
            rec.course_type = CourseType::UG;
        } else if (course == "PG") {
            rec.course_type = CourseType::PG;
        } else {
            fail(line_no, "course_type must be UG or PG, got '" + std::string(course) + "'");
        }
        const auto paper = at(cells, "paper_type");
        if (paper == "Q") {
            rec.paper_type = PaperType::Q;
        } else if (paper == "NQ") {
            rec.paper_type = PaperType::NQ;
        } else {
            fail(line_no, "paper_type must be Q or NQ, got '" + std::string(paper) + "'");
        }
        rec.pages_blank = parse_int(at(cells, "pages_blank"), line_no, "pages_blank");
        if (rec.pages_blank < 0 || rec.pages_blank > bound.value()) {
            fail(line_no, "pages_blank " + std::to_string(rec.pages_blank) + " outside [0, " +
                              std::to_string(bound.value()) + "]");
        }
        rec.lines_per_page = parse_real(at(cells, "lines_per_page"), line_no, "lines_per_page");
        rec.words_per_line = parse_real(at(cells, "words_per_line"), line_no, "words_per_line");
        records.push_back(rec);
    }
    if (records.empty()) {
        throw validation_error(source + ": no data rows");
    }
    return Dataset(std::move(records), bound, std::move(source));
}

Dataset load(const std::filesystem::path& path, TruncationBound bound) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw validation_error("cannot open " + path.string());
    }
    return parse_csv(in, bound, path.string());
}

void write_csv(std::ostream& out, const Dataset& data) {
    out << "course_type,paper_type,pages_blank,lines_per_page,words_per_line\n";
    for (const auto& rec : data.records()) {
        out << to_string(rec.course_type) << ',' << to_string(rec.paper_type) << ',' << rec.pages_blank << ','
            << format_real(rec.lines_per_page) << ',' << format_real(rec.words_per_line) << '\n';
    }
}

ColumnStats describe(std::string name, std::span<const double> values) {
    ColumnStats s;
    s.name = std::move(name);
    if (values.empty()) {
        return s;
    }
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    s.sd = values.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
    m2 /= n;
    m3 /= n;
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

std::vector<HistogramBin> histogram(std::span<const double> values, int bin_count) {
    if (bin_count < 1) {
        throw validation_error("histogram needs at least one bin");
    }
    if (values.empty()) {
        throw validation_error("histogram of an empty column");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it > lo ? *hi_it - lo : 1.0;
    const auto bins = static_cast<std::size_t>(bin_count);

    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = lo + range * static_cast<double>(b) / bin_count;
        out[b].upper = lo + range * static_cast<double>(b + 1) / bin_count;
    }
    for (double v : values) {
        auto idx = static_cast<std::size_t>(std::floor((v - lo) * bin_count / range));
        out[std::min(idx, bins - 1)].count += 1;
    }
    return out;
}

std::vector<HistogramBin> histogram(const Dataset& data, std::string_view column, int bin_count) {
    const auto values = data.numeric_column(column);
    return histogram(values, bin_count);
}

SummaryReport summarize(const Dataset& data) {
    SummaryReport report;
    report.n = data.row_count();
    report.course_type = shares(data.factor_column("course_type"), {"UG", "PG"});
    report.paper_type = shares(data.factor_column("paper_type"), {"Q", "NQ"});

    // Sturges for the measurements, one bin per integer for the count
    const int sturges = static_cast<int>(std::ceil(std::log2(static_cast<double>(report.n)))) + 1;
    for (auto col : kNumericColumns) {
        const auto values = data.numeric_column(col);
        auto stats = describe(std::string(col), values);
        int bins = sturges;
        if (col == "pages_blank") {
            bins = static_cast<int>(stats.max - stats.min) + 1;
        }
        report.histograms.push_back({std::string(col), histogram(values, bins)});
        report.columns.push_back(std::move(stats));
    }
    return report;
}

std::vector<OverlayRow> fit_overlay(const Dataset& data, const DistFit& fit) {
    const int r = data.r();
    const double n = static_cast<double>(data.row_count());
    std::vector<OverlayRow> rows(static_cast<std::size_t>(r) + 1);
    for (int x = 0; x <= r; ++x) {
        rows[static_cast<std::size_t>(x)].x = x;
    }
    for (const auto& rec : data.records()) {
        rows[static_cast<std::size_t>(rec.pages_blank)].observed += 1;
    }
    if (fit.lambda_hat == 0.0) {
        rows[0].expected = n;  // degenerate law at zero
        return rows;
    }
    if (!std::isfinite(fit.lambda_hat)) {
        rows.back().expected = n;  // all mass at the bound
        return rows;
    }
    const TruncatedPoissonModel model(fit.lambda_hat, data.bound());
    for (auto& row : rows) {
        row.expected = n * pmf(row.x, model);
    }
    return rows;
}

Dataset simulate_dataset(const TruncatedPoissonModel& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        throw validation_error("simulate needs n >= 1");
    }
    rng_engine rng(seed);
    std::bernoulli_distribution postgraduate(0.24);
    std::bernoulli_distribution non_quantitative(0.44);
    std::uniform_int_distribution<int> lines(8, 29);
    std::uniform_int_distribution<int> words(4, 14);

    std::vector<StudentRecord> records(n);
    for (auto& rec : records) {
        rec.course_type = postgraduate(rng) ? CourseType::PG : CourseType::UG;
        rec.paper_type = non_quantitative(rng) ? PaperType::NQ : PaperType::Q;
        rec.pages_blank = draw(model, rng);
        // averages of three sampled pages
        rec.lines_per_page = (lines(rng) + lines(rng) + lines(rng)) / 3.0;
        rec.words_per_line = (words(rng) + words(rng) + words(rng)) / 3.0;
    }
    return Dataset(std::move(records), model.bound(), "simulated");
}

}  // namespace trunc_count
