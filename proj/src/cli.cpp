#include "trunc_count/cli.hpp"

#include "trunc_count/dataset.hpp"
#include "trunc_count/discriminant.hpp"
#include "trunc_count/errors.hpp"
#include "trunc_count/mixed_regression.hpp"
#include "trunc_count/model_selection.hpp"
#include "trunc_count/page_utility.hpp"
#include "trunc_count/truncated_poisson.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace trunc_count {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum class LogLevel { quiet, info, debug };

class Log {
public:
    Log(std::ostream& err) : err_(err) {
        const char* env = std::getenv("TRUNC_COUNT_LOG");
        const std::string v = env ? env : "quiet";
        if (v == "quiet" || v.empty()) {
            level_ = LogLevel::quiet;
        } else if (v == "info") {
            level_ = LogLevel::info;
        } else if (v == "debug") {
            level_ = LogLevel::debug;
        } else {
            level_ = LogLevel::info;
            err_ << "warning: TRUNC_COUNT_LOG='" << v << "' not one of quiet, info, debug; using info\n";
        }
    }
    template <class... T>
    void info(const T&... parts) const {
        if (level_ >= LogLevel::info) write("info", parts...);
    }
    template <class... T>
    void debug(const T&... parts) const {
        if (level_ >= LogLevel::debug) write("debug", parts...);
    }

private:
    template <class... T>
    void write(const char* tag, const T&... parts) const {
        err_ << "[" << tag << "] ";
        (err_ << ... << parts);
        err_ << '\n';
    }
    std::ostream& err_;
    LogLevel level_ = LogLevel::quiet;
};

std::string num(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

json optional_number(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json finite_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

// Flat CSV table writer for --out-dir.
void write_table(const std::optional<fs::path>& dir, const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const Log& log) {
    if (!dir) return;
    fs::create_directories(*dir);
    const fs::path path = *dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw validation_error("cannot write " + path.string());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "," : "") << cells[i];
        }
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    log.info("wrote ", path.string());
}

json ranking_json(const Ranking& ranking) {
    json order = json::array();
    for (const auto& s : ranking.ordered) order.push_back(s.label);
    return {{"order", order},
            {"best_aic", ranking.best_aic},
            {"best_caic", ranking.best_caic},
            {"best_bic", ranking.best_bic}};
}

std::vector<std::vector<std::string>> ranking_rows(const Ranking& ranking) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : ranking.ordered) {
        rows.push_back({s.label, num(s.loglik), std::to_string(s.k), std::to_string(s.n), num(s.aic), num(s.caic),
                        num(s.bic)});
    }
    return rows;
}

const std::vector<std::string> kRankingHeader = {"model", "loglik", "k", "n", "aic", "caic", "bic"};

struct Common {
    std::string input;
    int r = -1;
    std::string out_dir;

    std::optional<fs::path> dir() const {
        return out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
    }
};

Dataset load_input(const Common& c, const Log& log) {
    const auto data = load(c.input, TruncationBound(c.r));
    log.info("loaded ", data.row_count(), " rows from ", c.input, " (r = ", c.r, ")");
    return data;
}

json run_fit(const Common& c, const Log& log) {
    const auto data = load_input(c, log);
    const auto sample = data.response();
    const auto fit = fit_mle(sample);
    log.debug("truncated fit: lambda ", fit.lambda_hat, " after ", fit.iterations, " iterations");
    if (!std::isfinite(fit.lambda_hat)) {
        throw numerical_error("no finite maximum likelihood estimate: every observation sits at the bound r = " +
                              std::to_string(c.r));
    }
    if (!fit.converged) {
        throw numerical_error("truncated Poisson fit did not converge in " + std::to_string(fit.iterations) +
                              " iterations");
    }
    const auto plain = fit_untruncated_poisson(sample);
    const std::size_t n = sample.size();
    const auto truncated_score = make_score("right_truncated_poisson", fit.loglik, 1, n);
    const auto poisson_score = make_score("poisson", plain.loglik, 1, n);
    const auto ranking = rank({poisson_score, truncated_score});

    std::optional<double> moore;
    try {
        moore = moore_estimate(sample);
    } catch (const validation_error& e) {
        log.info("moore estimate unavailable: ", e.what());
    }

    auto model_json = [](const ModelScore& s, const DistFit& f) {
        return json{{"model", s.label},   {"lambda_hat", f.lambda_hat}, {"std_error", optional_number(f.std_error)},
                    {"loglik", s.loglik}, {"k", s.k},                   {"aic", s.aic},
                    {"caic", s.caic},     {"bic", s.bic}};
    };
    json doc = {
        {"command", "fit"},
        {"input", c.input},
        {"r", c.r},
        {"n", n},
        {"lambda_hat", fit.lambda_hat},
        {"std_error", optional_number(fit.std_error)},
        {"loglik", fit.loglik},
        {"aic", truncated_score.aic},
        {"caic", truncated_score.caic},
        {"bic", truncated_score.bic},
        {"converged", fit.converged},
        {"iterations", fit.iterations},
        {"truncated_mean", fit.lambda_hat > 0.0 ? truncated_mean(TruncatedPoissonModel(fit.lambda_hat, data.bound())) : 0.0},
        {"moore_estimate", optional_number(moore)},
        {"comparison", json::array({model_json(poisson_score, plain), model_json(truncated_score, fit)})},
        {"ranking", ranking_json(ranking)},
    };

    std::vector<std::vector<std::string>> overlay;
    for (const auto& row : fit_overlay(data, fit)) {
        overlay.push_back({std::to_string(row.x), std::to_string(row.observed), num(row.expected)});
    }
    write_table(c.dir(), "overlay.csv", {"x", "observed", "expected"}, overlay, log);
    write_table(c.dir(), "comparison.csv", kRankingHeader, ranking_rows(ranking), log);
    return doc;
}

json run_regress(const Common& c, std::vector<std::string> clusters, const Log& log) {
    const auto data = load_input(c, log);
    if (clusters.empty()) clusters = {"paper_type"};
    json models = json::array();
    std::vector<ModelScore> scores;
    std::vector<std::vector<std::string>> coef_rows;
    std::vector<std::vector<std::string>> effect_rows;
    for (const auto& cluster : clusters) {
        if (std::count(clusters.begin(), clusters.end(), cluster) > 1) {
            throw validation_error("cluster variable '" + cluster + "' given twice");
        }
        MixedModelSpec spec;
        spec.r = data.bound();
        spec.cluster_variable = cluster;
        const auto fit = trunc_count::fit(spec, data);
        log.info("regress ", cluster, ": ", fit.iterations, " Newton steps, sigma2 ", fit.sigma2);
        if (!fit.converged) {
            throw numerical_error("mixed model with cluster '" + cluster + "' did not converge in " +
                                  std::to_string(spec.max_iter) + " Newton steps");
        }
        const auto table = summary(fit);
        json coefs = json::array();
        for (const auto& row : table.rows) {
            coefs.push_back({{"term", row.label},
                             {"estimate", row.estimate},
                             {"std_error", row.std_error},
                             {"t_value", row.t_value},
                             {"p_value", row.p_value},
                             {"p_display", format_p_value(row.p_value)}});
            coef_rows.push_back({cluster, row.label, num(row.estimate), num(row.std_error), num(row.t_value),
                                 num(row.p_value)});
        }
        json effects = json::array();
        for (std::size_t j = 0; j < fit.cluster_labels.size(); ++j) {
            const double u = fit.u(static_cast<Eigen::Index>(j));
            effects.push_back({{"cluster", fit.cluster_labels[j]}, {"u", u}});
            effect_rows.push_back({cluster, fit.cluster_labels[j], num(u)});
        }
        const auto score = make_score(cluster, table.loglik, table.k, table.n);
        scores.push_back(score);
        models.push_back({{"cluster", cluster},
                          {"converged", fit.converged},
                          {"iterations", fit.iterations},
                          {"sigma2", fit.sigma2},
                          {"sigma2_at_floor", fit.sigma2_at_floor},
                          {"loglik", table.loglik},
                          {"h_value", fit.h_value},
                          {"k", table.k},
                          {"n", table.n},
                          {"aic", score.aic},
                          {"caic", score.caic},
                          {"bic", score.bic},
                          {"coefficients", coefs},
                          {"random_effects", effects}});
    }
    const auto ranking = rank(scores);
    write_table(c.dir(), "coefficients.csv", {"cluster", "term", "estimate", "std_error", "t_value", "p_value"},
                coef_rows, log);
    write_table(c.dir(), "random_effects.csv", {"cluster_variable", "cluster", "u"}, effect_rows, log);
    write_table(c.dir(), "ranking.csv", kRankingHeader, ranking_rows(ranking), log);
    return {{"command", "regress"}, {"input", c.input}, {"r", c.r},
            {"n", data.row_count()}, {"models", models},  {"ranking", ranking_json(ranking)}};
}

json run_discriminate(const Common& c, const std::string& group, std::vector<std::string> features, const Log& log) {
    const auto data = load_input(c, log);
    if (features.empty()) features = {"pages_blank", "lines_per_page", "words_per_line"};
    const auto f = features_from(data, features);
    const auto g = grouping_from(data, group);
    const auto model = fit_lda(f, g);
    if (model.degenerate) log.info("warning: ", model.warning);
    const auto b = box_m(f, g);
    const auto w = wilks(f, g);
    const auto cm = confusion(model, f, g);

    auto named = [&](const Eigen::VectorXd& v) {
        json o = json::object();
        for (std::size_t j = 0; j < features.size(); ++j) o[features[j]] = v(static_cast<Eigen::Index>(j));
        return o;
    };
    json means = json::object();
    for (int k = 0; k < 2; ++k) {
        means[g.levels[static_cast<std::size_t>(k)]] = named(model.group_means.row(k).transpose());
    }
    const auto sizes = g.sizes();

    std::vector<std::vector<std::string>> score_rows;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const Eigen::VectorXd x = f.values.row(i).transpose();
        score_rows.push_back({std::to_string(i + 1), g.levels[static_cast<std::size_t>(g.label[static_cast<std::size_t>(i)])],
                              num(score(model.standardized_coefficients, x)),
                              g.levels[static_cast<std::size_t>(classify(model, x))]});
    }
    std::vector<std::vector<std::string>> cm_rows;
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t p = 0; p < 2; ++p) {
            cm_rows.push_back({cm.levels[a], cm.levels[p], std::to_string(cm.counts[a][p]), num(cm.row_percent[a][p])});
        }
    }
    write_table(c.dir(), "scores.csv", {"row", "actual", "score", "predicted"}, score_rows, log);
    write_table(c.dir(), "confusion.csv", {"actual", "predicted", "count", "row_percent"}, cm_rows, log);

    return {
        {"command", "discriminate"},
        {"input", c.input},
        {"group", group},
        {"levels", g.levels},
        {"group_sizes", {{g.levels[0], sizes[0]}, {g.levels[1], sizes[1]}}},
        {"features", features},
        {"n", f.rows()},
        {"group_means", means},
        {"raw_coefficients", named(model.raw_coefficients)},
        {"standardized_coefficients", named(model.standardized_coefficients)},
        {"centroids", {{g.levels[0], model.centroids[0]}, {g.levels[1], model.centroids[1]}}},
        {"cutoff", model.cutoff},
        {"below_cutoff", g.levels[static_cast<std::size_t>(model.lower_group())]},
        {"degenerate", model.degenerate},
        {"box_m", {{"m", b.m}, {"chi2", b.chi2}, {"df", b.df}, {"p", b.p}}},
        {"wilks", {{"lambda", w.lambda}, {"chi2", finite_or_null(w.chi2)}, {"df", w.df}, {"p", w.p}}},
        {"confusion",
         {{"levels", cm.levels}, {"counts", cm.counts}, {"row_percent", cm.row_percent}, {"accuracy", cm.accuracy}}},
    };
}

json run_optimize(const std::string& config, const std::string& out_dir, const Log& log) {
    const auto p = load_config(config);
    const auto s = optimize(p);
    log.info("optimize: ", s.feasible_count, " of ", s.candidates, " candidates feasible");

    std::vector<std::vector<std::string>> rows;
    for (std::int64_t x1 = p.x1_range.lo; x1 <= p.x1_range.hi; ++x1) {
        const auto f = feasible(p.X, x1, p);
        rows.push_back({std::to_string(x1), to_string(utility(p.X, x1, p.N1).value), f.feasible ? "true" : "false",
                        to_string(f.main_slack), to_string(f.additional_slack)});
    }
    const std::optional<fs::path> dir = out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
    write_table(dir, "utility_table.csv", {"x1", "utility", "feasible", "main_slack", "additional_slack"}, rows, log);

    json doc = {
        {"command", "optimize"},
        {"config", config},
        {"problem",
         {{"X", p.X},
          {"N1", p.N1},
          {"N2", p.N2},
          {"c11", to_string(p.c11)},
          {"c12", to_string(p.c12)},
          {"c21", to_string(p.c21)},
          {"c22", to_string(p.c22)},
          {"A0", to_string(p.A0)},
          {"X1_min", p.x1_range.lo},
          {"X1_max", p.x1_range.hi}}},
        {"found", s.found},
        {"candidates", s.candidates},
        {"feasible_count", s.feasible_count},
    };
    if (s.found) {
        doc["x_star"] = s.x_star;
        doc["x1_star"] = s.x1_star;
        doc["utility"] = to_string(s.utility.value);
        doc["utility_value"] = to_double(s.utility.value);
        doc["k_adjust"] = s.utility.k_adjust;
        doc["main_slack"] = to_string(s.constraints.main_slack);
        doc["additional_slack"] = to_string(s.constraints.additional_slack);
        doc["binding"] = s.binding;
    } else {
        doc["x_star"] = nullptr;
        doc["x1_star"] = nullptr;
        doc["utility"] = nullptr;
    }
    return doc;
}

json run_simulate(double lambda, int r, std::size_t n, std::uint64_t seed, const std::string& out_dir,
                  const Log& log) {
    const auto data = simulate_dataset(TruncatedPoissonModel(lambda, TruncationBound(r)), n, seed);
    json records = json::array();
    for (const auto& rec : data.records()) {
        records.push_back({{"course_type", to_string(rec.course_type)},
                           {"paper_type", to_string(rec.paper_type)},
                           {"pages_blank", rec.pages_blank},
                           {"lines_per_page", rec.lines_per_page},
                           {"words_per_line", rec.words_per_line}});
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path path = fs::path(out_dir) / "simulated.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw validation_error("cannot write " + path.string());
        write_csv(out, data);
        log.info("wrote ", path.string());
    }
    return {{"command", "simulate"}, {"lambda", lambda}, {"r", r},
            {"n", n},                {"seed", seed},     {"mean_pages_blank", data.response().mean()},
            {"records", records}};
}

json run_summarize(const Common& c, const Log& log) {
    const auto data = load_input(c, log);
    const auto report = summarize(data);
    auto shares = [](const std::vector<LevelShare>& v) {
        json o = json::array();
        for (const auto& s : v) o.push_back({{"level", s.level}, {"count", s.count}, {"proportion", s.proportion}});
        return o;
    };
    json columns = json::array();
    for (const auto& s : report.columns) {
        columns.push_back({{"column", s.name},
                           {"mean", s.mean},
                           {"sd", s.sd},
                           {"skewness", optional_number(s.skewness)},
                           {"min", s.min},
                           {"max", s.max}});
    }
    json histograms = json::object();
    for (const auto& h : report.histograms) {
        json bins = json::array();
        std::vector<std::vector<std::string>> rows;
        for (const auto& b : h.bins) {
            bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
            rows.push_back({num(b.lower), num(b.upper), std::to_string(b.count)});
        }
        histograms[h.column] = bins;
        write_table(c.dir(), "histogram_" + h.column + ".csv", {"lower", "upper", "count"}, rows, log);
    }

    json overlay = json::array();
    const auto fit = fit_mle(data.response());
    if (std::isfinite(fit.lambda_hat)) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& row : fit_overlay(data, fit)) {
            overlay.push_back({{"x", row.x}, {"observed", row.observed}, {"expected", row.expected}});
            rows.push_back({std::to_string(row.x), std::to_string(row.observed), num(row.expected)});
        }
        write_table(c.dir(), "overlay.csv", {"x", "observed", "expected"}, rows, log);
    }
    return {{"command", "summarize"},
            {"input", c.input},
            {"r", c.r},
            {"n", report.n},
            {"course_type", shares(report.course_type)},
            {"paper_type", shares(report.paper_type)},
            {"columns", columns},
            {"histograms", histograms},
            {"lambda_hat", finite_or_null(fit.lambda_hat)},
            {"overlay", overlay}};
}

void add_common(CLI::App* sub, Common& c, bool with_input = true) {
    if (with_input) {
        sub->add_option("--input", c.input, "survey CSV")->required();
    }
    sub->add_option("--r", c.r, "truncation bound (pages in the booklet)")->required()->check(CLI::NonNegativeNumber);
    sub->add_option("--out-dir", c.out_dir, "directory for CSV tables");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const Log log(err);
    CLI::App app("Right-truncated count models for answer-booklet surveys", "trunc-count");
    app.require_subcommand(1);

    Common fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "truncated vs untruncated Poisson fit with model comparison");
    add_common(fit_cmd, fit_opts);

    Common reg_opts;
    std::vector<std::string> clusters;
    auto* reg_cmd = app.add_subcommand("regress", "truncated Poisson mixed model, one fit per --cluster");
    add_common(reg_cmd, reg_opts);
    reg_cmd->add_option("--cluster", clusters, "paper_type, course_type, student or none (repeatable)");

    Common lda_opts;
    std::string group = "paper_type";
    std::vector<std::string> features;
    auto* lda_cmd = app.add_subcommand("discriminate", "two-group linear discriminant analysis");
    add_common(lda_cmd, lda_opts);
    lda_cmd->add_option("--group", group, "paper_type or course_type");
    lda_cmd->add_option("--features", features, "comma-separated numeric columns")->delimiter(',');

    std::string config;
    std::string opt_out;
    auto* opt_cmd = app.add_subcommand("optimize", "page-utility maximization from a config file");
    opt_cmd->add_option("--config", config, "key = value problem file")->required();
    opt_cmd->add_option("--out-dir", opt_out, "directory for CSV tables");

    double lambda = 0.0;
    int sim_r = -1;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string sim_out;
    auto* sim_cmd = app.add_subcommand("simulate", "seeded synthetic survey");
    sim_cmd->add_option("--lambda", lambda, "Poisson rate")->required();
    sim_cmd->add_option("--r", sim_r, "truncation bound")->required()->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--n", n, "rows")->required();
    sim_cmd->add_option("--seed", seed, "random seed");
    sim_cmd->add_option("--out-dir", sim_out, "directory for simulated.csv");

    Common sum_opts;
    auto* sum_cmd = app.add_subcommand("summarize", "descriptive report with histogram and fit tables");
    add_common(sum_cmd, sum_opts);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInvalid;
    }

    try {
        json doc;
        if (*fit_cmd) {
            doc = run_fit(fit_opts, log);
        } else if (*reg_cmd) {
            doc = run_regress(reg_opts, clusters, log);
        } else if (*lda_cmd) {
            doc = run_discriminate(lda_opts, group, features, log);
        } else if (*opt_cmd) {
            doc = run_optimize(config, opt_out, log);
        } else if (*sim_cmd) {
            doc = run_simulate(lambda, sim_r, n, seed, sim_out, log);
        } else if (*sum_cmd) {
            doc = run_summarize(sum_opts, log);
        }
        out << doc.dump(2) << '\n';
        return kExitOk;
    } catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {  // includes validation_error
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace trunc_count
