#pragma once

// Command-line front end: fit, simulate and trace. Parsing and the three
// commands write to caller-supplied streams so they can be driven in-process.
//
// Exit codes: 0 success, 1 input or usage error, 2 numerical diagnostics.
//
// Requires CLI11.hpp and nlohmann/json.hpp on the include path.

#include "rankcorr/core_model.hpp"
#include "rankcorr/csv.hpp"
#include "rankcorr/estimator.hpp"
#include "rankcorr/objectives.hpp"
#include "rankcorr/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rankcorr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitDiagnostics = 2;

enum class Command { fit, simulate, trace };

struct CliConfig {
    Command command = Command::fit;
    std::string data_path;
    std::string response_col;
    std::string anchor_col;
    std::vector<std::string> covariate_cols;
    std::optional<std::string> censor_col;
    std::optional<Design> design;
    std::optional<int> n;
    std::optional<int> reps;
    std::optional<std::int64_t> seed;
    std::optional<std::string> output_path;
    FitOptions fit;
    int grid_points = 401;
    double grid_span = 6.0;
    bool risk_orientation = false;

    void validate() const {
        if (command == Command::fit || command == Command::trace) {
            if (data_path.empty()) throw InputError("--data is required");
            if (response_col.empty()) throw InputError("--response is required");
            if (anchor_col.empty()) throw InputError("--anchor is required");
            if (covariate_cols.empty()) throw InputError("--covariates is required");
        }
        if (command == Command::simulate) {
            if (!design) throw InputError("--design is required");
            if (!n) throw InputError("--n is required");
            if (!reps) throw InputError("--reps is required");
            if (*reps < 1) throw InputError("--reps must be at least 1");
            DesignSpec::make(*design, *n);
        }
        if (seed && *seed < 0) throw InputError("--seed must be non-negative");
        if (grid_points < 1) throw InputError("--grid-points must be at least 1");
        if (!(grid_span > 0.0) || !std::isfinite(grid_span)) throw InputError("--grid-span must be positive");
        fit.validate();
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        const std::string item(rankcorr::detail::trim(s.substr(start, comma == std::string::npos ? s.npos : comma - start)));
        if (item.empty()) throw InputError("empty name in list '" + s + "'");
        out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Eigen::VectorXd& v) {
    auto a = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(std::isfinite(v(k)) ? nlohmann::ordered_json(v(k)) : nlohmann::ordered_json());
    return a;
}

inline nlohmann::ordered_json row_major(const Eigen::MatrixXd& m) {
    auto a = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            a.push_back(std::isfinite(m(r, c)) ? nlohmann::ordered_json(m(r, c)) : nlohmann::ordered_json());
    return a;
}

inline std::string format_fixed(double v, int digits) {
    if (!std::isfinite(v)) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// Writes to the --out path when given, otherwise to `fallback`.
template <class Writer>
void emit(const std::optional<std::string>& path, std::ostream& fallback, Writer&& write) {
    if (!path) {
        write(fallback);
        return;
    }
    std::ofstream file(*path, std::ios::binary);
    if (!file) throw InputError("cannot write '" + *path + "'");
    write(file);
    if (!file) throw InputError("failed writing '" + *path + "'");
}

}  // namespace detail

/// Parses argv into a config. Unknown flags and malformed values throw
/// InputError; `--help` output goes to `out` and yields std::nullopt.
inline std::optional<CliConfig> parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rank-correlation estimation for transformation models", "rankcorr"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all");

    CliConfig cfg;
    std::string covariates, design, variance_at = "mrce";
    std::string censor;
    std::string output;
    int n = 0, reps = 0;
    std::int64_t seed = 0;
    std::vector<CLI::Option*> options;

    auto add_data_flags = [&](CLI::App* sub) {
        options.push_back(sub->add_option("--data", cfg.data_path, "CSV file with a header row"));
        options.push_back(sub->add_option("--response", cfg.response_col, "response column"));
        options.push_back(sub->add_option("--covariates", covariates, "comma-separated free covariate columns"));
        options.push_back(sub->add_option("--anchor", cfg.anchor_col, "anchor covariate column (coefficient fixed to 1)"));
        options.push_back(sub->add_option("--censor", censor, "event indicator column (1 = observed, 0 = censored)"));
        options.push_back(sub->add_flag("--risk-orientation", cfg.risk_orientation,
                                        "negate all covariates so larger index means shorter response"));
    };
    auto add_fit_flags = [&](CLI::App* sub) {
        options.push_back(sub->add_option("--seed", seed, "random seed"));
        options.push_back(sub->add_option("--out", output, "output path (default: standard output)"));
        options.push_back(sub->add_option("--sigma-tol", cfg.fit.sigma_tol, "relative smoothing-matrix tolerance"));
        options.push_back(sub->add_option("--theta-tol", cfg.fit.theta_tol, "parameter tolerance"));
        options.push_back(sub->add_option("--max-iters", cfg.fit.max_outer_iters, "maximum fixed-point iterations"));
        options.push_back(sub->add_option("--restarts", cfg.fit.optimizer_restarts, "step-objective multistarts"));
        options.push_back(sub->add_option("--variance-at", variance_at, "variance evaluation point: mrce or current")
                              ->check(CLI::IsMember({"mrce", "current"})));
    };

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a dataset and write a JSON report");
    add_data_flags(fit_cmd);
    add_fit_flags(fit_cmd);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study on a built-in design");
    options.push_back(sim_cmd->add_option("--design", design, "design I, II or III"));
    options.push_back(sim_cmd->add_option("--n", n, "sample size per replication"));
    options.push_back(sim_cmd->add_option("--reps", reps, "number of replications"));
    add_fit_flags(sim_cmd);

    CLI::App* trace_cmd = app.add_subcommand("trace", "objective curves along a one-dimensional grid as CSV");
    add_data_flags(trace_cmd);
    add_fit_flags(trace_cmd);
    options.push_back(trace_cmd->add_option("--grid-points", cfg.grid_points, "number of grid points"));
    options.push_back(trace_cmd->add_option("--grid-span", cfg.grid_span, "half-width in standard errors"));

    for (auto* o : options) o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return std::nullopt;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw InputError(e.what());
    }

    for (auto* o : options)
        if (o->count() > 1) err << "warning: " << o->get_name() << " given " << o->count() << " times; using the last value\n";

    auto given = [](CLI::App* sub, const char* flag) { return sub->count(flag) > 0; };
    CLI::App* sub = fit_cmd->parsed() ? fit_cmd : sim_cmd->parsed() ? sim_cmd : trace_cmd;
    cfg.command = sub == fit_cmd ? Command::fit : sub == sim_cmd ? Command::simulate : Command::trace;
    if (sub != sim_cmd && given(sub, "--covariates")) cfg.covariate_cols = detail::split_list(covariates);
    if (sub != sim_cmd && given(sub, "--censor")) cfg.censor_col = censor;
    if (sub == sim_cmd) {
        if (given(sub, "--design")) {
            cfg.design = parse_design(design);
            if (!cfg.design) throw InputError("--design must be I, II or III, got '" + design + "'");
        }
        if (given(sub, "--n")) cfg.n = n;
        if (given(sub, "--reps")) cfg.reps = reps;
    }
    if (given(sub, "--seed")) {
        cfg.seed = seed;
        if (seed >= 0) cfg.fit.seed = static_cast<std::uint64_t>(seed);
    }
    if (given(sub, "--out")) cfg.output_path = output;
    cfg.fit.variance_at = variance_at == "current" ? VarianceAnchor::current_estimate : VarianceAnchor::step_estimate;
    cfg.validate();
    return cfg;
}

/// Loads the dataset named by the config, negating covariates under
/// --risk-orientation.
inline Dataset load_config_dataset(const CliConfig& cfg) {
    const CsvTable table = read_csv_file(cfg.data_path);
    Dataset data = load_dataset(table, ColumnSelection{cfg.response_col, cfg.covariate_cols, cfg.anchor_col, cfg.censor_col});
    return cfg.risk_orientation ? data.with_scaled_covariates(-1.0) : data;
}

/// Fit report as JSON. `degenerate` marks samples too small for a variance.
inline nlohmann::ordered_json fit_report(const CliConfig& cfg, const Dataset& data, const EstimateResult& r) {
    nlohmann::ordered_json j;
    j["theta_hat"] = detail::to_json(r.theta_hat.values());
    j["theta_mrce"] = detail::to_json(r.theta_mrce.values());
    j["std_errors"] = detail::to_json(r.std_errors);
    j["cov_hat"] = detail::row_major(r.cov_hat);
    auto ci = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < r.theta_hat.size(); ++k) {
        const double se = r.std_errors.size() > k ? r.std_errors(k) : std::numeric_limits<double>::quiet_NaN();
        Eigen::VectorXd bounds(2);
        bounds << r.theta_hat[k] - kWaldCritical * se, r.theta_hat[k] + kWaldCritical * se;
        ci.push_back(detail::to_json(bounds));
    }
    j["wald_ci_95"] = ci;
    j["outer_iterations"] = r.outer_iterations;
    j["converged"] = r.converged;
    j["objective_at_optimum"] = r.objective_at_optimum;
    j["step_objective_at_mrce"] = r.step_objective_at_mrce;
    j["sigma_star"] = detail::row_major(r.sigma_star);
    j["parameters"] = cfg.covariate_cols;
    j["anchor"] = cfg.anchor_col;
    j["input"] = {{"n", data.n()}, {"d", data.d()}, {"censoring_rate", data.censoring_rate()}};
    j["risk_orientation"] = cfg.risk_orientation;
    j["variance_at"] = cfg.fit.variance_at == VarianceAnchor::current_estimate ? "current" : "mrce";
    j["warnings"] = r.warnings;
    return j;
}

/// Fit used by the CLI. When n <= d + 1 the sample cannot support a variance
/// estimate; the step estimate is returned with undefined standard errors.
inline EstimateResult cli_fit(const Dataset& data, const FitOptions& options) {
    if (data.n() > data.d() + 1) return fit(data, options);
    EstimateResult r;
    const StepMaximum step = maximize_step_objective(data, options);
    const Eigen::Index d = data.d();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.theta_mrce = step.theta;
    r.theta_hat = step.theta;
    r.step_objective_at_mrce = step.objective;
    r.objective_at_optimum = step.objective;
    r.cov_hat = Eigen::MatrixXd::Constant(d, d, nan);
    r.sigma_star = r.cov_hat;
    r.sigma_first = r.cov_hat;
    r.std_errors = Eigen::VectorXd::Constant(d, nan);
    r.warnings.push_back("sample too small for a variance estimate (n <= d + 1); reporting the step estimate");
    return r;
}

inline int cmd_fit(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset data = load_config_dataset(cfg);
    const EstimateResult r = cli_fit(data, cfg.fit);
    const auto report = fit_report(cfg, data, r);
    detail::emit(cfg.output_path, out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    const bool degenerate = data.n() <= data.d() + 1;
    if (!r.converged && !degenerate) {
        err << "error: fixed-point iteration did not converge in " << r.outer_iterations << " iterations\n";
        return kExitDiagnostics;
    }
    return kExitOk;
}

inline std::string simulation_table(const DesignSpec& spec, const SimulationSummary& s, std::uint64_t seed) {
    const bool censored = spec.design == Design::II;
    std::ostringstream os;
    os << "Design " << to_string(spec.design) << "  n=" << spec.n << "  reps=" << s.reps << "  failures=" << s.failures
       << "  seed=" << seed;
    if (censored) os << "  censoring=" << detail::format_fixed(s.mean_censoring_rate, 3);
    os << '\n';
    os << std::left << std::setw(7) << "Est" << std::setw(8) << "Param" << std::right << std::setw(9) << "True"
       << std::setw(9) << "Mean" << std::setw(9) << "Bias" << std::setw(9) << "RMSE" << std::setw(9) << "SE"
       << std::setw(10) << "Coverage" << '\n';
    auto rows = [&](const char* name, const std::vector<ParameterSummary>& params) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            const ParameterSummary& p = params[k];
            os << std::left << std::setw(7) << name << std::setw(8) << ("theta" + std::to_string(k + 1)) << std::right
               << std::setw(9) << detail::format_fixed(s.true_theta(static_cast<Eigen::Index>(k)), 4) << std::setw(9)
               << detail::format_fixed(p.mean, 4) << std::setw(9) << detail::format_fixed(p.bias, 4) << std::setw(9)
               << detail::format_fixed(p.rmse, 4) << std::setw(9) << detail::format_fixed(p.mean_se, 4)
               << std::setw(10) << detail::format_fixed(p.coverage, 3) << '\n';
        }
    };
    rows(censored ? "SPRCE" : "SMRCE", s.smoothed);
    rows(censored ? "PRCE" : "MRCE", s.step);
    if (!s.least_squares.empty()) rows("LS", s.least_squares);
    return os.str();
}

inline std::string simulation_csv(const DesignSpec& spec, const SimulationSummary& s) {
    const bool censored = spec.design == Design::II;
    std::ostringstream os;
    os << std::setprecision(17);
    os << "estimator,parameter,true,mean,bias,rmse,mean_se,coverage\n";
    auto cell = [&](double v) -> std::string {
        if (!std::isfinite(v)) return "";
        std::ostringstream c;
        c << std::setprecision(17) << v;
        return c.str();
    };
    auto rows = [&](const char* name, const std::vector<ParameterSummary>& params) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            const ParameterSummary& p = params[k];
            os << name << ",theta" << k + 1 << ',' << cell(s.true_theta(static_cast<Eigen::Index>(k))) << ','
               << cell(p.mean) << ',' << cell(p.bias) << ',' << cell(p.rmse) << ',' << cell(p.mean_se) << ','
               << cell(p.coverage) << '\n';
        }
    };
    rows(censored ? "SPRCE" : "SMRCE", s.smoothed);
    rows(censored ? "PRCE" : "MRCE", s.step);
    if (!s.least_squares.empty()) rows("LS", s.least_squares);
    return os.str();
}

inline nlohmann::ordered_json simulation_json(const DesignSpec& spec, const SimulationSummary& s, std::uint64_t seed) {
    const bool censored = spec.design == Design::II;
    auto block = [](const std::vector<ParameterSummary>& params) {
        auto a = nlohmann::ordered_json::array();
        for (const auto& p : params) {
            nlohmann::ordered_json e;
            auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
            e["mean"] = num(p.mean);
            e["bias"] = num(p.bias);
            e["rmse"] = num(p.rmse);
            e["mean_se"] = num(p.mean_se);
            e["coverage"] = num(p.coverage);
            a.push_back(e);
        }
        return a;
    };
    nlohmann::ordered_json j;
    j["design"] = to_string(spec.design);
    j["n"] = spec.n;
    j["reps"] = s.reps;
    j["seed"] = seed;
    j["failures"] = s.failures;
    j["true_theta"] = detail::to_json(s.true_theta);
    j["mean_outer_iterations"] = s.mean_outer_iterations;
    j["mean_censoring_rate"] = s.mean_censoring_rate;
    j[censored ? "SPRCE" : "SMRCE"] = block(s.smoothed);
    j[censored ? "PRCE" : "MRCE"] = block(s.step);
    if (!s.least_squares.empty()) j["LS"] = block(s.least_squares);
    return j;
}

/// Writes the aligned table to --out (or the output stream); with --out the
/// CSV and JSON twins go to <out>.csv and <out>.json.
inline int cmd_simulate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const DesignSpec spec = DesignSpec::make(*cfg.design, *cfg.n);
    const std::uint64_t seed = cfg.seed ? static_cast<std::uint64_t>(*cfg.seed) : cfg.fit.seed;
    const SimulationSummary s = run_study(spec, *cfg.reps, seed, cfg.fit);
    const std::string table = simulation_table(spec, s, seed);
    detail::emit(cfg.output_path, out, [&](std::ostream& os) { os << table; });
    if (cfg.output_path) {
        detail::emit(std::optional<std::string>(*cfg.output_path + ".csv"), out,
                     [&](std::ostream& os) { os << simulation_csv(spec, s); });
        detail::emit(std::optional<std::string>(*cfg.output_path + ".json"), out,
                     [&](std::ostream& os) { os << simulation_json(spec, s, seed).dump(2) << '\n'; });
    }
    if (s.failures > 0) err << "warning: " << s.failures << " of " << s.reps << " replications did not converge\n";
    return kExitOk;
}

struct TracePoint {
    double theta = 0.0;
    double q_original = 0.0;
    double q_smoothed_first = 0.0;
    double q_smoothed_final = 0.0;
};

/// Objective curves on `points` equally spaced values of theta_hat +- span*SE.
inline std::vector<TracePoint> trace_curves(const Dataset& data, const EstimateResult& r, int points, double span) {
    if (data.d() != 1)
        throw InputError("trace needs exactly one free covariate (got " + std::to_string(data.d()) +
                         "); the curves are one-dimensional");
    if (points < 1) throw InputError("grid needs at least one point");
    const SmoothingMatrix first(r.sigma_first);
    const SmoothingMatrix final_sigma(r.sigma_star);
    const double center = r.theta_hat[0];
    const double half = span * r.std_errors(0);
    std::vector<TracePoint> out(static_cast<std::size_t>(points));
    for (int g = 0; g < points; ++g) {
        const double t = points == 1 ? center : center - half + 2.0 * half * g / (points - 1);
        const ParamVector theta{t};
        out[static_cast<std::size_t>(g)] = TracePoint{t, step_objective(data, theta),
                                                      smoothed_objective(data, theta, first),
                                                      smoothed_objective(data, theta, final_sigma)};
    }
    return out;
}

inline int cmd_trace(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset data = load_config_dataset(cfg);
    if (data.d() != 1)
        throw InputError("trace needs exactly one free covariate (got " + std::to_string(data.d()) +
                         "); the curves are one-dimensional");
    const EstimateResult r = fit(data, cfg.fit);
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    const auto curve = trace_curves(data, r, cfg.grid_points, cfg.grid_span);
    detail::emit(cfg.output_path, out, [&](std::ostream& os) {
        os << std::setprecision(17) << "theta,q_original,q_smoothed_first,q_smoothed_final\n";
        for (const auto& p : curve)
            os << p.theta << ',' << p.q_original << ',' << p.q_smoothed_first << ',' << p.q_smoothed_final << '\n';
    });
    return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        const auto cfg = parse_args(argc, argv, out, err);
        if (!cfg) return kExitOk;
        switch (cfg->command) {
            case Command::fit: return cmd_fit(*cfg, out, err);
            case Command::simulate: return cmd_simulate(*cfg, out, err);
            case Command::trace: return cmd_trace(*cfg, out, err);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const DiagnosticsError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDiagnostics;
    }
    return kExitInput;
}

}  // namespace rankcorr::cli
