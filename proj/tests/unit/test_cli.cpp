#include "rankcorr/cli.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace rankcorr;
namespace fs = std::filesystem;

namespace {

const std::string kPbc = std::string(RANKCORR_TEST_DATA_DIR) + "/pbc312.csv";

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "rankcorr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("rankcorr_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name, const std::string& contents = {}) const {
        const auto p = (path_ / name).string();
        if (!contents.empty()) std::ofstream(p) << contents;
        return p;
    }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<double>> parse_numeric_csv(const std::string& text, std::vector<std::string>& header) {
    const CsvTable t = read_csv_string(text);
    header = t.header;
    std::vector<std::vector<double>> rows;
    for (const auto& r : t.rows) {
        std::vector<double> v;
        for (const auto& c : r) v.push_back(std::stod(c));
        rows.push_back(v);
    }
    return rows;
}

}  // namespace

TEST(Cli, FitPbcReport) {
    const auto r = run({"fit", "--data", kPbc, "--response", "futime", "--covariates", "log_albumin", "--anchor", "age50",
                        "--censor", "death", "--risk-orientation"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    for (const char* key : {"theta_hat", "theta_mrce", "std_errors", "cov_hat", "wald_ci_95", "outer_iterations", "converged",
                            "objective_at_optimum", "input"})
        EXPECT_TRUE(j.contains(key)) << key;
    const double theta = j["theta_hat"][0];
    const double se = j["std_errors"][0];
    EXPECT_GT(theta, -4.79);
    EXPECT_LT(theta, -3.79);
    EXPECT_DOUBLE_EQ(j["cov_hat"][0].get<double>(), se * se);
    EXPECT_NEAR(j["wald_ci_95"][0][0].get<double>(), theta - 1.96 * se, 1e-12);
    EXPECT_NEAR(j["wald_ci_95"][0][1].get<double>(), theta + 1.96 * se, 1e-12);
    EXPECT_EQ(j["input"]["n"], 312);
    EXPECT_EQ(j["input"]["d"], 1);
    EXPECT_TRUE(j["converged"].get<bool>());
}

TEST(Cli, FitWritesFile) {
    TempDir dir;
    const auto out = dir.file("report.json");
    const auto r = run({"fit", "--data", kPbc, "--response", "futime", "--covariates", "log_albumin", "--anchor", "age50",
                        "--censor", "death", "--risk-orientation", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    EXPECT_TRUE(nlohmann::json::accept(slurp(out)));
}

TEST(Cli, TwoRowCsvGivesDegenerateReport) {
    TempDir dir;
    const auto path = dir.file("two.csv", "y,x,a\n2,1,1\n1,0,0\n");
    const auto r = run({"fit", "--data", path, "--response", "y", "--covariates", "x", "--anchor", "a"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["input"]["n"], 2);
    EXPECT_TRUE(j["std_errors"][0].is_null());
    EXPECT_FALSE(j["converged"].get<bool>());
    EXPECT_EQ(j["objective_at_optimum"].get<double>(), 0.5);
}

TEST(Cli, InputErrors) {
    TempDir dir;
    const auto good = dir.file("good.csv", "y,x,a\n2,1,1\n1,0,0\n3,2,1\n");
    auto missing = run({"fit", "--data", good, "--response", "y", "--covariates", "x", "--anchor", "age50"});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("age50"), std::string::npos);

    const auto bad = dir.file("bad.csv", "y,x,a\n2,1,1\n1,zz,0\n");
    auto cell = run({"fit", "--data", bad, "--response", "y", "--covariates", "x", "--anchor", "a"});
    EXPECT_EQ(cell.code, 1);
    EXPECT_NE(cell.err.find("line 3"), std::string::npos) << cell.err;
    EXPECT_NE(cell.err.find("'x'"), std::string::npos) << cell.err;

    const auto one = dir.file("one.csv", "y,x,a\n2,1,1\n");
    EXPECT_EQ(run({"fit", "--data", one, "--response", "y", "--covariates", "x", "--anchor", "a"}).code, 1);
    EXPECT_EQ(run({"fit", "--data", dir.file("absent.csv"), "--response", "y", "--covariates", "x", "--anchor", "a"}).code, 1);
    EXPECT_EQ(run({"fit", "--data", good, "--response", "y", "--anchor", "a"}).code, 1);
    EXPECT_EQ(run({"fit", "--data", good, "--response", "y", "--covariates", "x", "--anchor", "a", "--bogus"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"fit", "--data", good, "--response", "y", "--covariates", "x", "--anchor", "a", "--sigma-tol", "-1"}).code, 1);
    EXPECT_EQ(run({"fit", "--data", good, "--response", "y", "--covariates", "x", "--anchor", "a", "--max-iters", "abc"}).code, 1);
    EXPECT_EQ(run({"fit", "--data", good, "--response", "y", "--covariates", "x", "--anchor", "a", "--censor", "x"}).code, 1);
    EXPECT_EQ(run({"simulate", "--design", "IV", "--n", "50", "--reps", "1"}).code, 1);
    EXPECT_EQ(run({"simulate", "--design", "I", "--n", "5", "--reps", "1"}).code, 1);
    EXPECT_EQ(run({"simulate", "--design", "I", "--n", "50", "--reps", "0"}).code, 1);
    EXPECT_EQ(run({"simulate", "--design", "I", "--n", "50"}).code, 1);
}

TEST(Cli, DiagnosticsExitCode) {
    // Without the risk orientation the step maximum sits on an unbounded
    // plateau and the Hessian vanishes.
    EXPECT_EQ(run({"fit", "--data", kPbc, "--response", "futime", "--covariates", "albumin", "--anchor", "age50",
                   "--censor", "death"}).code,
              2);
    TempDir dir;
    const auto path = dir.file("flat.csv", "y,x,a\n1,1,0\n2,1,1\n3,1,2\n4,1,3\n");
    const auto r = run({"fit", "--data", path, "--response", "y", "--covariates", "x", "--anchor", "a"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("singular"), std::string::npos) << r.err;
    const auto capped = run({"fit", "--data", kPbc, "--response", "futime", "--covariates", "log_albumin", "--anchor",
                             "age50", "--censor", "death", "--risk-orientation", "--max-iters", "2"});
    EXPECT_EQ(capped.code, 2);
    EXPECT_TRUE(nlohmann::json::accept(capped.out));
}

TEST(Cli, LaterDuplicateFlagWins) {
    TempDir dir;
    const auto path = dir.file("d.csv", "y,x,a,b\n2,1,1,0\n1,0,0,1\n");
    const auto r = run({"fit", "--anchor", "b", "--data", path, "--response", "y", "--covariates", "x", "--anchor", "a"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("--anchor"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(r.out)["anchor"], "a");
    const auto reordered = run({"fit", "--covariates", "x", "--anchor", "a", "--response", "y", "--data", path});
    EXPECT_EQ(reordered.out, r.out);
}

TEST(Cli, SimulateSingleReplicationTable) {
    TempDir dir;
    const auto out = dir.file("table.txt");
    const auto r = run({"simulate", "--design", "III", "--n", "250", "--reps", "1", "--seed", "42", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string table = slurp(out);
    EXPECT_NE(table.find("SMRCE"), std::string::npos);
    EXPECT_NE(table.find("LS"), std::string::npos);
    std::vector<std::string> header;
    CsvTable csv = read_csv_string(slurp(out + ".csv"));
    ASSERT_EQ(csv.header[0], "estimator");
    ASSERT_EQ(csv.rows.size(), 6u);
    for (const auto& row : csv.rows) EXPECT_DOUBLE_EQ(std::stod(row[5]), std::abs(std::stod(row[4])));
    const auto j = nlohmann::json::parse(slurp(out + ".json"));
    EXPECT_EQ(j["reps"], 1);
    EXPECT_EQ(j["SMRCE"].size(), 2u);

    const auto again = dir.file("again.txt");
    ASSERT_EQ(run({"simulate", "--design", "III", "--n", "250", "--reps", "1", "--seed", "42", "--out", again}).code, 0);
    EXPECT_EQ(slurp(out), slurp(again));
    EXPECT_EQ(slurp(out + ".csv"), slurp(again + ".csv"));
    EXPECT_EQ(slurp(out + ".json"), slurp(again + ".json"));
}

TEST(Cli, SimulateToStdout) {
    const auto r = run({"simulate", "--design", "II", "--n", "60", "--reps", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("SPRCE"), std::string::npos);
    EXPECT_NE(r.out.find("PRCE"), std::string::npos);
}

TEST(Cli, TracePbc) {
    const auto r = run({"trace", "--data", kPbc, "--response", "futime", "--covariates", "log_albumin", "--anchor", "age50",
                        "--censor", "death", "--risk-orientation"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<std::string> header;
    const auto rows = parse_numeric_csv(r.out, header);
    ASSERT_EQ(header, (std::vector<std::string>{"theta", "q_original", "q_smoothed_first", "q_smoothed_final"}));
    ASSERT_EQ(rows.size(), 401u);
    std::set<double> distinct;
    for (const auto& row : rows) distinct.insert(row[1]);
    EXPECT_GT(distinct.size(), 1u);
    EXPECT_LT(distinct.size(), rows.size());
    const double step = 1.0 / (312.0 * 311.0);
    for (std::size_t g = 0; g + 2 < rows.size(); ++g) {
        const double a = rows[g + 1][3] - rows[g][3];
        const double b = rows[g + 2][3] - rows[g + 1][3];
        if ((a > 0) != (b > 0)) EXPECT_FALSE(std::abs(a) > step && std::abs(b) > step) << "at grid point " << g;
    }
}

TEST(Cli, TraceMatchesDirectEvaluation) {
    TempDir dir;
    const auto path = dir.file("small.csv", [] {
        const Dataset d = generate_design(DesignSpec::make(Design::I, 80), 3);
        std::ostringstream os;
        os << std::setprecision(17) << "y,x1,x2\n";
        for (Eigen::Index i = 0; i < d.n(); ++i) os << d.response()(i) << ',' << d.covariates()(i, 0) << ',' << d.covariates()(i, 1) << '\n';
        return os.str();
    }());
    const auto r = run({"trace", "--data", path, "--response", "y", "--covariates", "x1", "--anchor", "x2", "--grid-points", "7",
                        "--grid-span", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<std::string> header;
    const auto rows = parse_numeric_csv(r.out, header);
    ASSERT_EQ(rows.size(), 7u);
    const Dataset data = load_dataset(read_csv_file(path), ColumnSelection{"y", {"x1"}, "x2", {}});
    const EstimateResult fitted = fit(data);
    EXPECT_NEAR(rows[3][0], fitted.theta_hat[0], 1e-15);
    EXPECT_NEAR(rows[6][0] - rows[0][0], 6.0 * fitted.std_errors(0), 1e-12);
    for (const auto& row : rows) {
        const ParamVector theta{row[0]};
        EXPECT_EQ(row[1], step_objective(data, theta));
        EXPECT_EQ(row[2], smoothed_objective(data, theta, SmoothingMatrix(fitted.sigma_first)));
        EXPECT_EQ(row[3], smoothed_objective(data, theta, SmoothingMatrix(fitted.sigma_star)));
    }
    const auto single = run({"trace", "--data", path, "--response", "y", "--covariates", "x1", "--anchor", "x2", "--grid-points", "1"});
    ASSERT_EQ(single.code, 0);
    EXPECT_EQ(parse_numeric_csv(single.out, header).size(), 1u);
}

TEST(Cli, TraceRejectsMultivariate) {
    TempDir dir;
    const auto path = dir.file("multi.csv", "y,a,b,c\n1,0,1,2\n2,1,0,3\n3,2,2,1\n4,0,3,5\n");
    const auto r = run({"trace", "--data", path, "--response", "y", "--covariates", "a,b", "--anchor", "c"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("one free covariate"), std::string::npos);
}

TEST(Cli, Help) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("simulate"), std::string::npos);
}
