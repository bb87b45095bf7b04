#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <jumpdiff/experiment.hpp>

using namespace jumpdiff;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "jumpdiff_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json minimal_simulate_config(const std::string& out_dir) {
    json cfg;
    cfg["model"] = {{"name", "cir"}, {"params", json::object()}};
    cfg["experiment"] = {{"kind", "simulate"}, {"paths", 10}, {"dt", 0.05}, {"horizon", 1.0}};
    cfg["seed"] = 7;
    cfg["output_dir"] = out_dir;
    return cfg;
}

}  // namespace

TEST_CASE("run: minimal simulate config writes exactly three files and exits zero") {
    const auto dir = fresh_dir("smoke");
    const auto res = run_experiment(minimal_simulate_config(dir.string()));
    CHECK(res.exit_code == 0);
    CHECK(res.artifacts.size() == 3);  // manifest, paths.csv, summary
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "paths.csv"));
    CHECK(fs::exists(dir / "summary.txt"));
}

TEST_CASE("run: identical config and seed reproduce byte-identical CSV bodies") {
    const auto dir_a = fresh_dir("rerun_a");
    const auto dir_b = fresh_dir("rerun_b");
    json cfg = minimal_simulate_config(dir_a.string());
    (void)run_experiment(cfg);
    cfg["output_dir"] = dir_b.string();
    (void)run_experiment(cfg);
    CHECK(slurp(dir_a / "paths.csv") == slurp(dir_b / "paths.csv"));
    CHECK(slurp(dir_a / "summary.txt") == slurp(dir_b / "summary.txt"));

    // a different seed changes the artifact
    cfg["seed"] = 8;
    const auto dir_c = fresh_dir("rerun_c");
    cfg["output_dir"] = dir_c.string();
    (void)run_experiment(cfg);
    CHECK(slurp(dir_a / "paths.csv") != slurp(dir_c / "paths.csv"));
}

TEST_CASE("run: unknown kinds, models and keys are rejected") {
    json cfg = minimal_simulate_config(fresh_dir("rejects").string());
    cfg["experiment"]["kind"] = "warp";
    CHECK_THROWS_AS((void)run_experiment(cfg), ModelError);
    cfg = minimal_simulate_config(fresh_dir("rejects2").string());
    cfg["model"]["name"] = "heston";
    CHECK_THROWS_AS((void)run_experiment(cfg), ModelError);
    cfg = minimal_simulate_config(fresh_dir("rejects3").string());
    cfg["experiment"]["typo_key"] = 1;
    CHECK_THROWS_AS((void)run_experiment(cfg), ModelError);
    cfg = minimal_simulate_config(fresh_dir("rejects4").string());
    cfg["model"]["params"]["not_a_param"] = 1;
    CHECK_THROWS_AS((void)run_experiment(cfg), ModelError);
}

TEST_CASE("run: equilibrium with a too-short horizon fails its declared check with exit 2") {
    const auto dir = fresh_dir("equilibrium_short");
    json cfg;
    cfg["model"] = {{"name", "cir"}, {"params", json::object()}};
    cfg["experiment"] = {{"kind", "equilibrium"},
                         {"t_list", json::array({0.5, 1.0})},
                         {"paths", 1500},
                         {"dt", 0.02},
                         {"start", 1.2},
                         {"second_start", 1.0},
                         {"dict_size", 8},
                         {"bootstrap", 40},
                         {"check_monotone", true},
                         {"reference",
                          {{"chains", 40}, {"burn_in", 10.0}, {"spacing", 0.5}, {"n_samples", 4000}, {"start", 1.0}}}};
    cfg["seed"] = 5;
    cfg["output_dir"] = dir.string();
    const auto res = run_experiment(cfg);
    CHECK(res.exit_code == 2);
    const std::string summary = slurp(dir / "summary.txt");
    CHECK(summary.find("check tv_monotone: FAIL") != std::string::npos);
}

TEST_CASE("run: minorize writes a certificate and its soundness check passes") {
    const auto dir = fresh_dir("minorize");
    json cfg;
    cfg["model"] = {{"name", "cir"},
                    {"params", {{"sigma", 0.4}, {"jump_scale", 2.0}, {"reversion", 2.0}, {"drift_level", 2.0}}}};
    cfg["experiment"] = {{"kind", "minorize"},
                         {"level", 1},
                         {"seeds",
                          {{"state_center", 1.8}, {"mark_center", 1.5}, {"state_radius", 0.6}, {"mark_radius", 1.49}}}};
    cfg["seed"] = 3;
    cfg["output_dir"] = dir.string();
    const auto res = run_experiment(cfg);
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir / "certificate.csv"));
}

TEST_CASE("plots: pseudotrajectory artifacts produce the tidy gap curve") {
    const auto dir = fresh_dir("plots_pseudo");
    {
        GapCurve curve;
        curve.estimator_id = "dictionary_paired";
        curve.points.push_back({2.0, 0.11, 0.10, 0.12});
        curve.points.push_back({8.0, 0.01, 0.008, 0.012});
        curve.write_csv((dir / "pseudo_gaps.csv").string());
    }
    const auto written = emit_plot_data(dir.string());
    REQUIRE(written.size() == 1);
    std::ifstream in(written.front());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,gap,ci_lo,ci_hi");
    std::string row;
    std::getline(in, row);
    CHECK(row == "2,0.11,0.1,0.12");
}

TEST_CASE("plots: coupling artifacts produce a nonincreasing survival curve") {
    const auto dir = fresh_dir("plots_tau");
    {
        CsvWriter w((dir / "tau.csv").string());
        w.header({"pair", "tau_c", "censored"});
        const double taus[] = {4.0, 1.0, 9.0, 2.5, 6.0};
        for (int i = 0; i < 5; ++i)
            w.row_strings({std::to_string(i), format_double(taus[i]), "0"});
        w.row_strings({"5", "", "1"});
    }
    const auto written = emit_plot_data(dir.string());
    std::ifstream in(written.front());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,survival");
    double prev_t = -1.0, prev_s = 2.0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const double t = std::stod(line.substr(0, comma));
        const double s = std::stod(line.substr(comma + 1));
        CHECK(t >= prev_t);
        CHECK(s <= prev_s);
        prev_t = t;
        prev_s = s;
    }
    CHECK(prev_s == doctest::Approx(1.0 / 6.0));  // censored pair stays in the tail
}

TEST_CASE("plots: an empty directory is an error") {
    const auto dir = fresh_dir("plots_empty");
    CHECK_THROWS_AS((void)emit_plot_data(dir.string()), ModelError);
}

TEST_CASE("run: lyapunov experiment honors the expected-verdict check") {
    const auto dir = fresh_dir("lyapunov");
    json cfg;
    cfg["model"] = {{"name", "cir"}, {"params", json::object()}};
    cfg["experiment"] = {{"kind", "lyapunov"}, {"grid_lo", -6.0}, {"grid_hi", 8.0}, {"grid_points", 41},
                         {"compact_radius", 3.0}, {"expect_verified", true}};
    cfg["seed"] = 2;
    cfg["output_dir"] = dir.string();
    const auto res = run_experiment(cfg);
    CHECK(res.exit_code == 0);
}
