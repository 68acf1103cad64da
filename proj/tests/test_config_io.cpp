#include "harvest/config.hpp"
#include "harvest/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace harvest;
namespace fs = std::filesystem;

namespace {

nlohmann::json smoke_json() {
    std::ifstream in(std::string(HARVEST_TEST_DATA_DIR) + "/smoke.json");
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    return j;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("harvest_io_" + std::to_string(std::rand()) + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("configuration parsing and resolution") {
    RunConfig cfg = parse_config(smoke_json());
    CHECK(cfg.model.num_regimes == 2);
    CHECK(cfg.model.econ.q() == 1.0);
    CHECK(cfg.model.control.control_set.size() == 6);
    CHECK(cfg.grid_h == 0.02);
    CHECK(cfg.upper_auto);

    resolve_upper(cfg);
    CHECK(cfg.upper == 2.0); // ceil of the drift-domination root
    ensure_valid(cfg);

    CHECK(cfg.starts.size() == 1);
    CHECK(cfg.starts[0].first == 1.0);
    CHECK(cfg.starts[0].second == 0); // regimes are 1-based in files
    CHECK(cfg.sweeps.size() == 1);
    CHECK(cfg.sweeps[0].intensities.size() == 3);
}

TEST_CASE("unknown or malformed keys are rejected") {
    nlohmann::json j = smoke_json();
    SUBCASE("top level") {
        j["extra_section"] = 1;
        CHECK_THROWS_AS(parse_config(j), config_error);
    }
    SUBCASE("nested") {
        j["solver"]["tolerance"] = 1e-6; // must be 'tol'
        CHECK_THROWS_AS(parse_config(j), config_error);
    }
    SUBCASE("missing required section") {
        j.erase("economics");
        CHECK_THROWS_AS(parse_config(j), config_error);
    }
    SUBCASE("bad generator shape") {
        j["model"]["generator"] = {{-1.0, 1.0}};
        CHECK_THROWS_AS(parse_config(j), config_error);
    }
    SUBCASE("invalid model surfaces as a violation list") {
        j["economics"]["a1"] = -1.0;
        RunConfig cfg = parse_config(j);
        cfg.upper = 2.0;
        cfg.upper_auto = false;
        CHECK_THROWS_AS(ensure_valid(cfg), config_error);
    }
}

TEST_CASE("value and policy tables round-trip through CSV") {
    const HarvestModel m = testsup::mixed_control_instance();
    const Grid g = build_grid(0.2, 2.0, 0.05);
    const TransitionKernel k = build_kernel(m, g);
    const SolveResult res = solve(m, g, k, {});
    TempDir tmp;

    const std::string value_path = (tmp.path / "value.csv").string();
    const std::string policy_path = (tmp.path / "policy.csv").string();
    io::write_value_csv(value_path, g, res.value, res.policy);
    io::write_policy_csv(policy_path, g, res.policy);

    const io::ValuePolicyTable full = io::read_table_csv(value_path, g, 2);
    REQUIRE(full.has_value);
    CHECK(sup_distance(full.value, res.value) <= 1e-10); // 12 significant digits
    const io::ValuePolicyTable pol = io::read_table_csv(policy_path, g, 2);
    CHECK_FALSE(pol.has_value);
    for (std::size_t i = g.live_begin(); i < g.size(); ++i)
        for (std::size_t a = 0; a < 2; ++a) {
            CHECK(pol.policy.step_at(i, a) == res.policy.step_at(i, a));
            CHECK(pol.policy.control_at(i, a) == res.policy.control_at(i, a));
            CHECK(full.policy.step_at(i, a) == res.policy.step_at(i, a));
        }

    SUBCASE("a mismatched grid is rejected") {
        const Grid other = build_grid(0.2, 2.0, 0.04);
        CHECK_THROWS_WITH_AS(static_cast<void>(io::read_table_csv(value_path, other, 2)),
                             doctest::Contains("not on the configured grid"),
                             std::runtime_error);
    }
    SUBCASE("a truncated table is rejected") {
        std::ifstream in(value_path);
        std::string all, line;
        int n = 0;
        while (std::getline(in, line))
            if (n++ < 20) all += line + "\n";
        const std::string cut_path = (tmp.path / "cut.csv").string();
        std::ofstream(cut_path) << all;
        CHECK_THROWS_WITH_AS(static_cast<void>(io::read_table_csv(cut_path, g, 2)),
                             doctest::Contains("grid mismatch"), std::runtime_error);
    }
}

TEST_CASE("csv number formatting carries 12 significant digits") {
    CHECK(io::num(1.0 / 3.0) == "0.333333333333");
    CHECK(io::num(2.0) == "2");
    CHECK(io::num(1e-9) == "1e-09");
}

TEST_CASE("kernel dump covers diffusion and impulse rows") {
    const HarvestModel m = testsup::impulse_only_instance();
    const Grid g = build_grid(0.2, 2.0, 0.1);
    const TransitionKernel k = build_kernel(m, g);
    TempDir tmp;
    const std::string path = (tmp.path / "kernel.csv").string();
    io::write_kernel_csv(path, m, g, k );

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,alpha,step,c,target_x,target_alpha,prob,dt");
    std::size_t rows = 0, impulse_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto f = io::detail::split_csv_line(line);
        REQUIRE(f.size() == 8);
        const int step = std::stoi(f[2]);
        if (step != 0) {
            ++impulse_rows;
            CHECK(std::stod(f[7]) == 0.0); // impulse steps take no time
            CHECK(std::stod(f[6]) == 1.0);
        }
    }
    CHECK(rows > 0);
    CHECK(impulse_rows > 0);
}

TEST_CASE("manifest echoes the configuration and resolution") {
    RunConfig cfg = parse_config(smoke_json());
    resolve_upper(cfg);
    const Grid g = build_grid(cfg.model.econ.lambda_floor, cfg.upper, cfg.grid_h);
    const nlohmann::json m = make_manifest(cfg, "solve", g, 0.0);
    CHECK(m["artifact_version"] == kVersion);
    CHECK(m["resolved"]["upper"] == 2.0);
    CHECK(m["resolved"]["upper_auto"] == true);
    CHECK(m["config"]["economics"]["lambda"] == 0.2);
}
