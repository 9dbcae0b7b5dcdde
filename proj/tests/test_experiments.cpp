#include "cascade_lab/errors.hpp"
#include "cascade_lab/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace cascade_lab;
using io::Json;

namespace {

ExperimentConfig stable_config()
{
    ExperimentConfig cfg;
    cfg.distribution = TypeDistribution({{1.0, 1.0, Threshold{0}, 1.0, 0.2}, {1.0, 1.0, Threshold{1}, 1.0, 0.8}});
    cfg.n_values = {2000};
    cfg.replications = 4;
    cfg.master_seed = 31;
    cfg.threads = 1;
    return cfg;
}

// W = 3 and C in {0, 2}: f dips after its first descent and comes back up. At the seed mass
// where the dip just touches zero the first root is tangent; slightly below it the first root
// sits next to a region where the derivative functional exceeds 1.
TypeDistribution tangent_family(double p)
{
    return TypeDistribution({{3.0, 3.0, Threshold{0}, 1.0, p}, {3.0, 3.0, Threshold{2}, 1.0, 1 - p}});
}

TypeDistribution near_tangent_law()
{
    auto dip = [](double p) {
        const auto d = tangent_family(p);
        double lowest = 1.0;
        for (double z = 0.001; z < 1.0; z += 0.001)
            lowest = std::min(lowest, f_eval(d, z));
        return lowest;
    };
    double lo = 0.0, hi = 0.3;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (dip(mid) > 0 ? hi : lo) = mid;
    }
    return tangent_family(lo * (1 - 1e-4));
}

} // namespace

TEST_CASE("config validation and parsing")
{
    auto cfg = stable_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = stable_config();
    cfg.n_values.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    const auto j = Json::parse(R"({
        "distribution": {"atoms": [{"w_minus":1,"w_plus":1,"threshold":0,"prob":1}]},
        "n_values": [10, 20], "replications": 3, "master_seed": 5, "engine": "both",
        "outputs": {"dir": "out"}, "classify_grid": {"z_min": 0.001}})");
    const auto parsed = experiment_config_from_json(j);
    CHECK(parsed.n_values == std::vector<std::size_t>{10, 20});
    CHECK(parsed.engine == Engine::Both);
    CHECK(parsed.output_dir == std::optional<std::filesystem::path>("out"));
    CHECK(parsed.classify_grid.z_min == 0.001);

    auto bad = j;
    bad["replication"] = 3;
    CHECK_THROWS_WITH_AS(experiment_config_from_json(bad), doctest::Contains("replication"), ConfigError);
    bad = j;
    bad["engine"] = "parallel";
    CHECK_THROWS_AS(experiment_config_from_json(bad), ConfigError);
}

TEST_CASE("replication seeds are distinct and stable")
{
    CHECK(replication_seed(1, 100, 0) == replication_seed(1, 100, 0));
    CHECK(replication_seed(1, 100, 0) != replication_seed(1, 100, 1));
    CHECK(replication_seed(1, 100, 0) != replication_seed(1, 200, 0));
    CHECK(replication_seed(1, 100, 0) != replication_seed(2, 100, 0));
}

TEST_CASE("summary statistics")
{
    const auto s = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    const double se = std::sqrt((1.5 * 1.5 * 2 + 0.5 * 0.5 * 2) / 3.0 / 4.0);
    CHECK(s.standard_error == doctest::Approx(se));
    CHECK(s.ci_lo == doctest::Approx(2.5 - 1.96 * se));
    CHECK(s.ci_hi == doctest::Approx(2.5 + 1.96 * se));
    CHECK(std::isnan(summarize({1.0}).standard_error));
}

TEST_CASE("reports are deterministic and independent of the thread count")
{
    auto cfg = stable_config();
    const auto a = run_experiment(cfg);
    cfg.threads = 3;
    const auto b = run_experiment(cfg);
    REQUIRE(a.rows.size() == 4);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].seed == b.rows[i].seed);
        CHECK(a.rows[i].final_fraction == b.rows[i].final_fraction);
        CHECK(a.rows[i].edge_count == b.rows[i].edge_count);
        CHECK(a.rows[i].replication == i);
    }
    CHECK(a.failures() == 0);
    REQUIRE(a.theory.fixed_point);
    CHECK(a.aggregates[0].deviation);
    CHECK(std::fabs(a.aggregates[0].fraction.mean - a.theory.fixed_point->g_at_z_hat) < 0.03);

    cfg.record_timing = false;
    cfg.threads = 1;
    const auto c = run_experiment(cfg);
    cfg.threads = 2;
    CHECK(experiment_report_to_json(c) == experiment_report_to_json(run_experiment(cfg)));
}

TEST_CASE("engine both checks agreement")
{
    auto cfg = stable_config();
    cfg.engine = Engine::Both;
    for (const auto& row : run_experiment(cfg).rows) {
        REQUIRE(row.engines_agree);
        CHECK(*row.engines_agree);
    }
}

TEST_CASE("failing replications are isolated and reported")
{
    // 200000 weight levels: at n = 10^5 the sample has far more distinct in-weights than the
    // sequential engine accepts, while n = 1000 stays within the limit. Immune atoms keep the
    // theory side cheap.
    std::vector<Atom> atoms{{1.0, 1.0, Threshold{0}, 1.0, 5e-6}};
    for (int i = 1; i < 200000; ++i)
        atoms.push_back({1.0 + i * 1e-5, 1.0, Threshold::infinity(), 1.0, 5e-6});
    auto cfg = stable_config();
    cfg.distribution = TypeDistribution::normalized(std::move(atoms));
    cfg.engine = Engine::Sequential;
    cfg.n_values = {1000, 100000};
    cfg.replications = 1;
    const auto report = run_experiment(cfg);
    CHECK(report.failures() == 1);
    CHECK_FALSE(report.rows[0].error);
    REQUIRE(report.rows[1].error);
    CHECK(report.rows[1].error->find("finitary") != std::string::npos);
    CHECK(report.aggregates[1].completed == 0);
    CHECK(experiment_report_to_json(report)["failures"] == 1);
}

TEST_CASE("persistence names files by seed and config hash")
{
    const auto dir = std::filesystem::temp_directory_path() / "cascade_lab_test_persist";
    std::filesystem::remove_all(dir);
    auto cfg = stable_config();
    cfg.replications = 2;
    const auto report = run_experiment(cfg);
    const auto paths = persist_report(report, dir);
    CHECK(paths.json.filename().string() == "experiment_31_" + report.config_hash + ".json");
    CHECK(std::filesystem::exists(paths.csv));
    std::ifstream csv(paths.csv);
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("n,replication,seed,final_fraction", 0) == 0);
    std::ifstream json(paths.json);
    CHECK(Json::parse(json)["config_hash"] == report.config_hash);
    std::filesystem::remove_all(dir);

    cfg.master_seed = 32;
    CHECK(config_hash(cfg) != report.config_hash);
}

TEST_CASE("degree validation")
{
    ExperimentConfig cfg;
    cfg.distribution = TypeDistribution({{1.0, 1.0, Threshold{1}, 1.0, 1.0}});
    cfg.n_values = {1000, 10000};
    cfg.replications = 2;
    cfg.master_seed = 4;
    const auto report = degree_validation(cfg, std::nullopt);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[1].distance.mean < 0.05);
    CHECK(report.decreasing);

    const TypeDistribution wrong({{3.0, 3.0, Threshold{1}, 1.0, 1.0}});
    cfg.n_values = {10000};
    CHECK(degree_validation(cfg, wrong).rows[0].distance.mean > 0.2);
}

TEST_CASE("convergence table")
{
    auto cfg = stable_config();
    cfg.n_values = {1000, 10000, 100000};
    cfg.replications = 6;
    const auto table = convergence_table(cfg);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.stable);
    CHECK(table.banner.empty());
    CHECK(table.shrinking);
    for (const auto& r : table.rows)
        CHECK(r.mean_relevance == r.mean_fraction);

    ExperimentConfig none;
    none.distribution = TypeDistribution({{1.0, 1.0, Threshold{1}, 1.0, 1.0}});
    none.n_values = {100};
    none.threads = 1;
    CHECK_THROWS_AS(convergence_table(none), PreconditionError);
}

TEST_CASE("unstable laws get a banner instead of a claim")
{
    ExperimentConfig cfg;
    cfg.distribution = near_tangent_law();
    cfg.n_values = {500};
    cfg.replications = 2;
    cfg.threads = 1;
    const auto table = convergence_table(cfg);
    CHECK_FALSE(table.stable);
    CHECK_FALSE(table.banner.empty());
    REQUIRE(table.rows.size() == 1);
}
