#include "cli.hpp"

#include <json.hpp>
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cascade_lab::cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string data(const char* name) { return std::string(DATA_DIR) + "/" + name; }

fs::path scratch()
{
    const auto dir = fs::temp_directory_path() / "cascade_lab_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const std::string& name, const std::string& text)
{
    const auto path = scratch() / name;
    std::ofstream(path) << text;
    return path.string();
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("help output matches the golden files")
{
    const bool update = std::getenv("CASCADE_LAB_UPDATE_GOLDEN") != nullptr;
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases{
        {"main", {"--help"}},
        {"solve", {"solve", "--help"}},
        {"classify", {"classify", "--help"}},
        {"generate", {"generate", "--help"}},
        {"percolate", {"percolate", "--help"}},
        {"experiment", {"experiment", "--help"}},
        {"degree-check", {"degree-check", "--help"}},
    };
    for (const auto& [name, args] : cases) {
        const auto r = run(args);
        CHECK(r.code == 0);
        const fs::path golden = fs::path(GOLDEN_DIR) / (name + "_help.txt");
        if (update)
            std::ofstream(golden) << r.out;
        CHECK_MESSAGE(r.out == slurp(golden), name);
    }
}

TEST_CASE("solve on the stable example")
{
    const auto r = run({"solve", "--dist", data("stable_example.json")});
    REQUIRE(r.code == 0);
    const auto j = Json::parse(r.out);
    CHECK(j["z_hat"].get<double>() == doctest::Approx(0.5284).epsilon(1e-3));
    CHECK(j["stable"] == true);
}

TEST_CASE("solve exit codes")
{
    const auto all = write_file("all_seeded.json", R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":0,"prob":1}]})");
    const auto r = run({"solve", "--dist", all});
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out)["g_at_z_hat"] == 1.0);

    const auto none = run({"solve", "--dist", data("power_law_2_5.json")});
    CHECK(none.code == 3);
    CHECK(none.out.empty());
    CHECK(none.err.find("classify") != std::string::npos);

    const auto typo =
        write_file("typo.json", R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":0,"probability":1}]})");
    const auto bad = run({"solve", "--dist", typo});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("probability") != std::string::npos);

    const auto broken = write_file("broken.json", "{\"atoms\": [");
    CHECK(run({"solve", "--dist", broken}).code == 2);
    CHECK(run({"solve"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("classify")
{
    const auto heavy = run({"classify", "--dist", data("power_law_2_5.json"), "--zmin", "1e-3"});
    REQUIRE(heavy.code == 0);
    CHECK(Json::parse(heavy.out)["classification"] == "NON_RESILIENT");

    const auto light = run({"classify", "--dist", data("power_law_3_5.json")});
    REQUIRE(light.code == 0);
    CHECK(Json::parse(light.out)["classification"] == "RESILIENT");

    const auto csv = (scratch() / "evidence.csv").string();
    const auto mixed = run({"classify", "--dist", data("power_law_2_5.json"), "--grid-csv", csv});
    REQUIRE(mixed.code == 0);
    const auto j = Json::parse(mixed.out);
    CHECK(j["classification"] == "INCONCLUSIVE");
    CHECK(j["grid_csv"] == csv);
    CHECK(slurp(csv).rfind("z,f,derivative_functional\n", 0) == 0);

    CHECK(run({"classify", "--dist", data("stable_example.json")}).code == 3);
}

TEST_CASE("generate then percolate")
{
    const auto edges = (scratch() / "edges.txt").string();
    const auto seq = (scratch() / "seq.json").string();
    const auto g = run({"generate", "--n", "1000", "--dist", data("stable_example.json"), "--seed", "7", "--out", edges,
                        "--sequence-out", seq});
    REQUIRE(g.code == 0);
    CHECK(slurp(edges).rfind("# n=1000 ", 0) == 0);

    const auto to_stdout = run({"generate", "--n", "1000", "--dist", data("stable_example.json"), "--seed", "7"});
    CHECK(to_stdout.out == slurp(edges));

    const auto p = run({"percolate", "--edges", edges, "--sequence", seq, "--engine", "both", "--seed", "3"});
    REQUIRE(p.code == 0);
    CHECK(Json::parse(p.out)["engines_agree"] == true);
    CHECK(p.err.find("engines agree: true") != std::string::npos);

    const auto trace = (scratch() / "trace.csv").string();
    const auto s = run({"percolate", "--edges", edges, "--sequence", seq, "--engine", "sequential", "--trace", trace});
    REQUIRE(s.code == 0);
    CHECK(Json::parse(s.out)["final_count"] == Json::parse(p.out)["final_count"]);
    CHECK(slurp(trace).rfind("t,u,w,bucket_id,count\n", 0) == 0);

    CHECK(run({"percolate", "--edges", edges, "--sequence", seq, "--engine", "quantum"}).code == 2);
    const auto short_seq = run({"generate", "--n", "10", "--dist", data("stable_example.json"), "--out",
                                (scratch() / "e10.txt").string(), "--sequence-out", (scratch() / "s10.json").string()});
    REQUIRE(short_seq.code == 0);
    CHECK(run({"percolate", "--edges", edges, "--sequence", (scratch() / "s10.json").string()}).code == 2);
}

TEST_CASE("experiment honors overrides and is deterministic")
{
    const auto out_dir = (scratch() / "exp").string();
    fs::remove_all(out_dir);
    const std::vector<std::string> args{"experiment", "--config", data("stable_experiment.json"), "--n", "2000",
                                        "--replications", "3", "--seed", "99", "--threads", "1", "--out", out_dir};
    const auto a = run(args);
    REQUIRE(a.code == 0);
    const auto j = Json::parse(a.out);
    CHECK(j["config"]["master_seed"] == 99);
    CHECK(j["rows"].size() == 3);
    const double mean = j["aggregates"][0]["fraction"]["mean"].get<double>();
    const double z_hat = j["theory"]["fixed_point"]["g_at_z_hat"].get<double>();
    CHECK(std::fabs(mean - z_hat) < 0.05);

    const auto b = run(args);
    auto strip = [](Json x) {
        for (auto& row : x["rows"])
            row.erase("runtime_ms");
        return x;
    };
    CHECK(strip(Json::parse(b.out)) == strip(j));
    CHECK(fs::exists(fs::path(out_dir) / ("experiment_99_" + j["config_hash"].get<std::string>() + ".csv")));

    CHECK(run({"experiment", "--config", data("stable_experiment.json"), "--engine", "fast"}).code == 2);
}

TEST_CASE("degree-check")
{
    const auto cfg = write_file("degree.json", R"({
        "distribution": {"atoms": [{"w_minus":1,"w_plus":1,"threshold":1,"prob":1}]},
        "n_values": [1000, 10000], "replications": 2, "master_seed": 1})");
    const auto r = run({"degree-check", "--config", cfg, "--threads", "1"});
    REQUIRE(r.code == 0);
    const auto j = Json::parse(r.out);
    CHECK(j["decreasing"] == true);
    CHECK(j["rows"][1]["distance"]["mean"].get<double>() < 0.05);
}
