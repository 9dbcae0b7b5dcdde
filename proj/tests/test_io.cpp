#include "cascade_lab/errors.hpp"
#include "cascade_lab/io.hpp"

#include <doctest.h>

#include <sstream>
#include <string>

using namespace cascade_lab;
using io::Json;

namespace {

std::string config_error(const Json& j)
{
    try {
        (void)io::distribution_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("distribution round trip")
{
    const TypeDistribution d({{1.0, 2.0, Threshold{0}, 0.5, 0.25}, {3.0, 1.0, Threshold::infinity(), 1.0, 0.75}});
    const auto j = io::distribution_to_json(d);
    CHECK(j["atoms"][1]["threshold"] == "inf");
    const auto back = io::distribution_from_json(j);
    CHECK(total_variation(back, d) == 0.0);
    CHECK(back.atoms()[0].relevance == 0.5);
}

TEST_CASE("distribution defaults and diagnostics")
{
    const auto d = io::distribution_from_json(
        Json::parse(R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":2,"prob":1}]})"));
    CHECK(d.atoms()[0].relevance == 1.0);
    CHECK(d.w0() == 1.0);

    CHECK(config_error(Json::parse(R"({"atoms":[{"w_minus":1,"w_plus":1,"threshhold":2,"prob":1}]})"))
              .find("threshhold") != std::string::npos);
    CHECK(config_error(Json::parse(R"({"atoms":[{"w_plus":1,"threshold":2,"prob":1}]})")).find("w_minus") !=
          std::string::npos);
    CHECK(config_error(Json::parse(R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":-2,"prob":1}]})"))
              .find("threshold") != std::string::npos);
    CHECK(config_error(Json::parse(R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":"infinite","prob":1}]})"))
              .find("inf") != std::string::npos);
    CHECK(config_error(Json::parse(R"({"atom":[]})")).find("atom") != std::string::npos);
    CHECK_FALSE(config_error(Json::parse(R"({"atoms":[{"w_minus":1,"w_plus":1,"threshold":1,"prob":0.5}]})")).empty());
}

TEST_CASE("power-law form")
{
    const auto j = Json::parse(
        R"({"power_law":{"beta":3.5,"n_atoms":100,"w_max":50,"threshold":{"constant":3},"relevance":"in_weight"}})");
    const auto d = io::distribution_from_json(j);
    CHECK(d.size() == 100);
    CHECK(d.atoms()[0].threshold == Threshold{3});
    CHECK(d.atoms()[7].relevance == d.atoms()[7].w_minus);

    const auto spec = io::power_law_spec_from_json(j["power_law"]);
    CHECK(io::power_law_spec_to_json(spec) == j["power_law"]);

    CHECK(config_error(Json::parse(R"({"power_law":{"beta":3.5,"threshold":"sometimes"}})")).find("threshold") !=
          std::string::npos);
}

TEST_CASE("sequence round trip")
{
    VertexSequence seq;
    seq.types = {{1.0, 2.0, Threshold{0}, 1.0, true}, {1.5, 1.0, Threshold::infinity(), 0.0, false}};
    const auto back = io::sequence_from_json(io::sequence_to_json(seq));
    CHECK(back.types == seq.types);
    CHECK(back.w0 == seq.w0);
    CHECK_THROWS_AS(io::sequence_from_json(Json::parse(R"({"vertices":[[1,1,0,1]]})")), ConfigError);
}

TEST_CASE("edge list format")
{
    const std::vector<std::pair<VertexId, VertexId>> edges{{0, 1}, {2, 0}};
    const auto g = Digraph::from_edges(3, edges);
    std::ostringstream out;
    io::write_edge_list(out, g, 7);
    CHECK(out.str() == "# n=3 m=2 seed=7\n0 1\n2 0\n");

    std::istringstream in(out.str());
    const auto back = io::read_edge_list(in);
    CHECK(back.graph == g);
    REQUIRE(back.seed);
    CHECK(*back.seed == 7);

    std::istringstream headless("0 1\n");
    CHECK_THROWS_AS(io::read_edge_list(headless), ConfigError);
    std::istringstream miscount("# n=3 m=5 seed=1\n0 1\n");
    CHECK_THROWS_AS(io::read_edge_list(miscount), ConfigError);
    std::istringstream loop("# n=3 m=1 seed=1\n1 1\n");
    CHECK_THROWS(io::read_edge_list(loop));
}

TEST_CASE("result serializations")
{
    CascadeResult r;
    r.final_infected = {true, false};
    r.per_round_sizes = {1, 1};
    r.rounds = 1;
    r.relevance_loss_fraction = 0.5;
    const auto j = io::cascade_result_to_json(r, 9);
    CHECK(j["final_count"] == 1);
    CHECK(j["per_round"] == Json::array({1, 1}));
    CHECK(j["seed"] == 9);

    ResilienceVerdict v;
    v.classification = Resilience::NonResilient;
    v.evidence = {{0.1, 0.2, 0.3}};
    CHECK(io::resilience_verdict_to_json(v)["classification"] == "NON_RESILIENT");
    std::ostringstream csv;
    io::write_evidence_csv(csv, v);
    CHECK(csv.str().rfind("z,f,derivative_functional\n", 0) == 0);

    FixedPointReport fp;
    fp.z_hat = 0.5;
    CHECK(io::fixed_point_report_to_json(fp)["z_hat"] == 0.5);
}

TEST_CASE("exposure trace CSV header")
{
    ExposureTrace trace;
    trace.buckets = {BucketKey{0, 0, 1, 0}};
    trace.snapshots = {ExposureSnapshot{0, 2, 2.0, 0, {5}}};
    std::ostringstream out;
    io::write_exposure_trace_csv(out, trace);
    CHECK(out.str() == "t,u,w,bucket_id,count\n0,2,2,0,5\n");
}
