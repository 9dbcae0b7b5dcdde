#pragma once

#include "cascade_lab/cascade.hpp"
#include "cascade_lab/graph.hpp"
#include "cascade_lab/theory.hpp"
#include "cascade_lab/vertex_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace cascade_lab::io {

using Json = nlohmann::ordered_json;

/// Reads and parses a JSON file; ConfigError names the path on failure.
Json read_json_file(const std::filesystem::path& path);

Json threshold_to_json(Threshold t);
/// Accepts a non-negative integer or the string "inf". `where` prefixes error messages.
Threshold threshold_from_json(const Json& j, const std::string& where);

/// {"atoms":[{"w_minus","w_plus","threshold","relevance","prob"}...], "w0"}
Json distribution_to_json(const TypeDistribution& dist);
/// Accepts the atom form above, or {"power_law": {"beta", "n_atoms", "w_max", "threshold", "relevance"}}.
TypeDistribution distribution_from_json(const Json& j);

Json power_law_spec_to_json(const PowerLawSpec& spec);
PowerLawSpec power_law_spec_from_json(const Json& j);

/// {"w0": .., "vertices": [[w_minus, w_plus, threshold, relevance, mark], ...]}
Json sequence_to_json(const VertexSequence& seq);
VertexSequence sequence_from_json(const Json& j);

/// "# n=<n> m=<m> seed=<seed>" then one "src dst" line per edge, LF-terminated.
void write_edge_list(std::ostream& out, const Digraph& g, std::uint64_t seed);

struct EdgeListFile {
    Digraph graph;
    std::optional<std::uint64_t> seed;
};
EdgeListFile read_edge_list(std::istream& in);

Json cascade_result_to_json(const CascadeResult& r, std::optional<std::uint64_t> seed);

/// Columns t,u,w,bucket_id,count; one row per bucket per stored snapshot.
void write_exposure_trace_csv(std::ostream& out, const ExposureTrace& trace);

Json fixed_point_report_to_json(const FixedPointReport& r);
Json resilience_verdict_to_json(const ResilienceVerdict& v);
/// Columns z,f,derivative_functional.
void write_evidence_csv(std::ostream& out, const ResilienceVerdict& v);

/// Rejects keys of `j` outside `allowed` with a ConfigError naming the key.
void require_known_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where);

} // namespace cascade_lab::io
