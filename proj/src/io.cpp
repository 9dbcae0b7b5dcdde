#include "cascade_lab/io.hpp"

#include "cascade_lab/errors.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cascade_lab::io {

namespace {

double number_at(const Json& j, const char* key, const std::string& where)
{
    if (!j.contains(key))
        throw ConfigError(where + "." + key + ": missing");
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

double number_or(const Json& j, const char* key, double fallback, const std::string& where)
{
    return j.contains(key) ? number_at(j, key, where) : fallback;
}

std::uint64_t count_at(const Json& j, const char* key, const std::string& where)
{
    if (!j.contains(key))
        throw ConfigError(where + "." + key + ": missing");
    const auto& v = j.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError(where + "." + key + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

} // namespace

void require_known_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(where + "." + item.key() + ": unknown key");
    }
}

Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json threshold_to_json(Threshold t)
{
    if (t.is_infinite())
        return "inf";
    return t.value();
}

Threshold threshold_from_json(const Json& j, const std::string& where)
{
    if (j.is_string()) {
        if (j.get<std::string>() == "inf")
            return Threshold::infinity();
        throw ConfigError(where + ": threshold string must be \"inf\"");
    }
    if (!j.is_number_unsigned() || j.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max())
        throw ConfigError(where + ": threshold must be a non-negative integer or \"inf\"");
    return Threshold{j.get<std::uint32_t>()};
}

Json distribution_to_json(const TypeDistribution& dist)
{
    Json atoms = Json::array();
    for (const auto& a : dist.atoms()) {
        atoms.push_back(Json{{"w_minus", a.w_minus},
                             {"w_plus", a.w_plus},
                             {"threshold", threshold_to_json(a.threshold)},
                             {"relevance", a.relevance},
                             {"prob", a.prob}});
    }
    return Json{{"atoms", std::move(atoms)}, {"w0", dist.w0()}};
}

Json power_law_spec_to_json(const PowerLawSpec& spec)
{
    Json threshold = std::visit(
        [](const auto& rule) -> Json {
            using R = std::decay_t<decltype(rule)>;
            if constexpr (std::is_same_v<R, threshold_rule::Constant>)
                return Json{{"constant", threshold_to_json(rule.value)}};
            else if constexpr (std::is_same_v<R, threshold_rule::UniformFromZero>)
                return "uniform_from_zero";
            else
                return "uniform_from_one";
        },
        spec.threshold);
    return Json{{"beta", spec.beta},
                {"n_atoms", spec.n_atoms},
                {"w_max", spec.w_max},
                {"threshold", std::move(threshold)},
                {"relevance", spec.relevance == RelevanceRule::InWeight ? "in_weight" : "unit"}};
}

PowerLawSpec power_law_spec_from_json(const Json& j)
{
    const std::string where = "power_law";
    require_known_keys(j, {"beta", "n_atoms", "w_max", "threshold", "relevance"}, where);
    PowerLawSpec spec;
    spec.beta = number_at(j, "beta", where);
    spec.n_atoms = j.contains("n_atoms") ? count_at(j, "n_atoms", where) : spec.n_atoms;
    spec.w_max = number_or(j, "w_max", spec.w_max, where);
    if (j.contains("threshold")) {
        const auto& t = j.at("threshold");
        if (t.is_object()) {
            require_known_keys(t, {"constant"}, where + ".threshold");
            if (!t.contains("constant"))
                throw ConfigError(where + ".threshold.constant: missing");
            spec.threshold = threshold_rule::Constant{threshold_from_json(t.at("constant"), where + ".threshold.constant")};
        } else if (t == "uniform_from_zero") {
            spec.threshold = threshold_rule::UniformFromZero{};
        } else if (t == "uniform_from_one") {
            spec.threshold = threshold_rule::UniformFromOne{};
        } else {
            throw ConfigError(where + ".threshold: expected {\"constant\": c}, \"uniform_from_zero\" or "
                                      "\"uniform_from_one\"");
        }
    }
    if (j.contains("relevance")) {
        const auto& r = j.at("relevance");
        if (r == "unit")
            spec.relevance = RelevanceRule::Unit;
        else if (r == "in_weight")
            spec.relevance = RelevanceRule::InWeight;
        else
            throw ConfigError(where + ".relevance: expected \"unit\" or \"in_weight\"");
    }
    return spec;
}

TypeDistribution distribution_from_json(const Json& j)
{
    if (!j.is_object())
        throw ConfigError("distribution: expected an object");
    if (j.contains("power_law")) {
        require_known_keys(j, {"power_law"}, "distribution");
        try {
            return make_power_law_distribution(power_law_spec_from_json(j.at("power_law")));
        } catch (const DomainError& e) {
            throw ConfigError(std::string("power_law: ") + e.what());
        }
    }
    require_known_keys(j, {"atoms", "w0"}, "distribution");
    if (!j.contains("atoms") || !j.at("atoms").is_array())
        throw ConfigError("distribution.atoms: missing or not an array");
    const double w0 = number_or(j, "w0", kDefaultWeightFloor, "distribution");
    std::vector<Atom> atoms;
    const auto& list = j.at("atoms");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto where = "atoms[" + std::to_string(i) + "]";
        const auto& a = list.at(i);
        require_known_keys(a, {"w_minus", "w_plus", "threshold", "relevance", "prob"}, where);
        if (!a.contains("threshold"))
            throw ConfigError(where + ".threshold: missing");
        atoms.push_back(Atom{number_at(a, "w_minus", where), number_at(a, "w_plus", where),
                             threshold_from_json(a.at("threshold"), where + ".threshold"),
                             number_or(a, "relevance", 1.0, where), number_at(a, "prob", where)});
    }
    return TypeDistribution(std::move(atoms), w0);
}

Json sequence_to_json(const VertexSequence& seq)
{
    Json vertices = Json::array();
    for (const auto& v : seq.types)
        vertices.push_back(Json::array({v.w_minus, v.w_plus, threshold_to_json(v.threshold), v.relevance, v.mark ? 1 : 0}));
    return Json{{"w0", seq.w0}, {"vertices", std::move(vertices)}};
}

VertexSequence sequence_from_json(const Json& j)
{
    require_known_keys(j, {"w0", "vertices"}, "sequence");
    if (!j.contains("vertices") || !j.at("vertices").is_array())
        throw ConfigError("sequence.vertices: missing or not an array");
    VertexSequence seq;
    seq.w0 = number_or(j, "w0", kDefaultWeightFloor, "sequence");
    const auto& list = j.at("vertices");
    seq.types.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto where = "sequence.vertices[" + std::to_string(i) + "]";
        const auto& v = list.at(i);
        if (!v.is_array() || v.size() != 5 || !v[0].is_number() || !v[1].is_number() || !v[3].is_number() ||
            !v[4].is_number_integer())
            throw ConfigError(where + ": expected [w_minus, w_plus, threshold, relevance, mark]");
        const auto mark = v[4].get<int>();
        if (mark != 0 && mark != 1)
            throw ConfigError(where + ": mark must be 0 or 1");
        seq.types.push_back(VertexType{v[0].get<double>(), v[1].get<double>(), threshold_from_json(v[2], where),
                                       v[3].get<double>(), mark == 1});
    }
    try {
        seq.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("sequence: ") + e.what());
    }
    return seq;
}

void write_edge_list(std::ostream& out, const Digraph& g, std::uint64_t seed)
{
    out << "# n=" << g.size() << " m=" << g.edge_count() << " seed=" << seed << '\n';
    std::string line;
    for (VertexId v = 0; v < g.size(); ++v) {
        for (const VertexId t : g.out_neighbors(v)) {
            line.clear();
            line += std::to_string(v);
            line += ' ';
            line += std::to_string(t);
            line += '\n';
            out << line;
        }
    }
}

EdgeListFile read_edge_list(std::istream& in)
{
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ", 0) != 0)
        throw ConfigError("edge list: missing \"# n=<n> m=<m> seed=<seed>\" header");
    std::optional<std::uint64_t> n;
    std::optional<std::uint64_t> m;
    std::optional<std::uint64_t> seed;
    std::istringstream fields(header.substr(2));
    std::string field;
    while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw ConfigError("edge list header: malformed field \"" + field + "\"");
        const auto key = field.substr(0, eq);
        std::uint64_t value = 0;
        try {
            std::size_t used = 0;
            value = std::stoull(field.substr(eq + 1), &used);
            if (used != field.size() - eq - 1)
                throw std::invalid_argument(field);
        } catch (const std::exception&) {
            throw ConfigError("edge list header: " + key + " is not a non-negative integer");
        }
        if (key == "n")
            n = value;
        else if (key == "m")
            m = value;
        else if (key == "seed")
            seed = value;
        else
            throw ConfigError("edge list header: unknown field " + key);
    }
    if (!n)
        throw ConfigError("edge list header: n missing");

    std::vector<std::pair<VertexId, VertexId>> edges;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::uint64_t a = 0;
        std::uint64_t b = 0;
        std::string rest;
        if (!(ls >> a >> b) || (ls >> rest))
            throw ConfigError("edge list line " + std::to_string(line_no) + ": expected \"src dst\"");
        if (a >= *n || b >= *n)
            throw ConfigError("edge list line " + std::to_string(line_no) + ": vertex index out of range");
        edges.emplace_back(static_cast<VertexId>(a), static_cast<VertexId>(b));
    }
    if (m && *m != edges.size())
        throw ConfigError("edge list: header declares m=" + std::to_string(*m) + " but " +
                          std::to_string(edges.size()) + " edges follow");
    try {
        return EdgeListFile{Digraph::from_edges(*n, edges), seed};
    } catch (const DomainError& e) {
        throw ConfigError(std::string("edge list: ") + e.what());
    }
}

Json cascade_result_to_json(const CascadeResult& r, std::optional<std::uint64_t> seed)
{
    Json j{{"n", r.final_infected.size()},
           {"final_count", r.final_count()},
           {"rounds", r.rounds},
           {"per_round", r.per_round_sizes}};
    j["relevance_loss"] = r.relevance_loss_fraction ? Json(*r.relevance_loss_fraction) : Json(nullptr);
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    return j;
}

void write_exposure_trace_csv(std::ostream& out, const ExposureTrace& trace)
{
    out << "t,u,w,bucket_id,count\n";
    out << std::setprecision(17);
    for (const auto& s : trace.snapshots) {
        for (std::size_t b = 0; b < s.bucket_counts.size(); ++b)
            out << s.t << ',' << s.unexposed << ',' << s.unexposed_out_weight << ',' << b << ',' << s.bucket_counts[b]
                << '\n';
    }
}

Json fixed_point_report_to_json(const FixedPointReport& r)
{
    return Json{{"z_hat", r.z_hat},
                {"f_at_z_hat", r.f_at_z_hat},
                {"g_at_z_hat", r.g_at_z_hat},
                {"relevance_prediction", r.relevance_prediction},
                {"relevance_fraction_prediction", r.relevance_fraction_prediction},
                {"stability_value", r.stability_value},
                {"stable", r.stable},
                {"delta", r.delta},
                {"bracket", Json::array({r.bracket_lo, r.bracket_hi})},
                {"tolerance", r.tolerance},
                {"grid_failure", r.grid_failure}};
}

Json resilience_verdict_to_json(const ResilienceVerdict& v)
{
    Json evidence = Json::array();
    for (const auto& e : v.evidence)
        evidence.push_back(Json::array({e.z, e.f, e.derivative}));
    return Json{{"classification", std::string(resilience_name(v.classification))},
                {"z0_estimate", v.z0_estimate},
                {"truncation_scale", v.truncation_scale},
                {"grid", Json{{"z_min", v.grid.z_min}, {"z_max", v.grid.z_max}, {"points", v.grid.points}}},
                {"evidence", std::move(evidence)}};
}

void write_evidence_csv(std::ostream& out, const ResilienceVerdict& v)
{
    out << "z,f,derivative_functional\n" << std::setprecision(17);
    for (const auto& e : v.evidence)
        out << e.z << ',' << e.f << ',' << e.derivative << '\n';
}

} // namespace cascade_lab::io
