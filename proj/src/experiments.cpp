#include "cascade_lab/experiments.hpp"

#include "cascade_lab/cascade.hpp"
#include "cascade_lab/errors.hpp"
#include "cascade_lab/graph.hpp"
#include "cascade_lab/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace cascade_lab {

namespace {

constexpr std::uint64_t kSequenceStream = 1;
constexpr std::uint64_t kMarkStream = 2;
constexpr std::uint64_t kGraphStream = 3;
constexpr std::uint64_t kExposureStream = 4;
constexpr std::uint64_t kDegreeStream = 0xDE6;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

io::Json nullable(const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); }

io::Json summary_to_json(const Summary& s)
{
    return io::Json{{"mean", s.mean}, {"se", s.standard_error}, {"ci", io::Json::array({s.ci_lo, s.ci_hi})}};
}

template <typename Task>
void parallel_for(std::size_t count, std::size_t threads, Task&& task)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
            task(i);
    };
    if (threads == 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back(worker);
}

} // namespace

std::string_view engine_name(Engine e) noexcept
{
    switch (e) {
    case Engine::Rounds:
        return "rounds";
    case Engine::Sequential:
        return "sequential";
    case Engine::Both:
        break;
    }
    return "both";
}

Engine engine_from_name(std::string_view name)
{
    if (name == "rounds")
        return Engine::Rounds;
    if (name == "sequential")
        return Engine::Sequential;
    if (name == "both")
        return Engine::Both;
    throw ConfigError("engine: expected \"rounds\", \"sequential\" or \"both\", got \"" + std::string(name) + "\"");
}

void ExperimentConfig::validate() const
{
    if (n_values.empty())
        throw ConfigError("n_values: must not be empty");
    for (const auto n : n_values)
        if (n < 2)
            throw ConfigError("n_values: every n must be at least 2");
    if (replications == 0)
        throw ConfigError("replications: must be at least 1");
    if (ex_post_p && !(*ex_post_p >= 0.0 && *ex_post_p <= 1.0))
        throw ConfigError("ex_post_p: must lie in [0, 1]");
    if (!(tolerance > 0.0))
        throw ConfigError("tolerance: must be positive");
}

std::size_t default_thread_count()
{
    if (const char* env = std::getenv("CASCADE_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<std::size_t>(v);
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

ExperimentConfig experiment_config_from_json(const io::Json& j)
{
    io::require_known_keys(j,
                           {"distribution", "n_values", "replications", "master_seed", "ex_post_p", "engine",
                            "outputs", "record_timing", "threads", "tolerance", "classify_grid"},
                           "config");
    ExperimentConfig cfg;
    if (!j.contains("distribution"))
        throw ConfigError("config.distribution: missing");
    cfg.distribution_source = j.at("distribution");
    cfg.distribution = io::distribution_from_json(cfg.distribution_source);

    auto unsigned_at = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number_unsigned())
            throw ConfigError(std::string("config.") + key + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    };
    if (!j.contains("n_values") || !j.at("n_values").is_array())
        throw ConfigError("config.n_values: missing or not an array");
    for (const auto& v : j.at("n_values")) {
        if (!v.is_number_unsigned())
            throw ConfigError("config.n_values: entries must be non-negative integers");
        cfg.n_values.push_back(v.get<std::size_t>());
    }
    if (j.contains("replications"))
        cfg.replications = unsigned_at("replications");
    if (j.contains("master_seed"))
        cfg.master_seed = unsigned_at("master_seed");
    if (j.contains("threads"))
        cfg.threads = unsigned_at("threads");
    if (j.contains("ex_post_p") && !j.at("ex_post_p").is_null()) {
        if (!j.at("ex_post_p").is_number())
            throw ConfigError("config.ex_post_p: expected a number");
        cfg.ex_post_p = j.at("ex_post_p").get<double>();
    }
    if (j.contains("engine")) {
        if (!j.at("engine").is_string())
            throw ConfigError("config.engine: expected a string");
        cfg.engine = engine_from_name(j.at("engine").get<std::string>());
    }
    if (j.contains("outputs")) {
        const auto& o = j.at("outputs");
        io::require_known_keys(o, {"dir"}, "config.outputs");
        if (o.contains("dir")) {
            if (!o.at("dir").is_string())
                throw ConfigError("config.outputs.dir: expected a string");
            cfg.output_dir = o.at("dir").get<std::string>();
        }
    }
    if (j.contains("record_timing")) {
        if (!j.at("record_timing").is_boolean())
            throw ConfigError("config.record_timing: expected a boolean");
        cfg.record_timing = j.at("record_timing").get<bool>();
    }
    if (j.contains("tolerance")) {
        if (!j.at("tolerance").is_number())
            throw ConfigError("config.tolerance: expected a number");
        cfg.tolerance = j.at("tolerance").get<double>();
    }
    if (j.contains("classify_grid")) {
        const auto& g = j.at("classify_grid");
        io::require_known_keys(g, {"z_min", "z_max", "points"}, "config.classify_grid");
        if (g.contains("z_min"))
            cfg.classify_grid.z_min = g.at("z_min").get<double>();
        if (g.contains("z_max"))
            cfg.classify_grid.z_max = g.at("z_max").get<double>();
        if (g.contains("points"))
            cfg.classify_grid.points = g.at("points").get<std::size_t>();
    }
    cfg.validate();
    return cfg;
}

io::Json experiment_config_to_json(const ExperimentConfig& cfg)
{
    io::Json j;
    j["distribution"] = cfg.distribution_source.is_null() ? io::distribution_to_json(cfg.distribution)
                                                          : cfg.distribution_source;
    j["n_values"] = cfg.n_values;
    j["replications"] = cfg.replications;
    j["master_seed"] = cfg.master_seed;
    j["ex_post_p"] = nullable(cfg.ex_post_p);
    j["engine"] = std::string(engine_name(cfg.engine));
    j["tolerance"] = cfg.tolerance;
    j["classify_grid"] = io::Json{
        {"z_min", cfg.classify_grid.z_min}, {"z_max", cfg.classify_grid.z_max}, {"points", cfg.classify_grid.points}};
    return j;
}

std::string config_hash(const ExperimentConfig& cfg)
{
    const std::string text = experiment_config_to_json(cfg).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, std::size_t r) noexcept
{
    return derive_seed(master_seed, n, r);
}

Summary summarize(const std::vector<double>& values)
{
    Summary s;
    if (values.empty()) {
        s.mean = s.standard_error = s.ci_lo = s.ci_hi = nan();
        return s;
    }
    double sum = 0.0;
    for (const double v : values)
        sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
        s.standard_error = nan();
        s.ci_lo = s.ci_hi = nan();
        return s;
    }
    double ss = 0.0;
    for (const double v : values)
        ss += (v - s.mean) * (v - s.mean);
    const double variance = ss / static_cast<double>(values.size() - 1);
    s.standard_error = std::sqrt(variance / static_cast<double>(values.size()));
    s.ci_lo = s.mean - 1.96 * s.standard_error;
    s.ci_hi = s.mean + 1.96 * s.standard_error;
    return s;
}

std::size_t ExperimentReport::failures() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ReplicationRow& r) { return r.error.has_value(); }));
}

namespace {

TheorySummary compute_theory(const ExperimentConfig& cfg)
{
    TheorySummary theory;
    const auto& base = cfg.distribution;
    theory.edges_per_vertex = base.lambda_minus() * base.lambda_plus();
    const TypeDistribution effective = cfg.ex_post_p ? with_ex_post_infection(base, *cfg.ex_post_p) : base;
    if (effective.zero_threshold_mass() > 0.0)
        theory.fixed_point = solve_fixed_point(effective, cfg.tolerance);
    if (base.zero_threshold_mass() == 0.0) {
        theory.verdict = classify_resilience(base, cfg.classify_grid);
        if (theory.verdict->classification == Resilience::NonResilient && theory.verdict->z0_estimate > 0.0) {
            const double z0 = theory.verdict->z0_estimate;
            theory.small_seed_lower_bound = predicted_lower_bound_small_seed(base, z0);
            const double mean_r = base.mean_relevance();
            if (mean_r > 0.0)
                theory.small_seed_relevance_bound = predicted_relevance_lower_bound_small_seed(base, z0) / mean_r;
        }
    }
    return theory;
}

ReplicationRow run_replication(const ExperimentConfig& cfg, std::size_t n, std::size_t r)
{
    ReplicationRow row;
    row.n = n;
    row.replication = r;
    row.seed = replication_seed(cfg.master_seed, n, r);
    const auto start = std::chrono::steady_clock::now();

    VertexSequence seq = sample_sequence(cfg.distribution, n, derive_seed(row.seed, kSequenceStream));
    if (cfg.ex_post_p)
        seq = apply_ex_post_infection(seq, *cfg.ex_post_p, derive_seed(row.seed, kMarkStream));
    const Digraph g = generate_fast(seq, derive_seed(row.seed, kGraphStream));
    row.edge_count = g.edge_count();

    CascadeResult result;
    if (cfg.engine == Engine::Sequential || cfg.engine == Engine::Both) {
        SequentialOptions options;
        options.trace_stride = 0;
        auto [seq_result, trace] = percolate_sequential(g, seq, derive_seed(row.seed, kExposureStream), options);
        if (cfg.engine == Engine::Both) {
            result = percolate_rounds(g, seq);
            row.engines_agree = result.final_infected == seq_result.final_infected;
        } else {
            result = std::move(seq_result);
        }
    } else {
        result = percolate_rounds(g, seq);
    }
    row.final_fraction = result.final_fraction();
    row.relevance_loss = result.relevance_loss_fraction;
    row.rounds = result.rounds;
    if (cfg.record_timing)
        row.runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return row;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;
    report.config_hash = config_hash(cfg);
    report.theory = compute_theory(cfg);

    std::vector<std::size_t> sizes = cfg.n_values;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    const std::size_t total = sizes.size() * cfg.replications;
    report.rows.resize(total);
    const std::size_t threads = cfg.threads != 0 ? cfg.threads : default_thread_count();
    parallel_for(total, threads, [&](std::size_t index) {
        const std::size_t n = sizes[index / cfg.replications];
        const std::size_t r = index % cfg.replications;
        try {
            report.rows[index] = run_replication(cfg, n, r);
        } catch (const std::exception& e) {
            ReplicationRow failed;
            failed.n = n;
            failed.replication = r;
            failed.seed = replication_seed(cfg.master_seed, n, r);
            failed.error = e.what();
            report.rows[index] = std::move(failed);
        }
    });

    for (std::size_t s = 0; s < sizes.size(); ++s) {
        std::vector<double> fractions;
        std::vector<double> relevances;
        std::vector<double> edges;
        for (std::size_t r = 0; r < cfg.replications; ++r) {
            const auto& row = report.rows[s * cfg.replications + r];
            if (row.error)
                continue;
            fractions.push_back(row.final_fraction);
            if (row.relevance_loss)
                relevances.push_back(*row.relevance_loss);
            edges.push_back(static_cast<double>(row.edge_count) / static_cast<double>(row.n));
        }
        SizeAggregate agg;
        agg.n = sizes[s];
        agg.completed = fractions.size();
        agg.fraction = summarize(fractions);
        agg.relevance = summarize(relevances);
        agg.edges_per_vertex = summarize(edges);
        if (report.theory.fixed_point && !fractions.empty())
            agg.deviation = std::fabs(agg.fraction.mean - report.theory.fixed_point->g_at_z_hat);
        report.aggregates.push_back(agg);
    }
    return report;
}

io::Json experiment_report_to_json(const ExperimentReport& report)
{
    io::Json theory;
    theory["edges_per_vertex"] = report.theory.edges_per_vertex;
    theory["fixed_point"] =
        report.theory.fixed_point ? io::fixed_point_report_to_json(*report.theory.fixed_point) : io::Json(nullptr);
    if (report.theory.verdict) {
        auto v = io::resilience_verdict_to_json(*report.theory.verdict);
        v.erase("evidence");
        theory["verdict"] = std::move(v);
    } else {
        theory["verdict"] = nullptr;
    }
    theory["small_seed_lower_bound"] = nullable(report.theory.small_seed_lower_bound);
    theory["small_seed_relevance_bound"] = nullable(report.theory.small_seed_relevance_bound);
    theory["z0_source"] = "classify_resilience z0_estimate";

    io::Json aggregates = io::Json::array();
    for (const auto& a : report.aggregates) {
        aggregates.push_back(io::Json{{"n", a.n},
                                      {"completed", a.completed},
                                      {"fraction", summary_to_json(a.fraction)},
                                      {"relevance_loss", summary_to_json(a.relevance)},
                                      {"edges_per_vertex", summary_to_json(a.edges_per_vertex)},
                                      {"deviation", nullable(a.deviation)}});
    }
    io::Json rows = io::Json::array();
    for (const auto& r : report.rows) {
        io::Json row{{"n", r.n},
                     {"replication", r.replication},
                     {"seed", r.seed},
                     {"final_fraction", r.final_fraction},
                     {"relevance_loss", nullable(r.relevance_loss)},
                     {"edge_count", r.edge_count},
                     {"rounds", r.rounds},
                     {"runtime_ms", r.runtime_ms}};
        row["engines_agree"] = r.engines_agree ? io::Json(*r.engines_agree) : io::Json(nullptr);
        row["error"] = r.error ? io::Json(*r.error) : io::Json(nullptr);
        rows.push_back(std::move(row));
    }
    return io::Json{{"config", experiment_config_to_json(report.config)},
                    {"config_hash", report.config_hash},
                    {"failures", report.failures()},
                    {"theory", std::move(theory)},
                    {"aggregates", std::move(aggregates)},
                    {"rows", std::move(rows)}};
}

void write_experiment_rows_csv(std::ostream& out, const ExperimentReport& report)
{
    out << "n,replication,seed,final_fraction,relevance_loss,edge_count,rounds,runtime_ms,engines_agree,error\n";
    out << std::setprecision(17);
    for (const auto& r : report.rows) {
        out << r.n << ',' << r.replication << ',' << r.seed << ',' << r.final_fraction << ',';
        if (r.relevance_loss)
            out << *r.relevance_loss;
        out << ',' << r.edge_count << ',' << r.rounds << ',' << r.runtime_ms << ',';
        if (r.engines_agree)
            out << (*r.engines_agree ? "true" : "false");
        out << ',';
        if (r.error) {
            std::string quoted = *r.error;
            std::replace(quoted.begin(), quoted.end(), '"', '\'');
            out << '"' << quoted << '"';
        }
        out << '\n';
    }
}

PersistedPaths persist_report(const ExperimentReport& report, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    const std::string stem =
        "experiment_" + std::to_string(report.config.master_seed) + "_" + report.config_hash;
    PersistedPaths paths{dir / (stem + ".json"), dir / (stem + ".csv")};

    std::ofstream json(paths.json);
    if (!json)
        throw std::runtime_error("cannot write " + paths.json.string());
    json << experiment_report_to_json(report).dump(2) << '\n';
    if (!json)
        throw std::runtime_error("write failed for " + paths.json.string());

    std::ofstream csv(paths.csv);
    if (!csv)
        throw std::runtime_error("cannot write " + paths.csv.string());
    write_experiment_rows_csv(csv, report);
    if (!csv)
        throw std::runtime_error("write failed for " + paths.csv.string());
    return paths;
}

DegreeValidationReport degree_validation(const ExperimentConfig& cfg, const std::optional<TypeDistribution>& reference)
{
    cfg.validate();
    const TypeDistribution& target = reference ? *reference : cfg.distribution;
    const std::uint32_t k_max = suggest_degree_cutoff(target, 1e-8);

    std::vector<std::size_t> sizes = cfg.n_values;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    const std::uint64_t master = derive_seed(cfg.master_seed, kDegreeStream);
    const std::size_t total = sizes.size() * cfg.replications;
    std::vector<double> distances(total, 0.0);
    const std::size_t threads = cfg.threads != 0 ? cfg.threads : default_thread_count();
    parallel_for(total, threads, [&](std::size_t index) {
        const std::size_t n = sizes[index / cfg.replications];
        const std::uint64_t seed = replication_seed(master, n, index % cfg.replications);
        const auto seq = sample_sequence(cfg.distribution, n, derive_seed(seed, kSequenceStream));
        const auto g = generate_fast(seq, derive_seed(seed, kGraphStream));
        distances[index] = degree_law_distance(g, target, k_max);
    });

    DegreeValidationReport report;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        std::vector<double> values(distances.begin() + static_cast<std::ptrdiff_t>(s * cfg.replications),
                                   distances.begin() + static_cast<std::ptrdiff_t>((s + 1) * cfg.replications));
        report.rows.push_back(DegreeValidationRow{sizes[s], k_max, summarize(values)});
    }
    report.decreasing = true;
    for (std::size_t s = 1; s < report.rows.size(); ++s)
        if (!(report.rows[s].distance.mean < report.rows[s - 1].distance.mean))
            report.decreasing = false;
    return report;
}

io::Json degree_validation_to_json(const DegreeValidationReport& report)
{
    io::Json rows = io::Json::array();
    for (const auto& r : report.rows)
        rows.push_back(io::Json{{"n", r.n}, {"k_max", r.k_max}, {"distance", summary_to_json(r.distance)}});
    return io::Json{{"rows", std::move(rows)}, {"decreasing", report.decreasing}};
}

ConvergenceTable convergence_table(const ExperimentReport& report)
{
    if (!report.theory.fixed_point)
        throw PreconditionError("convergence table needs a fixed point; the law has no initially infected mass");
    const auto& fp = *report.theory.fixed_point;
    ConvergenceTable table;
    table.stable = fp.stable && !fp.grid_failure;
    if (!table.stable)
        table.banner = "stable=false: the derivative functional reaches 1 near z_hat; no convergence claim is made";
    for (const auto& a : report.aggregates) {
        table.rows.push_back(ConvergenceRow{a.n, a.fraction.mean, a.fraction.standard_error, fp.g_at_z_hat,
                                            std::fabs(a.fraction.mean - fp.g_at_z_hat), a.relevance.mean});
    }
    table.shrinking = true;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        const auto& prev = table.rows[i - 1];
        const auto& cur = table.rows[i];
        const double noise = 2.0 * std::max(std::isnan(prev.standard_error) ? 0.0 : prev.standard_error,
                                            std::isnan(cur.standard_error) ? 0.0 : cur.standard_error);
        if (cur.abs_deviation > prev.abs_deviation + noise)
            table.shrinking = false;
    }
    return table;
}

ConvergenceTable convergence_table(const ExperimentConfig& cfg) { return convergence_table(run_experiment(cfg)); }

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table)
{
    if (!table.banner.empty())
        out << "# " << table.banner << '\n';
    out << "n,mean_fraction,se,g_z_hat,abs_delta,mean_relevance\n" << std::setprecision(12);
    for (const auto& r : table.rows)
        out << r.n << ',' << r.mean_fraction << ',' << r.standard_error << ',' << r.predicted << ','
            << r.abs_deviation << ',' << r.mean_relevance << '\n';
}

} // namespace cascade_lab
