#include "cli.hpp"

#include "cascade_lab/errors.hpp"
#include "cascade_lab/experiments.hpp"
#include "cascade_lab/graph.hpp"
#include "cascade_lab/io.hpp"
#include "cascade_lab/rng.hpp"
#include "cascade_lab/theory.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

namespace cascade_lab::cli {

namespace {

// Sub-seed streams shared with the experiment harness, so `generate --seed s` reproduces the
// graph of a replication whose derived seed is s.
constexpr std::uint64_t kSequenceStream = 1;
constexpr std::uint64_t kMarkStream = 2;
constexpr std::uint64_t kGraphStream = 3;
constexpr std::uint64_t kExposureStream = 4;

std::ofstream open_output(const std::string& path)
{
    std::ofstream file(path);
    if (!file)
        throw std::runtime_error("cannot open " + path + " for writing");
    return file;
}

TypeDistribution load_distribution(const std::string& path)
{
    const auto j = io::read_json_file(path);
    try {
        return io::distribution_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

struct SolveArgs {
    std::string dist;
    double tol = 1e-10;
};

struct ClassifyArgs {
    std::string dist;
    ZGrid grid;
    std::string grid_csv;
};

struct GenerateArgs {
    std::string dist;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double ex_post_p = 0.0;
    std::string out;
    std::string sequence_out;
};

struct PercolateArgs {
    std::string edges;
    std::string sequence;
    std::string engine = "rounds";
    std::uint64_t seed = 0;
    std::string trace;
    std::size_t trace_stride = 1;
};

struct ExperimentArgs {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::size_t> n_values;
    std::size_t replications = 0;
    std::size_t threads = 0;
    std::string engine;
    double ex_post_p = 0.0;
    std::string convergence_csv;
    std::string reference_dist;
};

int solve(const SolveArgs& a, std::ostream& out, std::ostream& err)
{
    const auto dist = load_distribution(a.dist);
    if (dist.zero_threshold_mass() == 0.0) {
        err << "error: P(C=0) = 0, so z = 0 is a root and there is no initial infection to propagate; "
               "use `cascade_lab classify` for resilience\n";
        return Precondition;
    }
    const auto report = solve_fixed_point(dist, a.tol);
    if (report.grid_failure)
        err << "warning: no sign change of f found on the scan grid; z_hat set to E[W+]\n";
    if (!report.stable)
        err << "warning: derivative functional reaches 1 near z_hat (stable=false); no convergence claim\n";
    out << io::fixed_point_report_to_json(report).dump(2) << '\n';
    return Ok;
}

int classify(const ClassifyArgs& a, std::ostream& out, std::ostream& err)
{
    const auto dist = load_distribution(a.dist);
    if (dist.zero_threshold_mass() > 0.0) {
        err << "error: P(C=0) > 0; resilience is defined without initial infections, use `cascade_lab solve`\n";
        return Precondition;
    }
    const auto verdict = classify_resilience(dist, a.grid);
    auto j = io::resilience_verdict_to_json(verdict);
    j.erase("evidence");
    std::string csv_path = a.grid_csv;
    if (csv_path.empty() && verdict.classification == Resilience::Inconclusive)
        csv_path = "classify_evidence.csv";
    if (!csv_path.empty()) {
        auto file = open_output(csv_path);
        io::write_evidence_csv(file, verdict);
        err << "evidence grid written to " << csv_path << '\n';
    }
    j["grid_csv"] = csv_path.empty() ? io::Json(nullptr) : io::Json(csv_path);
    if (a.grid.z_min < verdict.truncation_scale)
        err << "note: grid starts below the truncation scale " << verdict.truncation_scale
            << "; f there reflects the largest weight, not the tail exponent\n";
    out << j.dump(2) << '\n';
    return Ok;
}

int generate(const GenerateArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.n < 2)
        throw ConfigError("--n: must be at least 2");
    if (!(a.ex_post_p >= 0.0 && a.ex_post_p <= 1.0))
        throw ConfigError("--ex-post-p: must lie in [0, 1]");
    const auto dist = load_distribution(a.dist);
    auto seq = sample_sequence(dist, a.n, derive_seed(a.seed, kSequenceStream));
    if (a.ex_post_p > 0.0)
        seq = apply_ex_post_infection(seq, a.ex_post_p, derive_seed(a.seed, kMarkStream));
    const auto g = generate_fast(seq, derive_seed(a.seed, kGraphStream));
    if (!a.sequence_out.empty()) {
        auto file = open_output(a.sequence_out);
        file << io::sequence_to_json(seq).dump() << '\n';
    }
    if (a.out.empty()) {
        io::write_edge_list(out, g, a.seed);
    } else {
        auto file = open_output(a.out);
        io::write_edge_list(file, g, a.seed);
        out << io::Json{{"n", g.size()},
                        {"m", g.edge_count()},
                        {"seed", a.seed},
                        {"edges", a.out},
                        {"sequence", a.sequence_out.empty() ? io::Json(nullptr) : io::Json(a.sequence_out)}}
                   .dump(2)
            << '\n';
    }
    err << "generated n=" << g.size() << " m=" << g.edge_count() << '\n';
    return Ok;
}

int percolate(const PercolateArgs& a, std::ostream& out, std::ostream& err)
{
    const Engine engine = engine_from_name(a.engine);
    std::ifstream edges(a.edges);
    if (!edges)
        throw ConfigError("--edges: cannot open " + a.edges);
    io::EdgeListFile file;
    try {
        file = io::read_edge_list(edges);
    } catch (const std::exception& e) {
        throw ConfigError(a.edges + ": " + e.what());
    }
    const auto seq = io::sequence_from_json(io::read_json_file(a.sequence));
    if (seq.size() != file.graph.size())
        throw ConfigError("--sequence: " + std::to_string(seq.size()) + " vertices but the edge list has " +
                          std::to_string(file.graph.size()));

    std::optional<CascadeResult> rounds;
    std::optional<CascadeResult> sequential;
    if (engine != Engine::Sequential)
        rounds = percolate_rounds(file.graph, seq);
    if (engine != Engine::Rounds) {
        SequentialOptions options;
        options.trace_stride = a.trace.empty() ? 0 : a.trace_stride;
        auto [result, trace] = percolate_sequential(file.graph, seq, derive_seed(a.seed, kExposureStream), options);
        if (!a.trace.empty()) {
            auto csv = open_output(a.trace);
            io::write_exposure_trace_csv(csv, trace);
        }
        sequential = std::move(result);
    }
    const CascadeResult& primary = rounds ? *rounds : *sequential;
    auto j = io::cascade_result_to_json(primary, a.seed);
    j["engine"] = std::string(engine_name(engine));
    if (engine == Engine::Both) {
        const bool agree = rounds->final_infected == sequential->final_infected;
        j["engines_agree"] = agree;
        err << "engines agree: " << (agree ? "true" : "false") << '\n';
        out << j.dump(2) << '\n';
        return agree ? Ok : Runtime;
    }
    out << j.dump(2) << '\n';
    return Ok;
}

bool given(const CLI::App& sub, const std::string& name)
{
    const auto* option = sub.get_option_no_throw(name);
    return option != nullptr && option->count() > 0;
}

ExperimentConfig load_experiment(const ExperimentArgs& a, const CLI::App& sub)
{
    auto cfg = experiment_config_from_json(io::read_json_file(a.config));
    if (given(sub, "--seed"))
        cfg.master_seed = a.seed;
    if (given(sub, "--out"))
        cfg.output_dir = a.out;
    if (given(sub, "--n"))
        cfg.n_values = a.n_values;
    if (given(sub, "--replications"))
        cfg.replications = a.replications;
    if (given(sub, "--threads"))
        cfg.threads = a.threads;
    if (given(sub, "--engine"))
        cfg.engine = engine_from_name(a.engine);
    if (given(sub, "--ex-post-p"))
        cfg.ex_post_p = a.ex_post_p;
    cfg.validate();
    return cfg;
}

int experiment(const ExperimentArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    const auto cfg = load_experiment(a, sub);
    const auto report = run_experiment(cfg);
    if (cfg.output_dir) {
        const auto paths = persist_report(report, *cfg.output_dir);
        err << "wrote " << paths.json.string() << " and " << paths.csv.string() << '\n';
    }
    if (!a.convergence_csv.empty()) {
        const auto table = convergence_table(report);
        auto file = open_output(a.convergence_csv);
        write_convergence_csv(file, table);
        if (!table.banner.empty())
            err << table.banner << '\n';
    }
    for (const auto& row : report.rows)
        if (row.error)
            err << "replication n=" << row.n << " r=" << row.replication << " seed=" << row.seed
                << " failed: " << *row.error << '\n';
    out << experiment_report_to_json(report).dump(2) << '\n';
    return report.failures() == 0 ? Ok : Runtime;
}

int degree_check(const ExperimentArgs& a, const CLI::App& sub, std::ostream& out, std::ostream&)
{
    const auto cfg = load_experiment(a, sub);
    std::optional<TypeDistribution> reference;
    if (!a.reference_dist.empty())
        reference = load_distribution(a.reference_dist);
    out << degree_validation_to_json(degree_validation(cfg, reference)).dump(2) << '\n';
    return Ok;
}

void add_experiment_flags(CLI::App& sub, ExperimentArgs& a)
{
    sub.add_option("--config", a.config, "Experiment config JSON")->required();
    sub.add_option("--seed", a.seed, "Master seed (overrides config)");
    sub.add_option("--n", a.n_values, "Comma-separated vertex counts (overrides config)")->delimiter(',');
    sub.add_option("--replications", a.replications, "Replications per n (overrides config)");
    sub.add_option("--threads", a.threads, "Worker threads; 0 uses CASCADE_LAB_THREADS or all cores");
}

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bootstrap percolation on directed inhomogeneous random graphs", "cascade_lab"};
    app.require_subcommand(1);
    app.fallthrough(false);

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "Smallest positive root of f and the predicted final fraction");
    solve_cmd->add_option("--dist", solve_args.dist, "Type distribution JSON")->required();
    solve_cmd->add_option("--tol", solve_args.tol, "Bisection tolerance")->capture_default_str();

    ClassifyArgs classify_args;
    auto* classify_cmd = app.add_subcommand("classify", "Resilience of a law without initial infections");
    classify_cmd->add_option("--dist", classify_args.dist, "Type distribution JSON")->required();
    classify_cmd->add_option("--zmin", classify_args.grid.z_min, "Smallest grid point")->capture_default_str();
    classify_cmd->add_option("--zmax", classify_args.grid.z_max, "Largest grid point")->capture_default_str();
    classify_cmd->add_option("--points", classify_args.grid.points, "Number of log-spaced grid points")
        ->capture_default_str();
    classify_cmd->add_option("--grid-csv", classify_args.grid_csv,
                             "Write the evidence grid here (default classify_evidence.csv when INCONCLUSIVE)");

    GenerateArgs generate_args;
    auto* generate_cmd = app.add_subcommand("generate", "Sample a vertex sequence and a graph, emit an edge list");
    generate_cmd->add_option("--dist", generate_args.dist, "Type distribution JSON")->required();
    generate_cmd->add_option("--n", generate_args.n, "Number of vertices")->required();
    generate_cmd->add_option("--seed", generate_args.seed, "Seed")->capture_default_str();
    generate_cmd->add_option("--ex-post-p", generate_args.ex_post_p, "Ex-post infection probability")
        ->capture_default_str();
    generate_cmd->add_option("--out", generate_args.out, "Edge list path (default stdout)");
    generate_cmd->add_option("--sequence-out", generate_args.sequence_out, "Write the vertex sequence JSON here");

    PercolateArgs percolate_args;
    auto* percolate_cmd = app.add_subcommand("percolate", "Run the cascade on an edge list and a vertex sequence");
    percolate_cmd->add_option("--edges", percolate_args.edges, "Edge list file")->required();
    percolate_cmd->add_option("--sequence", percolate_args.sequence, "Vertex sequence JSON")->required();
    percolate_cmd->add_option("--engine", percolate_args.engine, "rounds, sequential or both")
        ->capture_default_str()
        ->check(CLI::IsMember({"rounds", "sequential", "both"}));
    percolate_cmd->add_option("--seed", percolate_args.seed, "Seed for the sequential exposure order")
        ->capture_default_str();
    percolate_cmd->add_option("--trace", percolate_args.trace, "Write the sequential exposure trace CSV here");
    percolate_cmd->add_option("--trace-stride", percolate_args.trace_stride, "Snapshot every this many exposures")
        ->capture_default_str();

    ExperimentArgs experiment_args;
    auto* experiment_cmd = app.add_subcommand("experiment", "Replicated Monte Carlo runs compared with theory");
    add_experiment_flags(*experiment_cmd, experiment_args);
    experiment_cmd->add_option("--out", experiment_args.out, "Directory for the JSON and CSV report");
    experiment_cmd->add_option("--engine", experiment_args.engine, "rounds, sequential or both")
        ->check(CLI::IsMember({"rounds", "sequential", "both"}));
    experiment_cmd->add_option("--ex-post-p", experiment_args.ex_post_p, "Ex-post infection probability");
    experiment_cmd->add_option("--convergence-csv", experiment_args.convergence_csv,
                               "Write the convergence table CSV here");

    ExperimentArgs degree_args;
    auto* degree_cmd = app.add_subcommand("degree-check", "Distance of empirical degrees to the mixed Poisson law");
    add_experiment_flags(*degree_cmd, degree_args);
    degree_cmd->add_option("--reference-dist", degree_args.reference_dist,
                           "Compare against this law instead of the config's");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? Ok : BadConfig;
    }

    try {
        if (solve_cmd->parsed())
            return solve(solve_args, out, err);
        if (classify_cmd->parsed())
            return classify(classify_args, out, err);
        if (generate_cmd->parsed())
            return generate(generate_args, out, err);
        if (percolate_cmd->parsed())
            return percolate(percolate_args, out, err);
        if (experiment_cmd->parsed())
            return experiment(experiment_args, *experiment_cmd, out, err);
        if (degree_cmd->parsed())
            return degree_check(degree_args, *degree_cmd, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return BadConfig;
    } catch (const PreconditionError& e) {
        err << "precondition failed: " << e.what() << '\n';
        return Precondition;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << '\n';
        return BadConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return Runtime;
    }
    return BadConfig;
}

} // namespace cascade_lab::cli
