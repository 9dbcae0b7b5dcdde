#pragma once

#include "cascade_lab/io.hpp"
#include "cascade_lab/theory.hpp"
#include "cascade_lab/vertex_model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cascade_lab {

enum class Engine { Rounds, Sequential, Both };

std::string_view engine_name(Engine e) noexcept;
Engine engine_from_name(std::string_view name);

struct ExperimentConfig {
    TypeDistribution distribution{std::vector<Atom>{Atom{1.0, 1.0, Threshold{0}, 1.0, 1.0}}};
    /// JSON the distribution was read from; kept so the config hash covers parametric specs.
    io::Json distribution_source;
    std::vector<std::size_t> n_values;
    std::size_t replications = 1;
    std::uint64_t master_seed = 0;
    std::optional<double> ex_post_p;
    Engine engine = Engine::Rounds;
    std::optional<std::filesystem::path> output_dir;
    bool record_timing = true;
    /// Worker count; 0 uses CASCADE_LAB_THREADS or the hardware concurrency.
    std::size_t threads = 0;
    double tolerance = 1e-10;
    ZGrid classify_grid{};

    /// Throws ConfigError on an empty n list, zero replications or p outside [0, 1].
    void validate() const;
};

/// Strict parse: unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const io::Json& j);
io::Json experiment_config_to_json(const ExperimentConfig& cfg);
/// 16 hex digits of a 64-bit FNV-1a hash of the canonical config JSON.
std::string config_hash(const ExperimentConfig& cfg);

/// Seed of replication r at size n.
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, std::size_t r) noexcept;

struct ReplicationRow {
    std::size_t n = 0;
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    double final_fraction = 0.0;
    std::optional<double> relevance_loss;
    std::size_t edge_count = 0;
    std::size_t rounds = 0;
    double runtime_ms = 0.0;
    /// Set when both engines ran.
    std::optional<bool> engines_agree;
    /// Failure message of an isolated replication; the numeric fields are then meaningless.
    std::optional<std::string> error;
};

struct Summary {
    double mean = 0.0;
    double standard_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// Mean, standard error from the sample variance, and mean +- 1.96 SE.
Summary summarize(const std::vector<double>& values);

struct SizeAggregate {
    std::size_t n = 0;
    std::size_t completed = 0;
    Summary fraction;
    Summary relevance;
    Summary edges_per_vertex;
    /// |mean fraction - g(z_hat)| when a fixed point is available.
    std::optional<double> deviation;
};

struct TheorySummary {
    /// Fixed point of the law after the ex-post transform, when it has P(C = 0) > 0.
    std::optional<FixedPointReport> fixed_point;
    /// Classification of the untransformed law when it has P(C = 0) = 0.
    std::optional<ResilienceVerdict> verdict;
    /// g(z0_estimate) and E[R psi_C(W- z0_estimate)] / E[R] from the classification.
    std::optional<double> small_seed_lower_bound;
    std::optional<double> small_seed_relevance_bound;
    /// Expected edges per vertex lambda- lambda+ of the sampled law.
    double edges_per_vertex = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string config_hash;
    TheorySummary theory;
    std::vector<ReplicationRow> rows;
    std::vector<SizeAggregate> aggregates;

    std::size_t failures() const noexcept;
};

/// Runs every (n, replication) pair across worker threads. Rows are merged by index so the
/// report does not depend on scheduling. A replication that throws is recorded with its error.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

io::Json experiment_report_to_json(const ExperimentReport& report);
void write_experiment_rows_csv(std::ostream& out, const ExperimentReport& report);

struct PersistedPaths {
    std::filesystem::path json;
    std::filesystem::path csv;
};

/// Writes experiment_<seed>_<hash>.json and .csv into `dir`. Errors name the offending path.
PersistedPaths persist_report(const ExperimentReport& report, const std::filesystem::path& dir);

struct DegreeValidationRow {
    std::size_t n = 0;
    std::uint32_t k_max = 0;
    Summary distance;
};

struct DegreeValidationReport {
    std::vector<DegreeValidationRow> rows;
    /// Mean distance strictly decreasing along n_values (sorted ascending).
    bool decreasing = false;
};

/// Degree-law distances of graphs sampled from cfg.distribution, measured against `reference`
/// (defaults to the sampling law; pass a different law for a negative control).
DegreeValidationReport degree_validation(const ExperimentConfig& cfg,
                                         const std::optional<TypeDistribution>& reference = std::nullopt);

io::Json degree_validation_to_json(const DegreeValidationReport& report);

struct ConvergenceRow {
    std::size_t n = 0;
    double mean_fraction = 0.0;
    double standard_error = 0.0;
    double predicted = 0.0;
    double abs_deviation = 0.0;
    double mean_relevance = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool stable = false;
    /// Non-empty when no convergence claim is made.
    std::string banner;
    /// |deviation| non-increasing in n up to 2 SE; meaningful only when stable.
    bool shrinking = false;
};

/// Requires a fixed point in the report (PreconditionError otherwise).
ConvergenceTable convergence_table(const ExperimentReport& report);
ConvergenceTable convergence_table(const ExperimentConfig& cfg);
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);

/// CASCADE_LAB_THREADS if set and positive, else the hardware concurrency (at least 1).
std::size_t default_thread_count();

} // namespace cascade_lab
