#pragma once

#include "cascade_lab/graph.hpp"
#include "cascade_lab/vertex_model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace cascade_lab {

struct CascadeResult {
    std::vector<bool> final_infected;
    /// Number of round applications, including the one that confirmed stabilization.
    std::size_t rounds = 0;
    /// |A_0|, |A_1|, ..., with the last two entries equal.
    std::vector<std::size_t> per_round_sizes;
    /// Share of total relevance held by infected vertices; empty when total relevance is zero.
    std::optional<double> relevance_loss_fraction;

    std::size_t final_count() const noexcept { return per_round_sizes.empty() ? 0 : per_round_sizes.back(); }
    double final_fraction() const noexcept
    {
        return final_infected.empty() ? 0.0
                                      : static_cast<double>(final_count()) / static_cast<double>(final_infected.size());
    }
};

/// Identifies the counter c^l_{j,k;m}: vertices at in-weight level j and out-weight level k with
/// threshold m that have received l < m hits from exposed vertices.
struct BucketKey {
    std::uint32_t in_level = 0;
    std::uint32_t out_level = 0;
    std::uint32_t threshold = 0;
    std::uint32_t hits = 0;

    friend bool operator==(const BucketKey&, const BucketKey&) = default;
};

struct ExposureSnapshot {
    std::size_t t = 0;
    /// Infected vertices not yet exposed.
    std::size_t unexposed = 0;
    /// Total out-weight of the unexposed set.
    double unexposed_out_weight = 0.0;
    std::size_t exposed = 0;
    std::vector<std::size_t> bucket_counts;
};

struct ExposureTrace {
    std::vector<double> in_levels;
    std::vector<double> out_levels;
    std::vector<BucketKey> buckets;
    /// Vertices with infinite threshold; they never enter a bucket.
    std::size_t immune = 0;
    std::size_t n = 0;
    std::vector<ExposureSnapshot> snapshots;
    /// First step at which the unexposed set is empty.
    std::size_t t_hat = 0;
};

struct SequentialOptions {
    /// Record a snapshot every `trace_stride` steps (and always the first and last); 0 keeps
    /// only the first and last.
    std::size_t trace_stride = 1;
    /// Largest number of distinct in- or out-weight levels accepted as finitary.
    std::size_t max_levels = 1U << 16;
    /// Largest finite threshold accepted as finitary.
    std::uint32_t max_threshold = 1U << 16;
};

/// Closure of the round-by-round infection rule. Worklist over out-edges with per-vertex
/// remaining-hit counters; each infection is tagged with its generation.
CascadeResult percolate_rounds(const Digraph& g, const VertexSequence& seq);

/// Closure via one-vertex-at-a-time exposure: a uniformly random unexposed infected vertex
/// sends its edges to the not-yet-infected vertices, bucket counters are updated, and newly
/// infected vertices join the unexposed set. Round sizes are recovered afterwards by replaying
/// the round rule on the final set.
std::pair<CascadeResult, ExposureTrace> percolate_sequential(const Digraph& g, const VertexSequence& seq,
                                                             std::uint64_t seed, const SequentialOptions& options = {});

/// Sum of relevance over infected vertices divided by total relevance.
/// Throws DomainError when all relevances are zero.
double relevance_loss(const CascadeResult& result, const VertexSequence& seq);

} // namespace cascade_lab
