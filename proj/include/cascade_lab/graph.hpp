#pragma once

#include "cascade_lab/vertex_model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cascade_lab {

using VertexId = std::uint32_t;

/// Directed simple graph in compressed out-adjacency form. Neighbor lists are sorted;
/// there are no self-loops and no duplicate edges.
class Digraph {
public:
    Digraph() = default;

    /// Builds from per-vertex out-lists. Lists are sorted here; throws DomainError on
    /// self-loops, duplicates or out-of-range targets.
    static Digraph from_adjacency(std::size_t n, std::vector<std::vector<VertexId>> out_lists);

    /// Takes compressed rows directly (offsets of length n + 1). Rows are sorted here and
    /// validated like from_adjacency.
    static Digraph from_csr(std::size_t n, std::vector<std::size_t> offsets, std::vector<VertexId> targets);

    /// Builds from an arbitrary edge list with the same validation.
    static Digraph from_edges(std::size_t n, std::span<const std::pair<VertexId, VertexId>> edges);

    std::size_t size() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return targets_.size(); }

    std::span<const VertexId> out_neighbors(VertexId v) const noexcept
    {
        return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
    }

    bool has_edge(VertexId from, VertexId to) const noexcept;

    friend bool operator==(const Digraph&, const Digraph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<VertexId> targets_;
};

struct DegreeTable {
    std::vector<std::uint32_t> in_degrees;
    std::vector<std::uint32_t> out_degrees;
};

/// Connection probability min{1, w+_from * w-_to / n}.
inline double edge_probability(const VertexType& from, const VertexType& to, std::size_t n) noexcept
{
    const double p = from.w_plus * to.w_minus / static_cast<double>(n);
    return p < 1.0 ? p : 1.0;
}

/// One Bernoulli trial per ordered pair. O(n^2).
Digraph generate_naive(const VertexSequence& seq, std::uint64_t seed);

/// Same law as generate_naive in expected O(n + m): targets are visited in decreasing
/// in-weight order and skipped over geometrically, thinning each landing by the ratio of
/// its exact probability to the current bound.
Digraph generate_fast(const VertexSequence& seq, std::uint64_t seed);

DegreeTable degrees(const Digraph& g);

/// p(k, j) of the mixed Poisson law (Poi(W- lambda+), Poi(W+ lambda-)).
double mixed_poisson_joint_pmf(const TypeDistribution& dist, std::uint32_t k, std::uint32_t j);

/// Smallest k_max such that the mixed Poisson mass with either coordinate above it is below `mass`.
std::uint32_t suggest_degree_cutoff(const TypeDistribution& dist, double mass = 1e-9);

/// L1 distance between the empirical joint in/out-degree law of `g` and the mixed Poisson law,
/// over the box [0, k_max]^2, plus the mass both laws put outside the box.
/// Throws DomainError if the theoretical mass outside the box is 1e-6 or more.
double degree_law_distance(const Digraph& g, const TypeDistribution& dist, std::uint32_t k_max);

} // namespace cascade_lab
