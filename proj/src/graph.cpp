#include "cascade_lab/graph.hpp"

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cascade_lab {

Digraph Digraph::from_csr(std::size_t n, std::vector<std::size_t> offsets, std::vector<VertexId> targets)
{
    if (offsets.size() != n + 1 || offsets.front() != 0 || offsets.back() != targets.size())
        throw DomainError("malformed compressed adjacency for " + std::to_string(n) + " vertices");
    for (std::size_t v = 0; v < n; ++v) {
        if (offsets[v + 1] < offsets[v])
            throw DomainError("malformed compressed adjacency: offsets decrease at vertex " + std::to_string(v));
        const auto first = targets.begin() + static_cast<std::ptrdiff_t>(offsets[v]);
        const auto last = targets.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]);
        std::sort(first, last);
        for (auto it = first; it != last; ++it) {
            const VertexId t = *it;
            if (t >= n)
                throw DomainError("edge " + std::to_string(v) + "->" + std::to_string(t) + " leaves the vertex range");
            if (t == v)
                throw DomainError("self-loop at vertex " + std::to_string(v));
            if (it != first && *(it - 1) == t)
                throw DomainError("duplicate edge " + std::to_string(v) + "->" + std::to_string(t));
        }
    }
    Digraph g;
    g.n_ = n;
    g.offsets_ = std::move(offsets);
    g.targets_ = std::move(targets);
    return g;
}

Digraph Digraph::from_adjacency(std::size_t n, std::vector<std::vector<VertexId>> out_lists)
{
    if (out_lists.size() != n)
        throw DomainError("adjacency has " + std::to_string(out_lists.size()) + " lists for " + std::to_string(n) +
                          " vertices");
    std::vector<std::size_t> offsets(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v)
        offsets[v + 1] = offsets[v] + out_lists[v].size();
    std::vector<VertexId> targets;
    targets.reserve(offsets.back());
    for (const auto& list : out_lists)
        targets.insert(targets.end(), list.begin(), list.end());
    return from_csr(n, std::move(offsets), std::move(targets));
}

Digraph Digraph::from_edges(std::size_t n, std::span<const std::pair<VertexId, VertexId>> edges)
{
    std::vector<std::vector<VertexId>> lists(n);
    for (const auto& [from, to] : edges) {
        if (from >= n)
            throw DomainError("edge source " + std::to_string(from) + " leaves the vertex range");
        lists[from].push_back(to);
    }
    return from_adjacency(n, std::move(lists));
}

bool Digraph::has_edge(VertexId from, VertexId to) const noexcept
{
    if (from >= n_)
        return false;
    const auto nbrs = out_neighbors(from);
    return std::binary_search(nbrs.begin(), nbrs.end(), to);
}

namespace {

void require_generatable(const VertexSequence& seq)
{
    if (seq.size() < 2)
        throw DomainError("graph generation needs at least 2 vertices, got " + std::to_string(seq.size()));
    if (seq.size() > std::numeric_limits<VertexId>::max())
        throw DomainError("vertex count exceeds the 32-bit index range");
    seq.validate();
}

} // namespace

Digraph generate_naive(const VertexSequence& seq, std::uint64_t seed)
{
    require_generatable(seq);
    const std::size_t n = seq.size();
    Rng rng(seed);
    std::vector<std::vector<VertexId>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            if (rng.uniform() < edge_probability(seq.types[i], seq.types[j], n))
                lists[i].push_back(static_cast<VertexId>(j));
        }
    }
    return Digraph::from_adjacency(n, std::move(lists));
}

Digraph generate_fast(const VertexSequence& seq, std::uint64_t seed)
{
    require_generatable(seq);
    const std::size_t n = seq.size();
    const auto nd = static_cast<double>(n);

    std::vector<VertexId> order(n);
    std::iota(order.begin(), order.end(), VertexId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](VertexId a, VertexId b) { return seq.types[a].w_minus > seq.types[b].w_minus; });
    std::vector<double> sorted_w_minus(n);
    for (std::size_t i = 0; i < n; ++i)
        sorted_w_minus[i] = seq.types[order[i]].w_minus;

    Rng rng(seed);
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<VertexId> targets;
    targets.reserve(static_cast<std::size_t>(1.1 * nd * 2.0) + 16);
    for (std::size_t source = 0; source < n; ++source) {
        const double w_out = seq.types[source].w_plus;
        std::size_t pos = 0;
        double bound = std::min(1.0, w_out * sorted_w_minus[0] / nd);
        double log_miss = std::log1p(-bound);
        while (pos < n) {
            if (!(bound > 0.0))
                break;
            if (bound < 1.0) {
                // Failures before the next success of a Bernoulli(bound) sequence.
                const double skip = std::floor(std::log(rng.uniform_open_zero()) / log_miss);
                if (skip >= static_cast<double>(n - pos))
                    break;
                pos += static_cast<std::size_t>(skip);
            }
            const double exact = std::min(1.0, w_out * sorted_w_minus[pos] / nd);
            if (exact >= bound || rng.uniform() * bound < exact) {
                const VertexId target = order[pos];
                if (target != source)
                    targets.push_back(target);
            }
            if (exact != bound) {
                bound = exact;
                log_miss = std::log1p(-bound);
            }
            ++pos;
        }
        offsets[source + 1] = targets.size();
    }
    return Digraph::from_csr(n, std::move(offsets), std::move(targets));
}

DegreeTable degrees(const Digraph& g)
{
    DegreeTable table;
    table.in_degrees.assign(g.size(), 0);
    table.out_degrees.assign(g.size(), 0);
    for (VertexId v = 0; v < g.size(); ++v) {
        const auto nbrs = g.out_neighbors(v);
        table.out_degrees[v] = static_cast<std::uint32_t>(nbrs.size());
        for (const VertexId t : nbrs)
            ++table.in_degrees[t];
    }
    return table;
}

double mixed_poisson_joint_pmf(const TypeDistribution& dist, std::uint32_t k, std::uint32_t j)
{
    const double lm = dist.lambda_minus();
    const double lp = dist.lambda_plus();
    double total = 0.0;
    for (const auto& a : dist.atoms())
        total += a.prob * poisson_pmf(k, a.w_minus * lp) * poisson_pmf(j, a.w_plus * lm);
    return total;
}

namespace {

// Marginal pmf tables of the mixed Poisson law on [0, k_max] per atom, accumulated into the joint.
std::vector<double> joint_table(const TypeDistribution& dist, std::uint32_t k_max)
{
    const std::size_t side = std::size_t{k_max} + 1;
    const double lm = dist.lambda_minus();
    const double lp = dist.lambda_plus();
    std::vector<double> joint(side * side, 0.0);
    std::vector<double> in_pmf(side);
    std::vector<double> out_pmf(side);
    for (const auto& a : dist.atoms()) {
        if (a.prob == 0.0)
            continue;
        for (std::uint32_t k = 0; k <= k_max; ++k) {
            in_pmf[k] = poisson_pmf(k, a.w_minus * lp);
            out_pmf[k] = poisson_pmf(k, a.w_plus * lm);
        }
        for (std::size_t k = 0; k < side; ++k) {
            const double row = a.prob * in_pmf[k];
            if (row == 0.0)
                continue;
            for (std::size_t j = 0; j < side; ++j)
                joint[k * side + j] += row * out_pmf[j];
        }
    }
    return joint;
}

double outside_mass(const TypeDistribution& dist, std::uint32_t k_max)
{
    const double lm = dist.lambda_minus();
    const double lp = dist.lambda_plus();
    const Threshold above{k_max + 1};
    double mass = 0.0;
    for (const auto& a : dist.atoms()) {
        const double in_tail = poisson_tail(above, a.w_minus * lp);
        const double out_tail = poisson_tail(above, a.w_plus * lm);
        mass += a.prob * (in_tail + out_tail - in_tail * out_tail);
    }
    return mass;
}

} // namespace

std::uint32_t suggest_degree_cutoff(const TypeDistribution& dist, double mass)
{
    std::uint32_t k = 8;
    while (outside_mass(dist, k) >= mass && k < (1U << 20))
        k = k + k / 2;
    return k;
}

double degree_law_distance(const Digraph& g, const TypeDistribution& dist, std::uint32_t k_max)
{
    const double theory_outside = outside_mass(dist, k_max);
    if (theory_outside >= 1e-6)
        throw DomainError("degree cutoff " + std::to_string(k_max) + " leaves theoretical mass " +
                          std::to_string(theory_outside) + " outside the table; raise k_max");
    if (g.size() == 0)
        throw DomainError("degree_law_distance: empty graph");

    const std::size_t side = std::size_t{k_max} + 1;
    const auto table = degrees(g);
    std::vector<double> empirical(side * side, 0.0);
    double empirical_outside = 0.0;
    const double weight = 1.0 / static_cast<double>(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto k = table.in_degrees[v];
        const auto j = table.out_degrees[v];
        if (k > k_max || j > k_max)
            empirical_outside += weight;
        else
            empirical[k * side + j] += weight;
    }

    const auto theory = joint_table(dist, k_max);
    double distance = 0.0;
    for (std::size_t i = 0; i < theory.size(); ++i)
        distance += std::fabs(empirical[i] - theory[i]);
    return distance + theory_outside + empirical_outside;
}

} // namespace cascade_lab
