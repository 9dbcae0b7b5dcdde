#include "cascade_lab/cascade.hpp"

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rng.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <tuple>

namespace cascade_lab {

namespace {

constexpr std::uint32_t kImmune = std::numeric_limits<std::uint32_t>::max();

void require_matching(const Digraph& g, const VertexSequence& seq)
{
    if (g.size() != seq.size())
        throw DomainError("graph has " + std::to_string(g.size()) + " vertices but the sequence has " +
                          std::to_string(seq.size()));
}

std::vector<std::uint32_t> remaining_hits(const VertexSequence& seq)
{
    std::vector<std::uint32_t> remaining(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto c = seq.types[i].effective_threshold();
        remaining[i] = c.is_infinite() ? kImmune : c.value();
    }
    return remaining;
}

std::optional<double> relevance_fraction(const std::vector<bool>& infected, const VertexSequence& seq)
{
    double total = 0.0;
    double lost = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        total += seq.types[i].relevance;
        if (infected[i])
            lost += seq.types[i].relevance;
    }
    if (!(total > 0.0))
        return std::nullopt;
    return lost / total;
}

// Generation-by-generation closure. When `allowed` is given, only vertices in it may be infected.
CascadeResult run_rounds(const Digraph& g, const VertexSequence& seq, const std::vector<bool>* allowed)
{
    const std::size_t n = seq.size();
    auto remaining = remaining_hits(seq);
    CascadeResult result;
    result.final_infected.assign(n, false);

    std::vector<VertexId> frontier;
    for (VertexId v = 0; v < n; ++v) {
        if (remaining[v] == 0 && (allowed == nullptr || (*allowed)[v])) {
            result.final_infected[v] = true;
            frontier.push_back(v);
        }
    }
    result.per_round_sizes.push_back(frontier.size());

    std::vector<VertexId> next;
    for (;;) {
        next.clear();
        for (const VertexId v : frontier) {
            for (const VertexId u : g.out_neighbors(v)) {
                if (result.final_infected[u] || remaining[u] == kImmune)
                    continue;
                if (--remaining[u] == 0 && (allowed == nullptr || (*allowed)[u])) {
                    result.final_infected[u] = true;
                    next.push_back(u);
                }
            }
        }
        result.per_round_sizes.push_back(result.per_round_sizes.back() + next.size());
        if (next.empty())
            break;
        frontier.swap(next);
    }
    result.rounds = result.per_round_sizes.size() - 1;
    result.relevance_loss_fraction = relevance_fraction(result.final_infected, seq);
    return result;
}

std::vector<double> distinct_levels(const VertexSequence& seq, double VertexType::*field)
{
    std::vector<double> levels;
    levels.reserve(seq.size());
    for (const auto& v : seq.types)
        levels.push_back(v.*field);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

std::uint32_t level_of(const std::vector<double>& levels, double value)
{
    return static_cast<std::uint32_t>(std::lower_bound(levels.begin(), levels.end(), value) - levels.begin());
}

} // namespace

CascadeResult percolate_rounds(const Digraph& g, const VertexSequence& seq)
{
    require_matching(g, seq);
    return run_rounds(g, seq, nullptr);
}

std::pair<CascadeResult, ExposureTrace> percolate_sequential(const Digraph& g, const VertexSequence& seq,
                                                             std::uint64_t seed, const SequentialOptions& options)
{
    require_matching(g, seq);
    const std::size_t n = seq.size();

    ExposureTrace trace;
    trace.n = n;
    trace.in_levels = distinct_levels(seq, &VertexType::w_minus);
    trace.out_levels = distinct_levels(seq, &VertexType::w_plus);
    if (trace.in_levels.size() > options.max_levels || trace.out_levels.size() > options.max_levels)
        throw DomainError("sequence is not finitary: " + std::to_string(trace.in_levels.size()) + " in-weight and " +
                          std::to_string(trace.out_levels.size()) +
                          " out-weight levels exceed the limit; discretize the weights to fewer levels first");

    // Bucket layout: each occurring (j, k, m) with m >= 1 owns m consecutive counters, one per hit count.
    auto remaining = remaining_hits(seq);
    std::vector<std::uint32_t> threshold(n, 0);
    std::vector<std::size_t> bucket_base(n, 0);
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::size_t> base_of;
    for (std::size_t i = 0; i < n; ++i) {
        if (remaining[i] == kImmune) {
            ++trace.immune;
            continue;
        }
        if (remaining[i] > options.max_threshold)
            throw DomainError("sequence is not finitary: threshold " + std::to_string(remaining[i]) +
                              " exceeds the limit; cap or discretize thresholds first");
        threshold[i] = remaining[i];
        if (threshold[i] == 0)
            continue;
        const auto key = std::tuple{level_of(trace.in_levels, seq.types[i].w_minus),
                                    level_of(trace.out_levels, seq.types[i].w_plus), threshold[i]};
        auto [it, inserted] = base_of.try_emplace(key, trace.buckets.size());
        if (inserted) {
            for (std::uint32_t l = 0; l < threshold[i]; ++l)
                trace.buckets.push_back(BucketKey{std::get<0>(key), std::get<1>(key), threshold[i], l});
        }
        bucket_base[i] = it->second;
    }

    std::vector<std::size_t> counts(trace.buckets.size(), 0);
    std::vector<std::uint32_t> hits(n, 0);
    std::vector<bool> infected(n, false);
    std::vector<VertexId> unexposed;
    double out_weight = 0.0;
    for (VertexId i = 0; i < n; ++i) {
        if (remaining[i] == kImmune)
            continue;
        if (threshold[i] == 0) {
            infected[i] = true;
            unexposed.push_back(i);
            out_weight += seq.types[i].w_plus;
        } else {
            ++counts[bucket_base[i]];
        }
    }

    std::size_t exposed = 0;
    auto record = [&](std::size_t t) {
        trace.snapshots.push_back(ExposureSnapshot{t, unexposed.size(), out_weight, exposed, counts});
    };
    record(0);

    Rng rng(seed);
    std::size_t t = 0;
    while (!unexposed.empty()) {
        ++t;
        const auto pick = static_cast<std::size_t>(rng.below(unexposed.size()));
        const VertexId v = unexposed[pick];
        unexposed[pick] = unexposed.back();
        unexposed.pop_back();
        out_weight -= seq.types[v].w_plus;
        ++exposed;

        for (const VertexId u : g.out_neighbors(v)) {
            if (infected[u] || remaining[u] == kImmune)
                continue;
            const std::size_t bucket = bucket_base[u] + hits[u];
            --counts[bucket];
            if (++hits[u] == threshold[u]) {
                infected[u] = true;
                unexposed.push_back(u);
                out_weight += seq.types[u].w_plus;
            } else {
                ++counts[bucket + 1];
            }
        }
        if (unexposed.empty())
            out_weight = 0.0;
        const bool last = unexposed.empty();
        if (last || (options.trace_stride != 0 && t % options.trace_stride == 0))
            record(t);
    }
    trace.t_hat = t;

    CascadeResult result = run_rounds(g, seq, &infected);
    if (result.final_infected != infected)
        throw NumericalError("round replay disagrees with the exposure closure");
    return {std::move(result), std::move(trace)};
}

double relevance_loss(const CascadeResult& result, const VertexSequence& seq)
{
    if (result.final_infected.size() != seq.size())
        throw DomainError("cascade result and sequence sizes differ");
    const auto fraction = relevance_fraction(result.final_infected, seq);
    if (!fraction)
        throw DomainError("relevance loss is undefined when every relevance is zero");
    return *fraction;
}

} // namespace cascade_lab
