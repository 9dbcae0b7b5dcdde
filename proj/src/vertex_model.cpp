#include "cascade_lab/vertex_model.hpp"

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

namespace cascade_lab {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

void check_atom(const Atom& atom, double w0, std::size_t index)
{
    const auto where = "atom " + std::to_string(index) + ": ";
    if (!std::isfinite(atom.w_minus) || !std::isfinite(atom.w_plus))
        throw ConfigError(where + "weights must be finite");
    if (atom.w_minus < w0 || atom.w_plus < w0)
        throw ConfigError(where + "weights must be at least w0 = " + std::to_string(w0));
    if (!(atom.relevance >= 0.0) || !std::isfinite(atom.relevance))
        throw ConfigError(where + "relevance must be finite and non-negative");
    if (!(atom.prob >= 0.0) || !std::isfinite(atom.prob))
        throw ConfigError(where + "probability must be finite and non-negative");
}

using AtomKey = std::tuple<double, double, Threshold, double>;

AtomKey key_of(const Atom& a) { return {a.w_minus, a.w_plus, a.threshold, a.relevance}; }

// Neumaier summation, so that laws with millions of atoms still sum to 1 within the tolerance.
double probability_sum(const std::vector<Atom>& atoms)
{
    double sum = 0.0;
    double carry = 0.0;
    for (const auto& a : atoms) {
        const double t = sum + a.prob;
        carry += std::fabs(sum) >= std::fabs(a.prob) ? (sum - t) + a.prob : (a.prob - t) + sum;
        sum = t;
    }
    return sum + carry;
}

} // namespace

TypeDistribution::TypeDistribution(std::vector<Atom> atoms, double w0) : atoms_(std::move(atoms)), w0_(w0)
{
    if (!(w0_ > 0.0) || !std::isfinite(w0_))
        throw ConfigError("w0 must be a finite positive number");
    if (atoms_.empty())
        throw ConfigError("distribution has no atoms");
    for (std::size_t i = 0; i < atoms_.size(); ++i)
        check_atom(atoms_[i], w0_, i);
    const double total = probability_sum(atoms_);
    if (std::fabs(total - 1.0) > kProbabilityTolerance)
        throw ConfigError("atom probabilities sum to " + std::to_string(total) + ", expected 1");
}

TypeDistribution TypeDistribution::normalized(std::vector<Atom> atoms, double w0)
{
    const double total = probability_sum(atoms);
    if (!(total > 0.0))
        throw ConfigError("distribution has no positive probability mass");
    for (auto& a : atoms)
        a.prob /= total;
    return TypeDistribution(std::move(atoms), w0);
}

double TypeDistribution::lambda_minus() const noexcept
{
    return std::accumulate(atoms_.begin(), atoms_.end(), 0.0,
                           [](double s, const Atom& a) { return s + a.prob * a.w_minus; });
}

double TypeDistribution::lambda_plus() const noexcept
{
    return std::accumulate(atoms_.begin(), atoms_.end(), 0.0,
                           [](double s, const Atom& a) { return s + a.prob * a.w_plus; });
}

double TypeDistribution::mean_relevance() const noexcept
{
    return std::accumulate(atoms_.begin(), atoms_.end(), 0.0,
                           [](double s, const Atom& a) { return s + a.prob * a.relevance; });
}

double TypeDistribution::zero_threshold_mass() const noexcept
{
    double mass = 0.0;
    for (const auto& a : atoms_)
        if (a.threshold.is_zero())
            mass += a.prob;
    return mass;
}

double TypeDistribution::max_w_minus() const noexcept
{
    return std::max_element(atoms_.begin(), atoms_.end(),
                            [](const Atom& a, const Atom& b) { return a.w_minus < b.w_minus; })
        ->w_minus;
}

double TypeDistribution::max_w_plus() const noexcept
{
    return std::max_element(atoms_.begin(), atoms_.end(),
                            [](const Atom& a, const Atom& b) { return a.w_plus < b.w_plus; })
        ->w_plus;
}

void VertexSequence::validate() const
{
    if (types.empty())
        throw DomainError("vertex sequence is empty");
    for (std::size_t i = 0; i < types.size(); ++i) {
        const auto& v = types[i];
        if (!(v.w_minus >= w0) || !(v.w_plus >= w0) || !std::isfinite(v.w_minus) || !std::isfinite(v.w_plus))
            throw DomainError("vertex " + std::to_string(i) + " violates the weight floor w0 = " + std::to_string(w0));
        if (!(v.relevance >= 0.0))
            throw DomainError("vertex " + std::to_string(i) + " has negative relevance");
    }
}

VertexSequence sample_sequence(const TypeDistribution& dist, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        throw DomainError("sample_sequence: n must be at least 1");
    const auto atoms = dist.atoms();
    std::vector<double> cumulative(atoms.size());
    double running = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        running += atoms[i].prob;
        cumulative[i] = running;
    }
    cumulative.back() = std::max(cumulative.back(), 1.0);

    Rng rng(seed);
    VertexSequence seq;
    seq.w0 = dist.w0();
    seq.types.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        auto idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                     static_cast<std::ptrdiff_t>(atoms.size()) - 1));
        // Skip zero-mass atoms that share a cumulative value with their successor.
        while (atoms[idx].prob == 0.0 && idx + 1 < atoms.size())
            ++idx;
        const auto& a = atoms[idx];
        seq.types.push_back(VertexType{a.w_minus, a.w_plus, a.threshold, a.relevance, true});
    }
    return seq;
}

TypeDistribution empirical_distribution(const VertexSequence& seq)
{
    seq.validate();
    std::map<AtomKey, std::size_t> counts;
    for (const auto& v : seq.types)
        ++counts[AtomKey{v.w_minus, v.w_plus, v.effective_threshold(), v.relevance}];

    const auto n = static_cast<double>(seq.size());
    std::vector<Atom> atoms;
    atoms.reserve(counts.size());
    for (const auto& [key, count] : counts) {
        const auto& [wm, wp, c, r] = key;
        atoms.push_back(Atom{wm, wp, c, r, static_cast<double>(count) / n});
    }
    return TypeDistribution::normalized(std::move(atoms), seq.w0);
}

VertexSequence apply_ex_post_infection(const VertexSequence& seq, double p, std::uint64_t seed)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("ex-post infection probability must lie in [0, 1], got " + std::to_string(p));
    Rng rng(seed);
    VertexSequence out = seq;
    for (auto& v : out.types)
        v.mark = !(rng.uniform() < p);
    return out;
}

TypeDistribution with_ex_post_infection(const TypeDistribution& dist, double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("ex-post infection probability must lie in [0, 1], got " + std::to_string(p));
    std::vector<Atom> atoms;
    atoms.reserve(2 * dist.size());
    for (const auto& a : dist.atoms()) {
        if (a.threshold.is_zero()) {
            atoms.push_back(a);
            continue;
        }
        Atom kept = a;
        kept.prob = a.prob * (1.0 - p);
        Atom infected = a;
        infected.threshold = Threshold{0};
        infected.prob = a.prob * p;
        if (kept.prob > 0.0)
            atoms.push_back(kept);
        if (infected.prob > 0.0)
            atoms.push_back(infected);
    }
    return TypeDistribution::normalized(std::move(atoms), dist.w0());
}

double total_variation(const TypeDistribution& a, const TypeDistribution& b)
{
    std::map<AtomKey, double> diff;
    for (const auto& atom : a.atoms())
        diff[key_of(atom)] += atom.prob;
    for (const auto& atom : b.atoms())
        diff[key_of(atom)] -= atom.prob;
    double sum = 0.0;
    for (const auto& [key, d] : diff)
        sum += std::fabs(d);
    return 0.5 * sum;
}

double truncated_power_law_mean(double beta, double w_max)
{
    if (!(beta > 2.0))
        throw DomainError("power-law exponent must exceed 2");
    const double a = 1.0 - beta;
    const double b = 2.0 - beta;
    return (a / b) * (1.0 - std::pow(w_max, b)) / (1.0 - std::pow(w_max, a));
}

namespace {

// Integral of w^{e} over [lo, lo * ratio], written as lo^{e+1} * expm1((e+1) log ratio) / (e+1).
double power_integral(double lo, double log_ratio, double e)
{
    const double k = e + 1.0;
    return std::pow(lo, k) * std::expm1(k * log_ratio) / k;
}

void append_with_thresholds(std::vector<Atom>& out, const ThresholdRule& rule, double w, double relevance, double mass)
{
    std::visit(
        [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, threshold_rule::Constant>) {
                out.push_back(Atom{w, w, r.value, relevance, mass});
            } else {
                const std::uint32_t first = std::is_same_v<R, threshold_rule::UniformFromZero> ? 0U : 1U;
                const auto last = static_cast<std::uint32_t>(std::ceil(w));
                const double share = mass / static_cast<double>(last - first + 1);
                for (std::uint32_t c = first; c <= last; ++c)
                    out.push_back(Atom{w, w, Threshold{c}, relevance, share});
            }
        },
        rule);
}

} // namespace

TypeDistribution make_power_law_distribution(const PowerLawSpec& spec)
{
    if (!(spec.beta > 2.0))
        throw DomainError("power-law exponent must exceed 2 for an integrable mean, got " + std::to_string(spec.beta));
    if (spec.n_atoms < 2)
        throw DomainError("power-law discretization needs at least 2 atoms");
    if (!(spec.w_max > 1.0) || !std::isfinite(spec.w_max))
        throw DomainError("power-law truncation w_max must be finite and exceed 1");

    const double log_ratio = std::log(spec.w_max) / static_cast<double>(spec.n_atoms);
    const double total_mass = power_integral(1.0, std::log(spec.w_max), -spec.beta);

    std::vector<Atom> atoms;
    atoms.reserve(spec.n_atoms);
    for (std::size_t i = 0; i < spec.n_atoms; ++i) {
        const double lo = std::exp(log_ratio * static_cast<double>(i));
        const double mass = power_integral(lo, log_ratio, -spec.beta);
        const double first_moment = power_integral(lo, log_ratio, 1.0 - spec.beta);
        const double hi = std::exp(log_ratio * static_cast<double>(i + 1));
        const double w = std::clamp(first_moment / mass, lo, hi);
        const double relevance = spec.relevance == RelevanceRule::InWeight ? w : 1.0;
        append_with_thresholds(atoms, spec.threshold, w, relevance, mass / total_mass);
    }
    return TypeDistribution::normalized(std::move(atoms), 1.0);
}

} // namespace cascade_lab
