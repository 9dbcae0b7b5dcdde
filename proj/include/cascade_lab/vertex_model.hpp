#pragma once

#include "cascade_lab/poisson.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace cascade_lab {

inline constexpr double kDefaultWeightFloor = 1.0;

/// Parameters of one vertex. A mark of 0 means the vertex is infected ex post,
/// which overrides its threshold with 0.
struct VertexType {
    double w_minus = 1.0;
    double w_plus = 1.0;
    Threshold threshold{};
    double relevance = 1.0;
    bool mark = true;

    Threshold effective_threshold() const noexcept { return threshold.with_mark(mark); }

    friend bool operator==(const VertexType&, const VertexType&) = default;
};

/// One point mass of the limiting type law.
struct Atom {
    double w_minus = 1.0;
    double w_plus = 1.0;
    Threshold threshold{};
    double relevance = 1.0;
    double prob = 0.0;

    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite weighted-atom law of (W-, W+, C, R). Immutable; validated on construction.
class TypeDistribution {
public:
    /// Throws ConfigError on an empty atom list, negative or non-summing probabilities,
    /// weights below `w0`, or negative relevance.
    explicit TypeDistribution(std::vector<Atom> atoms, double w0 = kDefaultWeightFloor);

    /// Rescales probabilities to sum to one before validating.
    static TypeDistribution normalized(std::vector<Atom> atoms, double w0 = kDefaultWeightFloor);

    std::span<const Atom> atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    double w0() const noexcept { return w0_; }

    /// E[W-]
    double lambda_minus() const noexcept;
    /// E[W+]
    double lambda_plus() const noexcept;
    double mean_relevance() const noexcept;
    /// P(C = 0)
    double zero_threshold_mass() const noexcept;
    double max_w_minus() const noexcept;
    double max_w_plus() const noexcept;

private:
    std::vector<Atom> atoms_;
    double w0_;
};

struct VertexSequence {
    std::vector<VertexType> types;
    double w0 = kDefaultWeightFloor;

    std::size_t size() const noexcept { return types.size(); }

    /// Throws DomainError if empty or if any vertex violates the weight floor.
    void validate() const;
};

/// n i.i.d. draws from the atom law; deterministic in (dist, n, seed).
VertexSequence sample_sequence(const TypeDistribution& dist, std::size_t n, std::uint64_t seed);

/// Law of distinct (w-, w+, effective threshold, relevance) tuples with their frequencies.
TypeDistribution empirical_distribution(const VertexSequence& seq);

/// Marks each vertex 0 independently with probability p. Thresholds are untouched.
VertexSequence apply_ex_post_infection(const VertexSequence& seq, double p, std::uint64_t seed);

/// Law of (W-, W+, C*M, R) with P(M = 0) = p independent of the rest: every atom with a
/// non-zero threshold is split into a zero-threshold share p and the original share 1 - p.
TypeDistribution with_ex_post_infection(const TypeDistribution& dist, double p);

/// Total variation distance between two atom laws (atoms matched exactly).
double total_variation(const TypeDistribution& a, const TypeDistribution& b);

namespace threshold_rule {
/// Every vertex gets the same threshold.
struct Constant {
    Threshold value{2};
};
/// C uniform on {0, ..., ceil(W-)}.
struct UniformFromZero {};
/// C uniform on {1, ..., ceil(W-)}.
struct UniformFromOne {};
} // namespace threshold_rule

using ThresholdRule =
    std::variant<threshold_rule::Constant, threshold_rule::UniformFromZero, threshold_rule::UniformFromOne>;

enum class RelevanceRule { Unit, InWeight };

struct PowerLawSpec {
    double beta = 2.5;
    ThresholdRule threshold = threshold_rule::Constant{};
    std::size_t n_atoms = 1000;
    double w_max = 1000.0;
    RelevanceRule relevance = RelevanceRule::Unit;
};

/// Discretizes the density proportional to w^{-beta} on [1, w_max] into geometrically spaced
/// bins. Each bin becomes an atom at its conditional mean with its exact mass, so E[W] equals
/// the truncated analytic mean. W- = W+ = W.
TypeDistribution make_power_law_distribution(const PowerLawSpec& spec);

/// Mean of the density proportional to w^{-beta} truncated to [1, w_max].
double truncated_power_law_mean(double beta, double w_max);

} // namespace cascade_lab
