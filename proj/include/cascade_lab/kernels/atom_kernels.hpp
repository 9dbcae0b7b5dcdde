#pragma once

#include "cascade_lab/vertex_model.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace cascade_lab::kernels {

/// Structure-of-arrays view of the atoms that can ever be infected (finite threshold),
/// laid out for the functional sums below. Infinite-threshold atoms contribute zero to
/// every sum and are dropped.
struct AtomTable {
    std::vector<double> w_minus;
    std::vector<double> w_plus;
    std::vector<double> prob;
    std::vector<double> relevance;
    std::vector<double> threshold;

    explicit AtomTable(const TypeDistribution& dist);
    std::size_t size() const noexcept { return prob.size(); }
};

/// Atom-weighted sums at one z, with psi = P(Poi(w- z) >= c):
///   tail_out    = sum prob * w+ * psi
///   tail        = sum prob * psi
///   tail_rel    = sum prob * r * psi
///   derivative  = sum over 1 <= c of prob * w+ * w- * P(Poi(w- z) = c - 1)
struct FunctionalSums {
    double tail_out = 0.0;
    double tail = 0.0;
    double tail_rel = 0.0;
    double derivative = 0.0;
};

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;

/// Reference implementation: one poisson_tail / poisson_pmf call per atom.
FunctionalSums functional_sums_scalar(const AtomTable& table, double z);

/// Four atoms per iteration; the tail series runs lane-parallel with per-lane direction
/// and termination masks. Only callable when avx2_available() is true.
FunctionalSums functional_sums_avx2(const AtomTable& table, double z);

bool avx2_available() noexcept;

/// Backend chosen at first use: AVX2 when the CPU supports it, unless the environment
/// variable CASCADE_LAB_SIMD is set to "scalar".
Backend active_backend() noexcept;

FunctionalSums functional_sums(const AtomTable& table, double z, Backend backend);

inline FunctionalSums functional_sums(const AtomTable& table, double z)
{
    return functional_sums(table, z, active_backend());
}

} // namespace cascade_lab::kernels
