#include "cascade_lab/kernels/atom_kernels.hpp"

#include <cstdlib>
#include <string>

namespace cascade_lab::kernels {

AtomTable::AtomTable(const TypeDistribution& dist)
{
    const auto atoms = dist.atoms();
    for (const auto& a : atoms) {
        if (a.threshold.is_infinite() || a.prob == 0.0)
            continue;
        w_minus.push_back(a.w_minus);
        w_plus.push_back(a.w_plus);
        prob.push_back(a.prob);
        relevance.push_back(a.relevance);
        threshold.push_back(static_cast<double>(a.threshold.value()));
    }
}

FunctionalSums functional_sums_scalar(const AtomTable& table, double z)
{
    FunctionalSums sums;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double x = table.w_minus[i] * z;
        const auto c = static_cast<std::uint32_t>(table.threshold[i]);
        const double psi = poisson_tail(Threshold{c}, x);
        const double p = table.prob[i];
        sums.tail += p * psi;
        sums.tail_out += p * table.w_plus[i] * psi;
        sums.tail_rel += p * table.relevance[i] * psi;
        if (c >= 1)
            sums.derivative += p * table.w_plus[i] * table.w_minus[i] * poisson_pmf(c - 1, x);
    }
    return sums;
}

std::string_view backend_name(Backend b) noexcept
{
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

Backend active_backend() noexcept
{
    static const Backend chosen = [] {
        const char* env = std::getenv("CASCADE_LAB_SIMD");
        if (env != nullptr && std::string(env) == "scalar")
            return Backend::Scalar;
        return avx2_available() ? Backend::Avx2 : Backend::Scalar;
    }();
    return chosen;
}

FunctionalSums functional_sums(const AtomTable& table, double z, Backend backend)
{
    if (backend == Backend::Avx2 && avx2_available())
        return functional_sums_avx2(table, z);
    return functional_sums_scalar(table, z);
}

} // namespace cascade_lab::kernels
