#include "cascade_lab/kernels/atom_kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CASCADE_LAB_X86 1
#include <immintrin.h>
#else
#define CASCADE_LAB_X86 0
#endif

#include "cascade_lab/errors.hpp"

#include <algorithm>
#include <array>
#include <cstring>

namespace cascade_lab::kernels {

#if CASCADE_LAB_X86

bool avx2_available() noexcept
{
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported;
}

namespace {

constexpr double kTailEps = 1e-17;
constexpr std::size_t kLanes = 4;

struct alignas(32) Lanes {
    std::array<double, kLanes> v{};
};

// Per-lane starting point of the tail series, set up with scalar calls.
struct SeriesStart {
    Lanes term;     // first series term
    Lanes k;        // index of that term
    Lanes upper;    // all-ones bit pattern for upward summation, zero for downward
    Lanes active;   // all-ones while the lane still needs the series
    Lanes series;   // all-ones when psi comes from the series rather than the prologue
    Lanes psi;      // final value for lanes resolved in the prologue
    Lanes pmf_prev; // P(Poi(x) = c - 1), zero when c = 0
};

double all_ones() noexcept
{
    double d;
    const std::uint64_t bits = ~std::uint64_t{0};
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

void prepare_lane(SeriesStart& s, std::size_t lane, double c, double x)
{
    s.active.v[lane] = 0.0;
    s.series.v[lane] = 0.0;
    s.upper.v[lane] = 0.0;
    s.term.v[lane] = 0.0;
    s.k.v[lane] = 0.0;
    s.pmf_prev.v[lane] = 0.0;
    if (c == 0.0) {
        s.psi.v[lane] = 1.0;
        return;
    }
    if (x == 0.0) {
        s.psi.v[lane] = 0.0;
        s.pmf_prev.v[lane] = c == 1.0 ? 1.0 : 0.0;
        return;
    }
    const double prev = poisson_pmf(static_cast<std::uint64_t>(c) - 1, x);
    s.pmf_prev.v[lane] = prev;
    s.psi.v[lane] = 0.0;
    s.active.v[lane] = all_ones();
    s.series.v[lane] = all_ones();
    if (c >= x) {
        s.upper.v[lane] = all_ones();
        s.term.v[lane] = prev * x / c;
        s.k.v[lane] = c;
    } else {
        s.term.v[lane] = prev;
        s.k.v[lane] = c - 1.0;
        if (c == 1.0)
            s.active.v[lane] = 0.0; // lower sum is the single term pmf(0)
    }
}

// psi for four lanes. Upward lanes sum pmf(c), pmf(c+1), ...; downward lanes sum
// pmf(c-1), ..., pmf(0) and return one minus that sum. Both stop once the geometric bound on
// the remaining terms drops below kTailEps times the running sum.
__attribute__((target("avx2,fma"))) __m256d tail_block(const SeriesStart& s, __m256d x)
{
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d eps = _mm256_set1_pd(kTailEps);
    const __m256d upper = _mm256_load_pd(s.upper.v.data());

    __m256d term = _mm256_load_pd(s.term.v.data());
    __m256d k = _mm256_load_pd(s.k.v.data());
    __m256d acc = term;
    __m256d active = _mm256_load_pd(s.active.v.data());

    while (_mm256_movemask_pd(active) != 0) {
        const __m256d k_up = _mm256_add_pd(k, one);
        const __m256d num = _mm256_blendv_pd(k, x, upper);
        const __m256d den = _mm256_blendv_pd(x, k_up, upper);
        const __m256d next_term = _mm256_mul_pd(term, _mm256_div_pd(num, den));
        const __m256d next_acc = _mm256_add_pd(acc, next_term);
        const __m256d next_k = _mm256_blendv_pd(_mm256_sub_pd(k, one), k_up, upper);

        // Ratio of the following term to this one.
        const __m256d ratio = _mm256_blendv_pd(_mm256_div_pd(_mm256_sub_pd(k, one), x),
                                               _mm256_div_pd(x, _mm256_add_pd(k, two)), upper);
        const __m256d lhs = _mm256_mul_pd(next_term, ratio);
        const __m256d rhs = _mm256_mul_pd(_mm256_mul_pd(eps, next_acc), _mm256_sub_pd(one, ratio));
        const __m256d converged = _mm256_or_pd(_mm256_cmp_pd(lhs, rhs, _CMP_LT_OQ),
                                               _mm256_cmp_pd(next_term, zero, _CMP_EQ_OQ));
        const __m256d exhausted = _mm256_andnot_pd(upper, _mm256_cmp_pd(next_k, zero, _CMP_LE_OQ));

        term = _mm256_blendv_pd(term, next_term, active);
        acc = _mm256_blendv_pd(acc, next_acc, active);
        k = _mm256_blendv_pd(k, next_k, active);
        active = _mm256_andnot_pd(_mm256_or_pd(converged, exhausted), active);
    }

    const __m256d from_series = _mm256_blendv_pd(_mm256_sub_pd(one, acc), acc, upper);
    return _mm256_blendv_pd(_mm256_load_pd(s.psi.v.data()), from_series, _mm256_load_pd(s.series.v.data()));
}

__attribute__((target("avx2,fma"))) double horizontal(__m256d v)
{
    alignas(32) std::array<double, kLanes> out{};
    _mm256_store_pd(out.data(), v);
    return (out[0] + out[1]) + (out[2] + out[3]);
}

} // namespace

__attribute__((target("avx2,fma"))) FunctionalSums functional_sums_avx2(const AtomTable& table, double z)
{
    if (!(z >= 0.0))
        throw DomainError("functional sums need z >= 0");

    __m256d tail = _mm256_setzero_pd();
    __m256d tail_out = _mm256_setzero_pd();
    __m256d tail_rel = _mm256_setzero_pd();
    __m256d derivative = _mm256_setzero_pd();
    const __m256d zv = _mm256_set1_pd(z);

    const std::size_t n = table.size();
    Lanes wm, wp, pr, rel;
    SeriesStart start;
    for (std::size_t base = 0; base < n; base += kLanes) {
        const std::size_t width = std::min(kLanes, n - base);
        for (std::size_t lane = 0; lane < kLanes; ++lane) {
            if (lane < width) {
                const std::size_t i = base + lane;
                wm.v[lane] = table.w_minus[i];
                wp.v[lane] = table.w_plus[i];
                pr.v[lane] = table.prob[i];
                rel.v[lane] = table.relevance[i];
                prepare_lane(start, lane, table.threshold[i], table.w_minus[i] * z);
            } else {
                wm.v[lane] = 0.0;
                wp.v[lane] = 0.0;
                pr.v[lane] = 0.0;
                rel.v[lane] = 0.0;
                prepare_lane(start, lane, 0.0, 0.0);
            }
        }
        const __m256d w_minus = _mm256_load_pd(wm.v.data());
        const __m256d w_plus = _mm256_load_pd(wp.v.data());
        const __m256d prob = _mm256_load_pd(pr.v.data());
        const __m256d relevance = _mm256_load_pd(rel.v.data());
        const __m256d x = _mm256_mul_pd(w_minus, zv);

        const __m256d psi = tail_block(start, x);
        const __m256d weighted = _mm256_mul_pd(prob, psi);
        tail = _mm256_add_pd(tail, weighted);
        tail_out = _mm256_fmadd_pd(weighted, w_plus, tail_out);
        tail_rel = _mm256_fmadd_pd(weighted, relevance, tail_rel);
        const __m256d pmf_prev = _mm256_load_pd(start.pmf_prev.v.data());
        derivative = _mm256_fmadd_pd(_mm256_mul_pd(prob, w_plus), _mm256_mul_pd(w_minus, pmf_prev), derivative);
    }

    return FunctionalSums{horizontal(tail_out), horizontal(tail), horizontal(tail_rel), horizontal(derivative)};
}

#else

bool avx2_available() noexcept { return false; }

FunctionalSums functional_sums_avx2(const AtomTable&, double)
{
    throw NumericalError("AVX2 kernels are not available on this architecture");
}

#endif

} // namespace cascade_lab::kernels
