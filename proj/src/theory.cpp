#include "cascade_lab/theory.hpp"

#include "cascade_lab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace cascade_lab {

namespace {

void require_non_negative(double z)
{
    if (!(z >= 0.0) || !std::isfinite(z))
        throw DomainError("functional argument must be finite and non-negative, got " + std::to_string(z));
}

} // namespace

Functionals::Functionals(const TypeDistribution& dist) : dist_(dist), table_(dist), mean_out_(dist.lambda_plus()) {}

kernels::FunctionalSums Functionals::sums(double z) const
{
    require_non_negative(z);
    return kernels::functional_sums(table_, z);
}

double Functionals::f(double z) const { return sums(z).tail_out - z; }
double Functionals::g(double z) const { return sums(z).tail; }
double Functionals::derivative(double z) const { return sums(z).derivative; }
double Functionals::relevance(double z) const { return sums(z).tail_rel; }

double f_eval(const TypeDistribution& dist, double z) { return Functionals(dist).f(z); }
double g_eval(const TypeDistribution& dist, double z) { return Functionals(dist).g(z); }
double derivative_functional(const TypeDistribution& dist, double z) { return Functionals(dist).derivative(z); }

namespace {

/// Golden-section search for a minimum of f on [a, b].
std::pair<double, double> golden_minimum(const Functionals& fn, double a, double b)
{
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = fn.f(c);
    double fd = fn.f(d);
    for (int iter = 0; iter < 90 && fc > 0.0 && fd > 0.0; ++iter) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = fn.f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = fn.f(d);
        }
    }
    return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

} // namespace

FixedPointReport solve_fixed_point(const TypeDistribution& dist, double tol)
{
    if (!(tol > 0.0))
        throw DomainError("fixed-point tolerance must be positive");
    if (!(dist.zero_threshold_mass() > 0.0))
        throw PreconditionError("P(C = 0) = 0: z = 0 is always a root; use classify_resilience instead");

    const Functionals fn(dist);
    const double top = fn.mean_out_weight();

    std::vector<double> grid;
    constexpr std::size_t kGeometric = 64;
    constexpr std::size_t kUniform = 512;
    const double head_hi = top / 10.0;
    if (head_hi > tol) {
        const double ratio = std::log(head_hi / tol) / static_cast<double>(kGeometric - 1);
        for (std::size_t i = 0; i < kGeometric; ++i)
            grid.push_back(tol * std::exp(ratio * static_cast<double>(i)));
    }
    for (std::size_t i = 1; i <= kUniform; ++i)
        grid.push_back(top * static_cast<double>(i) / static_cast<double>(kUniform));
    std::sort(grid.begin(), grid.end());
    grid.back() = top;

    FixedPointReport report;
    report.tolerance = tol;
    double lo = 0.0;
    double hi = top;
    bool found = false;
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        values[i] = fn.f(grid[i]);
    for (std::size_t i = 0; i < grid.size() && !found; ++i) {
        if (values[i] <= 0.0) {
            hi = grid[i];
            found = true;
            break;
        }
        // A positive local minimum of the samples may hide a dip below zero that is narrower
        // than the grid spacing (near-tangent roots). Probe it before moving on.
        if (i + 1 < grid.size() && values[i] <= values[i + 1] && values[i] <= (i > 0 ? values[i - 1] : fn.f(0.0))) {
            const double a = i > 0 ? grid[i - 1] : 0.0;
            const auto [z_min, f_min] = golden_minimum(fn, a, grid[i + 1]);
            if (f_min <= 0.0) {
                lo = a;
                hi = z_min;
                found = true;
                break;
            }
        }
        lo = grid[i];
    }

    if (found) {
        report.bracket_lo = lo;
        report.bracket_hi = hi;
        // Bisect past tol down to adjacent doubles; the extra steps are cheap and keep f(z_hat) tight.
        while (hi - lo > 0.0) {
            const double mid = lo + 0.5 * (hi - lo);
            if (mid <= lo || mid >= hi)
                break;
            if (fn.f(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        const double f_lo = fn.f(lo);
        const double f_hi = fn.f(hi);
        report.z_hat = std::fabs(f_lo) <= std::fabs(f_hi) ? lo : hi;
    } else {
        report.grid_failure = true;
        report.bracket_lo = lo;
        report.bracket_hi = top;
        report.z_hat = top;
    }

    const auto at = fn.sums(report.z_hat);
    report.f_at_z_hat = at.tail_out - report.z_hat;
    report.g_at_z_hat = at.tail;
    report.relevance_prediction = at.tail_rel;
    const double mean_relevance = dist.mean_relevance();
    report.relevance_fraction_prediction = mean_relevance > 0.0 ? at.tail_rel / mean_relevance : 0.0;

    report.delta = std::max(1e-3 * top, 10.0 * tol);
    report.stability_value = at.derivative;
    for (const double probe : {report.z_hat - report.delta, report.z_hat + report.delta}) {
        if (probe >= 0.0)
            report.stability_value = std::max(report.stability_value, fn.derivative(probe));
    }
    report.stable = report.stability_value < 1.0;
    return report;
}

std::string_view resilience_name(Resilience r) noexcept
{
    switch (r) {
    case Resilience::Resilient:
        return "RESILIENT";
    case Resilience::NonResilient:
        return "NON_RESILIENT";
    case Resilience::Inconclusive:
        break;
    }
    return "INCONCLUSIVE";
}

std::vector<double> log_grid(const ZGrid& grid)
{
    if (!(grid.z_min > 0.0) || !(grid.z_max >= grid.z_min) || !std::isfinite(grid.z_max))
        throw DomainError("z grid needs 0 < z_min <= z_max");
    if (grid.points == 0)
        throw DomainError("z grid needs at least one point");
    std::vector<double> zs(grid.points);
    if (grid.points == 1) {
        zs[0] = grid.z_min;
        return zs;
    }
    const double span = std::log(grid.z_max / grid.z_min);
    for (std::size_t i = 0; i < grid.points; ++i)
        zs[i] = grid.z_min * std::exp(span * static_cast<double>(i) / static_cast<double>(grid.points - 1));
    zs.back() = grid.z_max;
    return zs;
}

ResilienceVerdict classify_resilience(const TypeDistribution& dist, const ZGrid& grid)
{
    if (dist.zero_threshold_mass() > 0.0)
        throw PreconditionError("classify_resilience needs P(C = 0) = 0; use solve_fixed_point instead");

    const Functionals fn(dist);
    ResilienceVerdict verdict;
    verdict.grid = grid;
    verdict.truncation_scale = 1.0 / dist.max_w_minus();

    const auto zs = log_grid(grid);
    verdict.evidence.reserve(zs.size());
    for (const double z : zs) {
        const auto s = fn.sums(z);
        verdict.evidence.push_back(EvidencePoint{z, s.tail_out - z, s.derivative});
    }

    auto prefix_end = [&](auto holds) {
        double last = 0.0;
        for (const auto& e : verdict.evidence) {
            if (!holds(e))
                break;
            last = e.z;
        }
        return last;
    };
    const double spreading = prefix_end([](const EvidencePoint& e) { return e.f > 0.0; });
    const double contracting = prefix_end([](const EvidencePoint& e) { return e.derivative < 1.0; });

    if (spreading == zs.back()) {
        verdict.classification = Resilience::NonResilient;
        verdict.z0_estimate = spreading;
    } else if (contracting == zs.back()) {
        verdict.classification = Resilience::Resilient;
        verdict.z0_estimate = contracting;
    } else {
        verdict.classification = Resilience::Inconclusive;
        verdict.z0_estimate = spreading;
    }
    return verdict;
}

double predicted_lower_bound_small_seed(const TypeDistribution& dist, double z0)
{
    if (!(z0 > 0.0))
        throw DomainError("z0 must be positive");
    return g_eval(dist, z0);
}

double predicted_relevance_lower_bound_small_seed(const TypeDistribution& dist, double z0)
{
    if (!(z0 > 0.0))
        throw DomainError("z0 must be positive");
    return Functionals(dist).relevance(z0);
}

} // namespace cascade_lab
