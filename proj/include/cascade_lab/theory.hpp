#pragma once

#include "cascade_lab/kernels/atom_kernels.hpp"
#include "cascade_lab/vertex_model.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace cascade_lab {

/// Limit functionals of a type law, with the atom table built once:
///   f(z) = E[W+ psi_C(W- z)] - z
///   g(z) = E[psi_C(W- z)]
///   derivative(z) = E[W+ W- P(Poi(z W-) = C - 1) 1{C >= 1}]
class Functionals {
public:
    explicit Functionals(const TypeDistribution& dist);

    double f(double z) const;
    double g(double z) const;
    double derivative(double z) const;
    /// E[R psi_C(W- z)]
    double relevance(double z) const;
    kernels::FunctionalSums sums(double z) const;

    const TypeDistribution& distribution() const noexcept { return dist_; }
    double mean_out_weight() const noexcept { return mean_out_; }

private:
    TypeDistribution dist_;
    kernels::AtomTable table_;
    double mean_out_;
};

double f_eval(const TypeDistribution& dist, double z);
double g_eval(const TypeDistribution& dist, double z);
double derivative_functional(const TypeDistribution& dist, double z);

struct FixedPointReport {
    double z_hat = 0.0;
    double f_at_z_hat = 0.0;
    /// Predicted final infected fraction g(z_hat).
    double g_at_z_hat = 0.0;
    /// E[R psi_C(W- z_hat)]
    double relevance_prediction = 0.0;
    /// relevance_prediction / E[R]; zero when E[R] = 0.
    double relevance_fraction_prediction = 0.0;
    /// Largest derivative functional over {z_hat - delta, z_hat, z_hat + delta}.
    double stability_value = 0.0;
    bool stable = false;
    double delta = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double tolerance = 0.0;
    /// No sign change was found on the scan grid; z_hat was set to E[W+].
    bool grid_failure = false;
};

/// Smallest root of f on [0, E[W+]]: scans a geometric head and a uniform body for the first
/// sign change, then bisects. Throws PreconditionError if P(C = 0) = 0 and DomainError if tol <= 0.
FixedPointReport solve_fixed_point(const TypeDistribution& dist, double tol = 1e-10);

enum class Resilience { Resilient, NonResilient, Inconclusive };

std::string_view resilience_name(Resilience r) noexcept;

struct ZGrid {
    double z_min = 1e-6;
    double z_max = 1e-1;
    std::size_t points = 200;
};

struct EvidencePoint {
    double z = 0.0;
    double f = 0.0;
    double derivative = 0.0;
};

struct ResilienceVerdict {
    Resilience classification = Resilience::Inconclusive;
    /// Largest grid point up to which the deciding condition held from the bottom of the grid.
    double z0_estimate = 0.0;
    /// 1 / max W-: below this z the discretized law's truncation governs f.
    double truncation_scale = 0.0;
    ZGrid grid;
    std::vector<EvidencePoint> evidence;
};

/// Log-spaced grid points from z_min to z_max inclusive.
std::vector<double> log_grid(const ZGrid& grid);

/// NON_RESILIENT if f > 0 on the whole grid, RESILIENT if the derivative functional is below 1
/// on the whole grid, INCONCLUSIVE otherwise. Requires P(C = 0) = 0 (PreconditionError).
ResilienceVerdict classify_resilience(const TypeDistribution& dist, const ZGrid& grid = {});

/// g(z0): with-high-probability lower bound on the final fraction under any positive
/// ex-post infection when f > 0 on (0, z0).
double predicted_lower_bound_small_seed(const TypeDistribution& dist, double z0);

/// Relevance analogue E[R psi_C(W- z0)].
double predicted_relevance_lower_bound_small_seed(const TypeDistribution& dist, double z0);

/// One stored point of the mean-field exposure system.
struct OdePoint {
    double tau = 0.0;
    /// Unexposed infected mass.
    double nu = 0.0;
    /// Out-weight of the unexposed infected mass.
    double mu = 0.0;
    /// Integral of mu / nu.
    double z = 0.0;
    /// Closed form nu(0) - tau + sum gamma0 * psi_m(w_j z).
    double nu_closed_form = 0.0;
    /// gamma^l for each bucket, in OdeTrajectory::buckets order; empty unless stored.
    std::vector<double> gamma;
};

struct OdeBucket {
    double w_minus = 0.0;
    double w_plus = 0.0;
    std::uint32_t threshold = 0;
    std::uint32_t hits = 0;
    /// Initial mass of the (w-, w+, threshold) class.
    double initial_mass = 0.0;
};

struct OdeOptions {
    double step = 1e-4;
    /// Store the bucket vector every this many steps (0: never).
    std::size_t gamma_stride = 100;
};

struct OdeTrajectory {
    double step = 0.0;
    std::vector<OdeBucket> buckets;
    std::vector<OdePoint> points;
    /// tau at which nu reaches 0, extrapolated linearly from the last point.
    double tau_hat = 0.0;
    /// z extrapolated to tau_hat.
    double z_at_tau_hat = 0.0;
};

/// Integrates the exposure system (nu, mu, gamma) with the classical four-stage scheme until
/// nu <= step. Requires P(C = 0) > 0 (PreconditionError). Throws NumericalError if the state
/// leaves its domain (non-finite values or nu above its initial bound).
OdeTrajectory ode_trajectory(const TypeDistribution& dist, const OdeOptions& options = {});

} // namespace cascade_lab
