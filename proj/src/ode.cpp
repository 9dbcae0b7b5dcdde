#include "cascade_lab/errors.hpp"
#include "cascade_lab/theory.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace cascade_lab {

namespace {

// One (w-, w+, m) class with m >= 1; gamma^0..gamma^{m-1} live at state[offset .. offset + m).
struct OdeClass {
    double w_minus;
    double w_plus;
    std::uint32_t threshold;
    double mass;
    std::size_t offset;
};

struct OdeSystem {
    std::vector<OdeClass> classes;
    std::size_t dimension = 0;
    // State layout: [nu, mu, z, gamma...].
    static constexpr std::size_t kNu = 0;
    static constexpr std::size_t kMu = 1;
    static constexpr std::size_t kZ = 2;
    static constexpr std::size_t kGamma = 3;

    void derivative(const std::vector<double>& y, std::vector<double>& dy) const
    {
        const double rate = y[kMu] / y[kNu];
        double nu_gain = 0.0;
        double mu_gain = 0.0;
        for (const auto& c : classes) {
            const double hit_rate = c.w_minus * rate;
            const double* gamma = y.data() + c.offset;
            double* d = dy.data() + c.offset;
            for (std::uint32_t l = 0; l < c.threshold; ++l) {
                const double inflow = l == 0 ? 0.0 : gamma[l - 1];
                d[l] = (inflow - gamma[l]) * hit_rate;
            }
            const double infected = gamma[c.threshold - 1] * hit_rate;
            nu_gain += infected;
            mu_gain += c.w_plus * infected;
        }
        dy[kNu] = -1.0 + nu_gain;
        dy[kMu] = -rate + mu_gain;
        dy[kZ] = rate;
    }
};

bool finite_state(const std::vector<double>& y)
{
    for (const double v : y)
        if (!std::isfinite(v))
            return false;
    return true;
}

} // namespace

OdeTrajectory ode_trajectory(const TypeDistribution& dist, const OdeOptions& options)
{
    if (!(options.step > 0.0) || !std::isfinite(options.step))
        throw DomainError("ODE step must be positive");
    const double nu0 = dist.zero_threshold_mass();
    if (!(nu0 > 0.0))
        throw PreconditionError("the exposure system needs P(C = 0) > 0");

    OdeSystem system;
    std::map<std::tuple<double, double, std::uint32_t>, double> class_mass;
    double mu0 = 0.0;
    for (const auto& a : dist.atoms()) {
        if (a.threshold.is_infinite() || a.prob == 0.0)
            continue;
        if (a.threshold.is_zero()) {
            mu0 += a.w_plus * a.prob;
            continue;
        }
        class_mass[{a.w_minus, a.w_plus, a.threshold.value()}] += a.prob;
    }
    std::size_t offset = OdeSystem::kGamma;
    OdeTrajectory traj;
    traj.step = options.step;
    for (const auto& [key, mass] : class_mass) {
        const auto& [wm, wp, m] = key;
        system.classes.push_back(OdeClass{wm, wp, m, mass, offset});
        for (std::uint32_t l = 0; l < m; ++l)
            traj.buckets.push_back(OdeBucket{wm, wp, m, l, mass});
        offset += m;
    }
    system.dimension = offset;

    std::vector<double> y(system.dimension, 0.0);
    y[OdeSystem::kNu] = nu0;
    y[OdeSystem::kMu] = mu0;
    for (const auto& c : system.classes)
        y[c.offset] = c.mass;

    auto closed_form_nu = [&](double tau, double z) {
        double v = nu0 - tau;
        for (const auto& c : system.classes)
            v += c.mass * poisson_tail(Threshold{c.threshold}, c.w_minus * z);
        return v;
    };
    auto store = [&](double tau, const std::vector<double>& state, bool with_gamma) {
        OdePoint p;
        p.tau = tau;
        p.nu = state[OdeSystem::kNu];
        p.mu = state[OdeSystem::kMu];
        p.z = state[OdeSystem::kZ];
        p.nu_closed_form = closed_form_nu(tau, p.z);
        if (with_gamma)
            p.gamma.assign(state.begin() + OdeSystem::kGamma, state.end());
        traj.points.push_back(std::move(p));
    };
    auto diverged = [&](double tau, const std::vector<double>& state, const char* what) {
        std::ostringstream msg;
        msg << "exposure ODE diverged (" << what << ") at tau=" << tau << ": nu=" << state[OdeSystem::kNu]
            << " mu=" << state[OdeSystem::kMu] << " z=" << state[OdeSystem::kZ];
        const std::size_t from = traj.points.size() > 5 ? traj.points.size() - 5 : 0;
        for (std::size_t i = from; i < traj.points.size(); ++i)
            msg << "\n  tau=" << traj.points[i].tau << " nu=" << traj.points[i].nu << " mu=" << traj.points[i].mu
                << " z=" << traj.points[i].z;
        return NumericalError(msg.str());
    };

    const double h = options.step;
    std::vector<double> k1(system.dimension), k2(system.dimension), k3(system.dimension), k4(system.dimension);
    std::vector<double> stage(system.dimension), next(system.dimension);
    double tau = 0.0;
    std::size_t steps = 0;
    store(tau, y, options.gamma_stride != 0);

    auto stage_ok = [](const std::vector<double>& s) { return s[OdeSystem::kNu] > 0.0; };
    while (y[OdeSystem::kNu] > h) {
        system.derivative(y, k1);
        for (std::size_t i = 0; i < y.size(); ++i)
            stage[i] = y[i] + 0.5 * h * k1[i];
        if (!stage_ok(stage))
            break;
        system.derivative(stage, k2);
        for (std::size_t i = 0; i < y.size(); ++i)
            stage[i] = y[i] + 0.5 * h * k2[i];
        if (!stage_ok(stage))
            break;
        system.derivative(stage, k3);
        for (std::size_t i = 0; i < y.size(); ++i)
            stage[i] = y[i] + h * k3[i];
        if (!stage_ok(stage))
            break;
        system.derivative(stage, k4);
        for (std::size_t i = 0; i < y.size(); ++i)
            next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!finite_state(next))
            throw diverged(tau + h, next, "non-finite state");
        if (next[OdeSystem::kNu] > 1.0 + 1e-9)
            throw diverged(tau + h, next, "nu above 1");
        if (tau + h > 1.0 + h)
            throw diverged(tau + h, next, "tau beyond 1");
        y.swap(next);
        tau += h;
        ++steps;
        store(tau, y, options.gamma_stride != 0 && steps % options.gamma_stride == 0);
    }

    std::vector<double> slope(system.dimension);
    system.derivative(y, slope);
    const double nu_slope = slope[OdeSystem::kNu];
    const double remaining = nu_slope < 0.0 ? -y[OdeSystem::kNu] / nu_slope : 0.0;
    traj.tau_hat = tau + remaining;
    traj.z_at_tau_hat = y[OdeSystem::kZ] + slope[OdeSystem::kZ] * remaining;
    if (options.gamma_stride != 0 && traj.points.back().gamma.empty())
        traj.points.back().gamma.assign(y.begin() + OdeSystem::kGamma, y.end());
    return traj;
}

} // namespace cascade_lab
