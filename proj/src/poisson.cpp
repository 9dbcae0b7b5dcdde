#include "cascade_lab/poisson.hpp"

#include "cascade_lab/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace cascade_lab {

std::uint32_t Threshold::value() const
{
    if (is_infinite())
        throw DomainError("threshold is infinite and has no finite value");
    return count_;
}

std::string Threshold::to_string() const
{
    return is_infinite() ? std::string("inf") : std::to_string(count_);
}

namespace detail {

namespace {

// stirling_error(k / 2) for k = 0..30.
constexpr std::array<double, 31> kStirlingHalves = {
    0.0,
    0.1534264097200273452913848,
    0.0810614667953272582196702,
    0.0548141210519176538961390,
    0.0413406959554092940938221,
    0.03316287351993628748511048,
    0.02767792568499833914878929,
    0.02374616365629749597132920,
    0.02079067210376509311152277,
    0.01848845053267318523077934,
    0.01664469118982119216319487,
    0.01513497322191737887351255,
    0.01387612882307074799874573,
    0.01281046524292022692424986,
    0.01189670994589177009505572,
    0.01110455975820691732662991,
    0.010411265261972096497478567,
    0.009799416126158803298389475,
    0.009255462182712732917728637,
    0.008768700134139385462952823,
    0.008330563433362871256469318,
    0.007934114564314020547248100,
    0.007573675487951840794972024,
    0.007244554301320383179543912,
    0.006942840107209529865664152,
    0.006665247032707682442354394,
    0.006408994188004207068439631,
    0.006171712263039457647532867,
    0.005951370112758847735624416,
    0.005746216513010115682023589,
    0.005554733551962801371038690,
};

constexpr double kTailEps = 1e-17;

} // namespace

double stirling_error(double n)
{
    constexpr double s0 = 1.0 / 12.0;
    constexpr double s1 = 1.0 / 360.0;
    constexpr double s2 = 1.0 / 1260.0;
    constexpr double s3 = 1.0 / 1680.0;
    constexpr double s4 = 1.0 / 1188.0;

    if (n <= 15.0) {
        const double twice = n + n;
        if (twice == std::floor(twice))
            return kStirlingHalves[static_cast<std::size_t>(twice)];
        return std::lgamma(n + 1.0) - (n + 0.5) * std::log(n) + n - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    const double nn = n * n;
    if (n > 500.0)
        return (s0 - s1 / nn) / n;
    if (n > 80.0)
        return (s0 - (s1 - s2 / nn) / nn) / n;
    if (n > 35.0)
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

double deviance_term(double x, double mean)
{
    if (std::fabs(x - mean) < 0.1 * (x + mean)) {
        double v = (x - mean) / (x + mean);
        double s = (x - mean) * v;
        double ej = 2.0 * x * v;
        v *= v;
        for (int j = 1; j < 1000; ++j) {
            ej *= v;
            const double next = s + ej / (2 * j + 1);
            if (next == s)
                return next;
            s = next;
        }
        return s;
    }
    return x * std::log(x / mean) + mean - x;
}

double upper_tail_from(double first_term, double r, double x)
{
    double term = first_term;
    double sum = term;
    for (double k = r + 1.0; term > 0.0; k += 1.0) {
        term *= x / k;
        sum += term;
        const double ratio = x / (k + 1.0);
        if (term * ratio < kTailEps * sum * (1.0 - ratio))
            break;
    }
    return sum;
}

double lower_sum_from(double last_term, double r, double x)
{
    double term = last_term;
    double sum = term;
    for (double k = r - 1.0; k > 0.0; k -= 1.0) {
        term *= k / x;
        sum += term;
        const double ratio = (k - 1.0) / x;
        if (term * ratio < kTailEps * sum * (1.0 - ratio))
            break;
    }
    return sum;
}

} // namespace detail

double poisson_pmf(std::uint64_t k, double x)
{
    if (!(x >= 0.0))
        throw DomainError("poisson_pmf: rate must be non-negative, got " + std::to_string(x));
    if (x == 0.0)
        return k == 0 ? 1.0 : 0.0;
    if (k == 0)
        return std::exp(-x);
    const auto kd = static_cast<double>(k);
    return std::exp(-detail::stirling_error(kd) - detail::deviance_term(kd, x)) /
           std::sqrt(2.0 * std::numbers::pi * kd);
}

double poisson_tail(Threshold r, double x)
{
    if (!(x >= 0.0))
        throw DomainError("poisson_tail: rate must be non-negative, got " + std::to_string(x));
    if (r.is_infinite())
        return 0.0;
    const std::uint32_t count = r.value();
    if (count == 0)
        return 1.0;
    if (x == 0.0)
        return 0.0;
    const auto rd = static_cast<double>(count);
    if (rd >= x)
        return detail::upper_tail_from(poisson_pmf(count, x), rd, x);
    return 1.0 - detail::lower_sum_from(poisson_pmf(count - 1, x), rd, x);
}

} // namespace cascade_lab
