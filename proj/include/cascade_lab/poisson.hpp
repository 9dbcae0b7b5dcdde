#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace cascade_lab {

/// Infection threshold: a natural number, or infinity (the vertex can never be infected).
class Threshold {
public:
    enum class Kind : std::uint8_t { Finite, Infinite };

    constexpr Threshold() noexcept = default;
    constexpr explicit Threshold(std::uint32_t count) noexcept : count_(count) {}

    static constexpr Threshold infinity() noexcept
    {
        Threshold t;
        t.kind_ = Kind::Infinite;
        return t;
    }

    constexpr Kind kind() const noexcept { return kind_; }
    constexpr bool is_infinite() const noexcept { return kind_ == Kind::Infinite; }
    constexpr bool is_zero() const noexcept { return kind_ == Kind::Finite && count_ == 0; }

    /// Finite count; throws DomainError on infinity.
    std::uint32_t value() const;

    /// Threshold after an ex-post mark: mark 0 forces threshold 0.
    constexpr Threshold with_mark(bool mark) const noexcept { return mark ? *this : Threshold{0}; }

    friend constexpr bool operator==(const Threshold&, const Threshold&) noexcept = default;
    friend constexpr std::strong_ordering operator<=>(const Threshold& a, const Threshold& b) noexcept
    {
        if (a.kind_ != b.kind_)
            return a.is_infinite() ? std::strong_ordering::greater : std::strong_ordering::less;
        return a.is_infinite() ? std::strong_ordering::equal : a.count_ <=> b.count_;
    }

    /// "inf" or the decimal count.
    std::string to_string() const;

private:
    Kind kind_ = Kind::Finite;
    std::uint32_t count_ = 0;
};

/// e^{-x} x^k / k!, evaluated through the saddle-point form so large k neither overflows nor
/// loses relative accuracy. Throws DomainError for x < 0.
double poisson_pmf(std::uint64_t k, double x);

/// P(Poi(x) >= r). Zero for an infinite threshold. Throws DomainError for x < 0.
double poisson_tail(Threshold r, double x);

namespace detail {

/// Stirling-series remainder lgamma(n+1) - (n+1/2)log(n) + n - log(sqrt(2 pi)).
double stirling_error(double n);

/// Deviance term x log(x/mean) + mean - x, accurate when x is close to mean.
double deviance_term(double x, double mean);

/// Upper-tail sum starting from the term pmf(r, x); requires r >= x.
double upper_tail_from(double first_term, double r, double x);

/// Lower sum pmf(0..r-1, x) starting from pmf(r-1, x) and recursing downwards; requires r < x.
double lower_sum_from(double last_term, double r, double x);

} // namespace detail

} // namespace cascade_lab
