#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace stcert
{

/// Exact non-negative fraction of integer counts. A zero denominator is
/// treated as the rate of an empty log and compares equal to 0.
struct Rational
{
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d)
    {
        if (d < 0 || n < 0)
            throw std::invalid_argument("Rational expects non-negative counts");
        if (d == 0)
        {
            num = 0;
            den = 1;
            return;
        }
        const auto g = std::gcd(num, den);
        if (g > 1)
        {
            num /= g;
            den /= g;
        }
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend Rational operator+(const Rational& a, const Rational& b)
    {
        return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
    }
    friend Rational operator-(const Rational& a, const Rational& b)
    {
        // Clamped: callers only subtract parts from their total.
        const auto n = a.num * b.den - b.num * a.den;
        return Rational(n < 0 ? 0 : n, a.den * b.den);
    }
    friend bool operator==(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
};

} // namespace stcert
