#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace varsa::gaussian {

inline double pdf(double x) noexcept
{
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double cdf(double x) noexcept
{
    return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2));
}

/// Inverse standard normal cdf, p in (0, 1).
inline double quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

} // namespace varsa::gaussian
