#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/count.hpp>
#include <boost/accumulators/statistics/kurtosis.hpp>
#include <boost/accumulators/statistics/mean.hpp>
#include <boost/accumulators/statistics/skewness.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/variance.hpp>

namespace varsa {

/// Sample moments. `variance` divides by n - 1; skewness and excess
/// kurtosis are the plug-in estimators and are NaN for degenerate samples.
struct Moments
{
    std::uint64_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double skewness = std::numeric_limits<double>::quiet_NaN();
    double excess_kurtosis = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] double stddev() const { return std::sqrt(variance); }
    [[nodiscard]] double stderr_mean() const { return std::sqrt(variance / static_cast<double>(n)); }
};

/// Streaming moment accumulator backed by Boost.Accumulators.
class MomentAccumulator
{
  public:
    void operator()(double x) { acc_(x); }

    [[nodiscard]] std::uint64_t count() const { return boost::accumulators::count(acc_); }

    [[nodiscard]] Moments moments() const
    {
        namespace ba = boost::accumulators;
        Moments m;
        m.n = ba::count(acc_);
        if (m.n == 0) {
            return m;
        }
        m.mean = ba::mean(acc_);
        double const pop_var = ba::variance(acc_);
        m.variance = m.n > 1 ? pop_var * static_cast<double>(m.n) / static_cast<double>(m.n - 1)
                             : 0.0;
        // Relative guard against round-off on constant input.
        double const scale = std::max(1.0, m.mean * m.mean);
        if (pop_var > 1e-24 * scale) {
            m.skewness = ba::skewness(acc_);
            m.excess_kurtosis = ba::kurtosis(acc_);
        }
        return m;
    }

  private:
    boost::accumulators::accumulator_set<
        double, boost::accumulators::stats<
                    boost::accumulators::tag::count, boost::accumulators::tag::mean,
                    boost::accumulators::tag::variance, boost::accumulators::tag::skewness,
                    boost::accumulators::tag::kurtosis>>
        acc_;
};

} // namespace varsa
