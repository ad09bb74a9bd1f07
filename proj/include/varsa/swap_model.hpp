#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "varsa/core_sa.hpp"
#include "varsa/gaussian.hpp"
#include "varsa/rng.hpp"

namespace varsa::swap {

/**
 * Payer swap on a rate following dS = kappa S dt + sigma dW, paying
 * dT_i (S_{T_{i-1}} - K) at each coupon date. The loss is measured on a
 * short position at horizon delta < T_1.
 */
struct SwapParams
{
    double s0 = 1.0;
    double r = 0.02;
    double kappa = 0.12;
    double sigma = 0.20;
    std::vector<double> coupon_times; ///< T_1 < ... < T_d, in years
    double horizon = 7.0 / 360.0;     ///< delta, in years
    double alpha = 0.85;
    double nominal_target = 100.0;    ///< value of each leg at inception

    [[nodiscard]] double maturity() const { return coupon_times.empty() ? 0.0 : coupon_times.back(); }

    /// Times from calendar inputs under the 30/360 convention.
    static std::vector<double> schedule_30_360(int maturity_months, int period_months)
    {
        if (period_months <= 0 || maturity_months <= 0 || maturity_months % period_months != 0) {
            throw std::invalid_argument("maturity must be a positive multiple of the coupon period");
        }
        std::vector<double> times;
        for (int mth = period_months; mth <= maturity_months; mth += period_months) {
            times.push_back(mth * 30.0 / 360.0);
        }
        return times;
    }

    static double days_30_360(int days) { return days / 360.0; }

    /// Case-study parameters: S0 = 1, r = 2%, kappa = 12%, sigma = 20%,
    /// quarterly coupons over one year, 7-day horizon, alpha = 85%.
    static SwapParams case_study()
    {
        SwapParams p;
        p.coupon_times = schedule_30_360(12, 3);
        p.horizon = days_30_360(7);
        return p;
    }

    void validate() const
    {
        if (coupon_times.empty()) {
            throw std::invalid_argument("swap needs at least one coupon date");
        }
        for (std::size_t i = 1; i < coupon_times.size(); ++i) {
            if (!(coupon_times[i] > coupon_times[i - 1])) {
                throw std::invalid_argument("coupon times must be strictly increasing");
            }
        }
        if (!(horizon > 0.0 && horizon < coupon_times.front())) {
            throw std::invalid_argument("risk horizon must lie in (0, T_1)");
        }
        if (!(sigma >= 0.0)) {
            throw std::invalid_argument("volatility must be non-negative");
        }
        if (!(s0 != 0.0)) {
            throw std::invalid_argument("initial rate must be nonzero");
        }
        Confidence{alpha};
    }

    friend bool operator==(SwapParams const&, SwapParams const&) = default;
};

/// Standard deviation of int_0^t e^{-kappa s} dW_s; tends to sqrt(t) as kappa -> 0.
inline double ou_scale(double kappa, double t)
{
    if (kappa == 0.0) {
        return std::sqrt(t);
    }
    return std::sqrt(-std::expm1(-2.0 * kappa * t) / (2.0 * kappa));
}

/// Quantities pinned down by the parameters.
struct SwapDerived
{
    double strike = 0.0;   ///< par strike
    double nominal = 0.0;  ///< nominal giving each leg `nominal_target` at inception
    double eta = 0.0;      ///< X0 has the law of eta * N(0, 1)
    double s2_inner = 0.0; ///< Var(phi(Y, Z) | Y), constant for this model
    double outer_scale = 0.0;           ///< std of Y
    std::vector<double> payoff_coeffs;  ///< c_i, i = 2..d: weight of (y + z_1 + ... + z_{i-1})
    std::vector<double> inner_scales;   ///< std of Z_1..Z_{d-1}
};

namespace detail {

inline double discount(double r, double t) { return std::exp(-r * t); }

inline double period(std::vector<double> const& times, std::size_t i)
{
    return times[i] - (i == 0 ? 0.0 : times[i - 1]);
}

inline double start_time(std::vector<double> const& times, std::size_t i)
{
    return i == 0 ? 0.0 : times[i - 1];
}

} // namespace detail

/// K = S0 sum D(T_i) dT_i e^{kappa T_{i-1}} / sum D(T_i) dT_i.
inline double par_strike(SwapParams const& p)
{
    if (p.coupon_times.empty()) {
        throw std::invalid_argument("par strike needs a non-empty coupon schedule");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < p.coupon_times.size(); ++i) {
        double const w = detail::discount(p.r, p.coupon_times[i]) * detail::period(p.coupon_times, i);
        num += w * std::exp(p.kappa * detail::start_time(p.coupon_times, i));
        den += w;
    }
    if (den == 0.0) {
        throw std::invalid_argument("discounted coupon weights sum to zero");
    }
    return p.s0 * num / den;
}

inline SwapDerived derive(SwapParams const& p)
{
    p.validate();
    auto const& t = p.coupon_times;
    std::size_t const d = t.size();

    SwapDerived out;
    out.strike = par_strike(p);
    double annuity = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        annuity += detail::discount(p.r, t[i]) * detail::period(t, i);
    }
    out.nominal = p.nominal_target / (out.strike * annuity);
    out.outer_scale = ou_scale(p.kappa, p.horizon);

    double coeff_sum = 0.0;
    for (std::size_t i = 1; i < d; ++i) {
        double const c = out.nominal * p.sigma * detail::discount(p.r, t[i]) *
                         detail::period(t, i) * std::exp(p.kappa * t[i - 1]);
        out.payoff_coeffs.push_back(c);
        coeff_sum += c;
    }
    out.eta = coeff_sum * out.outer_scale;

    // Z_1 covers (delta, T_1]; Z_j covers (T_{j-1}, T_j] for j >= 2.
    for (std::size_t j = 0; j + 1 < d; ++j) {
        double const span = j == 0 ? t[0] - p.horizon : detail::period(t, j);
        out.inner_scales.push_back(ou_scale(p.kappa, span));
    }
    // phi is linear in Z: Z_j enters every term i > j.
    double tail = coeff_sum;
    for (std::size_t j = 0; j < out.inner_scales.size(); ++j) {
        double const b = tail * out.inner_scales[j];
        out.s2_inner += b * b;
        tail -= out.payoff_coeffs[j];
    }
    return out;
}

/// Closed-form VaR and ES of the exact loss X0 ~ N(0, eta^2).
struct VarEs
{
    double var;
    double es;
};

inline VarEs analytic_var_es(double eta, Confidence alpha)
{
    if (!(eta > 0.0)) {
        throw std::invalid_argument("analytic VaR/ES needs eta > 0");
    }
    double const z = gaussian::quantile(alpha.value());
    return {eta * z, eta / alpha.tail() * gaussian::pdf(z)};
}

inline VarEs analytic_var_es(SwapParams const& p)
{
    return analytic_var_es(derive(p).eta, Confidence{p.alpha});
}

/// Nested-simulation view of the swap loss.
class SwapLossModel
{
  public:
    using outer_type = double;

    explicit SwapLossModel(SwapParams const& p) : params_(p), derived_(derive(p)) {}

    double sample_outer(Rng& rng) const { return derived_.outer_scale * standard_normal(rng); }

    double sample_payoff(double y, Rng& rng) const
    {
        double level = y;
        double payoff = 0.0;
        auto const n = derived_.payoff_coeffs.size();
        for (std::size_t i = 0; i < n; ++i) {
            level += derived_.inner_scales[i] * standard_normal(rng);
            payoff += derived_.payoff_coeffs[i] * level;
        }
        return payoff;
    }

    std::optional<double> exact_loss(double y) const
    {
        return derived_.eta / derived_.outer_scale * y;
    }

    /// X0 drawn directly as eta * N(0, 1).
    double sample_exact(Rng& rng) const { return derived_.eta * standard_normal(rng); }

    [[nodiscard]] SwapParams const& params() const noexcept { return params_; }
    [[nodiscard]] SwapDerived const& derived() const noexcept { return derived_; }

  private:
    SwapParams params_;
    SwapDerived derived_;
};

} // namespace varsa::swap
