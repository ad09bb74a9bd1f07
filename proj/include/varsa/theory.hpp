#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include "varsa/core_sa.hpp"
#include "varsa/gaussian.hpp"
#include "varsa/nested_sampler.hpp"
#include "varsa/rng.hpp"
#include "varsa/swap_model.hpp"

namespace varsa {

/// Symmetric 2x2 matrix [[vv, ve], [ve, ee]] over the (VaR, ES) pair.
struct Cov2
{
    double vv = 0.0;
    double ve = 0.0;
    double ee = 0.0;

    /// Eigenvalues, largest first.
    [[nodiscard]] std::array<double, 2> eigenvalues() const
    {
        double const mid = 0.5 * (vv + ee);
        double const rad = std::hypot(0.5 * (vv - ee), ve);
        return {mid + rad, mid - rad};
    }

    [[nodiscard]] bool is_psd(double tol = 1e-12) const { return eigenvalues()[1] >= -tol; }

    friend bool operator==(Cov2 const&, Cov2 const&) = default;
};

/// Model constants entering the asymptotic covariances and bias terms.
/// Fields a caller cannot compute are left at 0.
struct ModelQuantities
{
    double f_at_xistar = 0.0;     ///< f_{X0}(xi*)
    double xi_star = 0.0;
    double chi_star = 0.0;
    double mean_pos_part = 0.0;   ///< E[(X0 - xi*)^+]
    double var_pos_part = 0.0;    ///< Var((X0 - xi*)^+)
    double var_pos_part_h0 = 0.0; ///< Var((X_{h0} - xi^{h0}*)^+)
    double e_absG_fG = 0.0;       ///< E[|G| f_G(xi*)]
    double var_indG = 0.0;        ///< Var(1{X0 > xi*} G)
    double v_at_xistar = 0.0;     ///< first-order cdf bias v(xi*)
    double v_integral = 0.0;      ///< int_{xi*}^inf v
};

namespace detail {

inline void require_beta(double beta, double lo, bool lo_open, double hi, bool hi_closed)
{
    bool const ok = (lo_open ? beta > lo : beta >= lo) && (hi_closed ? beta <= hi : beta < hi);
    if (!ok) {
        throw std::invalid_argument("beta = " + std::to_string(beta) + " outside the admissible range");
    }
}

inline double var_denominator(double beta, double gamma1, double f, Confidence alpha)
{
    double const den = 2.0 * f - (beta == 1.0 ? alpha.tail() / gamma1 : 0.0);
    if (!(den > 0.0)) {
        throw std::domain_error("2 f(xi*) gamma1 <= 1 - alpha: VaR variance is unbounded");
    }
    return den;
}

} // namespace detail

/// Asymptotic covariance of the nested scheme at renormalization
/// (h^{-beta}, h^{-1}).
inline Cov2 sigma_nsa(double beta, double gamma1, ModelQuantities const& q, Confidence alpha)
{
    detail::require_beta(beta, 0.5, true, 1.0, true);
    double const a = alpha.value();
    bool const critical = beta == 1.0;
    Cov2 s;
    s.vv = a * gamma1 / detail::var_denominator(beta, gamma1, q.f_at_xistar, alpha);
    s.ve = critical ? a * (q.chi_star - q.xi_star) / q.f_at_xistar : 0.0;
    s.ee = q.var_pos_part / (alpha.tail() * alpha.tail());
    return s;
}

/// Asymptotic covariance of the averaged nested scheme at renormalization h^{-1}.
/// Free of the step schedule.
inline Cov2 sigma_ansa(ModelQuantities const& q, Confidence alpha)
{
    if (!(q.f_at_xistar > 0.0)) {
        throw std::invalid_argument("density at the VaR must be positive");
    }
    double const a = alpha.value();
    double const f = q.f_at_xistar;
    return {a * alpha.tail() / (f * f), a / alpha.tail() * q.mean_pos_part / f,
            q.var_pos_part / (alpha.tail() * alpha.tail())};
}

/// Asymptotic covariance of the multilevel scheme; diagonal.
inline Cov2 sigma_mlsa(double beta, double gamma1, double h0, double m, ModelQuantities const& q,
                       Confidence alpha)
{
    detail::require_beta(beta, 0.5, true, 1.0, true);
    double const tail = alpha.tail();
    double const a = (2.0 * beta - 1.0) / (2.0 * (1.0 + beta));
    double const ma = std::pow(m, a);
    Cov2 s;
    s.vv = gamma1 * q.e_absG_fG /
           (tail * detail::var_denominator(beta, gamma1, q.f_at_xistar, alpha));
    s.ee = std::pow(h0, a) * std::pow(ma - 1.0, 1.0 / beta) / (tail * tail) *
           (q.var_pos_part_h0 / h0 / std::pow(m, a / beta) + q.var_indG / (ma - 1.0));
    return s;
}

/// Asymptotic covariance of the averaged multilevel scheme; diagonal and
/// free of the step schedule. Stated for beta in (8/9, 1).
inline Cov2 sigma_amlsa(double h0, double m, ModelQuantities const& q, Confidence alpha)
{
    double const tail2 = alpha.tail() * alpha.tail();
    double const damp = 1.0 - std::pow(m, -0.25);
    Cov2 s;
    s.vv = q.e_absG_fG / (tail2 * damp);
    s.ee = std::pow(h0, -0.375) * std::sqrt(damp) * q.var_pos_part_h0 / tail2 +
           std::pow(h0, 0.25) * q.var_indG / (tail2 * std::pow(m, 0.25));
    return s;
}

/// First-order bias coefficients: xi^h* - xi* ~ var_coeff h and
/// chi^h* - chi* ~ es_coeff h.
struct BiasCoefficients
{
    double var_coeff;
    double es_coeff;
};

inline BiasCoefficients bias_limit(ModelQuantities const& q, Confidence alpha)
{
    if (!(q.f_at_xistar > 0.0)) {
        throw std::invalid_argument("density at the VaR must be positive");
    }
    return {-q.v_at_xistar / q.f_at_xistar, -q.v_integral / alpha.tail()};
}

/**
 * Plug-in moments of (X^{(k)} - xi_{k-1})^+ along a run. Pass as the
 * observer of `run_scheme`; `variance()` estimates Var((X0 - xi*)^+).
 */
class PositivePartMoments
{
  public:
    void operator()(double xi_prev, double x) noexcept
    {
        double const p = std::max(x - xi_prev, 0.0);
        ++n_;
        double const d = p - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (p - mean_);
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return n_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }

    /// Divides by the step count, as the trajectory estimator does.
    [[nodiscard]] double variance() const
    {
        if (n_ < 2) {
            throw std::logic_error("positive-part variance needs at least two steps");
        }
        return m2_ / static_cast<double>(n_);
    }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Plug-in estimate of Var((X0 - xi*)^+) from a recorded trajectory of
/// (xi_{k-1}, X^{(k)}) pairs.
template <class Range>
double mc_var_pos_part(Range const& trajectory)
{
    PositivePartMoments acc;
    for (auto const& [xi_prev, x] : trajectory) {
        acc(xi_prev, x);
    }
    return acc.variance();
}

/**
 * Accumulates the multilevel G-quantities along a chain driven by the
 * finest bias h_L: G^{(k)} = ((M - 1) s_k^2)^{1/2} N_k with s_k^2 the inner
 * sample variance of the k-th draw, and 1{X^{(k)} > xi_{k-1}} G^{(k)}.
 */
class GQuantityAccumulator
{
  public:
    explicit GQuantityAccumulator(double m) : m_(m) {}

    /// `inner_var` is the plug-in inner variance (mean phi^2 - X^2).
    void operator()(double xi_prev, double x, double inner_var, double normal) noexcept
    {
        double const scale2 = (m_ - 1.0) * std::max(inner_var, 0.0);
        double const g = std::sqrt(scale2) * normal;
        double const ind_g = x > xi_prev ? g : 0.0;
        ++n_;
        double const d = ind_g - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (ind_g - mean_);
        scale2_sum_ += scale2;
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return n_; }
    /// Var(1{X0 > xi*} G), plug-in.
    [[nodiscard]] double var_indG() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }
    /// Mean of (M - 1) s_k^2, the squared scale of G.
    [[nodiscard]] double g_scale2() const
    {
        return n_ > 0 ? scale2_sum_ / static_cast<double>(n_) : 0.0;
    }

  private:
    double m_;
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double scale2_sum_ = 0.0;
};

struct GQuantities
{
    double var_indG;
    double g_scale2;
};

/// Estimates of Var(1{X0 > xi*} G) and of the G scale from a chain of
/// `n_samples` steps at bias h_L.
template <LossModel Model>
GQuantities mc_g_quantities(Model const& model, BiasParam h_l, double m, std::uint64_t n_samples,
                            LearningRate const& rate, Confidence alpha, double xi0, Rng& rng)
{
    if (n_samples < 2) {
        throw std::invalid_argument("G-quantity estimation needs at least two samples");
    }
    GQuantityAccumulator acc(m);
    Rng gauss = rng.split(0x6a09e667f3bcc908ull);
    SaState s = SaState::start(xi0);
    auto const k = static_cast<double>(h_l.k());
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        auto const y = model.sample_outer(rng);
        double sum = 0.0;
        double sq = 0.0;
        for (std::uint64_t j = 0; j < h_l.k(); ++j) {
            double const p = model.sample_payoff(y, rng);
            sum += p;
            sq += p * p;
        }
        double const x = sum / k;
        acc(s.xi, x, sq / k - x * x, standard_normal(gauss));
        s = nsa_step(s, x, rate, alpha);
    }
    return {acc.var_indG(), acc.g_scale2()};
}

namespace detail {

/// E[(X - xi)^+] and Var((X - xi)^+) for X ~ N(0, sd^2), xi = sd z.
inline std::array<double, 2> gaussian_pos_part(double sd, double z, double tail)
{
    double const fz = gaussian::pdf(z);
    double const m1 = sd * (fz - z * tail);
    double const m2 = sd * sd * ((1.0 + z * z) * tail - z * fz);
    return {m1, m2 - m1 * m1};
}

} // namespace detail

/**
 * Closed-form model quantities for the swap loss.
 *
 * X_h is N(0, eta^2 + h s^2) with s^2 = Var(phi | Y); the limit increment G
 * is N(0, (M - 1) s^2) independent of X0, so f_G = f_{X0} and
 * Var(1{X0 > xi*} G) = (1 - alpha)(M - 1) s^2.
 */
inline ModelQuantities swap_model_quantities(swap::SwapDerived const& d, Confidence alpha, double h0,
                                             double m)
{
    double const z = gaussian::quantile(alpha.value());
    double const eta = d.eta;
    double const s2 = d.s2_inner;
    double const tail = alpha.tail();

    ModelQuantities q;
    q.xi_star = eta * z;
    q.chi_star = eta / tail * gaussian::pdf(z);
    q.f_at_xistar = gaussian::pdf(z) / eta;
    auto const pp = detail::gaussian_pos_part(eta, z, tail);
    q.mean_pos_part = pp[0];
    q.var_pos_part = pp[1];
    q.var_pos_part_h0 = detail::gaussian_pos_part(std::sqrt(eta * eta + h0 * s2), z, tail)[1];
    double const g_sd = std::sqrt((m - 1.0) * s2);
    q.e_absG_fG = q.f_at_xistar * g_sd * std::sqrt(2.0 / std::numbers::pi);
    q.var_indG = tail * g_sd * g_sd;
    // d/dh Phi(xi / sqrt(eta^2 + h s^2)) at h = 0.
    q.v_at_xistar = -s2 * q.xi_star / (2.0 * eta * eta * eta) * gaussian::pdf(z);
    q.v_integral = -s2 * gaussian::pdf(z) / (2.0 * eta);
    return q;
}

/// Exact biased VaR/ES of the swap loss at bias h.
inline swap::VarEs swap_biased_var_es(swap::SwapDerived const& d, Confidence alpha, double h)
{
    return swap::analytic_var_es(std::sqrt(d.eta * d.eta + h * d.s2_inner), alpha);
}

} // namespace varsa
