#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "varsa/core_sa.hpp"
#include "varsa/nested_sampler.hpp"
#include "varsa/rng.hpp"
#include "varsa/theory.hpp"

namespace varsa {

namespace detail {

/// Ceiling that ignores round-off just above an integer.
inline std::uint64_t ceil_tol(long double x)
{
    if (!(x > 0.0L) || !std::isfinite(static_cast<double>(x))) {
        throw std::domain_error("iteration count is not a positive finite number");
    }
    long double const r = std::nearbyint(x);
    long double const c = std::fabs(x - r) <= 1e-12L * x ? r : std::ceil(x);
    if (c > static_cast<long double>(std::numeric_limits<std::uint64_t>::max() / 2)) {
        throw std::overflow_error("iteration count overflows 64 bits");
    }
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(c));
}

inline void require_accuracy(double epsilon)
{
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("accuracy epsilon must lie in (0, 1)");
    }
}

} // namespace detail

/// h_l = h0 / M^l.
inline BiasParam level_bias(BiasParam h0, std::uint64_t m, unsigned ell)
{
    if (m < 2) {
        throw std::invalid_argument("refinement factor M must be at least 2");
    }
    return BiasParam(detail::checked_mul(h0.k(), detail::checked_pow(m, ell)));
}

/// Smallest L with h0 / M^L <= epsilon.
inline unsigned levels_for_accuracy(double epsilon, BiasParam h0, std::uint64_t m)
{
    detail::require_accuracy(epsilon);
    if (m < 2) {
        throw std::invalid_argument("refinement factor M must be at least 2");
    }
    if (!(h0.h() > epsilon)) {
        throw std::invalid_argument("coarsest bias h0 must exceed epsilon");
    }
    unsigned ell = 0;
    long double h = h0.h();
    while (h > epsilon * (1.0L + 1e-12L)) {
        h /= static_cast<long double>(m);
        ++ell;
    }
    return ell;
}

struct SingleLevelParams
{
    BiasParam bias;
    std::uint64_t n_steps;
};

/// h = 1 / ceil(eps^{-1/beta}), n = h^{-2}.
inline SingleLevelParams nsa_params_for_accuracy(double epsilon, double beta)
{
    detail::require_accuracy(epsilon);
    if (!(beta > 0.5 && beta <= 1.0)) {
        throw std::invalid_argument("beta must lie in (1/2, 1]");
    }
    std::uint64_t const k = detail::ceil_tol(std::pow(static_cast<long double>(epsilon), -1.0L / beta));
    return {BiasParam(k), detail::checked_mul(k, k)};
}

/// h = 1 / ceil(1/eps), n = h^{-2}; independent of the step exponent.
inline SingleLevelParams ansa_params_for_accuracy(double epsilon)
{
    detail::require_accuracy(epsilon);
    std::uint64_t const k = detail::ceil_tol(1.0L / static_cast<long double>(epsilon));
    return {BiasParam(k), detail::checked_mul(k, k)};
}

/// Real-valued multilevel schedule before ceiling:
/// N_l = h_L^{-2/beta} (sum_l' h_l'^{-(2 beta - 1)/(2(1 + beta))})^{1/beta} h_l^{3/(2(1 + beta))}.
inline std::vector<long double> schedule_mlsa_real(BiasParam h0, std::uint64_t m, unsigned num_levels,
                                                   double beta)
{
    if (!(beta > 0.5 && beta <= 1.0)) {
        throw std::invalid_argument("beta must lie in (1/2, 1]");
    }
    if (m < 2) {
        throw std::invalid_argument("refinement factor M must be at least 2");
    }
    long double const b = beta;
    long double const a = (2.0L * b - 1.0L) / (2.0L * (1.0L + b));
    auto const h = [&](unsigned ell) {
        return static_cast<long double>(h0.h()) / std::pow(static_cast<long double>(m), ell);
    };
    long double sum = 0.0L;
    for (unsigned ell = 0; ell <= num_levels; ++ell) {
        sum += std::pow(h(ell), -a);
    }
    long double const lead = std::pow(h(num_levels), -2.0L / b) * std::pow(sum, 1.0L / b);
    std::vector<long double> out;
    for (unsigned ell = 0; ell <= num_levels; ++ell) {
        out.push_back(lead * std::pow(h(ell), 3.0L / (2.0L * (1.0L + b))));
    }
    return out;
}

/// Real-valued averaged multilevel schedule before ceiling:
/// N_l = h_L^{-2} (sum_l' h_l'^{-1/4}) h_l^{3/4}.
inline std::vector<long double> schedule_amlsa_real(BiasParam h0, std::uint64_t m, unsigned num_levels)
{
    if (m < 2) {
        throw std::invalid_argument("refinement factor M must be at least 2");
    }
    auto const h = [&](unsigned ell) {
        return static_cast<long double>(h0.h()) / std::pow(static_cast<long double>(m), ell);
    };
    long double sum = 0.0L;
    for (unsigned ell = 0; ell <= num_levels; ++ell) {
        sum += std::pow(h(ell), -0.25L);
    }
    long double const lead = sum / (h(num_levels) * h(num_levels));
    std::vector<long double> out;
    for (unsigned ell = 0; ell <= num_levels; ++ell) {
        out.push_back(lead * std::pow(h(ell), 0.75L));
    }
    return out;
}

namespace detail {

inline std::vector<std::uint64_t> ceil_all(std::vector<long double> const& real)
{
    std::vector<std::uint64_t> out;
    for (auto x : real) {
        out.push_back(ceil_tol(x));
    }
    return out;
}

} // namespace detail

inline std::vector<std::uint64_t> schedule_mlsa(BiasParam h0, std::uint64_t m, unsigned num_levels,
                                                double beta)
{
    level_bias(h0, m, num_levels);
    return detail::ceil_all(schedule_mlsa_real(h0, m, num_levels, beta));
}

inline std::vector<std::uint64_t> schedule_amlsa(BiasParam h0, std::uint64_t m, unsigned num_levels)
{
    level_bias(h0, m, num_levels);
    return detail::ceil_all(schedule_amlsa_real(h0, m, num_levels));
}

struct MlConfig
{
    BiasParam h0{1};
    std::uint64_t m = 2;
    unsigned num_levels = 0;
    LearningRate rate{1.0, 1.0};
    Confidence alpha{0.5};
    std::vector<std::uint64_t> schedule;
    bool averaged = false;
    double xi0 = 0.0;

    void validate() const
    {
        if (m < 2) {
            throw std::invalid_argument("refinement factor M must be at least 2");
        }
        if (schedule.size() != num_levels + std::size_t{1}) {
            throw std::invalid_argument("schedule must hold L + 1 iteration counts");
        }
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (schedule[i] == 0) {
                throw std::invalid_argument("level " + std::to_string(i) + " has zero iterations");
            }
            if (i >= 2 && schedule[i] > schedule[i - 1]) {
                throw std::invalid_argument("schedule must be non-increasing over levels >= 1");
            }
        }
        level_bias(h0, m, num_levels);
    }
};

struct LevelDiagnostics
{
    unsigned level = 0;
    std::uint64_t inner = 0;   ///< K M^l
    std::uint64_t steps = 0;
    double var_coarse = 0.0;   ///< 0 on level 0
    double var_fine = 0.0;
    double es_coarse = 0.0;
    double es_fine = 0.0;
    std::uint64_t cost = 0;

    [[nodiscard]] double var_increment() const { return var_fine - var_coarse; }
    [[nodiscard]] double es_increment() const { return es_fine - es_coarse; }
};

/// Trajectory estimates of the unknown covariance entries, collected during
/// a run.
struct RunMoments
{
    double var_pos_part = std::numeric_limits<double>::quiet_NaN();
    double var_indG = std::numeric_limits<double>::quiet_NaN();
    double g_scale2 = std::numeric_limits<double>::quiet_NaN();
};

struct RiskEstimate
{
    double var = 0.0;
    double es = 0.0;
    std::uint64_t cost = 0;
    std::vector<LevelDiagnostics> per_level;
    RunMoments moments;
};

/// Payoff evaluations of a multilevel run: N_0 K + sum_{l>=1} N_l K M^l.
inline std::uint64_t predicted_cost(BiasParam h0, std::uint64_t m,
                                    std::vector<std::uint64_t> const& schedule)
{
    std::uint64_t total = 0;
    for (unsigned ell = 0; ell < schedule.size(); ++ell) {
        std::uint64_t const c = detail::checked_mul(schedule[ell], level_bias(h0, m, ell).k());
        if (total > std::numeric_limits<std::uint64_t>::max() - c) {
            throw std::overflow_error("cost overflows 64 bits");
        }
        total += c;
    }
    return total;
}

/// Cost of a ceiled real schedule in floating point, for sweeps past 64 bits.
inline long double predicted_cost_real(BiasParam h0, std::uint64_t m,
                                       std::vector<long double> const& schedule)
{
    long double total = 0.0L;
    long double k = static_cast<long double>(h0.k());
    for (auto n : schedule) {
        long double const r = std::nearbyint(n);
        total += (std::fabs(n - r) <= 1e-12L * n ? r : std::ceil(n)) * k;
        k *= static_cast<long double>(m);
    }
    return total;
}

/**
 * Multilevel estimator. Level l draws from `rng.split(l)`. Level 0 runs one
 * chain at bias h0; each higher level runs a coarse and a fine chain in
 * lockstep on shared coupled draws. With `averaged` the VaR parts use the
 * running means of the iterates.
 */
template <LossModel Model>
RiskEstimate run_mlsa(Model const& model, MlConfig const& cfg, Rng const& rng)
{
    cfg.validate();
    RiskEstimate out;
    auto const pick = [&](SaState const& s) { return cfg.averaged ? s.xi_bar : s.xi; };

    {
        Rng level_rng = rng.split(0);
        PositivePartMoments pos;
        auto sampler = [&] { return sample_biased(model, cfg.h0, level_rng); };
        SaState const s = run_scheme(sampler, cfg.schedule[0], cfg.rate, cfg.alpha, cfg.xi0, pos);
        LevelDiagnostics d;
        d.inner = cfg.h0.k();
        d.steps = cfg.schedule[0];
        d.var_fine = pick(s);
        d.es_fine = s.chi;
        d.cost = s.cost;
        out.per_level.push_back(d);
        if (pos.count() >= 2) {
            out.moments.var_pos_part = pos.variance();
        }
    }

    for (unsigned ell = 1; ell <= cfg.num_levels; ++ell) {
        Rng level_rng = rng.split(ell);
        Rng gauss = level_rng.split(0x6a09e667f3bcc908ull);
        bool const finest = ell == cfg.num_levels;
        GQuantityAccumulator g(static_cast<double>(cfg.m));
        SaState coarse = SaState::start(cfg.xi0);
        SaState fine = SaState::start(cfg.xi0);
        for (std::uint64_t i = 0; i < cfg.schedule[ell]; ++i) {
            CoupledDraw const draw = sample_coupled(model, cfg.h0.k(), cfg.m, ell, level_rng);
            if (finest) {
                g(fine.xi, draw.fine, draw.fine_sq_mean - draw.fine * draw.fine,
                  standard_normal(gauss));
            }
            coarse = nsa_step(coarse, draw.coarse, cfg.rate, cfg.alpha);
            fine = nsa_step(fine, draw.fine, cfg.rate, cfg.alpha);
            fine.cost += draw.cost;
        }
        LevelDiagnostics d;
        d.level = ell;
        d.inner = level_bias(cfg.h0, cfg.m, ell).k();
        d.steps = cfg.schedule[ell];
        d.var_coarse = pick(coarse);
        d.var_fine = pick(fine);
        d.es_coarse = coarse.chi;
        d.es_fine = fine.chi;
        d.cost = fine.cost;
        out.per_level.push_back(d);
        if (finest) {
            out.moments.var_indG = g.var_indG();
            out.moments.g_scale2 = g.g_scale2();
        }
    }

    for (auto const& d : out.per_level) {
        out.var += d.var_increment();
        out.es += d.es_increment();
        out.cost += d.cost;
    }
    return out;
}

} // namespace varsa
