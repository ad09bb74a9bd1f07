#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "varsa/core_sa.hpp"
#include "varsa/mlsa.hpp"
#include "varsa/nested_sampler.hpp"
#include "varsa/rng.hpp"
#include "varsa/stats.hpp"
#include "varsa/theory.hpp"

namespace varsa {

enum class Scheme { sa, asa, nsa, ansa, mlsa, amlsa };

inline char const* to_string(Scheme s)
{
    switch (s) {
    case Scheme::sa: return "sa";
    case Scheme::asa: return "asa";
    case Scheme::nsa: return "nsa";
    case Scheme::ansa: return "ansa";
    case Scheme::mlsa: return "mlsa";
    case Scheme::amlsa: return "amlsa";
    }
    return "?";
}

inline Scheme parse_scheme(std::string const& name)
{
    for (Scheme s : {Scheme::sa, Scheme::asa, Scheme::nsa, Scheme::ansa, Scheme::mlsa, Scheme::amlsa}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw std::invalid_argument("unknown scheme '" + name + "'");
}

inline bool is_multilevel(Scheme s) { return s == Scheme::mlsa || s == Scheme::amlsa; }
inline bool is_averaged(Scheme s) { return s == Scheme::asa || s == Scheme::ansa || s == Scheme::amlsa; }
inline bool is_exact(Scheme s) { return s == Scheme::sa || s == Scheme::asa; }

/// Fully resolved parameters of one scheme run.
struct SchemeConfig
{
    Scheme scheme = Scheme::nsa;
    Confidence alpha{0.5};
    LearningRate rate{1.0, 1.0};
    double xi0 = 0.0;
    BiasParam bias{1};            ///< single-level bias; h_L for multilevel schemes
    std::uint64_t n_steps = 1;    ///< single-level iteration count
    BiasParam h0{1};
    std::uint64_t m = 2;
    unsigned num_levels = 0;
    std::vector<std::uint64_t> schedule;

    [[nodiscard]] MlConfig ml_config() const
    {
        return MlConfig{h0, m, num_levels, rate, alpha, schedule, scheme == Scheme::amlsa, xi0};
    }

    /// Payoff evaluations the run will spend.
    [[nodiscard]] std::uint64_t predicted_cost() const
    {
        if (is_multilevel(scheme)) {
            return varsa::predicted_cost(h0, m, schedule);
        }
        return is_exact(scheme) ? n_steps : detail::checked_mul(n_steps, bias.k());
    }
};

/**
 * Resolve a scheme at accuracy epsilon. `map_beta` selects the single-level
 * map of the non-averaged schemes and the multilevel schedule exponent; the
 * averaged maps do not use it.
 */
inline SchemeConfig resolve_scheme(Scheme scheme, double epsilon, double map_beta, LearningRate rate,
                                   Confidence alpha, BiasParam h0 = BiasParam(1),
                                   std::uint64_t m = 2, double xi0 = 0.0)
{
    SchemeConfig c;
    c.scheme = scheme;
    c.alpha = alpha;
    c.rate = rate;
    c.xi0 = xi0;
    switch (scheme) {
    case Scheme::sa:
    case Scheme::nsa: {
        auto const p = nsa_params_for_accuracy(epsilon, map_beta);
        c.bias = p.bias;
        c.n_steps = p.n_steps;
        break;
    }
    case Scheme::asa:
    case Scheme::ansa: {
        auto const p = ansa_params_for_accuracy(epsilon);
        c.bias = p.bias;
        c.n_steps = p.n_steps;
        break;
    }
    case Scheme::mlsa:
    case Scheme::amlsa:
        c.h0 = h0;
        c.m = m;
        c.num_levels = levels_for_accuracy(epsilon, h0, m);
        c.bias = level_bias(h0, m, c.num_levels);
        c.schedule = scheme == Scheme::mlsa ? schedule_mlsa(h0, m, c.num_levels, map_beta)
                                            : schedule_amlsa(h0, m, c.num_levels);
        break;
    }
    return c;
}

/// Renormalized error = base^{-exponent} * raw error, per coordinate.
struct ScalingSpec
{
    double var_exponent = 1.0;
    double es_exponent = 1.0;
    double base = 1.0;

    [[nodiscard]] std::array<double, 2> factors() const
    {
        return {std::pow(base, -var_exponent), std::pow(base, -es_exponent)};
    }
};

/// CLT renormalization of a resolved scheme; the exact schemes use the
/// rates of their nested counterparts at the mapped h.
inline ScalingSpec clt_scaling(SchemeConfig const& c)
{
    double const beta = c.rate.beta();
    double const h = c.bias.h();
    switch (c.scheme) {
    case Scheme::sa:
    case Scheme::nsa: return {beta, 1.0, h};
    case Scheme::asa:
    case Scheme::ansa: return {1.0, 1.0, h};
    case Scheme::mlsa:
        return {1.0, 1.0 / beta + (2.0 * beta - 1.0) / (4.0 * beta * (1.0 + beta)), h};
    case Scheme::amlsa: return {1.0, 9.0 / 8.0, h};
    }
    return {};
}

/// One run of any scheme. Single-level schemes draw from `rng.split(0)`,
/// so a multilevel run with L = 0 replays the nested run exactly.
template <LossModel Model>
RiskEstimate run_once(Model const& model, SchemeConfig const& c, Rng const& rng)
{
    if (is_multilevel(c.scheme)) {
        return run_mlsa(model, c.ml_config(), rng);
    }
    Rng stream = rng.split(0);
    PositivePartMoments pos;
    SaState s;
    if (is_exact(c.scheme)) {
        auto sampler = [&] { return sample_exact_loss(model, stream); };
        s = run_scheme(sampler, c.n_steps, c.rate, c.alpha, c.xi0, pos);
    } else {
        auto sampler = [&] { return sample_biased(model, c.bias, stream); };
        s = run_scheme(sampler, c.n_steps, c.rate, c.alpha, c.xi0, pos);
    }
    RiskEstimate out;
    out.var = is_averaged(c.scheme) ? s.xi_bar : s.xi;
    out.es = s.chi;
    out.cost = s.cost;
    LevelDiagnostics d;
    d.inner = is_exact(c.scheme) ? 0 : c.bias.k();
    d.steps = c.n_steps;
    d.var_fine = out.var;
    d.es_fine = out.es;
    d.cost = out.cost;
    out.per_level.push_back(d);
    if (pos.count() >= 2) {
        out.moments.var_pos_part = pos.variance();
    }
    return out;
}

struct Replication
{
    std::uint64_t index = 0;
    RiskEstimate estimate;
    std::array<double, 2> error{};  ///< renormalized (VaR, ES) error
};

using StreamFactory = std::function<Rng(std::uint64_t)>;

/**
 * Runs `fn(i, stream(i))` for i < count on up to `workers` threads and
 * returns results in index order. The first failure by index is rethrown
 * with that index attached.
 */
template <class Fn>
auto parallel_indexed(std::uint64_t count, unsigned workers, StreamFactory const& stream, Fn&& fn)
    -> std::vector<decltype(fn(std::uint64_t{}, stream(0)))>
{
    using Result = decltype(fn(std::uint64_t{}, stream(0)));
    std::vector<std::optional<Result>> slots(count);
    std::atomic<std::uint64_t> next{0};
    std::mutex err_mutex;
    std::uint64_t err_index = std::numeric_limits<std::uint64_t>::max();
    std::string err_what;

    auto work = [&] {
        for (std::uint64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                slots[i].emplace(fn(i, stream(i)));
            } catch (std::exception const& e) {
                std::lock_guard lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err_what = e.what();
                }
            }
        }
    };

    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    auto const n_threads = static_cast<unsigned>(std::min<std::uint64_t>(workers, count));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back(work);
        }
    }
    if (err_index != std::numeric_limits<std::uint64_t>::max()) {
        throw std::runtime_error("replication " + std::to_string(err_index) + " failed: " + err_what);
    }
    std::vector<Result> out;
    out.reserve(count);
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

/// R replications with caller-supplied streams.
template <LossModel Model>
std::vector<Replication> run_replications(Model const& model, SchemeConfig const& c,
                                          std::array<double, 2> target, ScalingSpec const& scaling,
                                          std::uint64_t replications, StreamFactory const& stream,
                                          unsigned workers = 1)
{
    if (replications < 2) {
        throw std::invalid_argument("a replication study needs at least two runs");
    }
    auto const f = scaling.factors();
    return parallel_indexed(replications, workers, stream, [&](std::uint64_t i, Rng const& rng) {
        Replication r;
        r.index = i;
        r.estimate = run_once(model, c, rng);
        r.error = {f[0] * (r.estimate.var - target[0]), f[1] * (r.estimate.es - target[1])};
        return r;
    });
}

/// R replications; replication i uses `replication_stream(master_seed, i)`.
template <LossModel Model>
std::vector<Replication> run_replications(Model const& model, SchemeConfig const& c,
                                          std::array<double, 2> target, ScalingSpec const& scaling,
                                          std::uint64_t replications, std::uint64_t master_seed,
                                          unsigned workers = 1)
{
    return run_replications(
        model, c, target, scaling, replications,
        [master_seed](std::uint64_t i) { return replication_stream(master_seed, i); }, workers);
}

using Samples = std::vector<std::array<double, 2>>;

inline Samples errors_of(std::vector<Replication> const& reps)
{
    Samples out;
    out.reserve(reps.size());
    for (auto const& r : reps) {
        out.push_back(r.error);
    }
    return out;
}

struct GaussianFit
{
    std::array<double, 2> mu{};
    Cov2 sigma;
    std::uint64_t r = 0;
};

/// Sample mean and unbiased sample covariance.
inline GaussianFit fit_gaussian(Samples const& x)
{
    if (x.size() < 2) {
        throw std::invalid_argument("fitting a Gaussian needs at least two samples");
    }
    GaussianFit fit;
    fit.r = x.size();
    auto const n = static_cast<double>(x.size());
    for (auto const& p : x) {
        fit.mu[0] += p[0];
        fit.mu[1] += p[1];
    }
    fit.mu[0] /= n;
    fit.mu[1] /= n;
    for (auto const& p : x) {
        double const a = p[0] - fit.mu[0];
        double const b = p[1] - fit.mu[1];
        fit.sigma.vv += a * a;
        fit.sigma.ve += a * b;
        fit.sigma.ee += b * b;
    }
    fit.sigma.vv /= n - 1.0;
    fit.sigma.ve /= n - 1.0;
    fit.sigma.ee /= n - 1.0;
    return fit;
}

/// Chi-square(2) 95% quantile, -2 ln 0.05.
inline constexpr double kChi2Quantile95 = 5.991464547;

struct Ellipse
{
    std::array<double, 2> center{};
    std::array<double, 2> semi_axes{};  ///< major, minor
    double angle = 0.0;                 ///< major axis direction, radians in (-pi/2, pi/2]
};

inline Ellipse ellipse_95(GaussianFit const& fit)
{
    Cov2 const& s = fit.sigma;
    if (!s.is_psd()) {
        throw std::invalid_argument("covariance is not positive semidefinite");
    }
    auto const lambda = s.eigenvalues();
    Ellipse e;
    e.center = fit.mu;
    e.semi_axes = {std::sqrt(std::max(lambda[0], 0.0) * kChi2Quantile95),
                   std::sqrt(std::max(lambda[1], 0.0) * kChi2Quantile95)};
    e.angle = 0.5 * std::atan2(2.0 * s.ve, s.vv - s.ee);
    return e;
}

struct Histogram
{
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::uint64_t> counts;
};

struct MarginalReport
{
    Moments moments;
    bool degenerate = false;
    bool gaussian_like = false;  ///< |skew| < 0.25 and |excess kurtosis| < 0.6
    Histogram histogram;
};

inline constexpr std::size_t kHistogramBins = 50;

/// Moment diagnostics and a 50-bin histogram per marginal.
inline std::array<MarginalReport, 2> normality_report(Samples const& x)
{
    if (x.size() < 100) {
        throw std::invalid_argument("normality report needs at least 100 samples");
    }
    std::array<MarginalReport, 2> out;
    for (std::size_t c = 0; c < 2; ++c) {
        MomentAccumulator acc;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto const& p : x) {
            acc(p[c]);
            lo = std::min(lo, p[c]);
            hi = std::max(hi, p[c]);
        }
        auto& r = out[c];
        r.moments = acc.moments();
        r.degenerate = std::isnan(r.moments.skewness);
        r.gaussian_like = !r.degenerate && std::abs(r.moments.skewness) < 0.25 &&
                          std::abs(r.moments.excess_kurtosis) < 0.6;
        r.histogram.lo = lo;
        r.histogram.hi = hi;
        r.histogram.counts.assign(kHistogramBins, 0);
        double const width = (hi - lo) / static_cast<double>(kHistogramBins);
        for (auto const& p : x) {
            std::size_t bin = width > 0.0 ? static_cast<std::size_t>((p[c] - lo) / width) : 0;
            r.histogram.counts[std::min(bin, kHistogramBins - 1)] += 1;
        }
    }
    return out;
}

/// Theoretical covariance of the renormalized errors of a resolved scheme.
inline Cov2 theoretical_sigma(SchemeConfig const& c, ModelQuantities const& q)
{
    switch (c.scheme) {
    case Scheme::sa:
    case Scheme::nsa: return sigma_nsa(c.rate.beta(), c.rate.gamma1(), q, c.alpha);
    case Scheme::asa:
    case Scheme::ansa: return sigma_ansa(q, c.alpha);
    case Scheme::mlsa:
        return sigma_mlsa(c.rate.beta(), c.rate.gamma1(), c.h0.h(), static_cast<double>(c.m), q,
                          c.alpha);
    case Scheme::amlsa: return sigma_amlsa(c.h0.h(), static_cast<double>(c.m), q, c.alpha);
    }
    return {};
}

struct BiasedReference
{
    double var = 0.0;
    double es = 0.0;
    double var_stderr = 0.0;
    double es_stderr = 0.0;
    std::uint64_t runs = 0;
};

/// (xi^h*, chi^h*) as the mean of `runs` independent nested runs at bias h.
template <LossModel Model>
BiasedReference biased_reference(Model const& model, BiasParam bias, std::uint64_t n_steps,
                                 std::uint64_t runs, LearningRate rate, Confidence alpha,
                                 std::uint64_t master_seed, unsigned workers = 1, double xi0 = 0.0)
{
    SchemeConfig c;
    c.scheme = Scheme::nsa;
    c.alpha = alpha;
    c.rate = rate;
    c.xi0 = xi0;
    c.bias = bias;
    c.n_steps = n_steps;
    auto const reps = run_replications(model, c, {0.0, 0.0}, ScalingSpec{0.0, 0.0, 1.0}, runs,
                                       master_seed, workers);
    MomentAccumulator v;
    MomentAccumulator e;
    for (auto const& r : reps) {
        v(r.estimate.var);
        e(r.estimate.es);
    }
    auto const mv = v.moments();
    auto const me = e.moments();
    return {mv.mean, me.mean, mv.stderr_mean(), me.stderr_mean(), runs};
}

} // namespace varsa
