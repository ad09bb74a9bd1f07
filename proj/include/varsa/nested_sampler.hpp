#pragma once

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>

#include "varsa/core_sa.hpp"
#include "varsa/rng.hpp"
#include "varsa/stats.hpp"

namespace varsa {

/**
 * A loss defined as a conditional expectation X0 = E[phi(Y, Z) | Y].
 *
 * - sample_outer(rng) draws the risk factor Y;
 * - sample_payoff(y, rng) draws phi(y, Z) with a fresh Z independent of Y;
 * - exact_loss(y) returns E[phi(y, Z)] when it is known in closed form.
 *
 * Implementations must be safe to call concurrently with distinct RNGs.
 */
template <class M>
concept LossModel = requires(M const& m, Rng& rng, typename M::outer_type const& y) {
    typename M::outer_type;
    { m.sample_outer(rng) } -> std::convertible_to<typename M::outer_type>;
    { m.sample_payoff(y, rng) } -> std::convertible_to<double>;
    { m.exact_loss(y) } -> std::convertible_to<std::optional<double>>;
};

/// Inner sample size K >= 1; the bias parameter is h = 1/K.
class BiasParam
{
  public:
    explicit BiasParam(std::uint64_t k) : k_(k)
    {
        if (k == 0) {
            throw std::invalid_argument("inner sample count must be at least 1");
        }
    }

    [[nodiscard]] std::uint64_t k() const noexcept { return k_; }
    [[nodiscard]] double h() const noexcept { return 1.0 / static_cast<double>(k_); }

    friend bool operator==(BiasParam const&, BiasParam const&) = default;

  private:
    std::uint64_t k_;
};

/// Coarse and fine losses of one multilevel innovation, both built on the
/// same outer draw.
struct CoupledDraw
{
    double coarse;          ///< X_{h_{l-1}}: mean of K M^{l-1} payoffs
    double fine;            ///< X_{h_l}: mean of K M^l payoffs, the coarse ones included
    double fine_sq_mean;    ///< mean of phi^2 over the K M^l fine payoffs
    std::uint64_t cost;     ///< K M^l
};

/// X_h: mean of k payoff draws on one fresh outer draw.
template <LossModel Model>
Innovation sample_biased(Model const& model, BiasParam bias, Rng& rng)
{
    auto const y = model.sample_outer(rng);
    double sum = 0.0;
    for (std::uint64_t j = 0; j < bias.k(); ++j) {
        sum += model.sample_payoff(y, rng);
    }
    return {sum / static_cast<double>(bias.k()), bias.k()};
}

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    if (b != 0 && a > std::numeric_limits<std::uint64_t>::max() / b) {
        throw std::overflow_error("inner sample count overflows 64 bits");
    }
    return a * b;
}

inline std::uint64_t checked_pow(std::uint64_t base, unsigned exp)
{
    std::uint64_t out = 1;
    for (unsigned i = 0; i < exp; ++i) {
        out = checked_mul(out, base);
    }
    return out;
}

} // namespace detail

/**
 * Perfectly correlated pair (X_{h_{l-1}}, X_{h_l}) with h_l = 1/(k0 M^l).
 *
 * The fine loss reuses the coarse inner draws and adds K M^{l-1} (M - 1)
 * fresh ones on the same outer draw. The running sum carries over, so the
 * fine value is bit-identical to `sample_biased` at K M^l fed the same
 * stream.
 */
template <LossModel Model>
CoupledDraw sample_coupled(Model const& model, std::uint64_t k0, std::uint64_t m,
                           unsigned level, Rng& rng)
{
    if (level < 1) {
        throw std::invalid_argument("coupled draws need level >= 1");
    }
    if (m < 2) {
        throw std::invalid_argument("refinement factor M must be at least 2");
    }
    if (k0 < 1) {
        throw std::invalid_argument("coarsest inner sample count must be at least 1");
    }
    std::uint64_t const n_coarse = detail::checked_mul(k0, detail::checked_pow(m, level - 1));
    std::uint64_t const n_fine = detail::checked_mul(n_coarse, m);

    auto const y = model.sample_outer(rng);
    double sum = 0.0;
    double sq = 0.0;
    for (std::uint64_t j = 0; j < n_coarse; ++j) {
        double const p = model.sample_payoff(y, rng);
        sum += p;
        sq += p * p;
    }
    double const coarse = sum / static_cast<double>(n_coarse);
    for (std::uint64_t j = n_coarse; j < n_fine; ++j) {
        double const p = model.sample_payoff(y, rng);
        sum += p;
        sq += p * p;
    }
    return {coarse, sum / static_cast<double>(n_fine), sq / static_cast<double>(n_fine), n_fine};
}

/// Moments of the rescaled level increment G_l = h_l^{-1/2} (fine - coarse).
template <LossModel Model>
Moments coupling_diagnostic(Model const& model, std::uint64_t k0, std::uint64_t m,
                            unsigned level, std::uint64_t n_pairs, Rng& rng)
{
    if (n_pairs < 2) {
        throw std::invalid_argument("coupling diagnostic needs at least two pairs");
    }
    double const scale =
        std::sqrt(static_cast<double>(detail::checked_mul(k0, detail::checked_pow(m, level))));
    MomentAccumulator acc;
    for (std::uint64_t i = 0; i < n_pairs; ++i) {
        auto const d = sample_coupled(model, k0, m, level, rng);
        acc(scale * (d.fine - d.coarse));
    }
    return acc.moments();
}

/// Wraps a model and counts payoff evaluations.
template <LossModel Model>
class CountingModel
{
  public:
    using outer_type = typename Model::outer_type;

    explicit CountingModel(Model const& inner) : inner_(inner) {}

    outer_type sample_outer(Rng& rng) const { return inner_.sample_outer(rng); }

    double sample_payoff(outer_type const& y, Rng& rng) const
    {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return inner_.sample_payoff(y, rng);
    }

    std::optional<double> exact_loss(outer_type const& y) const { return inner_.exact_loss(y); }

    [[nodiscard]] std::uint64_t calls() const noexcept
    {
        return calls_.load(std::memory_order_relaxed);
    }

  private:
    Model const& inner_;
    mutable std::atomic<std::uint64_t> calls_{0};
};

/// Innovation source for the exact loss X0 (requires `exact_loss`). Each
/// draw is booked as one evaluation.
template <LossModel Model>
Innovation sample_exact_loss(Model const& model, Rng& rng)
{
    auto const y = model.sample_outer(rng);
    auto const x = model.exact_loss(y);
    if (!x) {
        throw std::logic_error("model has no closed-form conditional expectation");
    }
    return {*x, 1};
}

} // namespace varsa
