#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace varsa {

/// Confidence level alpha of the VaR/ES pair, 0 < alpha < 1.
class Confidence
{
  public:
    explicit Confidence(double alpha) : alpha_(alpha)
    {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw std::invalid_argument("confidence level must lie in (0, 1), got " +
                                        std::to_string(alpha));
        }
    }

    [[nodiscard]] double value() const noexcept { return alpha_; }
    [[nodiscard]] double tail() const noexcept { return 1.0 - alpha_; }

  private:
    double alpha_;
};

/**
 * Power step schedule gamma_n = gamma1 * (offset + n)^(-beta), n >= 1.
 *
 * offset = 0 is the textbook schedule; positive offsets damp the first steps.
 * Convergence of the VaR recursion at beta = 1 additionally needs gamma1 to
 * exceed a model constant that is not computable in practice; the schedule
 * does not try to check it.
 */
class LearningRate
{
  public:
    LearningRate(double gamma1, double beta, std::uint64_t offset = 0)
        : gamma1_(gamma1), beta_(beta), offset_(offset)
    {
        if (!(gamma1 > 0.0)) {
            throw std::invalid_argument("learning rate scale gamma1 must be positive");
        }
        if (!(beta > 0.5 && beta <= 1.0)) {
            throw std::invalid_argument("learning rate exponent beta must lie in (1/2, 1], got " +
                                        std::to_string(beta));
        }
    }

    [[nodiscard]] double operator()(std::uint64_t n) const noexcept
    {
        return gamma1_ * std::pow(static_cast<double>(offset_ + n), -beta_);
    }

    [[nodiscard]] double gamma1() const noexcept { return gamma1_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

  private:
    double gamma1_;
    double beta_;
    std::uint64_t offset_;
};

/// State of the two-time-scale VaR/ES recursion after `n` steps.
struct SaState
{
    double xi = 0.0;     ///< VaR iterate
    double chi = 0.0;    ///< ES iterate
    std::uint64_t n = 0; ///< steps taken
    double xi_bar = 0.0; ///< running mean of xi_1..xi_n
    std::uint64_t cost = 0;

    static SaState start(double xi0) noexcept { return SaState{xi0, 0.0, 0, 0.0, 0}; }
};

/// One loss draw fed to the recursion, with the number of payoff
/// evaluations spent producing it.
struct Innovation
{
    double x;
    std::uint64_t cost;
};

/// VaR gradient field: 1 - 1{x >= xi} / (1 - alpha). Ties count as exceedances.
inline double h1(double xi, double x, Confidence alpha) noexcept
{
    return x >= xi ? 1.0 - 1.0 / alpha.tail() : 1.0;
}

/// ES field: chi - (xi + (x - xi)^+ / (1 - alpha)).
inline double h2(double xi, double chi, double x, Confidence alpha) noexcept
{
    return chi - (xi + std::max(x - xi, 0.0) / alpha.tail());
}

/// Advance the recursion by one innovation. The ES update reads the VaR
/// iterate from before this step.
inline SaState nsa_step(SaState const& s, double x, LearningRate const& rate,
                        Confidence alpha) noexcept
{
    SaState next = s;
    next.n = s.n + 1;
    auto const k = static_cast<double>(next.n);
    next.xi = s.xi - rate(next.n) * h1(s.xi, x, alpha);
    next.chi = s.chi - h2(s.xi, s.chi, x, alpha) / k;
    next.xi_bar = s.xi_bar + (next.xi - s.xi_bar) / k;
    return next;
}

template <class S>
concept InnovationSource = requires(S& s) {
    { s() } -> std::convertible_to<Innovation>;
};

/// Observer hook receiving (xi_{k-1}, X^{(k)}) at every step.
template <class O>
concept StepObserver = std::invocable<O&, double, double>;

struct NoObserver
{
    void operator()(double, double) const noexcept {}
};

/**
 * Run `n_steps` steps of the recursion from xi0 (chi0 = 0).
 *
 * Reports the final state; `cost` accumulates the cost of every innovation.
 */
template <InnovationSource Sampler, StepObserver Observer = NoObserver>
SaState run_scheme(Sampler&& sampler, std::uint64_t n_steps, LearningRate const& rate,
                   Confidence alpha, double xi0 = 0.0, Observer&& observe = {})
{
    if (n_steps == 0) {
        throw std::invalid_argument("run_scheme needs at least one step");
    }
    SaState s = SaState::start(xi0);
    for (std::uint64_t i = 0; i < n_steps; ++i) {
        Innovation const in = sampler();
        observe(s.xi, in.x);
        s = nsa_step(s, in.x, rate, alpha);
        s.cost += in.cost;
    }
    return s;
}

} // namespace varsa
