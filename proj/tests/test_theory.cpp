#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "test_models.hpp"
#include "varsa/gaussian.hpp"
#include "varsa/swap_model.hpp"
#include "varsa/theory.hpp"

using namespace varsa;

namespace {

Confidence const kAlpha(0.85);

swap::SwapDerived const& swap_derived()
{
    static swap::SwapDerived const d = swap::derive(swap::SwapParams::case_study());
    return d;
}

ModelQuantities swap_q() { return swap_model_quantities(swap_derived(), kAlpha, 1.0 / 32, 2.0); }

/// Moments of (X - xi)^+ for X ~ N(0, sd^2) by quadrature.
std::array<double, 2> pos_part_quadrature(double sd, double xi)
{
    boost::math::quadrature::exp_sinh<double> q;
    auto dens = [&](double x) { return gaussian::pdf(x / sd) / sd; };
    double const m1 = q.integrate([&](double u) { return u * dens(xi + u); }, 1e-14);
    double const m2 = q.integrate([&](double u) { return u * u * dens(xi + u); }, 1e-14);
    return {m1, m2 - m1 * m1};
}

} // namespace

TEST_CASE("swap quantities agree with quadrature")
{
    auto const q = swap_q();
    double const eta = swap_derived().eta;
    auto const pp = pos_part_quadrature(eta, q.xi_star);
    CHECK(q.mean_pos_part == Catch::Approx(pp[0]).epsilon(1e-9));
    CHECK(q.var_pos_part == Catch::Approx(pp[1]).epsilon(1e-9));
    double const sd_h0 = std::sqrt(eta * eta + swap_derived().s2_inner / 32.0);
    auto const pp_h0 = pos_part_quadrature(sd_h0, sd_h0 * gaussian::quantile(0.85));
    CHECK(q.var_pos_part_h0 == Catch::Approx(pp_h0[1]).epsilon(1e-9));
    CHECK(q.f_at_xistar == Catch::Approx(0.110235).epsilon(1e-5));
    CHECK(q.var_pos_part / (0.15 * 0.15) == Catch::Approx(12.6136).epsilon(1e-4));
}

TEST_CASE("nested covariance")
{
    auto const q = swap_q();
    Cov2 const s = sigma_nsa(0.9, 0.1, q, kAlpha);
    CHECK(s.ve == 0.0);
    CHECK(s.vv == Catch::Approx(0.85 * 0.1 / (2.0 * q.f_at_xistar)));
    CHECK(s.ee == Catch::Approx(q.var_pos_part / 0.0225));

    double const g_opt = kAlpha.tail() / q.f_at_xistar;
    Cov2 const crit = sigma_nsa(1.0, g_opt, q, kAlpha);
    CHECK(crit.vv == Catch::Approx(0.85 * 0.15 / (q.f_at_xistar * q.f_at_xistar)).epsilon(1e-12));
    CHECK(crit.ve == Catch::Approx(0.85 * (q.chi_star - q.xi_star) / q.f_at_xistar));
    CHECK(crit.is_psd());

    CHECK_THROWS_AS(sigma_nsa(1.0, 0.5 * g_opt, q, kAlpha), std::domain_error);
    CHECK_THROWS_AS(sigma_nsa(0.5, 1.0, q, kAlpha), std::invalid_argument);
}

TEST_CASE("nested VaR variance blows up at the stability edge")
{
    auto const q = swap_q();
    double const edge = kAlpha.tail() / (2.0 * q.f_at_xistar);
    double prev = 0.0;
    for (double gap : {1.0, 1e-1, 1e-2, 1e-4, 1e-6, 1e-8}) {
        double const v = sigma_nsa(1.0, edge * (1.0 + gap), q, kAlpha).vv;
        CHECK(v > prev);
        prev = v;
    }
    CHECK(prev > 1e7);
}

TEST_CASE("averaged nested covariance")
{
    auto const q = swap_q();
    Cov2 const s = sigma_ansa(q, kAlpha);
    double const g_opt = kAlpha.tail() / q.f_at_xistar;
    CHECK(s.vv == Catch::Approx(sigma_nsa(1.0, g_opt, q, kAlpha).vv).epsilon(1e-12));
    CHECK(s.vv == Catch::Approx(10.4923).epsilon(1e-4));
    CHECK(s.ve == Catch::Approx(0.85 / 0.15 * q.mean_pos_part / q.f_at_xistar));
    CHECK(s.is_psd());
}

TEST_CASE("multilevel covariances are diagonal")
{
    auto const q = swap_q();
    for (double beta : {0.6, 0.9, 1.0}) {
        Cov2 const s = sigma_mlsa(beta, 1.0, 1.0 / 32, 2.0, q, kAlpha);
        CHECK(s.ve == 0.0);
        CHECK(s.is_psd());
    }
    Cov2 const a = sigma_amlsa(1.0 / 32, 2.0, q, kAlpha);
    CHECK(a.ve == 0.0);
    CHECK(a.is_psd());
    CHECK_THROWS_AS(sigma_mlsa(1.0, 0.1, 1.0 / 32, 2.0, q, kAlpha), std::domain_error);
}

TEST_CASE("averaged multilevel asymptotic ES term vanishes as M grows")
{
    auto q = swap_q();
    q.var_pos_part_h0 = 0.0;
    double const tail2 = kAlpha.tail() * kAlpha.tail();
    double prev = std::numeric_limits<double>::infinity();
    for (double m : {2.0, 16.0, 1e3, 1e6, 1e12, 1e40}) {
        double const v = sigma_amlsa(1.0 / 32, m, q, kAlpha).ee;
        CHECK(v < prev);
        CHECK(v * std::pow(m, 0.25) ==
              Catch::Approx(std::pow(1.0 / 32, 0.25) * q.var_indG / tail2).epsilon(1e-12));
        prev = v;
    }
    CHECK(prev < 1e-6);
}

TEST_CASE("multilevel ES entry at beta = 1 without the G term")
{
    auto q = swap_q();
    q.var_indG = 0.0;
    double const tail2 = kAlpha.tail() * kAlpha.tail();
    for (double m : {2.0, 3.0, 8.0}) {
        double const r = std::pow(m, 0.25);
        double const want = (r - 1.0) / r * std::pow(1.0 / 32, -0.75) * q.var_pos_part_h0 / tail2;
        CHECK(sigma_mlsa(1.0, 1.0, 1.0 / 32, m, q, kAlpha).ee == Catch::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("every covariance is symmetric PSD on a parameter grid")
{
    auto const q = swap_q();
    for (double beta : {0.55, 0.75, 0.9, 1.0}) {
        for (double g : {0.5, 1.0, 5.0}) {
            if (beta == 1.0 && 2.0 * q.f_at_xistar * g <= kAlpha.tail()) {
                CHECK_THROWS_AS(sigma_nsa(beta, g, q, kAlpha), std::domain_error);
                continue;
            }
            CHECK(sigma_nsa(beta, g, q, kAlpha).is_psd());
            for (double m : {2.0, 4.0}) {
                CHECK(sigma_mlsa(beta, g, 1.0 / 16, m, q, kAlpha).is_psd());
            }
        }
    }
    CHECK(sigma_amlsa(1.0 / 8, 3.0, q, kAlpha).is_psd());
    Cov2 bad{1.0, 2.0, 1.0};
    CHECK_FALSE(bad.is_psd());
}

TEST_CASE("trajectory variance of the positive part")
{
    std::vector<std::pair<double, double>> constant(50, {1.0, 3.0});
    CHECK(mc_var_pos_part(constant) == 0.0);
    std::vector<std::pair<double, double>> one{{0.0, 1.0}};
    CHECK_THROWS_AS(mc_var_pos_part(one), std::logic_error);

    auto const q = swap_q();
    swap::SwapLossModel const m(swap::SwapParams::case_study());
    Rng rng(31, 0);
    int const n = 400000;
    std::vector<std::pair<double, double>> traj;
    traj.reserve(n);
    double s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        double const x = m.sample_exact(rng);
        traj.emplace_back(q.xi_star, x);
        double const p = std::max(x - q.xi_star, 0.0) - q.mean_pos_part;
        s4 += p * p * p * p / n;
    }
    double const se = std::sqrt((s4 - q.var_pos_part * q.var_pos_part) / n);
    CHECK(std::abs(mc_var_pos_part(traj) - q.var_pos_part) < 3.0 * se);
}

TEST_CASE("G-quantity estimators")
{
    LearningRate const rate(1.0, 0.9);
    {
        testing::NoInnerNoise const m;
        Rng rng(32, 0);
        auto const g = mc_g_quantities(m, BiasParam(8), 2.0, 1000, rate, kAlpha, 0.0, rng);
        CHECK(g.var_indG == Catch::Approx(0.0).margin(1e-12));
        CHECK(g.g_scale2 == Catch::Approx(0.0).margin(1e-12));
    }
    swap::SwapLossModel const m(swap::SwapParams::case_study());
    double const s2 = m.derived().s2_inner;
    auto const q = swap_q();
    Rng rng(33, 0);
    auto const g = mc_g_quantities(m, BiasParam(256), 2.0, 100000, rate, kAlpha, q.xi_star, rng);
    CHECK(g.g_scale2 == Catch::Approx(s2).epsilon(0.02));

    // Successive halvings of h_L agree within their sampling error.
    auto const a = mc_g_quantities(m, BiasParam(64), 2.0, 100000, rate, kAlpha, q.xi_star, rng);
    auto const b = mc_g_quantities(m, BiasParam(128), 2.0, 100000, rate, kAlpha, q.xi_star, rng);
    double const w4 = 0.15 * 3.0 * s2 * s2;
    double const se = std::sqrt((w4 - q.var_indG * q.var_indG) / 100000.0);
    CHECK(std::abs(a.var_indG - b.var_indG) < 3.0 * std::sqrt(2.0) * se);
    CHECK(b.var_indG == Catch::Approx(q.var_indG).epsilon(0.1));
    CHECK_THROWS_AS(mc_g_quantities(m, BiasParam(2), 2.0, 1, rate, kAlpha, 0.0, rng), std::invalid_argument);
}

TEST_CASE("first-order bias coefficients")
{
    ModelQuantities zero;
    zero.f_at_xistar = 1.0;
    auto const z = bias_limit(zero, kAlpha);
    CHECK(z.var_coeff == 0.0);
    CHECK(z.es_coeff == 0.0);

    auto const q = swap_q();
    double const eta = swap_derived().eta, s2 = swap_derived().s2_inner;
    double const h = 1.0 / 1024;
    double const sd_h = std::sqrt(eta * eta + h * s2);
    double const v_fd = (gaussian::cdf(q.xi_star / sd_h) - gaussian::cdf(q.xi_star / eta)) / h;
    CHECK(q.v_at_xistar == Catch::Approx(v_fd).epsilon(0.01));

    double const zq = gaussian::quantile(0.85);
    auto const b = bias_limit(q, kAlpha);
    CHECK(b.var_coeff == Catch::Approx((sd_h - eta) * zq / h).epsilon(0.01));
    CHECK(b.es_coeff == Catch::Approx((sd_h - eta) * gaussian::pdf(zq) / 0.15 / h).epsilon(0.01));
    CHECK(b.var_coeff == Catch::Approx(20.52).epsilon(1e-3));

    auto const biased = swap_biased_var_es(swap_derived(), kAlpha, 1.0 / 256);
    CHECK(biased.var == Catch::Approx(2.2709).epsilon(1e-4));
}
