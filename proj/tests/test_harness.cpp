#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "test_models.hpp"
#include "varsa/harness.hpp"
#include "varsa/swap_model.hpp"

using namespace varsa;

namespace {

Samples gaussian_pairs(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed, 0);
    Samples x(n);
    for (auto& p : x) {
        p = {standard_normal(rng), standard_normal(rng)};
    }
    return x;
}

SchemeConfig small_nsa()
{
    return resolve_scheme(Scheme::nsa, 1.0 / 8, 0.9, LearningRate(1.0, 0.9), Confidence(0.85));
}

} // namespace

TEST_CASE("scheme names")
{
    for (Scheme s : {Scheme::sa, Scheme::asa, Scheme::nsa, Scheme::ansa, Scheme::mlsa, Scheme::amlsa}) {
        CHECK(parse_scheme(to_string(s)) == s);
    }
    CHECK_THROWS_AS(parse_scheme("foo"), std::invalid_argument);
}

TEST_CASE("CLT scalings")
{
    LearningRate const r(1.0, 0.9);
    Confidence const a(0.85);
    auto const nsa = clt_scaling(resolve_scheme(Scheme::nsa, 1.0 / 64, 0.9, r, a));
    CHECK(nsa.var_exponent == 0.9);
    CHECK(nsa.es_exponent == 1.0);
    CHECK(nsa.base == 1.0 / 102);
    auto const ansa = clt_scaling(resolve_scheme(Scheme::ansa, 1.0 / 64, 0.9, r, a));
    CHECK(ansa.var_exponent == 1.0);
    CHECK(ansa.base == 1.0 / 64);
    auto const ml = clt_scaling(resolve_scheme(Scheme::mlsa, 1.0 / 256, 0.9, r, a, BiasParam(32), 2));
    CHECK(ml.base == 1.0 / 256);
    CHECK(ml.es_exponent == Catch::Approx(1.0 / 0.9 + 0.8 / (4.0 * 0.9 * 1.9)));
    auto const aml = clt_scaling(resolve_scheme(Scheme::amlsa, 1.0 / 256, 0.9, r, a, BiasParam(32), 2));
    CHECK(aml.es_exponent == 1.125);
    CHECK(ScalingSpec{0.5, 1.0, 0.25}.factors() == std::array<double, 2>{2.0, 4.0});
}

TEST_CASE("identical streams give identical rows")
{
    swap::SwapLossModel const m(swap::SwapParams::case_study());
    auto const reps = run_replications(m, small_nsa(), {0.0, 0.0}, ScalingSpec{}, 2,
                                       [](std::uint64_t) { return Rng(5, 5); });
    CHECK(reps[0].estimate.var == reps[1].estimate.var);
    CHECK(reps[0].estimate.es == reps[1].estimate.es);
    CHECK(reps[0].error == reps[1].error);
}

TEST_CASE("parallel and serial replications agree bitwise")
{
    swap::SwapLossModel const m(swap::SwapParams::case_study());
    for (Scheme s : {Scheme::nsa, Scheme::amlsa}) {
        SchemeConfig const c =
            resolve_scheme(s, 1.0 / 16, 0.9, LearningRate(1.0, 0.95), Confidence(0.85), BiasParam(4), 2);
        auto const serial = run_replications(m, c, {2.0, 3.0}, clt_scaling(c), 24, 99, 1);
        auto const parallel = run_replications(m, c, {2.0, 3.0}, clt_scaling(c), 24, 99, 4);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(serial[i].index == i);
            CHECK(serial[i].estimate.var == parallel[i].estimate.var);
            CHECK(serial[i].estimate.es == parallel[i].estimate.es);
            CHECK(serial[i].error == parallel[i].error);
            CHECK(serial[i].estimate.cost == parallel[i].estimate.cost);
        }
    }
}

TEST_CASE("failures name the first failing replication")
{
    testing::Throwing const m;
    SchemeConfig c = small_nsa();
    try {
        run_replications(m, c, {0.0, 0.0}, ScalingSpec{}, 8, 1, 4);
        FAIL("expected a failure");
    } catch (std::runtime_error const& e) {
        CHECK(std::string(e.what()).find("replication 0") != std::string::npos);
        CHECK(std::string(e.what()).find("outer draw failed") != std::string::npos);
    }
    swap::SwapLossModel const ok(swap::SwapParams::case_study());
    CHECK_THROWS_AS(run_replications(ok, c, {0.0, 0.0}, ScalingSpec{}, 1, 1), std::invalid_argument);
}

TEST_CASE("exact-scheme errors shrink like n^{-1/2}")
{
    testing::AdditiveNoise const m;
    Confidence const alpha(0.85);
    auto spread = [&](std::uint64_t n) {
        SchemeConfig c;
        c.scheme = Scheme::sa;
        c.alpha = alpha;
        c.rate = LearningRate(1.0, 0.9);
        c.n_steps = n;
        auto const reps = run_replications(m, c, {0.0, 0.0}, ScalingSpec{}, 400, 7);
        return fit_gaussian(errors_of(reps)).sigma.ee;
    };
    double const ratio = spread(1000) / spread(16000);
    CHECK(std::sqrt(ratio) == Catch::Approx(4.0).epsilon(0.15));
}

TEST_CASE("Gaussian fit")
{
    CHECK_THROWS_AS(fit_gaussian(Samples{{1.0, 2.0}}), std::invalid_argument);
    GaussianFit const c = fit_gaussian(Samples(10, {1.5, -2.0}));
    CHECK(c.mu == std::array<double, 2>{1.5, -2.0});
    CHECK(c.sigma == Cov2{});

    GaussianFit const g = fit_gaussian(gaussian_pairs(5000, 41));
    CHECK(std::abs(g.mu[0]) < 0.06);
    CHECK(std::abs(g.mu[1]) < 0.06);
    CHECK(std::abs(g.sigma.vv - 1.0) < 0.08);
    CHECK(std::abs(g.sigma.ee - 1.0) < 0.08);

    Samples two{{0.0, 0.0}, {2.0, 4.0}};
    GaussianFit const u = fit_gaussian(two);
    CHECK(u.sigma.vv == 2.0);
    CHECK(u.sigma.ve == 4.0);
    CHECK(u.sigma.ee == 8.0);
}

TEST_CASE("renormalization commutes with fitting")
{
    Samples raw = gaussian_pairs(1000, 42);
    double const a = 3.7, b = -0.45;
    Samples scaled = raw;
    for (auto& p : scaled) {
        p = {a * p[0], b * p[1]};
    }
    GaussianFit const f = fit_gaussian(raw);
    GaussianFit const s = fit_gaussian(scaled);
    CHECK(s.mu[0] == Catch::Approx(a * f.mu[0]).epsilon(1e-10));
    CHECK(s.mu[1] == Catch::Approx(b * f.mu[1]).epsilon(1e-10));
    CHECK(s.sigma.vv == Catch::Approx(a * a * f.sigma.vv).epsilon(1e-10));
    CHECK(s.sigma.ve == Catch::Approx(a * b * f.sigma.ve).epsilon(1e-10));
    CHECK(s.sigma.ee == Catch::Approx(b * b * f.sigma.ee).epsilon(1e-10));
}

TEST_CASE("ellipse geometry")
{
    GaussianFit f;
    f.sigma = {1.0, 0.0, 1.0};
    Ellipse e = ellipse_95(f);
    CHECK(e.semi_axes[0] == Catch::Approx(2.4477).epsilon(1e-4));
    CHECK(e.semi_axes[1] == Catch::Approx(2.4477).epsilon(1e-4));

    f.sigma = {4.0, 0.0, 1.0};
    e = ellipse_95(f);
    CHECK(e.semi_axes[0] == Catch::Approx(2.0 * std::sqrt(kChi2Quantile95)));
    CHECK(e.semi_axes[1] == Catch::Approx(std::sqrt(kChi2Quantile95)));
    CHECK(e.angle == 0.0);

    f.sigma = {1.0, 2.0, 1.0};
    CHECK_THROWS_AS(ellipse_95(f), std::invalid_argument);
}

TEST_CASE("ellipse agrees with a general eigen solver")
{
    GaussianFit f;
    f.mu = {8.47, -12.01};
    f.sigma = {12.30, 10.82, 264.10};
    Ellipse const e = ellipse_95(f);

    Eigen::Matrix2d s;
    s << 12.30, 10.82, 10.82, 264.10;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(s);
    auto const lam = solver.eigenvalues();   // ascending
    auto const vec = solver.eigenvectors();
    CHECK(e.semi_axes[0] == Catch::Approx(std::sqrt(lam(1) * kChi2Quantile95)).epsilon(1e-12));
    CHECK(e.semi_axes[1] == Catch::Approx(std::sqrt(lam(0) * kChi2Quantile95)).epsilon(1e-12));
    double const major = std::atan(vec(1, 1) / vec(0, 1));
    CHECK(std::remainder(e.angle - major, std::numbers::pi) == Catch::Approx(0.0).margin(1e-12));
    CHECK(e.center == f.mu);
}

TEST_CASE("ellipse follows a rotation of the cloud")
{
    Samples raw = gaussian_pairs(2000, 43);
    for (auto& p : raw) {
        p = {3.0 * p[0], 0.7 * p[1] + 0.2 * p[0]};
    }
    double const theta = 0.6;
    Samples rot = raw;
    for (auto& p : rot) {
        p = {std::cos(theta) * p[0] - std::sin(theta) * p[1], std::sin(theta) * p[0] + std::cos(theta) * p[1]};
    }
    Ellipse const a = ellipse_95(fit_gaussian(raw));
    Ellipse const b = ellipse_95(fit_gaussian(rot));
    CHECK(b.semi_axes[0] == Catch::Approx(a.semi_axes[0]).epsilon(1e-8));
    CHECK(b.semi_axes[1] == Catch::Approx(a.semi_axes[1]).epsilon(1e-8));
    CHECK(std::remainder(b.angle - a.angle - theta, std::numbers::pi) == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("normality report")
{
    CHECK_THROWS_AS(normality_report(Samples(50, {0.0, 0.0})), std::invalid_argument);

    auto const g = normality_report(gaussian_pairs(5000, 44));
    for (auto const& m : g) {
        CHECK(std::abs(m.moments.skewness) < 0.15);
        CHECK(std::abs(m.moments.excess_kurtosis) < 0.3);
        CHECK(m.gaussian_like);
        CHECK(m.histogram.counts.size() == 50);
        std::uint64_t total = 0;
        for (auto c : m.histogram.counts) {
            total += c;
        }
        CHECK(total == 5000);
    }

    Rng rng(45, 0);
    Samples uni(5000);
    for (auto& p : uni) {
        p = {uniform01(rng), uniform01(rng)};
    }
    auto const u = normality_report(uni);
    CHECK(u[0].moments.excess_kurtosis == Catch::Approx(-1.2).margin(0.1));
    CHECK_FALSE(u[0].gaussian_like);

    auto const c = normality_report(Samples(200, {1.0, 2.0}));
    CHECK(c[0].degenerate);
    CHECK(c[1].degenerate);
    CHECK_FALSE(c[0].gaussian_like);
}

TEST_CASE("single-level runs use the first split stream")
{
    swap::SwapLossModel const m(swap::SwapParams::case_study());
    SchemeConfig const c = small_nsa();
    Rng const master(46, 0);
    RiskEstimate const e = run_once(m, c, master);
    Rng s = master.split(0);
    auto sampler = [&] { return sample_biased(m, c.bias, s); };
    SaState const st = run_scheme(sampler, c.n_steps, c.rate, c.alpha);
    CHECK(e.var == st.xi);
    CHECK(e.es == st.chi);
    CHECK(e.cost == c.predicted_cost());
}

TEST_CASE("theoretical covariance dispatch")
{
    auto const d = swap::derive(swap::SwapParams::case_study());
    Confidence const a(0.85);
    auto const q = swap_model_quantities(d, a, 1.0 / 32, 2.0);
    LearningRate const r(1.0, 0.9);
    CHECK(theoretical_sigma(resolve_scheme(Scheme::ansa, 1.0 / 64, 0.9, r, a), q) == sigma_ansa(q, a));
    CHECK(theoretical_sigma(resolve_scheme(Scheme::nsa, 1.0 / 64, 0.9, r, a), q) == sigma_nsa(0.9, 1.0, q, a));
    auto const ml = resolve_scheme(Scheme::amlsa, 1.0 / 256, 0.9, r, a, BiasParam(32), 2);
    CHECK(theoretical_sigma(ml, q) == sigma_amlsa(1.0 / 32, 2.0, q, a));
}
