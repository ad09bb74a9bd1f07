#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "varsa/config.hpp"
#include "varsa/harness.hpp"
#include "varsa/mlsa.hpp"
#include "varsa/swap_model.hpp"
#include "varsa/theory.hpp"

namespace varsa {

using nlohmann::json;

inline json cov_json(Cov2 const& s)
{
    return json::array({json::array({s.vv, s.ve}), json::array({s.ve, s.ee})});
}

inline json scheme_json(SchemeConfig const& c)
{
    json j = {{"scheme", to_string(c.scheme)},
              {"alpha", c.alpha.value()},
              {"rate", {{"gamma1", c.rate.gamma1()}, {"beta", c.rate.beta()}, {"offset", c.rate.offset()}}},
              {"xi0", c.xi0},
              {"h", c.bias.h()},
              {"k", c.bias.k()},
              {"predicted_cost", c.predicted_cost()}};
    if (is_multilevel(c.scheme)) {
        j["h0"] = c.h0.h();
        j["m"] = c.m;
        j["levels"] = c.num_levels;
        j["schedule"] = c.schedule;
    } else {
        j["n_steps"] = c.n_steps;
    }
    return j;
}

/// Closed-form quantities of the swap loss, each tagged with its provenance.
inline json quantities_json(ModelQuantities const& q)
{
    auto tag = [](double v, char const* how) { return json{{"value", v}, {"provenance", how}}; };
    return {{"f_at_xistar", tag(q.f_at_xistar, "closed-form")},
            {"xi_star", tag(q.xi_star, "closed-form")},
            {"chi_star", tag(q.chi_star, "closed-form")},
            {"mean_pos_part", tag(q.mean_pos_part, "closed-form")},
            {"var_pos_part", tag(q.var_pos_part, "closed-form")},
            {"var_pos_part_h0", tag(q.var_pos_part_h0, "closed-form, X_h0 Gaussian")},
            {"e_absG_fG", tag(q.e_absG_fG, "closed-form, G independent of X0")},
            {"var_indG", tag(q.var_indG, "closed-form, G independent of X0")},
            {"v_at_xistar", tag(q.v_at_xistar, "closed-form derivative in h")},
            {"v_integral", tag(q.v_integral, "closed-form derivative in h")}};
}

inline json analytic_report(RunConfig const& cfg)
{
    swap::SwapDerived const d = swap::derive(cfg.model);
    Confidence const alpha(cfg.model.alpha);
    json j;
    j["strike"] = d.strike;
    j["nominal"] = d.nominal;
    j["eta"] = d.eta;
    j["s2_inner"] = d.s2_inner;
    if (d.eta > 0.0) {
        auto const exact = swap::analytic_var_es(d.eta, alpha);
        j["xi_star"] = exact.var;
        j["chi_star"] = exact.es;
        ModelQuantities const q =
            swap_model_quantities(d, alpha, BiasParam(cfg.h0_k).h(), static_cast<double>(cfg.m));
        j["quantities"] = quantities_json(q);
        auto const b = bias_limit(q, alpha);
        j["bias_coefficients"] = {{"var", b.var_coeff}, {"es", b.es_coeff}};
        try {
            SchemeConfig const sc = cfg.scheme_config();
            auto const biased = swap_biased_var_es(d, alpha, sc.bias.h());
            j["biased"] = {{"h", sc.bias.h()}, {"xi", biased.var}, {"chi", biased.es}};
        } catch (std::invalid_argument const&) {
            j["biased"] = nullptr;
        }
    } else {
        j["xi_star"] = 0.0;
        j["chi_star"] = 0.0;
        j["degenerate"] = true;
    }
    return j;
}

inline json estimate_json(RiskEstimate const& e)
{
    json levels = json::array();
    for (auto const& d : e.per_level) {
        levels.push_back({{"level", d.level},
                          {"inner", d.inner},
                          {"steps", d.steps},
                          {"var_coarse", d.var_coarse},
                          {"var_fine", d.var_fine},
                          {"es_coarse", d.es_coarse},
                          {"es_fine", d.es_fine},
                          {"cost", d.cost}});
    }
    return {{"var", e.var},
            {"es", e.es},
            {"cost", e.cost},
            {"per_level", levels},
            {"mc", {{"var_pos_part", e.moments.var_pos_part},
                    {"var_indG", e.moments.var_indG},
                    {"g_scale2", e.moments.g_scale2}}}};
}

inline json estimate_report(RunConfig const& cfg)
{
    SchemeConfig const sc = cfg.scheme_config();
    swap::SwapLossModel const model(cfg.model);
    RiskEstimate const e = run_once(model, sc, replication_stream(cfg.seed, 0));
    return {{"resolved", scheme_json(sc)}, {"estimate", estimate_json(e)}};
}

/// Mean over replications of the trajectory estimates, NaN when absent.
inline RunMoments average_moments(std::vector<Replication> const& reps)
{
    auto mean_of = [&](auto field) {
        double s = 0.0;
        for (auto const& r : reps) {
            double const v = r.estimate.moments.*field;
            if (!std::isfinite(v)) {
                return std::numeric_limits<double>::quiet_NaN();
            }
            s += v;
        }
        return s / static_cast<double>(reps.size());
    };
    return {mean_of(&RunMoments::var_pos_part), mean_of(&RunMoments::var_indG),
            mean_of(&RunMoments::g_scale2)};
}

/// Model quantities with the trajectory-estimated entries swapped in.
inline ModelQuantities with_mc_entries(ModelQuantities q, SchemeConfig const& c, RunMoments const& mc)
{
    if (is_multilevel(c.scheme)) {
        if (std::isfinite(mc.var_pos_part)) {
            q.var_pos_part_h0 = mc.var_pos_part;
        }
        if (std::isfinite(mc.var_indG)) {
            q.var_indG = mc.var_indG;
        }
        if (std::isfinite(mc.g_scale2)) {
            q.e_absG_fG = q.f_at_xistar * std::sqrt(mc.g_scale2) * std::sqrt(2.0 / std::numbers::pi);
        }
    } else if (std::isfinite(mc.var_pos_part)) {
        q.var_pos_part = mc.var_pos_part;
    }
    return q;
}

struct CltStudy
{
    SchemeConfig scheme;
    std::array<double, 2> target{};
    std::string target_kind;
    ScalingSpec scaling;
    std::vector<Replication> reps;
    GaussianFit fit;
    Ellipse ellipse;
    json summary;
};

inline std::array<double, 2> study_target(RunConfig const& cfg, SchemeConfig const& sc,
                                          swap::SwapLossModel const& model, std::string& kind)
{
    Confidence const alpha(cfg.model.alpha);
    kind = cfg.reference.target;
    if (kind == "auto") {
        kind = is_multilevel(sc.scheme) ? "biased" : "exact";
    }
    auto const& d = model.derived();
    if (kind == "exact") {
        auto const e = swap::analytic_var_es(d.eta, alpha);
        return {e.var, e.es};
    }
    if (kind == "biased") {
        auto const b = swap_biased_var_es(d, alpha, sc.bias.h());
        return {b.var, b.es};
    }
    RateConfig const r = cfg.reference.rate ? *cfg.reference.rate : cfg.resolved_rate();
    auto const ref = biased_reference(model, sc.bias, cfg.reference.n_steps, cfg.reference.runs,
                                      r.rate(), alpha, mix64(cfg.seed ^ 0x5265666572656e63ull),
                                      cfg.workers, cfg.xi0);
    return {ref.var, ref.es};
}

inline CltStudy clt_study(RunConfig const& cfg)
{
    CltStudy st;
    st.scheme = cfg.scheme_config();
    swap::SwapLossModel const model(cfg.model);
    st.target = study_target(cfg, st.scheme, model, st.target_kind);
    st.scaling = clt_scaling(st.scheme);
    st.reps = run_replications(model, st.scheme, st.target, st.scaling, cfg.replications, cfg.seed,
                               cfg.workers);
    Samples const errs = errors_of(st.reps);
    st.fit = fit_gaussian(errs);
    st.ellipse = ellipse_95(st.fit);

    json& j = st.summary;
    j["resolved"] = scheme_json(st.scheme);
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["target"] = {{"kind", st.target_kind}, {"var", st.target[0]}, {"es", st.target[1]}};
    j["scaling"] = {{"base", st.scaling.base},
                    {"var_exponent", st.scaling.var_exponent},
                    {"es_exponent", st.scaling.es_exponent}};
    j["fit"] = {{"mu", st.fit.mu}, {"sigma", cov_json(st.fit.sigma)}, {"r", st.fit.r}};
    j["ellipse"] = {{"center", st.ellipse.center},
                    {"semi_axes", st.ellipse.semi_axes},
                    {"angle", st.ellipse.angle},
                    {"chi2_quantile", kChi2Quantile95}};
    if (errs.size() >= 100) {
        auto const rep = normality_report(errs);
        json marg = json::array();
        for (auto const& m : rep) {
            marg.push_back({{"mean", m.moments.mean},
                            {"variance", m.moments.variance},
                            {"skewness", m.moments.skewness},
                            {"excess_kurtosis", m.moments.excess_kurtosis},
                            {"degenerate", m.degenerate},
                            {"gaussian_like", m.gaussian_like},
                            {"histogram", {{"lo", m.histogram.lo},
                                           {"hi", m.histogram.hi},
                                           {"counts", m.histogram.counts}}}});
        }
        j["normality"] = {{"var", marg[0]}, {"es", marg[1]}};
    } else {
        j["normality"] = nullptr;
    }

    auto const& d = model.derived();
    Confidence const alpha(cfg.model.alpha);
    ModelQuantities const q =
        swap_model_quantities(d, alpha, st.scheme.h0.h(), static_cast<double>(st.scheme.m));
    RunMoments const mc = average_moments(st.reps);
    j["mc"] = {{"var_pos_part", mc.var_pos_part}, {"var_indG", mc.var_indG}, {"g_scale2", mc.g_scale2}};
    auto theory = [&](ModelQuantities const& qq) -> json {
        try {
            return cov_json(theoretical_sigma(st.scheme, qq));
        } catch (std::exception const& e) {
            return {{"error", e.what()}};
        }
    };
    ModelQuantities const q_mc = with_mc_entries(q, st.scheme, mc);
    j["theory"] = {{"closed_form", theory(q)}, {"monte_carlo", theory(q_mc)}};
    double es_mc = std::numeric_limits<double>::quiet_NaN();
    double es_cf = std::numeric_limits<double>::quiet_NaN();
    try {
        es_mc = theoretical_sigma(st.scheme, q_mc).ee;
        es_cf = theoretical_sigma(st.scheme, q).ee;
    } catch (std::exception const&) {
    }
    j["es_variance"] = {{"empirical", st.fit.sigma.ee},
                        {"monte_carlo", es_mc},
                        {"closed_form", es_cf},
                        {"ratio_empirical_to_mc", st.fit.sigma.ee / es_mc}};
    return st;
}

struct ComplexityRow
{
    Scheme scheme;
    double epsilon;
    double h;
    unsigned levels;
    long double cost;
};

/// Predicted cost of each scheme at accuracy epsilon; no simulation.
inline ComplexityRow complexity_point(Scheme s, double epsilon, double beta, BiasParam h0, std::uint64_t m)
{
    switch (s) {
    case Scheme::sa:
    case Scheme::nsa: {
        auto const p = nsa_params_for_accuracy(epsilon, beta);
        return {s, epsilon, p.bias.h(), 0,
                static_cast<long double>(p.n_steps) * static_cast<long double>(p.bias.k())};
    }
    case Scheme::asa:
    case Scheme::ansa: {
        auto const p = ansa_params_for_accuracy(epsilon);
        return {s, epsilon, p.bias.h(), 0,
                static_cast<long double>(p.n_steps) * static_cast<long double>(p.bias.k())};
    }
    case Scheme::mlsa:
    case Scheme::amlsa: {
        unsigned const l = levels_for_accuracy(epsilon, h0, m);
        auto const sched = s == Scheme::mlsa ? schedule_mlsa_real(h0, m, l, beta)
                                             : schedule_amlsa_real(h0, m, l);
        return {s, epsilon, h0.h() / std::pow(static_cast<double>(m), l), l,
                predicted_cost_real(h0, m, sched)};
    }
    }
    throw std::logic_error("unreachable");
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::vector<double> const& x, std::vector<double> const& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("slope needs at least two matching points");
    }
    double mx = 0.0, my = 0.0;
    auto const n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("slope needs at least two distinct abscissae");
    }
    return sxy / sxx;
}

struct ComplexitySweep
{
    std::vector<ComplexityRow> rows;
    json summary;
};

inline ComplexitySweep complexity_sweep(RunConfig const& cfg)
{
    ComplexitySweep out;
    double const beta = cfg.resolved_rate().beta;
    auto const eps = cfg.sweep_epsilons();
    BiasParam const h0(cfg.h0_k);
    json slopes = json::object();
    for (Scheme s : {Scheme::nsa, Scheme::ansa, Scheme::mlsa, Scheme::amlsa}) {
        std::vector<double> xs, ys;
        for (double e : eps) {
            if (is_multilevel(s) && !(h0.h() > e)) {
                continue;
            }
            auto const row = complexity_point(s, e, beta, h0, cfg.m);
            out.rows.push_back(row);
            xs.push_back(e);
            ys.push_back(static_cast<double>(row.cost));
        }
        slopes[to_string(s)] = xs.size() >= 2 ? json(loglog_slope(xs, ys)) : json(nullptr);
    }
    out.summary = {{"beta", beta},
                   {"h0", h0.h()},
                   {"m", cfg.m},
                   {"epsilons", eps},
                   {"slopes", slopes},
                   {"expected_slopes",
                    {{"nsa", -3.0 / beta},
                     {"ansa", -3.0},
                     {"mlsa", -(1.0 + 3.0 / (2.0 * beta))},
                     {"amlsa", -2.5}}}};
    return out;
}

inline void write_json(std::filesystem::path const& p, json const& j)
{
    std::ofstream f(p);
    if (!f) {
        throw std::runtime_error("cannot write " + p.string());
    }
    f << j.dump(2) << '\n';
}

/// One row per replication; trajectory-estimate columns appear only when
/// every replication produced them.
inline void write_replications_csv(std::filesystem::path const& p, std::vector<Replication> const& reps)
{
    std::ofstream f(p);
    if (!f) {
        throw std::runtime_error("cannot write " + p.string());
    }
    f.precision(17);
    RunMoments const avail = average_moments(reps);
    bool const pos = std::isfinite(avail.var_pos_part);
    bool const g = std::isfinite(avail.var_indG) && std::isfinite(avail.g_scale2);
    f << "index,var,es,err_var,err_es,cost";
    if (pos) f << ",mc_var_pos_part";
    if (g) f << ",mc_var_indG,mc_g_scale2";
    f << '\n';
    for (auto const& r : reps) {
        f << r.index << ',' << r.estimate.var << ',' << r.estimate.es << ',' << r.error[0] << ','
          << r.error[1] << ',' << r.estimate.cost;
        if (pos) f << ',' << r.estimate.moments.var_pos_part;
        if (g) f << ',' << r.estimate.moments.var_indG << ',' << r.estimate.moments.g_scale2;
        f << '\n';
    }
}

/// Boundary of the 95% ellipse, `points` samples.
inline void write_ellipse_csv(std::filesystem::path const& p, Ellipse const& e, int points = 181)
{
    std::ofstream f(p);
    if (!f) {
        throw std::runtime_error("cannot write " + p.string());
    }
    f.precision(17);
    f << "t,var,es\n";
    double const c = std::cos(e.angle), s = std::sin(e.angle);
    for (int i = 0; i < points; ++i) {
        double const t = 2.0 * std::numbers::pi * i / (points - 1);
        double const u = e.semi_axes[0] * std::cos(t);
        double const v = e.semi_axes[1] * std::sin(t);
        f << t << ',' << e.center[0] + c * u - s * v << ',' << e.center[1] + s * u + c * v << '\n';
    }
}

inline void write_complexity_csv(std::filesystem::path const& p, std::vector<ComplexityRow> const& rows)
{
    std::ofstream f(p);
    if (!f) {
        throw std::runtime_error("cannot write " + p.string());
    }
    f.precision(17);
    f << "scheme,epsilon,h,levels,cost\n";
    for (auto const& r : rows) {
        f << to_string(r.scheme) << ',' << r.epsilon << ',' << r.h << ',' << r.levels << ','
          << static_cast<double>(r.cost) << '\n';
    }
}

/// config.json, replications.csv, ellipse.csv and summary.json under `dir`.
inline void write_study(std::filesystem::path const& dir, RunConfig const& cfg, CltStudy const& st)
{
    std::filesystem::create_directories(dir);
    write_json(dir / "config.json", json(cfg));
    write_replications_csv(dir / "replications.csv", st.reps);
    write_ellipse_csv(dir / "ellipse.csv", st.ellipse);
    write_json(dir / "summary.json", st.summary);
}

} // namespace varsa
