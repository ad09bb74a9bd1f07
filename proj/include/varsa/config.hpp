#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "varsa/core_sa.hpp"
#include "varsa/harness.hpp"
#include "varsa/mlsa.hpp"
#include "varsa/swap_model.hpp"

namespace varsa {

struct RateConfig
{
    double gamma1 = 1.0;
    double beta = 0.9;
    std::uint64_t offset = 0;

    [[nodiscard]] LearningRate rate() const { return {gamma1, beta, offset}; }
    friend bool operator==(RateConfig const&, RateConfig const&) = default;
};

/// How the renormalization target of a CLT study is chosen.
/// - auto: exact pair for single-level schemes, biased pair at h_L for multilevel ones
/// - exact: (xi0*, chi0*)
/// - biased: closed-form (xi^{h}*, chi^{h}*) at the scheme's finest bias
/// - biased-nested: mean of `reference.runs` nested runs at that bias
struct ReferenceConfig
{
    std::string target = "auto";
    std::uint64_t runs = 200;
    std::uint64_t n_steps = 100000;
    std::optional<RateConfig> rate;

    friend bool operator==(ReferenceConfig const&, ReferenceConfig const&) = default;
};

struct RunConfig
{
    std::string preset;
    swap::SwapParams model = swap::SwapParams::case_study();
    Scheme scheme = Scheme::nsa;
    std::optional<double> epsilon;
    std::optional<std::uint64_t> k;        ///< explicit single-level inner count
    std::optional<std::uint64_t> n_steps;  ///< explicit single-level iterations
    std::uint64_t h0_k = 32;
    std::uint64_t m = 2;
    std::optional<unsigned> levels;        ///< explicit L
    std::optional<RateConfig> rate;
    double xi0 = 0.0;
    std::uint64_t replications = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out = "out";
    std::vector<double> epsilons;
    ReferenceConfig reference;

    friend bool operator==(RunConfig const&, RunConfig const&) = default;

    /// Step schedule of the selected scheme: explicit `rate`, else the preset's.
    [[nodiscard]] RateConfig resolved_rate() const
    {
        if (rate) {
            return *rate;
        }
        if (preset == "paper-swap") {
            if (is_exact(scheme)) {
                return {1.0, 0.9, 0};
            }
            return is_multilevel(scheme) ? RateConfig{0.1, 0.9, 1500} : RateConfig{0.1, 0.9, 250};
        }
        return {};
    }

    [[nodiscard]] SchemeConfig scheme_config() const
    {
        LearningRate const lr = resolved_rate().rate();
        Confidence const alpha(model.alpha);
        if (!is_multilevel(scheme) && k && n_steps) {
            SchemeConfig c;
            c.scheme = scheme;
            c.alpha = alpha;
            c.rate = lr;
            c.xi0 = xi0;
            c.bias = BiasParam(*k);
            c.n_steps = *n_steps;
            return c;
        }
        if (is_multilevel(scheme) && levels) {
            SchemeConfig c;
            c.scheme = scheme;
            c.alpha = alpha;
            c.rate = lr;
            c.xi0 = xi0;
            c.h0 = BiasParam(h0_k);
            c.m = m;
            c.num_levels = *levels;
            c.bias = level_bias(c.h0, m, *levels);
            c.schedule = scheme == Scheme::mlsa ? schedule_mlsa(c.h0, m, *levels, lr.beta())
                                                : schedule_amlsa(c.h0, m, *levels);
            return c;
        }
        if (!epsilon) {
            throw std::invalid_argument(
                "config needs 'epsilon', or 'k' and 'n_steps', or 'levels' for multilevel schemes");
        }
        return resolve_scheme(scheme, *epsilon, lr.beta(), lr, alpha, BiasParam(h0_k), m, xi0);
    }

    [[nodiscard]] std::vector<double> sweep_epsilons() const
    {
        if (!epsilons.empty()) {
            return epsilons;
        }
        return {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
    }

    /// `with_scheme = false` skips resolving the selected scheme, for sweeps.
    void validate(bool with_scheme = true) const
    {
        model.validate();
        RateConfig const r = resolved_rate();
        LearningRate const lr = r.rate();
        double const b = lr.beta();
        if ((scheme == Scheme::asa || scheme == Scheme::ansa) && !(b < 1.0)) {
            throw std::invalid_argument("averaged schemes need beta in (1/2, 1)");
        }
        if (scheme == Scheme::amlsa && !(b > 8.0 / 9.0 && b < 1.0)) {
            throw std::invalid_argument("the averaged multilevel scheme needs beta in (8/9, 1)");
        }
        if (epsilon && !(*epsilon > 0.0 && *epsilon < 1.0)) {
            throw std::invalid_argument("epsilon must lie in (0, 1)");
        }
        if (is_multilevel(scheme) && epsilon && !levels && !(BiasParam(h0_k).h() > *epsilon)) {
            throw std::invalid_argument("multilevel schemes need h0 > epsilon");
        }
        if (m < 2) {
            throw std::invalid_argument("refinement factor m must be at least 2");
        }
        if (h0_k == 0 || (k && *k == 0) || (n_steps && *n_steps == 0)) {
            throw std::invalid_argument("inner counts and step counts must be positive");
        }
        if (replications < 2) {
            throw std::invalid_argument("replications must be at least 2");
        }
        for (double e : epsilons) {
            if (!(e > 0.0 && e < 1.0)) {
                throw std::invalid_argument("sweep epsilons must lie in (0, 1)");
            }
        }
        auto const& t = reference.target;
        if (t != "auto" && t != "exact" && t != "biased" && t != "biased-nested") {
            throw std::invalid_argument("reference.target must be auto, exact, biased or biased-nested");
        }
        if (reference.runs < 2 || reference.n_steps == 0) {
            throw std::invalid_argument("reference needs at least 2 runs and 1 step");
        }
        if (reference.rate) {
            static_cast<void>(reference.rate->rate());
        }
        if (with_scheme) {
            static_cast<void>(scheme_config());
        }
    }

    /// Case-study setup: epsilon = 1/256, beta = 0.9, h0 = 1/32, M = 2,
    /// 5000 replications, per-scheme step schedules.
    static RunConfig paper_swap()
    {
        RunConfig c;
        c.preset = "paper-swap";
        c.model = swap::SwapParams::case_study();
        c.epsilon = 1.0 / 256;
        c.h0_k = 32;
        c.m = 2;
        c.replications = 5000;
        return c;
    }
};

inline RunConfig preset_config(std::string const& name)
{
    if (name == "paper-swap") {
        return RunConfig::paper_swap();
    }
    throw std::invalid_argument("unknown preset '" + name + "'");
}

inline void to_json(nlohmann::json& j, RateConfig const& r)
{
    j = {{"gamma1", r.gamma1}, {"beta", r.beta}, {"offset", r.offset}};
}

inline void from_json(nlohmann::json const& j, RateConfig& r)
{
    r.gamma1 = j.value("gamma1", r.gamma1);
    r.beta = j.value("beta", r.beta);
    r.offset = j.value("offset", r.offset);
}

namespace swap {

inline void to_json(nlohmann::json& j, SwapParams const& p)
{
    j = {{"s0", p.s0},       {"r", p.r},
         {"kappa", p.kappa}, {"sigma", p.sigma},
         {"coupon_times", p.coupon_times},
         {"horizon", p.horizon},
         {"alpha", p.alpha}, {"nominal_target", p.nominal_target}};
}

inline void from_json(nlohmann::json const& j, SwapParams& p)
{
    p.s0 = j.value("s0", p.s0);
    p.r = j.value("r", p.r);
    p.kappa = j.value("kappa", p.kappa);
    p.sigma = j.value("sigma", p.sigma);
    p.coupon_times = j.value("coupon_times", p.coupon_times);
    p.horizon = j.value("horizon", p.horizon);
    p.alpha = j.value("alpha", p.alpha);
    p.nominal_target = j.value("nominal_target", p.nominal_target);
}

} // namespace swap

namespace detail {

template <class T>
nlohmann::json opt_json(std::optional<T> const& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
void read_opt(nlohmann::json const& j, char const* key, std::optional<T>& v)
{
    if (auto it = j.find(key); it != j.end()) {
        if (it->is_null()) {
            v.reset();
        } else {
            v = it->get<T>();
        }
    }
}

} // namespace detail

inline void to_json(nlohmann::json& j, ReferenceConfig const& r)
{
    j = {{"target", r.target},
         {"runs", r.runs},
         {"n_steps", r.n_steps},
         {"rate", detail::opt_json(r.rate)}};
}

inline void from_json(nlohmann::json const& j, ReferenceConfig& r)
{
    r.target = j.value("target", r.target);
    r.runs = j.value("runs", r.runs);
    r.n_steps = j.value("n_steps", r.n_steps);
    detail::read_opt(j, "rate", r.rate);
}

inline void to_json(nlohmann::json& j, RunConfig const& c)
{
    j = {{"preset", c.preset},
         {"model", c.model},
         {"scheme", to_string(c.scheme)},
         {"epsilon", detail::opt_json(c.epsilon)},
         {"k", detail::opt_json(c.k)},
         {"n_steps", detail::opt_json(c.n_steps)},
         {"h0_k", c.h0_k},
         {"m", c.m},
         {"levels", detail::opt_json(c.levels)},
         {"rate", detail::opt_json(c.rate)},
         {"xi0", c.xi0},
         {"replications", c.replications},
         {"seed", c.seed},
         {"workers", c.workers},
         {"out", c.out},
         {"epsilons", c.epsilons},
         {"reference", c.reference}};
}

/// Fields absent from `j` keep their current values, so a document can be
/// layered over a preset.
inline void merge_json(nlohmann::json const& j, RunConfig& c)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    static char const* const known[] = {"preset", "model",   "scheme",       "epsilon", "k",
                                        "n_steps", "h0_k",   "m",            "levels",  "rate",
                                        "xi0",     "replications", "seed",   "workers", "out",
                                        "epsilons", "reference"};
    for (auto const& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw std::invalid_argument("unknown config field '" + key + "'");
        }
    }
    if (j.contains("preset") && !j["preset"].get<std::string>().empty() &&
        j["preset"].get<std::string>() != c.preset) {
        c = preset_config(j["preset"].get<std::string>());
    }
    if (j.contains("model")) {
        from_json(j["model"], c.model);
    }
    if (j.contains("scheme")) {
        c.scheme = parse_scheme(j["scheme"].get<std::string>());
    }
    detail::read_opt(j, "epsilon", c.epsilon);
    detail::read_opt(j, "k", c.k);
    detail::read_opt(j, "n_steps", c.n_steps);
    c.h0_k = j.value("h0_k", c.h0_k);
    c.m = j.value("m", c.m);
    detail::read_opt(j, "levels", c.levels);
    detail::read_opt(j, "rate", c.rate);
    c.xi0 = j.value("xi0", c.xi0);
    c.replications = j.value("replications", c.replications);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.out = j.value("out", c.out);
    c.epsilons = j.value("epsilons", c.epsilons);
    if (j.contains("reference")) {
        from_json(j["reference"], c.reference);
    }
}

inline void from_json(nlohmann::json const& j, RunConfig& c)
{
    c = RunConfig{};
    merge_json(j, c);
}

} // namespace varsa
