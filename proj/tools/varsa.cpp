#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "varsa/config.hpp"
#include "varsa/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options
{
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
};

int fail(char const* kind, std::string const& message, int code)
{
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return code;
}

varsa::RunConfig load(Options const& o, bool with_scheme)
{
    varsa::RunConfig cfg;
    if (!o.preset.empty()) {
        cfg = varsa::preset_config(o.preset);
    }
    if (!o.config_path.empty()) {
        std::ifstream f(o.config_path);
        if (!f) {
            throw std::invalid_argument("cannot open config " + o.config_path);
        }
        json j;
        try {
            j = json::parse(f);
        } catch (json::parse_error const& e) {
            throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
        }
        varsa::merge_json(j, cfg);
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.out) cfg.out = *o.out;
    cfg.validate(with_scheme);
    return cfg;
}

fs::path prepare(varsa::RunConfig const& cfg)
{
    fs::path const dir(cfg.out);
    fs::create_directories(dir);
    varsa::write_json(dir / "config.json", json(cfg));
    return dir;
}

void finish(fs::path const& dir, json const& summary)
{
    varsa::write_json(dir / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
}

void cmd_analytic(varsa::RunConfig const& cfg)
{
    auto const dir = prepare(cfg);
    finish(dir, varsa::analytic_report(cfg));
}

void cmd_estimate(varsa::RunConfig const& cfg)
{
    auto const dir = prepare(cfg);
    json const rep = varsa::estimate_report(cfg);
    std::ofstream f(dir / "replications.csv");
    f.precision(17);
    f << "index,var,es,cost\n0," << rep["estimate"]["var"].get<double>() << ','
      << rep["estimate"]["es"].get<double>() << ',' << rep["estimate"]["cost"].get<std::uint64_t>()
      << '\n';
    finish(dir, rep);
}

void cmd_clt_study(varsa::RunConfig const& cfg)
{
    auto const st = varsa::clt_study(cfg);
    varsa::write_study(cfg.out, cfg, st);
    std::cout << st.summary.dump(2) << '\n';
}

void cmd_complexity(varsa::RunConfig const& cfg)
{
    auto const dir = prepare(cfg);
    auto const sw = varsa::complexity_sweep(cfg);
    varsa::write_complexity_csv(dir / "complexity.csv", sw.rows);
    finish(dir, sw.summary);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"VaR/ES estimation by nested, averaged and multilevel stochastic approximation"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--preset", o.preset, "built-in configuration")->check(CLI::IsMember({"paper-swap"}));
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--workers", o.workers, "worker threads (0 = all cores)");
    app.add_option("--out", o.out, "output directory");

    struct Command
    {
        char const* name;
        char const* help;
        void (*run)(varsa::RunConfig const&);
    };
    Command const commands[] = {
        {"analytic", "closed-form VaR/ES and model quantities", cmd_analytic},
        {"estimate", "one run of the configured scheme", cmd_estimate},
        {"clt-study", "replicated runs, Gaussian fit and 95% ellipse", cmd_clt_study},
        {"complexity", "predicted cost against accuracy", cmd_complexity},
    };
    for (auto const& c : commands) {
        app.add_subcommand(c.name, c.help)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e);
    } catch (CLI::CallForAllHelp const& e) {
        return app.exit(e);
    } catch (CLI::ParseError const& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        for (auto const& c : commands) {
            if (app.got_subcommand(c.name)) {
                c.run(load(o, std::string(c.name) != "complexity"));
            }
        }
    } catch (std::invalid_argument const& e) {
        return fail("config", e.what(), 2);
    } catch (nlohmann::json::exception const& e) {
        return fail("config", e.what(), 2);
    } catch (std::exception const& e) {
        return fail("runtime", e.what(), 1);
    }
    return 0;
}
