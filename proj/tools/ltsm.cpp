#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltsm/experiment.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
    std::string config_path;
    std::optional<double> alpha, H, sigma2, T, bandwidth, chaos_t;
    std::optional<std::size_t> N, replicates, J, m_max, n_users, b, scale_paths;
    std::optional<std::string> method;
    std::vector<std::string> sets;
};

ltsm::ExperimentConfig build_config(const std::string& kind, const Overrides& o) {
    ltsm::ExperimentConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ltsm::UsageError("config: cannot open " + o.config_path);
        ltsm::ojson j;
        try {
            j = ltsm::ojson::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ltsm::UsageError("config: " + o.config_path + " is not valid JSON (" + e.what() + ")");
        }
        cfg = ltsm::ExperimentConfig::from_json(j);
    }
    cfg.kind = kind;
    ltsm::ojson j = ltsm::ojson::object();
    if (o.seed) j["seed"] = *o.seed;
    if (o.threads) j["threads"] = *o.threads;
    if (o.out_dir) j["out_dir"] = *o.out_dir;
    if (o.alpha) j["alpha"] = *o.alpha;
    if (o.H) j["H"] = *o.H;
    if (o.sigma2) j["sigma2"] = *o.sigma2;
    if (o.T) j["T"] = *o.T;
    if (o.bandwidth) j["bandwidth"] = *o.bandwidth;
    if (o.chaos_t) j["chaos_t"] = *o.chaos_t;
    if (o.N) j["N"] = *o.N;
    if (o.replicates) j["replicates"] = *o.replicates;
    if (o.J) j["J"] = *o.J;
    if (o.m_max) j["m_max"] = *o.m_max;
    if (o.n_users) j["n_users"] = *o.n_users;
    if (o.b) j["b"] = *o.b;
    if (o.scale_paths) j["scale_paths"] = *o.scale_paths;
    if (o.method) j["method"] = *o.method;
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ltsm::UsageError("--set expects key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        try {
            j[key] = ltsm::ojson::parse(value);
        } catch (const nlohmann::json::exception&) {
            j[key] = value;
        }
    }
    cfg = ltsm::ExperimentConfig::from_json(j, cfg);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification of local-time fractional stable motions"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--seed", o.seed, "Master seed");
    app.add_option("--threads", o.threads, "Worker threads (results do not depend on this)");
    app.add_option("--out-dir", o.out_dir, "Output directory");
    app.add_option("--config", o.config_path, "Flat JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", o.sets, "Override any config key: key=value (repeatable)");

    auto* fbm = app.add_subcommand("fbm", "Sample one FBM path");
    auto* lt = app.add_subcommand("localtime", "Estimate the local-time field of one FBM path");
    auto* sy = app.add_subcommand("sample-y", "Sample Y by the truncated series and check its marginal");
    auto* ch = app.add_subcommand("chaos", "Chaos kernels and partial sums on one FBM path");
    auto* rw = app.add_subcommand("reward", "Scaled random-reward aggregate");
    app.add_subcommand("verify", "Run the full verification suite");
    for (auto* sc : {fbm, lt, sy, ch}) {
        sc->add_option("--H", o.H, "Hurst index");
        sc->add_option("--sigma2", o.sigma2, "FBM variance scale");
        sc->add_option("--N", o.N, "Time steps (power of two)");
        sc->add_option("--T", o.T, "Horizon");
    }
    fbm->add_option("--method", o.method, "spectral | volterra");
    lt->add_option("--bandwidth", o.bandwidth, "Box bandwidth (0 = default)");
    sy->add_option("--alpha", o.alpha, "Stability index");
    sy->add_option("--replicates", o.replicates, "Replicates");
    sy->add_option("--J", o.J, "Series length (0 = default)");
    sy->add_option("--bandwidth", o.bandwidth, "Box bandwidth (0 = default)");
    sy->add_option("--scale-paths", o.scale_paths, "Paths for the oracle scale");
    ch->add_option("--m-max", o.m_max, "Highest chaos order");
    ch->add_option("--t", o.chaos_t, "Time of the field");
    rw->add_option("--alpha", o.alpha, "Stability index");
    rw->add_option("--n-users", o.n_users, "Users");
    rw->add_option("--b", o.b, "Steps per user");
    rw->add_option("--replicates", o.replicates, "Replicates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    std::string kind;
    for (auto* sc : app.get_subcommands()) kind = sc->get_name();
    if (kind == "verify") kind = "verify-all";

    try {
        const auto cfg = build_config(kind, o);
        auto progress = [](const std::string& s) { std::cerr << "[ltsm] " << s << std::endl; };
        const auto crit = ltsm::run_experiment(cfg, progress);
        for (const auto& c : crit) {
            std::printf("%-10s %s  %s\n", c.id.c_str(), c.pass() ? "PASS" : "FAIL", c.title.c_str());
            for (const auto& t : c.tests)
                std::printf("    %-42s %s  statistic=%.6g threshold=%.6g\n", t.name.c_str(), t.pass ? "pass" : "FAIL",
                            t.statistic, t.threshold);
        }
        std::printf("report: %s/report.json (config %s, seed %llu)\n", cfg.out_dir.c_str(), cfg.hash().c_str(),
                    static_cast<unsigned long long>(cfg.seed));
        return ltsm::all_pass(crit) ? 0 : 1;
    } catch (const ltsm::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ltsm::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
