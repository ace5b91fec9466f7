#pragma once

// Many-user random-reward scheme: simple random walks collecting site rewards,
// the scaled aggregate and its convergence to the local-time stable motion.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ltsm/error.hpp"
#include "ltsm/lepage.hpp"
#include "ltsm/parallel.hpp"
#include "ltsm/rng.hpp"
#include "ltsm/stable.hpp"
#include "ltsm/stats.hpp"

namespace ltsm {

struct WalkPath {
    std::vector<std::int64_t> positions;  // S_0 = 0, ..., S_b
    std::size_t steps() const { return positions.size() - 1; }
};

/// Simple symmetric +-1 walk of b steps.
inline WalkPath simulate_walk(std::size_t b, RngStream& rng) {
    if (b < 1) throw ParameterError("simulate_walk: b must be >= 1");
    WalkPath w;
    w.positions.resize(b + 1);
    w.positions[0] = 0;
    std::uint64_t bits = 0;
    int left = 0;
    for (std::size_t k = 1; k <= b; ++k) {
        if (left == 0) {
            bits = rng();
            left = 64;
        }
        w.positions[k] = w.positions[k - 1] + ((bits & 1u) ? 1 : -1);
        bits >>= 1;
        --left;
    }
    return w;
}

/// Sparse site -> phi(j, t) with phi(j, n) = #{1 <= k <= n : S_k = j}, linear between integers.
using VisitCounts = std::map<std::int64_t, double>;

inline VisitCounts visit_counts(const WalkPath& walk, double t) {
    const double b = static_cast<double>(walk.steps());
    if (!(t >= 0.0 && t <= b)) throw ParameterError("visit_counts: t must lie in [0, b]");
    VisitCounts phi;
    const auto n = static_cast<std::size_t>(std::floor(t));
    for (std::size_t k = 1; k <= n; ++k) phi[walk.positions[k]] += 1.0;
    const double frac = t - static_cast<double>(n);
    if (frac > 0.0) phi[walk.positions[n + 1]] += frac;
    return phi;
}

/// R(t_k) = sum_j W_j phi(j, b t_k) for t_k in [0, 1], with W_j = reward(j).
inline std::vector<double> user_reward(const WalkPath& walk, const std::function<double(std::int64_t)>& reward,
                                       std::span<const double> t_grid) {
    const double b = static_cast<double>(walk.steps());
    std::vector<double> out(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] >= 0.0 && t_grid[i] <= 1.0)) throw ParameterError("user_reward: t_grid must lie in [0, 1]");
        double r = 0.0;
        for (const auto& [site, count] : visit_counts(walk, b * t_grid[i])) r += reward(site) * count;
        out[i] = r;
    }
    return out;
}

/// Site reward of user `user` in replicate `replicate`: symmetric Pareto keyed by
/// (seed, replicate, user, site), so it is fixed across revisits and across threads.
inline double site_reward(double alpha, std::uint64_t seed, std::uint64_t replicate, std::uint64_t user,
                          std::int64_t site) {
    const std::uint64_t h = hash_words(seed, replicate, user, static_cast<std::uint64_t>(site));
    return pareto_reward_from_bits(alpha, splitmix64(h ^ 0x5A5A5A5A5A5A5A5AULL), splitmix64(h));
}

struct RewardConfig {
    double alpha = 1.5;
    std::size_t n_users = 100;
    std::size_t b = 100;
    std::vector<double> t_grid{0.25, 0.5, 1.0};
    std::size_t replicates = 2000;
    std::uint64_t seed = 42;
    unsigned threads = 1;

    void validate() const {
        detail::require_alpha_open(alpha, "RewardConfig");
        if (n_users < 1) throw ParameterError("RewardConfig: n_users must be >= 1");
        if (b < 1) throw ParameterError("RewardConfig: b must be >= 1");
        if (replicates < 1) throw ParameterError("RewardConfig: replicates must be >= 1");
        if (t_grid.empty()) throw ParameterError("RewardConfig: t_grid must be nonempty");
        for (double t : t_grid)
            if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("RewardConfig: t_grid must lie in [0, 1]");
    }
    /// (n b^((alpha+1)/2))^(-1/alpha)
    double normalization() const {
        return std::pow(static_cast<double>(n_users) * std::pow(static_cast<double>(b), 0.5 * (alpha + 1.0)), -1.0 / alpha);
    }
};

struct RewardEnsemble {
    std::vector<double> t_grid;
    std::size_t replicates = 0;
    std::vector<double> values;  // replicate-major scaled aggregates
    double sigma_w = 0.0;
    std::size_t n_users = 0;
    std::size_t b = 0;

    double at(std::size_t r, std::size_t k) const { return values[r * t_grid.size() + k]; }
    std::vector<double> column(std::size_t k) const {
        std::vector<double> c(replicates);
        for (std::size_t r = 0; r < replicates; ++r) c[r] = at(r, k);
        return c;
    }
    std::size_t t_index(double t) const {
        for (std::size_t k = 0; k < t_grid.size(); ++k)
            if (std::abs(t_grid[k] - t) < 1e-12) return k;
        throw ParameterError("RewardEnsemble: t = " + std::to_string(t) + " is not on the grid");
    }
};

namespace detail {

/// Unscaled sum over users of R^(i)(b t_k) for one replicate. The walk of user i is
/// RngStream(hash(seed, replicate), i); rewards come from site_reward.
class RewardAccumulator {
public:
    explicit RewardAccumulator(const RewardConfig& cfg) : cfg_(cfg), w_(2 * cfg.b + 1), stamp_(2 * cfg.b + 1, 0) {
        const double b = static_cast<double>(cfg.b);
        for (double t : cfg.t_grid) {
            const double s = b * t;
            auto n = static_cast<std::size_t>(std::floor(s));
            if (n > cfg.b) n = cfg.b;
            whole_.push_back(n);
            frac_.push_back(s - static_cast<double>(n));
        }
    }

    void run(std::uint64_t replicate, std::span<double> out) {
        const std::size_t nt = cfg_.t_grid.size();
        std::fill(out.begin(), out.end(), 0.0);
        std::vector<double> r_at(nt);
        const auto off = static_cast<std::int64_t>(cfg_.b);
        const std::uint64_t walk_seed = hash_words(cfg_.seed, replicate);
        for (std::size_t user = 0; user < cfg_.n_users; ++user) {
            ++generation_;
            RngStream rng(walk_seed, user);
            std::int64_t pos = 0;
            double r = 0.0;
            std::uint64_t bits = 0;
            int left = 0;
            std::fill(r_at.begin(), r_at.end(), 0.0);
            auto reward = [&](std::int64_t site) {
                const auto idx = static_cast<std::size_t>(site + off);
                if (stamp_[idx] != generation_) {
                    stamp_[idx] = generation_;
                    w_[idx] = site_reward(cfg_.alpha, cfg_.seed, replicate, user, site);
                }
                return w_[idx];
            };
            for (std::size_t k = 1; k <= cfg_.b; ++k) {
                if (left == 0) {
                    bits = rng();
                    left = 64;
                }
                pos += (bits & 1u) ? 1 : -1;
                bits >>= 1;
                --left;
                const double w = reward(pos);
                // t-grid points with b t in [k-1, k): R(k-1) + frac W(S_k)
                for (std::size_t i = 0; i < nt; ++i)
                    if (whole_[i] == k - 1) r_at[i] = r + frac_[i] * w;
                r += w;
            }
            for (std::size_t i = 0; i < nt; ++i) {
                if (whole_[i] == cfg_.b) r_at[i] = r;
                out[i] += r_at[i];
            }
        }
    }

private:
    const RewardConfig& cfg_;
    std::vector<double> w_;
    std::vector<std::uint64_t> stamp_;
    std::uint64_t generation_ = 0;
    std::vector<std::size_t> whole_;
    std::vector<double> frac_;
};

}  // namespace detail

/// Replicated scaled aggregate (n b^((alpha+1)/2))^(-1/alpha) sum_i R^(i)(b t).
inline RewardEnsemble aggregate_scaled(const RewardConfig& cfg) {
    cfg.validate();
    RewardEnsemble e;
    e.t_grid = cfg.t_grid;
    e.replicates = cfg.replicates;
    e.sigma_w = pareto_sigma_w(cfg.alpha);
    e.n_users = cfg.n_users;
    e.b = cfg.b;
    const std::size_t nt = cfg.t_grid.size();
    e.values.assign(cfg.replicates * nt, 0.0);
    const double scale = cfg.normalization();
    parallel_for_with_state(
        cfg.replicates, cfg.threads, [&] { return detail::RewardAccumulator(cfg); },
        [&](detail::RewardAccumulator& acc, std::size_t r) {
            std::span<double> out(e.values.data() + r * nt, nt);
            acc.run(r, out);
            for (auto& v : out) v *= scale;
        });
    return e;
}

/// (2/C_alpha)^(1/alpha) sigma_W, the factor multiplying Y in the limit.
inline double reward_limit_factor(double alpha) {
    return std::pow(2.0 / stable_tail_constant(alpha), 1.0 / alpha) * pareto_sigma_w(alpha);
}

struct RewardRung {
    std::size_t n_users = 0;
    std::size_t b = 0;
};

struct ConvergenceOptions {
    std::vector<RewardRung> ladder{{100, 100}, {500, 500}, {2000, 2000}};
    std::vector<double> t_grid{0.25, 0.5, 1.0};
    std::size_t replicates = 2000;
    double level = 0.01;
    bool negative_control = false;  // drop the limit factor
    unsigned threads = 1;
};

struct ConvergenceResult {
    StatReport report;
    std::vector<RewardEnsemble> ensembles;
};

/// KS at t = 1 between each rung's aggregate and factor * Y(1) from the limit sample
/// (H = 1/2, same alpha). Passes iff the distances are nonincreasing along the ladder
/// and the final rung passes at `level`. Marginal KS at the other grid points is reported.
inline ConvergenceResult convergence_check(double alpha, const YSample& limit, std::uint64_t seed,
                                           const ConvergenceOptions& opt = {}) {
    if (std::abs(limit.H - 0.5) > 1e-12) throw ParameterError("convergence_check: the limit sample must have H = 1/2");
    if (std::abs(limit.alpha - alpha) > 1e-12) throw ParameterError("convergence_check: limit sample alpha differs");
    if (opt.ladder.empty()) throw ParameterError("convergence_check: ladder must be nonempty");
    const double factor = opt.negative_control ? 1.0 : reward_limit_factor(alpha);
    ConvergenceResult res;
    StatReport& rep = res.report;
    rep.name = opt.negative_control ? "reward_convergence_negative_control" : "reward_convergence";
    rep.threshold = opt.level;
    rep.set("limit_factor", factor);
    double prev = 2.0;
    bool monotone = true;
    double final_p = 0.0;
    for (std::size_t i = 0; i < opt.ladder.size(); ++i) {
        RewardConfig cfg;
        cfg.alpha = alpha;
        cfg.n_users = opt.ladder[i].n_users;
        cfg.b = opt.ladder[i].b;
        cfg.t_grid = opt.t_grid;
        cfg.replicates = opt.replicates;
        cfg.seed = hash_words(seed, i);
        cfg.threads = opt.threads;
        RewardEnsemble e = aggregate_scaled(cfg);
        for (std::size_t k = 0; k < opt.t_grid.size(); ++k) {
            const double t = opt.t_grid[k];
            auto y = limit.at_time(t);
            for (auto& v : y) v *= factor;
            const KsResult ks = ks_two_sample(e.column(k), y);
            const std::string tag = "rung" + std::to_string(i) + "_t" + std::to_string(t).substr(0, 4);
            rep.set(tag + "_ks_distance", ks.distance);
            rep.set(tag + "_ks_p_value", ks.p_value);
            if (std::abs(t - 1.0) < 1e-12) {
                if (ks.distance > prev) monotone = false;
                prev = ks.distance;
                final_p = ks.p_value;
            }
        }
        res.ensembles.push_back(std::move(e));
    }
    if (prev > 1.0) throw ParameterError("convergence_check: t_grid must contain 1");
    rep.statistic = final_p;
    rep.set("distances_nonincreasing", monotone ? 1.0 : 0.0);
    rep.set("final_ks_p_value", final_p);
    rep.pass = monotone && final_p >= opt.level;
    return res;
}

/// For alpha = 1 the limit at t = 1 is S1S with scale (2/C_1) sigma_W = pi/2.
inline StatReport limit_scale_check_alpha1(const RewardEnsemble& e, double tolerance = 0.05) {
    StatReport rep;
    rep.name = "reward_limit_scale_alpha1";
    const double target = reward_limit_factor(1.0);
    const auto col = e.column(e.t_index(1.0));
    const EcfScale s = ecf_scale(col, 1.0);
    rep.statistic = std::abs(s.scale / target - 1.0);
    rep.threshold = tolerance;
    rep.set("ecf_scale", s.scale);
    rep.set("ecf_scale_se", s.standard_error);
    rep.set("target", target);
    rep.pass = std::abs(rep.statistic) <= tolerance;
    return rep;
}

/// ECF-scale log-log slope of the aggregate over its t grid (points with t > 0).
inline StatReport reward_self_similarity(const RewardEnsemble& e, double alpha, double tolerance = 0.07) {
    std::vector<double> ts, sc;
    for (std::size_t k = 0; k < e.t_grid.size(); ++k) {
        if (e.t_grid[k] <= 0.0) continue;
        ts.push_back(e.t_grid[k]);
        sc.push_back(ecf_scale(e.column(k), alpha).scale);
    }
    const SlopeFit f = loglog_slope(ts, sc);
    StatReport rep;
    rep.name = "reward_self_similarity";
    const double target = 0.5 + 0.5 / alpha;
    rep.statistic = std::abs(f.slope - target);
    rep.threshold = tolerance;
    rep.set("slope", f.slope);
    rep.set("slope_se", f.standard_error);
    rep.set("target", target);
    rep.pass = std::abs(f.slope - target) <= tolerance;
    return rep;
}

inline void write_csv(std::ostream& os, const RewardEnsemble& e) {
    os << "# ltsm reward-ensemble v1 n_users=" << e.n_users << " b=" << e.b << "\n";
    os << "replicate,t,value\n";
    char buf[96];
    for (std::size_t r = 0; r < e.replicates; ++r)
        for (std::size_t k = 0; k < e.t_grid.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r, e.t_grid[k], e.at(r, k));
            os << buf;
        }
}

}  // namespace ltsm
