#pragma once

// Box-kernel local-time estimation on discretized paths and the checks built on it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ltsm/error.hpp"
#include "ltsm/fbm.hpp"
#include "ltsm/parallel.hpp"
#include "ltsm/rng.hpp"
#include "ltsm/stable.hpp"
#include "ltsm/stats.hpp"

namespace ltsm {

/// Estimated occupation density on a uniform x grid and an arbitrary t grid.
struct LocalTimeField {
    std::vector<double> x_grid;
    std::vector<double> t_grid;
    std::vector<double> values;  // x-major: values[i * t_grid.size() + j]
    double bandwidth = 0.0;
    double dx = 0.0;
    bool undersmoothed = false;

    double at(std::size_t i, std::size_t j) const { return values[i * t_grid.size() + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * t_grid.size(), t_grid.size()}; }
};

struct HolderStatistic {
    double K_hat = 0.0;
    std::size_t resolution = 0;  // number of grid points used
};

/// sigma T^H N^(-1/3).
inline double default_bandwidth(const FbmParams& p) {
    return p.sigma() * std::pow(p.T, p.H) * std::pow(static_cast<double>(p.N), -1.0 / 3.0);
}

/// Symmetric uniform grid with spacing dx covering [-(max|path| + 3 eps), max|path| + 3 eps].
inline std::vector<double> default_x_grid(std::span<const double> values, double bandwidth, double dx = 0.0) {
    if (!(bandwidth > 0.0)) throw ParameterError("default_x_grid: bandwidth must be > 0");
    if (dx <= 0.0) dx = bandwidth;
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    const auto half = static_cast<std::size_t>(std::ceil((m + 3.0 * bandwidth) / dx));
    std::vector<double> grid(2 * half + 1);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (static_cast<double>(i) - static_cast<double>(half)) * dx;
    return grid;
}

namespace detail {

inline void check_t_grid(std::span<const double> t_grid, double horizon, const char* where) {
    for (double t : t_grid)
        if (!(t >= 0.0 && t <= horizon * (1.0 + 1e-12)))
            throw ParameterError(std::string(where) + ": t_grid entries must lie in [0, T]");
}

/// Splits t into a whole number of steps k and the fraction into step k + 1.
inline void step_position(double t, double dt, std::size_t n, std::size_t& k, double& frac) {
    const double r = t / dt;
    k = static_cast<std::size_t>(std::floor(r));
    frac = r - static_cast<double>(k);
    if (k >= n) {
        k = n;
        frac = 0.0;
    }
}

}  // namespace detail

/// l(x, t_j) for one level x on a path with values[0..N] and step dt:
/// (dt / 2 eps) #{1 <= i <= t/dt : |values[i] - x| <= eps}, linear in t between grid times.
/// `out` must have t_grid.size() entries. The t grid need not be sorted.
inline void level_local_time(std::span<const double> values, double dt, double x, std::span<const double> t_grid,
                             double bandwidth, std::span<double> out) {
    const std::size_t n = values.size() - 1;
    const double w = dt / (2.0 * bandwidth);
    // Single pass up to the largest t.
    double t_max = 0.0;
    for (double t : t_grid) t_max = std::max(t_max, t);
    std::size_t k_max;
    double f_max;
    detail::step_position(t_max, dt, n, k_max, f_max);
    const std::size_t last = std::min(n, k_max + 1);

    thread_local std::vector<std::uint32_t> cum;
    cum.resize(last + 1);
    cum[0] = 0;
    std::uint32_t c = 0;
    for (std::size_t i = 1; i <= last; ++i) {
        c += std::abs(values[i] - x) <= bandwidth ? 1u : 0u;
        cum[i] = c;
    }
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        std::size_t k;
        double frac;
        detail::step_position(t_grid[j], dt, n, k, frac);
        double count = cum[k];
        if (frac > 0.0) count += frac * static_cast<double>(cum[k + 1] - cum[k]);
        out[j] = w * count;
    }
}

inline std::vector<double> level_local_time(const FbmPath& path, double x, std::span<const double> t_grid,
                                            double bandwidth) {
    if (!(bandwidth > 0.0)) throw ParameterError("level_local_time: bandwidth must be > 0");
    detail::check_t_grid(t_grid, path.params.T, "level_local_time");
    std::vector<double> out(t_grid.size());
    level_local_time(path.values, path.params.dt(), x, t_grid, bandwidth, out);
    return out;
}

/// Full field on a uniform x grid.
inline LocalTimeField estimate_local_time(const FbmPath& path, std::span<const double> x_grid,
                                          std::span<const double> t_grid, double bandwidth) {
    if (!(bandwidth > 0.0)) throw ParameterError("estimate_local_time: bandwidth must be > 0");
    if (x_grid.size() < 2) throw ParameterError("estimate_local_time: x_grid needs at least 2 points");
    detail::check_t_grid(t_grid, path.params.T, "estimate_local_time");
    const std::size_t nx = x_grid.size();
    const std::size_t nt = t_grid.size();
    const double x0 = x_grid.front();
    const double dx = x_grid[1] - x_grid[0];
    if (!(dx > 0.0)) throw ParameterError("estimate_local_time: x_grid must be increasing");
    for (std::size_t i = 1; i < nx; ++i)
        if (std::abs((x_grid[i] - x_grid[i - 1]) - dx) > 1e-9 * dx)
            throw ParameterError("estimate_local_time: x_grid must be uniform");

    LocalTimeField field;
    field.x_grid.assign(x_grid.begin(), x_grid.end());
    field.t_grid.assign(t_grid.begin(), t_grid.end());
    field.values.assign(nx * nt, 0.0);
    field.bandwidth = bandwidth;
    field.dx = dx;
    const auto& p = path.params;
    const double dt = p.dt();
    field.undersmoothed = bandwidth < p.sigma() * std::pow(dt, p.H);

    const std::size_t n = p.N;
    // Visit times sorted so counts can be snapshotted in one sweep.
    std::vector<std::size_t> order(nt);
    for (std::size_t j = 0; j < nt; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t_grid[a] < t_grid[b]; });

    std::vector<double> counts(nx, 0.0);
    const double w = dt / (2.0 * bandwidth);
    auto visit = [&](std::size_t step, double weight) {
        const double v = path.values[step];
        const double lo = std::ceil((v - bandwidth - x0) / dx - 1e-12);
        const double hi = std::floor((v + bandwidth - x0) / dx + 1e-12);
        const auto i0 = static_cast<std::ptrdiff_t>(std::max(0.0, lo));
        const auto i1 = static_cast<std::ptrdiff_t>(std::min(static_cast<double>(nx) - 1.0, hi));
        for (std::ptrdiff_t i = i0; i <= i1; ++i)
            if (std::abs(v - x_grid[static_cast<std::size_t>(i)]) <= bandwidth) counts[static_cast<std::size_t>(i)] += weight;
    };
    std::size_t done = 0;
    for (std::size_t oj : order) {
        std::size_t k;
        double frac;
        detail::step_position(t_grid[oj], dt, n, k, frac);
        while (done < k) visit(++done, 1.0);
        for (std::size_t i = 0; i < nx; ++i) field.values[i * nt + oj] = w * counts[i];
        if (frac > 0.0) {
            // partial contribution of step k + 1, not accumulated
            const double v = path.values[k + 1];
            for (std::size_t i = 0; i < nx; ++i)
                if (std::abs(v - x_grid[i]) <= bandwidth) field.values[i * nt + oj] += w * frac;
        }
    }
    return field;
}

inline LocalTimeField estimate_local_time(const FbmPath& path, std::span<const double> t_grid) {
    const double eps = default_bandwidth(path.params);
    const auto xg = default_x_grid(path.values, eps);
    return estimate_local_time(path, xg, t_grid, eps);
}

/// dx sum of l(x_i, t_j)^alpha (trapezoid; the grid ends carry zero mass).
inline double alpha_energy(const LocalTimeField& field, double alpha, std::size_t t_index) {
    if (!(alpha > 0.0)) throw ParameterError("alpha_energy: alpha must be > 0");
    if (t_index >= field.t_grid.size()) throw ParameterError("alpha_energy: t index out of range");
    const std::size_t nx = field.x_grid.size();
    double s = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        const double v = field.at(i, t_index);
        const double e = v > 0.0 ? std::pow(v, alpha) : 0.0;
        s += (i == 0 || i + 1 == nx) ? 0.5 * e : e;
    }
    return field.dx * s;
}

/// Occupation mass dx sum l(x_i, t_j); equals t_j up to grid effects.
inline double occupation_mass(const LocalTimeField& field, std::size_t t_index) {
    return alpha_energy(field, 1.0, t_index);
}

struct ScaleEstimate {
    double t = 0.0;
    double scale = 0.0;
    double standard_error = 0.0;
    double energy_mean = 0.0;  // E int l^alpha dx
    double energy_se = 0.0;
};

struct ScaleOptions {
    double bandwidth = 0.0;   // 0 selects default_bandwidth
    double dx_fraction = 0.25;  // x spacing as a fraction of the bandwidth
    unsigned threads = 1;
};

/// (E int l(x,t)^alpha dx)^(1/alpha) for each t in t_grid, by Monte Carlo over `mc`
/// FBM paths (spectral generator) with the delta-method standard error. Path r uses
/// RngStream(seed, r) so results do not depend on the thread count.
inline std::vector<ScaleEstimate> scale_of_Y(double alpha, const FbmParams& fbm, std::span<const double> t_grid,
                                             std::size_t mc, std::uint64_t seed, const ScaleOptions& opt = {}) {
    detail::require_alpha_open(alpha, "scale_of_Y");
    fbm.validate(true);
    if (mc < 2) throw ParameterError("scale_of_Y: mc must be >= 2");
    detail::check_t_grid(t_grid, fbm.T, "scale_of_Y");
    const double eps = opt.bandwidth > 0.0 ? opt.bandwidth : default_bandwidth(fbm);
    const std::size_t nt = t_grid.size();
    std::vector<double> energy(mc * nt);

    struct State {
        SpectralFbmGenerator gen;
        FbmPath a;
        FbmPath b;
    };
    const std::size_t pairs = (mc + 1) / 2;
    parallel_for_with_state(
        pairs, opt.threads,
        [&] {
            return State{SpectralFbmGenerator(fbm), FbmPath{fbm, std::vector<double>(fbm.N + 1)},
                         FbmPath{fbm, std::vector<double>(fbm.N + 1)}};
        },
        [&](State& s, std::size_t r) {
            RngStream rng(seed, r);
            s.gen.generate_pair(rng, s.a.values, s.b.values);
            for (std::size_t h = 0; h < 2; ++h) {
                const std::size_t idx = 2 * r + h;
                if (idx >= mc) break;
                const FbmPath& path = h == 0 ? s.a : s.b;
                const auto xg = default_x_grid(path.values, eps, eps * opt.dx_fraction);
                const auto field = estimate_local_time(path, xg, t_grid, eps);
                for (std::size_t j = 0; j < nt; ++j) energy[idx * nt + j] = alpha_energy(field, alpha, j);
            }
        });

    std::vector<ScaleEstimate> out(nt);
    for (std::size_t j = 0; j < nt; ++j) {
        double m = 0.0;
        for (std::size_t r = 0; r < mc; ++r) m += energy[r * nt + j];
        m /= static_cast<double>(mc);
        double v = 0.0;
        for (std::size_t r = 0; r < mc; ++r) v += (energy[r * nt + j] - m) * (energy[r * nt + j] - m);
        v /= static_cast<double>(mc - 1);
        const double se_m = std::sqrt(v / static_cast<double>(mc));
        auto& e = out[j];
        e.t = t_grid[j];
        e.energy_mean = m;
        e.energy_se = se_m;
        e.scale = m > 0.0 ? std::pow(m, 1.0 / alpha) : 0.0;
        e.standard_error = m > 0.0 ? e.scale / (alpha * m) * se_m : 0.0;
    }
    return out;
}

/// sup over grid pairs s < t of (l(t) - l(s)) / ((t-s)^(1-H) (log 1/(t-s))^H).
/// Requires times within [0, 1/2] so the logarithm stays positive.
inline HolderStatistic holder_modulus(std::span<const double> times, std::span<const double> levels, double H) {
    if (times.size() != levels.size()) throw ParameterError("holder_modulus: size mismatch");
    if (!(H > 0.0 && H < 1.0)) throw ParameterError("holder_modulus: H must lie in (0, 1)");
    for (double t : times)
        if (!(t >= 0.0 && t <= 0.5)) throw ParameterError("holder_modulus: times must lie in [0, 1/2]");
    HolderStatistic st;
    st.resolution = times.size();
    for (std::size_t a = 0; a < times.size(); ++a)
        for (std::size_t b = a + 1; b < times.size(); ++b) {
            const double gap = std::abs(times[b] - times[a]);
            if (gap <= 0.0) continue;
            const double den = std::pow(gap, 1.0 - H) * std::pow(std::log(1.0 / gap), H);
            st.K_hat = std::max(st.K_hat, std::abs(levels[b] - levels[a]) / den);
        }
    return st;
}

inline HolderStatistic holder_modulus(const LocalTimeField& field, double H) {
    HolderStatistic best;
    best.resolution = field.t_grid.size();
    for (std::size_t i = 0; i < field.x_grid.size(); ++i) {
        const auto st = holder_modulus(field.t_grid, field.row(i), H);
        best.K_hat = std::max(best.K_hat, st.K_hat);
    }
    return best;
}

struct ScalingSamples {
    std::vector<double> at_c;  // l(0, c) on paths over [0, c]
    std::vector<double> at_1;  // l(0, 1) on independent paths over [0, 1]
};

/// Level-zero local times for the scaling check. Each path uses the default
/// bandwidth for its own horizon; streams (seed, 2r) and (seed, 2r + 1) feed the two sets.
inline ScalingSamples scaling_samples(double H, double c, std::size_t mc, std::uint64_t seed, std::size_t N = 4096,
                                      unsigned threads = 1) {
    if (!(c > 0.0)) throw ParameterError("scaling_check: c must be > 0");
    if (mc < 2) throw ParameterError("scaling_check: mc must be >= 2");
    const FbmParams pc{H, 1.0, N, c};
    const FbmParams p1{H, 1.0, N, 1.0};
    pc.validate(true);
    ScalingSamples out{std::vector<double>(mc), std::vector<double>(mc)};
    struct State {
        SpectralFbmGenerator gc;
        SpectralFbmGenerator g1;
        std::vector<double> path;
    };
    const double tc[1] = {c};
    const double t1[1] = {1.0};
    const double eps_c = default_bandwidth(pc);
    const double eps_1 = default_bandwidth(p1);
    parallel_for_with_state(
        mc, threads, [&] { return State{SpectralFbmGenerator(pc), SpectralFbmGenerator(p1), std::vector<double>(N + 1)}; },
        [&](State& s, std::size_t r) {
            RngStream ra(seed, 2 * r);
            s.gc.generate(ra, s.path);
            level_local_time(s.path, pc.dt(), 0.0, tc, eps_c, std::span<double>(&out.at_c[r], 1));
            RngStream rb(seed, 2 * r + 1);
            s.g1.generate(rb, s.path);
            level_local_time(s.path, p1.dt(), 0.0, t1, eps_1, std::span<double>(&out.at_1[r], 1));
        });
    return out;
}

/// Two-sample KS between (1/c) l(0, c) and c^-H l(0, 1), plus the mean ratio
/// E l(0,c) / E l(0,1) against c^(1-H) (delta-method standard error).
inline StatReport scaling_check(double H, double c, std::size_t mc, std::uint64_t seed, double level = 0.01,
                                std::size_t N = 4096, unsigned threads = 1) {
    const auto s = scaling_samples(H, c, mc, seed, N, threads);
    std::vector<double> a(mc);
    std::vector<double> b(mc);
    for (std::size_t r = 0; r < mc; ++r) {
        a[r] = s.at_c[r] / c;
        b[r] = std::pow(c, -H) * s.at_1[r];
    }
    const auto ks = ks_two_sample(a, b);
    const auto mc_ = mean_and_se(s.at_c);
    const auto m1 = mean_and_se(s.at_1);
    const double ratio = mc_.mean / m1.mean;
    const double ratio_se = ratio * std::sqrt(std::pow(mc_.se / mc_.mean, 2) + std::pow(m1.se / m1.mean, 2));
    const double target = std::pow(c, 1.0 - H);
    StatReport rep;
    rep.name = "localtime_scaling";
    rep.statistic = ks.p_value;
    rep.set("ks_distance", ks.distance);
    rep.threshold = level;
    rep.set("ks_p_value", ks.p_value);
    rep.set("mean_ratio", ratio);
    rep.set("mean_ratio_se", ratio_se);
    rep.set("mean_ratio_target", target);
    rep.set("mean_ratio_z", (ratio - target) / ratio_se);
    rep.pass = ks.p_value > level && std::abs(ratio - target) <= 3.0 * ratio_se;
    return rep;
}

/// Brownian paths on [0, 1]: KS of l(0, 1) against |N(0, 1)| draws (Levy), and the
/// worst relative occupation error |dx sum l(x, 1) - 1| over all paths.
/// l(0, 1) uses bandwidth_fraction times the default bandwidth; the occupation error
/// uses the default. E l(0, 1) is biased by about -eps/2 because E l(x, 1) has a cusp at 0.
inline StatReport levy_check(std::size_t mc, std::uint64_t seed, std::size_t N = 16384, std::size_t oracle_size = 100000,
                             double level = 0.01, double occupation_tolerance = 0.02, unsigned threads = 1,
                             double bandwidth_fraction = 1.0) {
    if (mc < 2) throw ParameterError("levy_check: mc must be >= 2");
    if (!(bandwidth_fraction > 0.0)) throw ParameterError("levy_check: bandwidth_fraction must be > 0");
    const FbmParams p{0.5, 1.0, N, 1.0};
    p.validate(true);
    const double eps = default_bandwidth(p);
    std::vector<double> l0(mc);
    std::vector<double> occ(mc);
    const double t1[1] = {1.0};
    struct State {
        SpectralFbmGenerator gen;
        FbmPath path;
    };
    parallel_for_with_state(
        mc, threads, [&] { return State{SpectralFbmGenerator(p), FbmPath{p, std::vector<double>(N + 1)}}; },
        [&](State& s, std::size_t r) {
            RngStream rng(seed, r);
            s.gen.generate(rng, s.path.values);
            level_local_time(s.path.values, p.dt(), 0.0, t1, bandwidth_fraction * eps, std::span<double>(&l0[r], 1));
            const auto xg = default_x_grid(s.path.values, eps);
            const auto field = estimate_local_time(s.path, xg, t1, eps);
            occ[r] = std::abs(occupation_mass(field, 0) - 1.0);
        });
    RngStream orng(seed ^ 0x1E5ULL, mc);
    std::vector<double> oracle(oracle_size);
    for (auto& v : oracle) v = std::abs(orng.normal());
    const auto ks = ks_two_sample(l0, oracle);
    const double worst = *std::max_element(occ.begin(), occ.end());
    StatReport rep;
    rep.name = "localtime_levy";
    rep.statistic = ks.p_value;
    rep.threshold = level;
    rep.set("ks_distance", ks.distance);
    rep.set("ks_p_value", ks.p_value);
    rep.set("bandwidth", bandwidth_fraction * eps);
    rep.set("max_occupation_error", worst);
    rep.set("occupation_tolerance", occupation_tolerance);
    rep.pass = ks.p_value >= level && worst <= occupation_tolerance;
    return rep;
}

inline void write_csv(std::ostream& os, const LocalTimeField& f) {
    os << "# ltsm local-time v1 bandwidth=" << f.bandwidth << " dx=" << f.dx << "\n";
    os << "x,t,value\n";
    char buf[96];
    for (std::size_t i = 0; i < f.x_grid.size(); ++i)
        for (std::size_t j = 0; j < f.t_grid.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", f.x_grid[i], f.t_grid[j], f.at(i, j));
            os << buf;
        }
}

}  // namespace ltsm
