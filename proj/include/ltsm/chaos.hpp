#pragma once

// Chaos expansion of the FBM local time: Hermite kernels h_n(x, t) evaluated
// pathwise, their second moments, partial-sum reconstruction and the W_n processes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ltsm/error.hpp"
#include "ltsm/fbm.hpp"
#include "ltsm/lepage.hpp"

namespace ltsm {

inline constexpr std::size_t kMaxChaosOrder = 30;

/// H_n = He_n / n!, so H_0 = 1, H_1(x) = x, H_2(x) = (x^2 - 1)/2.
inline double hermite(std::size_t n, double x) {
    if (n == 0) return 1.0;
    double h0 = 1.0;
    double h1 = x;
    for (std::size_t k = 1; k < n; ++k) {
        const double h2 = (x * h1 - h0) / static_cast<double>(k + 1);
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

/// H_0(x) .. H_m(x) into out[0..m].
inline void hermite_all(std::size_t m, double x, double* out) {
    out[0] = 1.0;
    if (m == 0) return;
    out[1] = x;
    for (std::size_t k = 1; k < m; ++k) out[k + 1] = (x * out[k] - out[k - 1]) / static_cast<double>(k + 1);
}

struct ChaosConfig {
    std::size_t m_max = 12;
    double H = 0.5;
    double sigma = 1.0;
    double t = 1.0;
    std::vector<double> x_grid;
    double tolerance = 1e-10;

    void validate() const {
        detail::require_hurst(H, "ChaosConfig");
        if (!(sigma > 0.0)) throw ParameterError("ChaosConfig: sigma must be > 0");
        if (!(t > 0.0)) throw ParameterError("ChaosConfig: t must be > 0");
        if (!(tolerance > 0.0)) throw ParameterError("ChaosConfig: tolerance must be > 0");
        if (m_max > kMaxChaosOrder) throw ParameterError("ChaosConfig: m_max must be <= 30");
    }
};

/// Per-order kernel values for one path: h[n][i] = h_n(x_i, t).
struct ChaosField {
    std::vector<double> x_grid;
    double t = 0.0;
    std::vector<std::vector<double>> h;

    /// sum_{n <= m} h_n(x_i, t) for each x_i.
    std::vector<double> partial_sum(std::size_t m) const {
        std::vector<double> s(x_grid.size(), 0.0);
        for (std::size_t n = 0; n <= m && n < h.size(); ++n)
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += h[n][i];
        return s;
    }
};

/// h_0(x, t) = (1/sigma) int_0^t p_{s^2H}(x/sigma) ds. With u = s^(1-H) the s^-H
/// singularity disappears: h_0 = (1 / (sigma (1-H) sqrt(2 pi))) int_0^{t^(1-H)} exp(-y^2 / 2 s^2H) du.
inline double expected_local_time(double x, double t, double H, double sigma = 1.0) {
    detail::require_hurst(H, "expected_local_time");
    if (!(t > 0.0)) throw ParameterError("expected_local_time: t must be > 0");
    if (!(sigma > 0.0)) throw ParameterError("expected_local_time: sigma must be > 0");
    const double y2 = (x / sigma) * (x / sigma);
    const double q = 1.0 / (1.0 - H);
    auto f = [y2, q, H](double u) {
        if (u <= 0.0) return y2 > 0.0 ? 0.0 : 1.0;
        const double s2h = std::pow(u, 2.0 * H * q);
        return std::exp(-0.5 * y2 / s2h);
    };
    double err = 0.0;
    const double upper = std::pow(t, 1.0 - H);
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, upper, 20, 1e-12, &err);
    if (!(err <= 1e-9 * std::max(1.0, std::abs(v)))) {
        std::ostringstream os;
        os << "expected_local_time: quadrature did not converge (x=" << x << ", t=" << t << ", H=" << H
           << ", error=" << err << ")";
        throw NumericalError(os.str());
    }
    return v / (sigma * (1.0 - H) * std::sqrt(2.0 * std::numbers::pi));
}

/// h_0(., 1) tabulated for fast W_0 sampling, using h_0(x, t) = t^(1-H) h_0(x / t^H, 1).
class ExpectedLocalTimeTable {
public:
    ExpectedLocalTimeTable(double H, double sigma, double x_max = 12.0, std::size_t points = 2401)
        : H_(H), sigma_(sigma), x_max_(x_max) {
        std::vector<double> v(points);
        const double step = x_max / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i) v[i] = expected_local_time(step * static_cast<double>(i), 1.0, H, sigma);
        spline_ = boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), 0.0, step);
    }
    double operator()(double x, double t) const {
        if (t <= 0.0) return 0.0;
        const double z = std::abs(x) / std::pow(t, H_);
        if (z >= x_max_) return 0.0;
        return std::pow(t, 1.0 - H_) * std::max(0.0, spline_(z));
    }

private:
    double H_;
    double sigma_;
    double x_max_;
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

namespace detail {

/// Accumulates h_1..h_m at one level along a path sampled at s_j = j dt, snapshotting
/// the running integral at each requested time. Integration is by trapezoid in
/// u = s^(1-H) over the grid nodes from s_1 on; the first cell [0, s_1] uses
/// Gauss-Legendre in u with B linearly interpolated.
class ChaosIntegrator {
public:
    ChaosIntegrator(double H, double sigma, std::size_t m) : H_(H), sigma_(sigma), m_(m), hx_(m + 1), hb_(m + 1) {
        norm_ = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * (1.0 - H) * sigma);
        fact_.resize(m + 1);
        fact_[0] = 1.0;
        for (std::size_t n = 1; n <= m; ++n) fact_[n] = fact_[n - 1] * static_cast<double>(n);
    }

    /// Adds (n!/sigma) p(s) H_n(y/s^H) H_n(b/(sigma s^H)) * weight * (ds/du) to acc[n], n = 1..m,
    /// given sh = s^H.
    void add(double sh, double b, double y, double weight, double* acc) {
        const double a = y / sh;
        const double e = 0.5 * a * a;
        if (e > 700.0) return;
        // p_{s^2H}(y) ds/du = exp(-a^2/2) / (sqrt(2 pi) (1 - H))
        const double base = std::exp(-e) * norm_ * weight;
        hermite_all(m_, a, hx_.data());
        hermite_all(m_, b / (sigma_ * sh), hb_.data());
        for (std::size_t n = 1; n <= m_; ++n) acc[n] += base * fact_[n] * hx_[n] * hb_[n];
    }

    /// Integrates over [0, t_k] for each t in t_grid (each within the path horizon).
    /// out[k * (m+1) + n] receives h_n(x, t_k) for n >= 1; n = 0 is left to the caller.
    void run(std::span<const double> path, double dt, double x, std::span<const double> t_grid, std::span<double> out) {
        const std::size_t nt = t_grid.size();
        const std::size_t w = m_ + 1;
        const std::size_t n_steps = path.size() - 1;
        const double y = x / sigma_;
        const double q = 1.0 / (1.0 - H_);
        std::vector<std::size_t> order(nt);
        for (std::size_t k = 0; k < nt; ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t_grid[a] < t_grid[b]; });

        std::vector<double> acc(w, 0.0);
        std::vector<double> tmp(w, 0.0);
        // First cell [0, s_1], u in [0, dt^(1-H)], with B(s) = B(s_1) s / dt.
        std::vector<double> first(w, 0.0);
        {
            const double u1 = std::pow(dt, 1.0 - H_);
            const auto& nodes = boost::math::quadrature::gauss<double, 16>::abscissa();
            const auto& weights = boost::math::quadrature::gauss<double, 16>::weights();
            for (int half = 0; half < 2; ++half) {
                // geometric split of the cell toward u = 0
                const double lo = half == 0 ? 0.0 : 0.25 * u1;
                const double hi = half == 0 ? 0.25 * u1 : u1;
                for (std::size_t i = 0; i < nodes.size(); ++i)
                    for (int sgn : {-1, 1}) {
                        if (i == 0 && sgn == -1 && nodes[0] == 0.0) continue;
                        const double z = sgn * nodes[i];
                        const double u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * z;
                        const double wt = 0.5 * (hi - lo) * weights[i];
                        const double s = std::pow(u, q);
                        add(std::pow(s, H_), path[1] * s / dt, y, wt, first.data());
                    }
            }
        }
        std::size_t done = 0;  // acc holds the integral over [0, s_done]
        prepare(dt, path.size());
        auto step_to = [&](std::size_t j) {
            // trapezoid in u over [s_{j-1}, s_j]
            const double half = 0.5 * (u_[j] - u_[j - 1]);
            add(sh_[j - 1], path[j - 1], y, half, acc.data());
            add(sh_[j], path[j], y, half, acc.data());
        };
        for (std::size_t ok : order) {
            const double t = t_grid[ok];
            const double r = t / dt;
            auto k = static_cast<std::size_t>(std::floor(r + 1e-9));
            if (k > n_steps) k = n_steps;
            double* dst = out.data() + ok * w;
            if (t <= 0.0) {
                for (std::size_t n = 1; n <= m_; ++n) dst[n] = 0.0;
                continue;
            }
            if (k == 0) {
                // inside the first cell: scale the first-cell integral roughly by u-fraction
                const double frac = std::pow(t / dt, 1.0 - H_);
                for (std::size_t n = 1; n <= m_; ++n) dst[n] = first[n] * frac;
                continue;
            }
            if (done == 0) {
                for (std::size_t n = 1; n <= m_; ++n) acc[n] = first[n];
                done = 1;
            }
            while (done < k) step_to(++done);
            for (std::size_t n = 1; n <= m_; ++n) dst[n] = acc[n];
            const double rem = t - static_cast<double>(k) * dt;
            if (rem > 1e-12 * dt && k < n_steps) {
                // partial cell with linear interpolation of B
                const double b1 = path[k] + (path[k + 1] - path[k]) * rem / dt;
                const double half = 0.5 * (std::pow(t, 1.0 - H_) - u_[k]);
                std::fill(tmp.begin(), tmp.end(), 0.0);
                add(sh_[k], path[k], y, half, tmp.data());
                add(std::pow(t, H_), b1, y, half, tmp.data());
                for (std::size_t n = 1; n <= m_; ++n) dst[n] += tmp[n];
            }
        }
    }

private:
    double H_;
    double sigma_;
    std::size_t m_;
    std::vector<double> hx_;
    std::vector<double> hb_;
    std::vector<double> fact_;
    double norm_ = 0.0;
    double grid_dt_ = -1.0;
    std::vector<double> sh_;  // (j dt)^H
    std::vector<double> u_;   // (j dt)^(1-H)

    void prepare(double dt, std::size_t nodes) {
        if (grid_dt_ == dt && sh_.size() >= nodes) return;
        grid_dt_ = dt;
        sh_.resize(nodes);
        u_.resize(nodes);
        for (std::size_t j = 0; j < nodes; ++j) {
            const double s = static_cast<double>(j) * dt;
            sh_[j] = std::pow(s, H_);
            u_[j] = std::pow(s, 1.0 - H_);
        }
    }
};

}  // namespace detail

/// h_n(x, t) on one path.
inline double chaos_term(const FbmPath& path, std::size_t n, double x, double t) {
    if (n > kMaxChaosOrder) throw ParameterError("chaos_term: n > 30 is outside the supported range");
    const auto& p = path.params;
    if (!(t > 0.0 && t <= p.T * (1.0 + 1e-12))) throw ParameterError("chaos_term: t must lie in (0, T]");
    if (n == 0) return expected_local_time(x, t, p.H, p.sigma());
    detail::ChaosIntegrator ci(p.H, p.sigma(), n);
    std::vector<double> out(n + 1, 0.0);
    const double tg[1] = {t};
    ci.run(path.values, p.dt(), x, tg, out);
    return out[n];
}

/// h_0 .. h_m on an x grid at time t for one path.
inline ChaosField chaos_field(const FbmPath& path, std::size_t m, std::span<const double> x_grid, double t) {
    if (m > kMaxChaosOrder) throw ParameterError("chaos_field: m > 30 is outside the supported range");
    const auto& p = path.params;
    if (!(t > 0.0 && t <= p.T * (1.0 + 1e-12))) throw ParameterError("chaos_field: t must lie in (0, T]");
    ChaosField f;
    f.x_grid.assign(x_grid.begin(), x_grid.end());
    f.t = t;
    f.h.assign(m + 1, std::vector<double>(x_grid.size(), 0.0));
    detail::ChaosIntegrator ci(p.H, p.sigma(), m);
    std::vector<double> out(m + 1, 0.0);
    const double tg[1] = {t};
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        f.h[0][i] = expected_local_time(x_grid[i], t, p.H, p.sigma());
        if (m == 0) continue;
        ci.run(path.values, p.dt(), x_grid[i], tg, out);
        for (std::size_t n = 1; n <= m; ++n) f.h[n][i] = out[n];
    }
    return f;
}

/// sum_{n <= m} h_n(x_i, t).
inline std::vector<double> reconstruct_local_time(const FbmPath& path, std::size_t m, std::span<const double> x_grid,
                                                  double t) {
    return chaos_field(path, m, x_grid, t).partial_sum(m);
}

struct ChaosTailBound {
    double delta = 0.0;               // sum_{n=m+1}^{M} E h_n^2 plus the geometric remainder
    double remainder = 0.0;           // extrapolated sum beyond M
    std::size_t M = 0;
    std::vector<double> second_moments;  // E h_n^2, n = 0..M
};

/// E h_n(x,t)^2 = (n!/sigma^2) int int p p H_n H_n rho^n ds ds' for n = 0..M, with
/// rho(s, s') = Corr(B_H(s), B_H(s')). The double integral is taken over s < s' in the
/// variables w = log s and v = log(s'/s) with composite Gauss-Legendre rules.
inline std::vector<double> chaos_second_moments(std::size_t M, double x, double t, double H, double sigma = 1.0) {
    detail::require_hurst(H, "chaos_tail_bound");
    if (!(t > 0.0) || !(sigma > 0.0)) throw ParameterError("chaos_tail_bound: t and sigma must be > 0");
    const double y = x / sigma;
    const auto& gx = boost::math::quadrature::gauss<double, 10>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 10>::weights();
    auto nodes = [&](double a, double b, std::vector<double>& pts, std::vector<double>& wts) {
        for (std::size_t i = 0; i < gx.size(); ++i)
            for (int sgn : {-1, 1}) {
                if (i == 0 && sgn == -1 && gx[0] == 0.0) continue;
                pts.push_back(0.5 * (a + b) + 0.5 * (b - a) * sgn * gx[i]);
                wts.push_back(0.5 * (b - a) * gw[i]);
            }
    };
    // Outer nodes in w = log s.
    const double span_w = 40.0 / (1.0 - H);
    const double w_hi = std::log(t);
    std::vector<double> wp, ww;
    const int outer_panels = 240;
    for (int k = 0; k < outer_panels; ++k) {
        const double a = w_hi - span_w + span_w * k / outer_panels;
        nodes(a, a + span_w / outer_panels, wp, ww);
    }
    std::vector<double> fact(M + 1);
    fact[0] = 1.0;
    for (std::size_t n = 1; n <= M; ++n) fact[n] = fact[n - 1] * static_cast<double>(n);
    const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);

    std::vector<double> acc(M + 1, 0.0);
    std::vector<double> h1(M + 1), h2(M + 1);
    std::vector<double> vp, vw;
    for (std::size_t i = 0; i < wp.size(); ++i) {
        const double s = std::exp(wp[i]);
        const double sh = std::pow(s, H);
        const double a1 = y / sh;
        if (0.5 * a1 * a1 > 700.0) continue;
        const double f1 = c / sh * std::exp(-0.5 * a1 * a1) * s * ww[i];  // p(s) ds
        hermite_all(M, a1, h1.data());
        // Inner nodes in v = log(s'/s) on [0, log(t/s)], panels doubling away from the diagonal.
        const double v_hi = std::log(t / s);
        if (v_hi <= 0.0) continue;
        vp.clear();
        vw.clear();
        double lo = 0.0;
        double width = std::min(v_hi, 0.005);
        while (lo < v_hi) {
            const double hi = std::min(v_hi, lo + width);
            nodes(lo, hi, vp, vw);
            lo = hi;
            width *= 1.6;
        }
        for (std::size_t k = 0; k < vp.size(); ++k) {
            const double s2 = s * std::exp(vp[k]);
            const double sh2 = std::pow(s2, H);
            const double a2 = y / sh2;
            if (0.5 * a2 * a2 > 700.0) continue;
            const double f2 = c / sh2 * std::exp(-0.5 * a2 * a2) * s2 * vw[k];  // p(s') ds'
            const double rho = (std::pow(s, 2.0 * H) + std::pow(s2, 2.0 * H) - std::pow(s2 - s, 2.0 * H)) / (2.0 * sh * sh2);
            hermite_all(M, a2, h2.data());
            double rn = 1.0;
            const double base = 2.0 * f1 * f2;  // both orderings
            for (std::size_t n = 0; n <= M; ++n) {
                acc[n] += base * fact[n] * h1[n] * h2[n] * rn;
                rn *= rho;
            }
        }
    }
    for (auto& v : acc) v /= sigma * sigma;
    return acc;
}

inline ChaosTailBound chaos_tail_bound(std::size_t m, double x, double t, double H, double sigma = 1.0) {
    ChaosTailBound b;
    b.M = m + 40;
    b.second_moments = chaos_second_moments(b.M, x, t, H, sigma);
    for (std::size_t n = m + 1; n <= b.M; ++n) b.delta += std::max(0.0, b.second_moments[n]);
    // Tail beyond M per parity class: power law C n^-beta fitted to the last two terms
    // of the class, geometric when the fitted exponent does not exceed 1.
    for (std::size_t L : {b.M, b.M - 1}) {
        const double last = b.second_moments[L];
        const double prev = b.second_moments[L - 2];
        if (!(last > 0.0 && prev > 0.0)) continue;
        const double beta = std::log(prev / last) / std::log(static_cast<double>(L) / static_cast<double>(L - 2));
        const double l = static_cast<double>(L);
        if (beta > 1.0) {
            b.remainder += last * 0.5 * l * std::pow(1.0 + 1.0 / l, 1.0 - beta) / (beta - 1.0);
        } else if (last < prev) {
            const double r = last / prev;
            b.remainder += last * r / (1.0 - r);
        }
    }
    b.delta += b.remainder;
    return b;
}

/// Kernel functor giving h_n(x, t_k) on one path, for the series sampler.
class ChaosKernel {
public:
    ChaosKernel(std::size_t n, double H, double sigma) : n_(n), H_(H), sigma_(sigma), table_(H, sigma) {
        if (n > kMaxChaosOrder) throw ParameterError("ChaosKernel: n > 30 is outside the supported range");
    }
    void operator()(std::span<const double> path, double dt, double x, std::span<const double> t_grid,
                    std::span<double> out) const {
        if (n_ == 0) {
            for (std::size_t k = 0; k < t_grid.size(); ++k) out[k] = table_(x, t_grid[k]);
            return;
        }
        thread_local std::vector<double> buf;
        buf.assign(t_grid.size() * (n_ + 1), 0.0);
        detail::ChaosIntegrator ci(H_, sigma_, n_);
        ci.run(path, dt, x, t_grid, buf);
        for (std::size_t k = 0; k < t_grid.size(); ++k) out[k] = buf[k * (n_ + 1) + n_];
    }

private:
    std::size_t n_;
    double H_;
    double sigma_;
    ExpectedLocalTimeTable table_;
};

/// W_n(t) = int h_n(x, t) dM by the truncated series with the chaos kernel.
inline YSample sample_Wn_paths(std::size_t n, const SeriesConfig& cfg) {
    ChaosKernel k(n, cfg.H, cfg.fbm.sigma());
    return sample_Y_paths(cfg, k);
}

/// (int h_0(x, t)^alpha dx)^(1/alpha), the scale of W_0(t).
inline double w0_scale(double alpha, double t, double H, double sigma = 1.0) {
    auto f = [&](double x) {
        const double v = expected_local_time(x, t, H, sigma);
        return std::pow(v, alpha);
    };
    double err = 0.0;
    const double reach = 12.0 * sigma * std::pow(t, H);
    const double v = 2.0 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, reach, 15, 1e-10, &err);
    return std::pow(v, 1.0 / alpha);
}

inline void write_csv(std::ostream& os, const ChaosField& f) {
    os << "# ltsm chaos-field v1 t=" << f.t << "\n";
    os << "n,x,value\n";
    char buf[96];
    for (std::size_t n = 0; n < f.h.size(); ++n)
        for (std::size_t i = 0; i < f.x_grid.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", n, f.x_grid[i], f.h[n][i]);
            os << buf;
        }
}

}  // namespace ltsm
