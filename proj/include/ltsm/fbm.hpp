#pragma once

// Fractional Brownian motion: covariance, exact circulant-embedding synthesis,
// and the Volterra kernel K_H with its norm constant and generator.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ltsm/error.hpp"
#include "ltsm/rng.hpp"

namespace ltsm {

struct FbmParams {
    double H = 0.5;
    double sigma2 = 1.0;  // Var B_H(1)
    std::size_t N = 1024;
    double T = 1.0;

    double sigma() const { return std::sqrt(sigma2); }
    double dt() const { return T / static_cast<double>(N); }

    void validate(bool require_power_of_two = false) const {
        if (!(H > 0.0 && H < 1.0)) throw ParameterError("FbmParams: H must lie in (0, 1)");
        if (!(sigma2 > 0.0)) throw ParameterError("FbmParams: sigma2 must be > 0");
        if (N < 2) throw ParameterError("FbmParams: N must be >= 2");
        if (!(T > 0.0)) throw ParameterError("FbmParams: T must be > 0");
        if (require_power_of_two && (N & (N - 1)) != 0)
            throw ParameterError("FbmParams: N must be a power of two for the spectral generator");
    }
};

/// A sampled path on the uniform grid t_j = j T / N, j = 0..N.
struct FbmPath {
    FbmParams params;
    std::vector<double> values;  // values[0] = 0, size N + 1

    double time(std::size_t j) const { return params.T * static_cast<double>(j) / static_cast<double>(params.N); }
    std::vector<double> times() const {
        std::vector<double> t(values.size());
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = time(j);
        return t;
    }
};

inline void write_csv(std::ostream& os, const FbmPath& path) {
    os << "# ltsm fbm-path v1 H=" << path.params.H << " sigma2=" << path.params.sigma2 << " N=" << path.params.N
       << " T=" << path.params.T << "\n";
    os << "t,value\n";
    char buf[64];
    for (std::size_t j = 0; j < path.values.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.time(j), path.values[j]);
        os << buf;
    }
}

/// Cov(B_H(s), B_H(t)); arguments are swapped if s > t.
inline double fbm_cov(double s, double t, double H, double sigma2 = 1.0) {
    if (s > t) std::swap(s, t);
    if (s < 0.0) throw ParameterError("fbm_cov: times must be >= 0");
    const double e = 2.0 * H;
    return 0.5 * sigma2 * (std::pow(t, e) + std::pow(s, e) - std::pow(t - s, e));
}

/// Autocovariance of unit-step fractional Gaussian noise at lag k.
inline double fgn_autocov(std::size_t k, double H) {
    const double e = 2.0 * H;
    const double kk = static_cast<double>(k);
    return 0.5 * (std::pow(kk + 1.0, e) - 2.0 * std::pow(kk, e) + std::pow(std::abs(kk - 1.0), e));
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place forward complex FFT of fixed size with its own aligned buffer.
/// FFTW planning is not thread-safe, so plan creation/destruction is serialized.
class FftBuffer {
public:
    explicit FftBuffer(std::size_t n) : n_(n) {
        data_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        if (!data_) throw std::bad_alloc();
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;
    ~FftBuffer() {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(data_);
    }

    std::size_t size() const { return n_; }
    fftw_complex* data() { return data_; }
    void execute() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* data_ = nullptr;
    fftw_plan plan_ = nullptr;
};

}  // namespace detail

/// Exact fBM synthesis by circulant embedding of fractional Gaussian noise.
///
/// One FFT of size 2N yields two independent paths (real and imaginary parts).
/// Holds FFT scratch, so each thread needs its own instance.
class SpectralFbmGenerator {
public:
    explicit SpectralFbmGenerator(const FbmParams& params) : params_(params) {
        params_.validate(true);
        step_scale_ = params_.sigma() * std::pow(params_.dt(), params_.H);
        brownian_ = params_.H == 0.5;
        if (brownian_) return;

        const std::size_t n = params_.N;
        const std::size_t m = 2 * n;
        fft_ = std::make_unique<detail::FftBuffer>(m);
        auto* d = fft_->data();
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t lag = k <= n ? k : m - k;
            d[k][0] = fgn_autocov(lag, params_.H);
            d[k][1] = 0.0;
        }
        fft_->execute();
        sqrt_eig_.resize(m);
        double max_eig = 0.0;
        for (std::size_t k = 0; k < m; ++k) max_eig = std::max(max_eig, d[k][0]);
        for (std::size_t k = 0; k < m; ++k) {
            double lam = d[k][0];
            if (lam < 0.0) {
                if (lam < -1e-10 * max_eig) {
                    std::ostringstream os;
                    os << "circulant embedding is not positive semi-definite: eigenvalue " << lam << " at index " << k
                       << " (H=" << params_.H << ", N=" << n << ")";
                    throw NumericalError(os.str());
                }
                lam = 0.0;
            }
            sqrt_eig_[k] = std::sqrt(lam / static_cast<double>(m));
        }
    }

    const FbmParams& params() const { return params_; }

    /// Fills two independent paths (each of size N + 1).
    void generate_pair(RngStream& rng, std::span<double> a, std::span<double> b) {
        const std::size_t n = params_.N;
        if (a.size() != n + 1 || b.size() != n + 1) throw ParameterError("generate_pair: span size must be N + 1");
        a[0] = 0.0;
        b[0] = 0.0;
        if (brownian_) {
            for (std::size_t j = 1; j <= n; ++j) a[j] = a[j - 1] + step_scale_ * rng.normal();
            for (std::size_t j = 1; j <= n; ++j) b[j] = b[j - 1] + step_scale_ * rng.normal();
            return;
        }
        auto* d = fft_->data();
        const std::size_t m = 2 * n;
        for (std::size_t k = 0; k < m; ++k) {
            d[k][0] = sqrt_eig_[k] * rng.normal();
            d[k][1] = sqrt_eig_[k] * rng.normal();
        }
        fft_->execute();
        for (std::size_t j = 1; j <= n; ++j) {
            a[j] = a[j - 1] + step_scale_ * d[j - 1][0];
            b[j] = b[j - 1] + step_scale_ * d[j - 1][1];
        }
    }

    /// Fills one path. For H != 1/2 this discards the second path of the pair.
    void generate(RngStream& rng, std::span<double> a) {
        if (brownian_) {
            a[0] = 0.0;
            for (std::size_t j = 1; j < a.size(); ++j) a[j] = a[j - 1] + step_scale_ * rng.normal();
            return;
        }
        spare_.resize(params_.N + 1);
        generate_pair(rng, a, spare_);
    }

private:
    FbmParams params_;
    double step_scale_ = 1.0;
    bool brownian_ = false;
    std::unique_ptr<detail::FftBuffer> fft_;
    std::vector<double> sqrt_eig_;
    std::vector<double> spare_;
};

inline FbmPath generate_fbm_spectral(const FbmParams& params, RngStream& rng) {
    SpectralFbmGenerator gen(params);
    FbmPath path{params, std::vector<double>(params.N + 1)};
    gen.generate(rng, path.values);
    return path;
}

// ---------------------------------------------------------------------------
// Volterra representation

/// K_H(t, s) = (t-s)^(H-1/2) - (H-1/2) int_s^t (r-s)^(H-3/2) (1 - (s/r)^-(H-1/2)) dr
/// for 0 < s < t, zero otherwise. The substitution r = s + u^2 removes the endpoint
/// singularity; the remaining integral goes to adaptive Gauss-Kronrod.
inline double kernel_KH(double t, double s, double H) {
    if (!(H > 0.0 && H < 1.0)) throw ParameterError("kernel_KH: H must lie in (0, 1)");
    if (!(t > 0.0)) throw ParameterError("kernel_KH: t must be > 0");
    if (!(s > 0.0 && s < t)) return 0.0;
    const double a = H - 0.5;
    if (a == 0.0) return 1.0;
    // With r = s + s v^2 the integral becomes 2 s^(H-1/2) J(V), V = sqrt((t-s)/s), where
    // J(V) = int_0^V v^(2H-2) (1 - (1+v^2)^(H-1/2)) dv depends on s only through V.
    auto f = [a, H](double v) {
        if (v <= 0.0) return 0.0;
        const double y = v * v;
        // (1 - (1+y)^a) / y without cancellation
        const double g = y < 1e-8 ? -a * (1.0 + 0.5 * (a - 1.0) * y) : -std::expm1(a * std::log1p(y)) / y;
        return 2.0 * std::pow(v, 2.0 * H) * g;
    };
    using boost::math::quadrature::gauss_kronrod;
    static thread_local boost::math::quadrature::tanh_sinh<double> endpoint_rule;
    const double V = std::sqrt((t - s) / s);
    const double knee = std::min(1.0, V);
    double err = 0.0;
    double err2 = 0.0;
    double l1 = 0.0;
    // v^(2H) endpoint behaviour below the knee; tanh-sinh copes with it
    double J = endpoint_rule.integrate(f, 0.0, knee, 1e-11, &err, &l1);
    if (knee < V) {
        // v = e^w flattens the power-law decay above the knee
        auto g = [&f](double w) {
            const double v = std::exp(w);
            return f(v) * v;
        };
        J += gauss_kronrod<double, 31>::integrate(g, 0.0, std::log(V), 15, 1e-12, &err2);
    }
    err += err2;
    if (!(err <= 1e-10 * std::max(1.0, std::abs(J)))) {
        std::ostringstream os;
        os << "kernel_KH: quadrature did not converge (t=" << t << ", s=" << s << ", H=" << H << ", error=" << err << ")";
        throw NumericalError(os.str());
    }
    const double integral = std::pow(s, a) * J;
    return std::pow(t - s, a) - a * integral;
}

/// C_H = int_0^1 K_H(1, w)^2 dw, so that ||K_H(s, .)||^2 = C_H s^(2H).
inline double kernel_norm_constant(double H) {
    if (!(H > 0.0 && H < 1.0)) throw ParameterError("kernel_norm_constant: H must lie in (0, 1)");
    if (H == 0.5) return 1.0;
    // K_H(1, w)^2 has integrable power singularities at both ends; tanh-sinh absorbs them.
    boost::math::quadrature::tanh_sinh<double> integrator;
    double err = 0.0;
    double l1 = 0.0;
    const double value = integrator.integrate(
        [H](double w) {
            const double k = kernel_KH(1.0, w, H);
            return k * k;
        },
        0.0, 1.0, 1e-10, &err, &l1);
    if (!(err <= 1e-8 * std::max(1.0, value))) {
        std::ostringstream os;
        os << "kernel_norm_constant: quadrature did not converge (H=" << H << ", error=" << err << ")";
        throw NumericalError(os.str());
    }
    return value;
}

/// Lower-triangular kernel matrix K_H(t_k, s_i) on a uniform grid, with s_i the
/// cell midpoints (i + 1/2) dt. The left endpoint s = 0 is not usable because
/// K_H(t, s) diverges there for H > 1/2.
class VolterraGrid {
public:
    explicit VolterraGrid(const FbmParams& params) : params_(params) {
        params_.validate();
        c_h_ = kernel_norm_constant(params_.H);
        const std::size_t n = params_.N;
        const double dt = params_.dt();
        rows_.resize(n + 1);
        // K_H(t, s) = t^(H-1/2) K_H(1, s/t); row k only needs ratios (i + 1/2)/k.
        for (std::size_t k = 1; k <= n; ++k) {
            const double t = static_cast<double>(k) * dt;
            rows_[k].resize(k);
            for (std::size_t i = 0; i < k; ++i) rows_[k][i] = kernel_KH(t, (static_cast<double>(i) + 0.5) * dt, params_.H);
        }
    }

    const FbmParams& params() const { return params_; }
    double norm_constant() const { return c_h_; }
    double kernel(std::size_t k, std::size_t i) const { return i < k ? rows_[k][i] : 0.0; }
    std::span<const double> row(std::size_t k) const { return rows_[k]; }

private:
    FbmParams params_;
    double c_h_ = 1.0;
    std::vector<std::vector<double>> rows_;
};

/// Midpoint discretization of int_0^t K_H(t,s) W(ds), scaled by (sigma2 / C_H)^(1/2).
/// Approximate; bias shrinks with N.
inline FbmPath generate_fbm_volterra(const VolterraGrid& grid, RngStream& rng) {
    const auto& p = grid.params();
    const std::size_t n = p.N;
    const double sd = std::sqrt(p.dt());
    std::vector<double> dw(n);
    for (auto& w : dw) w = sd * rng.normal();
    const double scale = std::sqrt(p.sigma2 / grid.norm_constant());
    FbmPath path{p, std::vector<double>(n + 1, 0.0)};
    for (std::size_t k = 1; k <= n; ++k) {
        const auto r = grid.row(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += r[i] * dw[i];
        path.values[k] = scale * acc;
    }
    return path;
}

inline FbmPath generate_fbm_volterra(const FbmParams& params, RngStream& rng) {
    return generate_fbm_volterra(VolterraGrid(params), rng);
}

/// Terminal value B_H(T) of the Volterra discretization; O(N) per draw.
class VolterraTerminal {
public:
    explicit VolterraTerminal(const FbmParams& params) : params_(params) {
        params_.validate();
        const double dt = params_.dt();
        weights_.resize(params_.N);
        for (std::size_t i = 0; i < params_.N; ++i)
            weights_[i] = kernel_KH(params_.T, (static_cast<double>(i) + 0.5) * dt, params_.H);
        scale_ = std::sqrt(params_.sigma2 / kernel_norm_constant(params_.H)) * std::sqrt(dt);
    }

    double draw(RngStream& rng) const {
        double acc = 0.0;
        for (double w : weights_) acc += w * rng.normal();
        return scale_ * acc;
    }

    /// Exact variance of the discretized terminal value.
    double variance() const {
        double v = 0.0;
        for (double w : weights_) v += w * w;
        return scale_ * scale_ * v;
    }

private:
    FbmParams params_;
    std::vector<double> weights_;
    double scale_ = 1.0;
};

}  // namespace ltsm
