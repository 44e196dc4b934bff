#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skdv/grid.hpp"

namespace skdv {

enum class KernelFamily { gaussian, exponential_smoothed, band_limited };

inline KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "exponential-smoothed" || name == "exponential_smoothed") return KernelFamily::exponential_smoothed;
    if (name == "band-limited" || name == "band_limited") return KernelFamily::band_limited;
    throw std::invalid_argument("unknown kernel family '" + name + "'");
}

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::exponential_smoothed: return "exponential-smoothed";
        case KernelFamily::band_limited: return "band-limited";
    }
    return "?";
}

/// Translation-invariant covariance: Q is convolution with the even kernel q,
/// Q^{1/2} convolution with q_{1/2}, the inverse transform of sqrt(q_hat).
///
/// `q_hat[m]` holds the transform at wavenumber k_m, m = 0..N/2, scaled so that
/// (Qf)(x_i) = sum_j q(x_i - x_j) f_j dx is the multiplier q_hat.
class CovarianceKernel {
public:
    const Grid& grid() const { return grid_; }
    const Field& q() const { return q_; }
    std::span<const double> q_hat() const { return q_hat_; }
    std::span<const double> q_half_hat() const { return q_half_hat_; }

    /// q(0) = ||q_{1/2}||^2 = (1/L) sum over all modes of q_hat.
    double q0() const { return q0_; }

    bool normalized() const { return normalized_; }

    /// Builds a kernel from lag samples q(j dx) (j taken as the periodic
    /// displacement). Rejects spectra with genuinely negative modes; roundoff
    /// negatives below 1e-12 max(q_hat) are clamped to zero.
    static CovarianceKernel from_function(const Grid& grid, const std::function<double(double)>& q,
                                          bool normalize = true) {
        const std::size_t n = grid.size();
        std::vector<double> lags(n);
        for (std::size_t j = 0; j < n; ++j)
            lags[j] = q(grid.wrap_centered(static_cast<double>(j) * grid.spacing()));
        const auto coeffs = grid.fft()->forward(lags);
        std::vector<double> hat(coeffs.size());
        double hat_max = 0.0;
        for (std::size_t m = 0; m < coeffs.size(); ++m) {
            hat[m] = coeffs[m].real() * grid.spacing();
            hat_max = std::max(hat_max, std::abs(hat[m]));
        }
        for (double& h : hat) {
            if (h < -1e-12 * hat_max)
                throw std::invalid_argument("covariance kernel has a negative Fourier mode on this grid");
            h = std::max(h, 0.0);
        }
        return from_spectrum(grid, std::move(hat), normalize);
    }

    /// Builds a kernel directly from its (nonnegative) half spectrum.
    static CovarianceKernel from_spectrum(const Grid& grid, std::vector<double> hat, bool normalize = true) {
        if (hat.size() != grid.size() / 2 + 1) throw std::invalid_argument("kernel spectrum has wrong length");
        for (double h : hat)
            if (!(h >= 0.0) || !std::isfinite(h))
                throw std::invalid_argument("covariance kernel has a negative Fourier mode on this grid");
        CovarianceKernel k(grid);
        k.q_hat_ = std::move(hat);
        double q0 = mode_sum(k.q_hat_) / grid.length();
        if (!(q0 > 0.0)) throw std::invalid_argument("covariance kernel is identically zero");
        if (normalize) {
            for (double& h : k.q_hat_) h /= q0;
            q0 = mode_sum(k.q_hat_) / grid.length();
        }
        k.q0_ = q0;
        k.normalized_ = normalize;
        k.q_half_hat_.resize(k.q_hat_.size());
        std::transform(k.q_hat_.begin(), k.q_hat_.end(), k.q_half_hat_.begin(), [](double h) { return std::sqrt(h); });

        // Physical kernel on the grid: inverse transform of q_hat / dx.
        std::vector<Complex> coeffs(k.q_hat_.size());
        for (std::size_t m = 0; m < coeffs.size(); ++m) coeffs[m] = k.q_hat_[m] / grid.spacing();
        const auto lags = grid.fft()->backward(coeffs);
        const double dx = grid.spacing();
        const std::size_t n = grid.size();
        for (std::size_t j = 0; j < n; ++j) {
            const double lag = grid.wrap_centered(grid.x(j));
            auto idx = static_cast<long long>(std::llround(lag / dx));
            idx = ((idx % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n);
            // Exact when the grid origin is a multiple of dx (the default -L/2).
            k.q_[j] = lags[static_cast<std::size_t>(idx)];
        }
        return k;
    }

private:
    explicit CovarianceKernel(const Grid& grid) : grid_(grid), q_(grid) {}

    static double mode_sum(const std::vector<double>& hat) {
        // Each interior half-spectrum mode stands for the pair +/-k.
        double s = hat.front() + hat.back();
        for (std::size_t m = 1; m + 1 < hat.size(); ++m) s += 2.0 * hat[m];
        return s;
    }

    Grid grid_;
    Field q_;
    std::vector<double> q_hat_;
    std::vector<double> q_half_hat_;
    double q0_ = 1.0;
    bool normalized_ = true;
};

/// Kernel families with nonnegative spectrum, normalized to q(0) = 1 unless
/// `normalize` is false.
///   gaussian:             q(x) = exp(-x^2 / (2 l^2))
///   exponential-smoothed: q(x) = (1 + |x|/l) exp(-|x|/l)     (q_hat ~ (1 + k^2 l^2)^{-2})
///   band-limited:         q_hat flat on |k| <= 1/l, zero above (q ~ sinc(x/l))
inline CovarianceKernel build_kernel(KernelFamily family, double correlation_length, const Grid& grid,
                                     bool normalize = true) {
    if (!(correlation_length > 0.0) || !std::isfinite(correlation_length))
        throw std::invalid_argument("correlation length must be positive");
    const double l = correlation_length;
    switch (family) {
        case KernelFamily::gaussian:
            return CovarianceKernel::from_function(
                grid, [l](double x) { return std::exp(-0.5 * x * x / (l * l)); }, normalize);
        case KernelFamily::exponential_smoothed:
            return CovarianceKernel::from_function(
                grid, [l](double x) { const double a = std::abs(x) / l; return (1.0 + a) * std::exp(-a); },
                normalize);
        case KernelFamily::band_limited: {
            std::vector<double> hat(grid.size() / 2 + 1, 0.0);
            const double cutoff = 1.0 / l;
            for (std::size_t m = 0; m < hat.size(); ++m)
                if (grid.wavenumber(m) <= cutoff) hat[m] = std::numbers::pi * l;
            return CovarianceKernel::from_spectrum(grid, std::move(hat), normalize);
        }
    }
    throw std::invalid_argument("unknown kernel family");
}

namespace detail {
template <class Coeffs>
Field apply_real_multiplier(const Field& g, Coeffs mult) {
    const Grid& grid = g.grid();
    auto coeffs = spectrum(g);
    for (std::size_t m = 0; m < coeffs.size(); ++m) coeffs[m] *= mult[m];
    return from_spectrum(grid, coeffs);
}
}  // namespace detail

/// Q g = q * g (circular convolution).
inline Field apply_Q(const CovarianceKernel& kernel, const Field& g) {
    if (!(g.grid() == kernel.grid())) throw GridMismatch();
    return detail::apply_real_multiplier(g, kernel.q_hat());
}

/// Q^{1/2} g = q_{1/2} * g.
inline Field apply_Q_half(const CovarianceKernel& kernel, const Field& g) {
    if (!(g.grid() == kernel.grid())) throw GridMismatch();
    return detail::apply_real_multiplier(g, kernel.q_half_hat());
}

/// <Q a, b> = <Q^{1/2} a, Q^{1/2} b>.
inline double q_inner(const CovarianceKernel& kernel, const Field& a, const Field& b) {
    return inner_product(apply_Q(kernel, a), b);
}

// ---------------------------------------------------------------------------
// Reproducible random streams
// ---------------------------------------------------------------------------

/// Identifies one independent random stream: (seed, trajectory, step) plus a
/// stream tag distinguishing consumers within the same step.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t trajectory = 0;
    std::uint64_t step = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: output i is a bijective hash of (key, i). Models
/// UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(const StreamKey& k)
        : key_(splitmix64(splitmix64(splitmix64(splitmix64(k.seed) ^ k.trajectory) ^ k.step) ^ k.stream)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return splitmix64(key_ ^ splitmix64(counter_++)); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

struct NoiseIncrement {
    Field dW;
    double dt;
    StreamKey key;
};

/// Draws Q-Wiener increments dW = Q^{1/2} xi, xi spatial white noise with
/// variance dt/dx per grid point, so that Var <g, dW> = dt <Q g, g>. The white
/// noise is generated directly in Fourier space (law of the DFT of i.i.d.
/// Gaussians), which costs one inverse transform per increment.
class NoiseSampler {
public:
    explicit NoiseSampler(const CovarianceKernel& kernel)
        : kernel_(&kernel), coeffs_(kernel.grid().size() / 2 + 1) {}

    void sample(double dt, const StreamKey& key, std::span<double> out) {
        if (!(dt > 0.0)) throw std::invalid_argument("noise increment: dt must be positive");
        const Grid& grid = kernel_->grid();
        const std::size_t n = grid.size();
        const std::size_t half = n / 2;
        // DFT of i.i.d. N(0, s2): real modes have variance n s2, complex modes n s2 / 2 per part.
        const double s2 = dt / grid.spacing();
        const double full = std::sqrt(static_cast<double>(n) * s2);
        const double part = std::sqrt(0.5 * static_cast<double>(n) * s2);
        CounterRng rng(key);
        std::normal_distribution<double> normal(0.0, 1.0);
        const auto root = kernel_->q_half_hat();
        coeffs_[0] = Complex(full * normal(rng) * root[0], 0.0);
        for (std::size_t m = 1; m < half; ++m) {
            const double re = normal(rng);
            const double im = normal(rng);
            coeffs_[m] = Complex(part * re * root[m], part * im * root[m]);
        }
        coeffs_[half] = Complex(full * normal(rng) * root[half], 0.0);
        grid.fft()->backward(coeffs_, out);
    }

    NoiseIncrement sample(double dt, const StreamKey& key) {
        Field dW(kernel_->grid());
        sample(dt, key, dW.values());
        return {std::move(dW), dt, key};
    }

private:
    const CovarianceKernel* kernel_;
    std::vector<Complex> coeffs_;
};

inline NoiseIncrement sample_increment(const CovarianceKernel& kernel, double dt, const StreamKey& key) {
    NoiseSampler sampler(kernel);
    return sampler.sample(dt, key);
}

}  // namespace skdv
