#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skdv/fft.hpp"

namespace skdv {

class GridMismatch : public std::invalid_argument {
public:
    GridMismatch() : std::invalid_argument("fields live on different grids") {}
};

/// Uniform periodic grid x_j = origin + j * dx, j = 0..N-1, truncating the line
/// to [origin, origin + length).
class Grid {
public:
    Grid(double length, std::size_t n_points) : Grid(length, n_points, -0.5 * length) {}

    Grid(double length, std::size_t n_points, double origin)
        : length_(length), n_(n_points), origin_(origin) {
        if (!(length > 0.0) || !std::isfinite(length))
            throw std::invalid_argument("grid: length must be positive and finite");
        if (n_points < 8 || (n_points & (n_points - 1)) != 0)
            throw std::invalid_argument("grid: n_points must be a power of two >= 8");
        if (!std::isfinite(origin)) throw std::invalid_argument("grid: origin must be finite");
        spacing_ = length / static_cast<double>(n_points);
    }

    double length() const { return length_; }
    std::size_t size() const { return n_; }
    double spacing() const { return spacing_; }
    double origin() const { return origin_; }

    double x(std::size_t j) const { return origin_ + static_cast<double>(j) * spacing_; }

    std::vector<double> points() const {
        std::vector<double> xs(n_);
        for (std::size_t j = 0; j < n_; ++j) xs[j] = x(j);
        return xs;
    }

    /// Angular wavenumber of half-spectrum index m in [0, N/2].
    double wavenumber(std::size_t m) const {
        return 2.0 * std::numbers::pi * static_cast<double>(m) / length_;
    }

    /// Largest retained wavenumber (Nyquist).
    double max_wavenumber() const { return wavenumber(n_ / 2); }

    /// Periodic image of x in [origin, origin + length).
    double wrap(double x) const {
        double r = std::fmod(x - origin_, length_);
        if (r < 0.0) r += length_;
        return origin_ + r;
    }

    /// Periodic image of a displacement in [-length/2, length/2).
    double wrap_centered(double d) const {
        double r = std::fmod(d + 0.5 * length_, length_);
        if (r < 0.0) r += length_;
        return r - 0.5 * length_;
    }

    std::shared_ptr<const FftPlan> fft() const { return FftPlan::get(n_); }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.length_ == b.length_ && a.n_ == b.n_ && a.origin_ == b.origin_;
    }

private:
    double length_;
    std::size_t n_;
    double origin_;
    double spacing_;
};

/// Real scalar field sampled on a Grid.
class Field {
public:
    explicit Field(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

    Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw std::invalid_argument("field: value count does not match grid size");
    }

    template <class F>
    static Field sample(const Grid& grid, F&& f) {
        Field out(grid);
        for (std::size_t j = 0; j < grid.size(); ++j) out.values_[j] = f(grid.x(j));
        return out;
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double operator[](std::size_t j) const { return values_[j]; }
    double& operator[](std::size_t j) { return values_[j]; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    Field& operator+=(const Field& o) {
        require_same(o);
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
        return *this;
    }
    Field& operator-=(const Field& o) {
        require_same(o);
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }

    /// Pointwise product.
    friend Field operator*(const Field& a, const Field& b) {
        a.require_same(b);
        Field out(a.grid_);
        for (std::size_t j = 0; j < a.values_.size(); ++j) out.values_[j] = a.values_[j] * b.values_[j];
        return out;
    }

    void require_same(const Field& o) const {
        if (!(grid_ == o.grid_)) throw GridMismatch();
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Exponential weight rate w of the spaces L^2_w, H^1_w (norm of e^{wx} g).
struct WeightConfig {
    double w;

    explicit WeightConfig(double rate) : w(rate) {
        if (!(rate > 0.0) || !std::isfinite(rate))
            throw std::invalid_argument("weight: w must be positive");
    }
};

/// L^2 pairing by the rectangle rule, sum_j a_j b_j dx.
inline double inner_product(const Field& a, const Field& b) {
    a.require_same(b);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s * a.grid().spacing();
}

inline double l2_norm(const Field& v) { return std::sqrt(inner_product(v, v)); }

/// Half spectrum (N/2 + 1 coefficients) of a field, unnormalized DFT.
inline std::vector<Complex> spectrum(const Field& v) { return v.grid().fft()->forward(v.values()); }

inline Field from_spectrum(const Grid& grid, std::span<const Complex> coeffs) {
    return Field(grid, grid.fft()->backward(coeffs));
}

/// Applies the Fourier multiplier m(k) (evaluated at k >= 0; the negative half
/// follows by Hermitian symmetry). The Nyquist coefficient is multiplied by
/// Re m(k_max) so the result stays real.
template <class Multiplier>
Field apply_multiplier(const Field& v, Multiplier&& m) {
    const Grid& g = v.grid();
    auto coeffs = spectrum(v);
    const std::size_t half = g.size() / 2;
    for (std::size_t k = 0; k < half; ++k) coeffs[k] *= Complex(m(g.wavenumber(k)));
    coeffs[half] *= std::real(Complex(m(g.wavenumber(half))));
    return from_spectrum(g, coeffs);
}

/// Fourier-multiplier derivative (ik)^order, order in {1, 2, 3}. The Nyquist
/// mode is discarded.
inline Field spectral_derivative(const Field& v, int order) {
    if (order < 1 || order > 3) throw std::invalid_argument("spectral_derivative: order must be 1, 2 or 3");
    const Grid& g = v.grid();
    auto coeffs = spectrum(v);
    const std::size_t half = g.size() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        Complex ik(0.0, g.wavenumber(k));
        Complex factor = ik;
        for (int p = 1; p < order; ++p) factor *= ik;
        coeffs[k] *= factor;
    }
    coeffs[half] = 0.0;
    return from_spectrum(g, coeffs);
}

/// Returns x -> v(x + shift) for the trigonometric interpolant of v.
inline Field translate(const Field& v, double shift) {
    return apply_multiplier(v, [shift](double k) { return std::polar(1.0, k * shift); });
}

/// ||e^{w x} v||_{L^2}.
inline double weighted_l2_norm(const Field& v, const WeightConfig& cfg) {
    const Grid& g = v.grid();
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double e = std::exp(cfg.w * g.x(j)) * v[j];
        s += e * e;
    }
    return std::sqrt(s * g.spacing());
}

/// ||e^{w x} v||_{H^1}, derivative of the weighted field taken spectrally.
inline double weighted_h1_norm(const Field& v, const WeightConfig& cfg) {
    const Grid& g = v.grid();
    Field weighted = Field::sample(g, [&](double x) { return std::exp(cfg.w * x); }) * v;
    const Field d = spectral_derivative(weighted, 1);
    return std::sqrt(inner_product(weighted, weighted) + inner_product(d, d));
}

}  // namespace skdv
