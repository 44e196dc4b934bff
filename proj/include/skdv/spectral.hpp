#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "skdv/grid.hpp"
#include "skdv/soliton.hpp"

namespace skdv {

/// Symbol of the free conjugated operator -(D - w)^3 + c (D - w) at D = ik.
inline Complex free_symbol(double k, double c, double w) {
    const Complex z(-w, k);
    return -z * z * z + c * z;
}

/// A_w = e^{wx} L_c e^{-wx} = -(D - w)^3 + c (D - w) - 2 (D - w)(phi_c .), with
/// L_c = -d_x^3 + c d_x - 2 d_x(phi_c .) and D the Fourier differentiation
/// matrix (Nyquist mode treated as k = 0).
struct WeightedOperator {
    Eigen::MatrixXd matrix;
    double c;
    double w;
    Grid grid;
};

namespace detail {
// First column of the circulant matrix of a Fourier multiplier m(ik).
template <class M>
std::vector<double> circulant_column(const Grid& grid, M m) {
    const std::size_t n = grid.size();
    std::vector<Complex> coeffs(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double kk = (k == n / 2) ? 0.0 : grid.wavenumber(k);
        coeffs[k] = m(kk);
    }
    return grid.fft()->backward(coeffs);
}
}  // namespace detail

inline WeightedOperator build_weighted_operator(double c, double w, const Grid& grid) {
    if (!(c > 0.0)) throw std::invalid_argument("weighted operator: c must be positive");
    if (!(w > 0.0) || !(w < std::sqrt(c))) throw std::invalid_argument("weighted operator: need 0 < w < sqrt(c)");
    const std::size_t n = grid.size();
    if (n > 2048) throw std::invalid_argument("weighted operator: N > 2048 exceeds the dense eigensolver budget");
    const auto d_col = detail::circulant_column(grid, [](double k) { return Complex(0.0, k); });
    const auto s_col = detail::circulant_column(grid, [&](double k) { return free_symbol(k, c, w); });
    const Field ph = phi(c, grid);
    Eigen::MatrixXd a(n, n);
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = (j + n - l) % n;
            a(j, l) = s_col[idx] - 2.0 * d_col[idx] * ph[l];
        }
        a(l, l) += 2.0 * w * ph[l];
    }
    return {std::move(a), c, w, grid};
}

struct OperatorSpectrum {
    std::vector<Complex> values;
    /// Per eigenvalue: eigenvector carries at most 1% of its mass in the outer
    /// 10% of the domain. Empty when eigenvectors were not computed.
    std::vector<bool> localized;
};

inline OperatorSpectrum eigenvalues(const WeightedOperator& op, bool classify = false) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix, classify);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    OperatorSpectrum out;
    const auto vals = es.eigenvalues();
    out.values.assign(vals.data(), vals.data() + vals.size());
    if (classify) {
        const auto vecs = es.eigenvectors();
        const Grid& g = op.grid;
        const double centre = g.origin() + 0.5 * g.length();
        out.localized.resize(out.values.size());
        for (Eigen::Index i = 0; i < vecs.cols(); ++i) {
            double total = 0.0, outer = 0.0;
            for (Eigen::Index j = 0; j < vecs.rows(); ++j) {
                const double m = std::norm(vecs(j, i));
                total += m;
                if (std::abs(g.x(static_cast<std::size_t>(j)) - centre) > 0.4 * g.length()) outer += m;
            }
            out.localized[static_cast<std::size_t>(i)] = outer <= 0.01 * total;
        }
    }
    return out;
}

/// Drops periodic-truncation artifacts: eigenvalues right of the free bound
/// -w(c - w^2) whose eigenvectors are not localized. A point eigenvalue of the
/// operator on the line has a decaying eigenfunction, so it survives.
inline OperatorSpectrum filter_spurious(const OperatorSpectrum& spec, const WeightedOperator& op) {
    if (spec.localized.size() != spec.values.size())
        throw std::invalid_argument("filter_spurious: spectrum was computed without eigenvectors");
    const double bound = -op.w * (op.c - op.w * op.w);
    OperatorSpectrum out;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        if (spec.localized[i] || spec.values[i].real() <= bound) {
            out.values.push_back(spec.values[i]);
            out.localized.push_back(spec.localized[i]);
        }
    }
    return out;
}

/// -max{Re lambda : |lambda| > zero_tol}.
inline double spectral_gap(const OperatorSpectrum& spec, double zero_tol = 1e-5) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& l : spec.values)
        if (std::abs(l) > zero_tol) top = std::max(top, l.real());
    return -top;
}

inline double spectral_gap(const WeightedOperator& op, double zero_tol = 1e-5) {
    return spectral_gap(filter_spurious(eigenvalues(op, true), op), zero_tol);
}

/// Propagates y' = A_w y (y = e^{wx} v) with the integrating-factor
/// (Lawson) RK4 scheme: the constant-coefficient part is exact in Fourier
/// space, -2 (D - w)(phi_c y) is treated explicitly.
class WeightedSemigroup {
public:
    WeightedSemigroup(double c, double w, const Grid& grid, double dt)
        : grid_(grid), fft_(grid.fft()), dt_(dt), half_(grid.size() / 2), phi_(phi(c, grid)),
          e_half_(half_ + 1), dmw_(half_ + 1), y_(grid.size()), k1_(half_ + 1), k2_(half_ + 1), k3_(half_ + 1),
          k4_(half_ + 1), stage_(half_ + 1) {
        if (!(dt > 0.0)) throw std::invalid_argument("semigroup: dt must be positive");
        for (std::size_t m = 0; m <= half_; ++m) {
            const double k = (m == half_) ? 0.0 : grid.wavenumber(m);
            e_half_[m] = std::exp(free_symbol(k, c, w) * (0.5 * dt));
            dmw_[m] = Complex(-w, k);
        }
    }

    double dt() const { return dt_; }

    /// Advances the weighted field y by `steps` steps in place.
    void advance(Field& y, std::size_t steps) {
        auto s = spectrum(y);
        for (std::size_t i = 0; i < steps; ++i) rk4(s);
        fft_->backward(s, y.values());
    }

private:
    void rhs(const std::vector<Complex>& in, std::vector<Complex>& out) {
        fft_->backward(in, y_);
        for (std::size_t j = 0; j < y_.size(); ++j) y_[j] *= phi_[j];
        fft_->forward(y_, out);
        for (std::size_t m = 0; m <= half_; ++m) out[m] *= -2.0 * dmw_[m];
    }

    void rk4(std::vector<Complex>& s) {
        const std::size_t n = half_ + 1;
        const double h = dt_;
        rhs(s, k1_);
        for (std::size_t m = 0; m < n; ++m) stage_[m] = e_half_[m] * (s[m] + 0.5 * h * k1_[m]);
        rhs(stage_, k2_);
        for (std::size_t m = 0; m < n; ++m) stage_[m] = e_half_[m] * s[m] + 0.5 * h * k2_[m];
        rhs(stage_, k3_);
        for (std::size_t m = 0; m < n; ++m) stage_[m] = e_half_[m] * (e_half_[m] * s[m] + h * k3_[m]);
        rhs(stage_, k4_);
        for (std::size_t m = 0; m < n; ++m) {
            const Complex e = e_half_[m];
            s[m] = e * e * s[m] + h / 6.0 * (e * e * k1_[m] + 2.0 * e * (k2_[m] + k3_[m]) + k4_[m]);
        }
    }

    Grid grid_;
    std::shared_ptr<const FftPlan> fft_;
    double dt_;
    std::size_t half_;
    Field phi_;
    std::vector<Complex> e_half_, dmw_;
    std::vector<double> y_;
    std::vector<Complex> k1_, k2_, k3_, k4_, stage_;
};

inline Field weight_field(const Field& v, double w) {
    const Grid& g = v.grid();
    Field out(g);
    for (std::size_t j = 0; j < g.size(); ++j) out[j] = std::exp(w * g.x(j)) * v[j];
    return out;
}

/// e^{L_c t} g in the weighted representation: returns y(t) with y(0) = e^{wx} g.
inline Field propagate_weighted(double c, double w, const Field& g, double t, double dt = 1e-3) {
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    WeightedSemigroup sg(c, w, g.grid(), t / static_cast<double>(std::max<std::size_t>(steps, 1)));
    Field y = weight_field(g, w);
    sg.advance(y, steps);
    return y;
}

struct DecayFit {
    double rate;  // fitted -d/dt log ||.||_{L^2_w} on [t_max/2, t_max]
    bool decays;  // rate > 0
    std::vector<double> times;
    std::vector<double> norms;
};

/// Propagates Q_c g (or g itself when `project` is false) under L_c and fits
/// the exponential decay rate of its L^2_w norm over [t_max/2, t_max].
inline DecayFit semigroup_decay_check(double c, double w, const Field& g, double t_max, bool project = true,
                                      double dt = 1e-2, std::size_t samples = 64) {
    if (!(t_max > 0.0)) throw std::invalid_argument("decay check: t_max must be positive");
    const Field start = project ? complementary_projection(g, c) : g;
    const auto steps_total = static_cast<std::size_t>(std::llround(t_max / dt));
    const std::size_t per_sample = std::max<std::size_t>(1, steps_total / samples);
    WeightedSemigroup sg(c, w, g.grid(), dt);
    Field y = weight_field(start, w);
    DecayFit fit{0.0, false, {0.0}, {l2_norm(y)}};
    std::size_t done = 0;
    while (done < steps_total) {
        const std::size_t k = std::min(per_sample, steps_total - done);
        sg.advance(y, k);
        done += k;
        fit.times.push_back(static_cast<double>(done) * dt);
        fit.norms.push_back(l2_norm(y));
    }
    double st = 0, sl = 0, stt = 0, stl = 0;
    int count = 0;
    for (std::size_t i = 0; i < fit.times.size(); ++i) {
        if (fit.times[i] < 0.5 * t_max || !(fit.norms[i] > 0.0)) continue;
        const double l = std::log(fit.norms[i]);
        st += fit.times[i];
        sl += l;
        stt += fit.times[i] * fit.times[i];
        stl += fit.times[i] * l;
        ++count;
    }
    if (count >= 2) {
        const double slope = (count * stl - st * sl) / (count * stt - st * st);
        fit.rate = -slope;
    }
    fit.decays = fit.rate > 0.0;
    return fit;
}

}  // namespace skdv
