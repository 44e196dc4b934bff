#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skdv/grid.hpp"

namespace skdv {

/// Amplitude/speed c and position xi of a soliton phi_c(x - xi).
struct SolitonParams {
    double c;
    double xi;

    SolitonParams(double amplitude, double position) : c(amplitude), xi(position) {
        if (!(amplitude > 0.0) || !std::isfinite(amplitude))
            throw std::invalid_argument("soliton: c must be positive");
        if (!std::isfinite(position)) throw std::invalid_argument("soliton: xi must be finite");
    }
};

/// Admissible amplitude range together with the weight rate it supports,
/// 0 < c_min < c_max and 0 < w < sqrt(c_min) / 3.
struct AmplitudeWindow {
    double c_min;
    double c_max;
    double w;

    AmplitudeWindow(double lo, double hi, double weight) : c_min(lo), c_max(hi), w(weight) {
        if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("amplitude window: need 0 < c_min < c_max");
        if (!(weight > 0.0) || !(weight < std::sqrt(lo) / 3.0))
            throw std::invalid_argument("amplitude window: need 0 < w < sqrt(c_min)/3");
    }

    bool contains(double c) const { return c >= c_min && c <= c_max; }
};

/// Closed-form profile phi_c(x) = (3c/2) sech^2(sqrt(c) x / 2) and the
/// derivatives the modulation system needs. Every function takes the frame
/// coordinate x (soliton centred at 0).
namespace profile {

namespace detail {
struct Terms {
    double s, sech2, tanh, one_plus_tanh;
};
// One expm1 per point: with e = exp(-2|s|), tanh|s| = (1 - e)/(1 + e) and
// sech^2 s = 4e/(1 + e)^2, both accurate in the tails.
inline Terms terms(double c, double x) {
    const double s = 0.5 * std::sqrt(c) * x;
    const double em = std::expm1(-2.0 * std::abs(s));
    const double e = 1.0 + em;
    const double denom = 2.0 + em;
    const double t = -em / denom;
    return {s, 4.0 * e / (denom * denom), s < 0.0 ? -t : t, s < 0.0 ? 2.0 * e / denom : 2.0 / denom};
}
inline void require_positive(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("soliton: c must be positive");
}
}  // namespace detail

inline double phi(double c, double x) {
    const auto t = detail::terms(c, x);
    return 1.5 * c * t.sech2;
}

inline double dphi_dx(double c, double x) {
    const auto t = detail::terms(c, x);
    return -1.5 * c * std::sqrt(c) * t.sech2 * t.tanh;
}

inline double d2phi_dx2(double c, double x) {
    const auto t = detail::terms(c, x);
    return 0.75 * c * c * t.sech2 * (2.0 * t.tanh * t.tanh - t.sech2);
}

inline double d3phi_dx3(double c, double x) {
    const auto t = detail::terms(c, x);
    return 1.5 * c * c * std::sqrt(c) * t.sech2 * t.tanh * (2.0 * t.sech2 - t.tanh * t.tanh);
}

inline double dphi_dc(double c, double x) {
    const auto t = detail::terms(c, x);
    return 1.5 * t.sech2 * (1.0 - t.s * t.tanh);
}

inline double d2phi_dc2(double c, double x) {
    const auto t = detail::terms(c, x);
    return 0.75 * t.s / c * t.sech2 * (-3.0 * t.tanh + 2.0 * t.s * t.tanh * t.tanh - t.s * t.sech2);
}

inline double d2phi_dxdc(double c, double x) {
    const auto t = detail::terms(c, x);
    return 0.75 * std::sqrt(c) * t.sech2 * (-3.0 * t.tanh + 2.0 * t.s * t.tanh * t.tanh - t.s * t.sech2);
}

/// zeta_c(x) = int_{-inf}^x d_c phi_c, in closed form
/// (3 / (2 sqrt c)) (1 + tanh s + s sech^2 s). Tends to 3/sqrt(c) as x -> inf.
inline double zeta(double c, double x) {
    const auto t = detail::terms(c, x);
    return 1.5 / std::sqrt(c) * (t.one_plus_tanh + t.s * t.sech2);
}

namespace detail {
// zeta = (3/2) c^{-1/2} G(s),  d_c zeta = (3/4) c^{-3/2} h(s),  h = -G + s G'.
inline double h(const Terms& t) {
    return -t.one_plus_tanh + t.s * t.sech2 - 2.0 * t.s * t.s * t.sech2 * t.tanh;
}
inline double h_prime(const Terms& t) {
    return -6.0 * t.s * t.sech2 * t.tanh - 2.0 * t.s * t.s * t.sech2 * (t.sech2 - 2.0 * t.tanh * t.tanh);
}
}  // namespace detail

inline double dzeta_dc(double c, double x) {
    const auto t = detail::terms(c, x);
    return 0.75 * std::pow(c, -1.5) * detail::h(t);
}

inline double d2zeta_dc2(double c, double x) {
    const auto t = detail::terms(c, x);
    return 0.375 * std::pow(c, -2.5) * (-3.0 * detail::h(t) + t.s * detail::h_prime(t));
}

}  // namespace profile

namespace detail {
template <class F>
Field sample_profile(double c, const Grid& grid, double xi, F f) {
    profile::detail::require_positive(c);
    return Field::sample(grid, [&](double x) { return f(c, grid.wrap_centered(x - xi)); });
}

/// Share of the quadrature cell [y - dx/2, y + dx/2] lying past the left and
/// right ends of the window [-L/2, L/2).
struct SeamShares {
    double left, right;
};
inline SeamShares seam_shares(double y, double length, double dx) {
    const double half = 0.5 * length;
    return {std::max(0.0, -half - (y - 0.5 * dx)) / dx, std::max(0.0, (y + 0.5 * dx) - half) / dx};
}

/// A profile with limits 0 at -inf and g_inf at +inf, truncated to the window:
/// the cell straddling the seam takes the value of each end in proportion, so
/// pairings stay continuous in xi.
inline double truncated_line_value(double g, double g_inf, double y, const Grid& grid) {
    const auto sh = seam_shares(y, grid.length(), grid.spacing());
    return g * (1.0 - sh.left - sh.right) + g_inf * sh.left;
}

template <class F>
Field sample_truncated_profile(double c, const Grid& grid, double xi, double g_inf, F f) {
    profile::detail::require_positive(c);
    return Field::sample(grid, [&](double x) {
        const double y = grid.wrap_centered(x - xi);
        return truncated_line_value(f(c, y), g_inf, y, grid);
    });
}
}  // namespace detail

/// phi_c(x - xi), sampled at the periodic image of x - xi nearest to 0.
inline Field phi(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_profile(c, grid, xi, profile::phi);
}
inline Field dphi_dx(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_profile(c, grid, xi, profile::dphi_dx);
}
inline Field d2phi_dx2(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_profile(c, grid, xi, profile::d2phi_dx2);
}
inline Field dphi_dc(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_profile(c, grid, xi, profile::dphi_dc);
}
inline Field d2phi_dc2(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_profile(c, grid, xi, profile::d2phi_dc2);
}

/// zeta_c on the truncated line: the primitive starts from 0 at the left end of
/// the soliton-centred window and reaches 3/sqrt(c) at its right end. It is only
/// meaningful when paired against fields that decay on the right.
inline Field zeta(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_truncated_profile(c, grid, xi, 3.0 / std::sqrt(c), profile::zeta);
}
inline Field dzeta_dc(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_truncated_profile(c, grid, xi, -1.5 * std::pow(c, -1.5), profile::dzeta_dc);
}
inline Field d2zeta_dc2(double c, const Grid& grid, double xi = 0.0) {
    return detail::sample_truncated_profile(c, grid, xi, 2.25 * std::pow(c, -2.5), profile::d2zeta_dc2);
}

/// Coefficients of the projection onto the generalized kernel
/// span{d_x phi_c, d_c phi_c}: P_c g = <g, a_x> d_x phi_c + <g, a_c> d_c phi_c with
/// a_x = -(2/9) c^{-1/2} zeta_c + (2/9) c^{-2} phi_c and a_c = (2/9) c^{-1/2} phi_c.
/// The dual functions satisfy <d_x phi, a_x> = <d_c phi, a_c> = 1 and
/// <d_c phi, a_x> = <d_x phi, a_c> = 0.
inline Field spectral_projection(const Field& g, double c, double xi = 0.0) {
    const Grid& grid = g.grid();
    const Field ph = phi(c, grid, xi);
    const Field z = zeta(c, grid, xi);
    const double k = 2.0 / 9.0;
    const Field a_x = (-k / std::sqrt(c)) * z + (k / (c * c)) * ph;
    const Field a_c = (k / std::sqrt(c)) * ph;
    return inner_product(g, a_x) * dphi_dx(c, grid, xi) + inner_product(g, a_c) * dphi_dc(c, grid, xi);
}

/// Q_c g = g - P_c g; satisfies <Q_c g, phi_c> = <Q_c g, zeta_c> = 0.
inline Field complementary_projection(const Field& g, double c, double xi = 0.0) {
    return g - spectral_projection(g, c, xi);
}

}  // namespace skdv
