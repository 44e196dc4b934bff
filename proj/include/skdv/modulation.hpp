#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skdv/grid.hpp"
#include "skdv/noise.hpp"
#include "skdv/record.hpp"
#include "skdv/soliton.hpp"
#include "skdv/solver.hpp"

namespace skdv {

class DecompositionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularModulation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense 2x2 matrix [[a11, a12], [a21, a22]].
struct Mat2 {
    double a11 = 0, a12 = 0, a21 = 0, a22 = 0;

    double det() const { return a11 * a22 - a12 * a21; }

    double scale() const {
        return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
    }

    /// Solves M x = b; throws SingularModulation when |det| < 1e-10 scale^2.
    std::array<double, 2> solve(std::array<double, 2> b) const {
        const double d = det();
        const double s = scale();
        if (!(std::abs(d) >= 1e-10 * s * s) || s == 0.0)
            throw SingularModulation("modulation matrix K is singular");
        return {(a22 * b[0] - a12 * b[1]) / d, (a11 * b[1] - a21 * b[0]) / d};
    }
};

/// phi_c and its derivatives sampled on the soliton frame (centred at 0).
struct ProfileSet {
    double c;
    Field phi, dphi_dx, d2phi_dx2, dphi_dc, d2phi_dc2, zeta, dzeta_dc, d2zeta_dc2;

    ProfileSet(double amplitude, const Grid& grid)
        : c(amplitude), phi(grid), dphi_dx(grid), d2phi_dx2(grid), dphi_dc(grid), d2phi_dc2(grid),
          zeta(grid), dzeta_dc(grid), d2zeta_dc2(grid) {
        profile::detail::require_positive(c);
        const double rc = std::sqrt(c);
        const double z_inf = 3.0 / rc, zc_inf = -1.5 / (c * rc), zcc_inf = 2.25 / (c * c * rc);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double y = grid.wrap_centered(grid.x(j));
            const auto t = profile::detail::terms(c, y);
            const double q = -3.0 * t.tanh + 2.0 * t.s * t.tanh * t.tanh - t.s * t.sech2;
            const double h = profile::detail::h(t);
            phi[j] = 1.5 * c * t.sech2;
            dphi_dx[j] = -1.5 * c * rc * t.sech2 * t.tanh;
            d2phi_dx2[j] = 0.75 * c * c * t.sech2 * (2.0 * t.tanh * t.tanh - t.sech2);
            dphi_dc[j] = 1.5 * t.sech2 * (1.0 - t.s * t.tanh);
            d2phi_dc2[j] = 0.75 * t.s / c * t.sech2 * q;
            zeta[j] = detail::truncated_line_value(1.5 / rc * (t.one_plus_tanh + t.s * t.sech2), z_inf, y, grid);
            dzeta_dc[j] = detail::truncated_line_value(0.75 / (c * rc) * h, zc_inf, y, grid);
            d2zeta_dc2[j] = detail::truncated_line_value(
                0.375 / (c * c * rc) * (-3.0 * h + t.s * profile::detail::h_prime(t)), zcc_inf, y, grid);
        }
    }

    const Grid& grid() const { return phi.grid(); }
};

// ---------------------------------------------------------------------------
// Decomposition u(. + xi) = phi_c + v with <v, phi_c> = <v, zeta_c> = 0
// ---------------------------------------------------------------------------

struct Decomposition {
    double c;
    double xi;
    Field v;
    double r1;  // <v, phi_c>
    double r2;  // <v, zeta_c>
    int iterations;
};

struct DecomposeOptions {
    double tol = 1e-11;
    int max_iterations = 50;
};

/// Newton iteration on G(c, xi) = (<u, phi_c(. - xi)> - ||phi_c||^2,
/// <u, zeta_c(. - xi)> - <phi_c, zeta_c>), which vanishes exactly when the
/// orthogonality conditions hold. The Jacobian is K_c(v) up to the
/// translation (with the xi-column read off directly in the lab frame).
inline Decomposition decompose(const Field& u, const SolitonParams& guess, const WeightConfig& weight,
                               const DecomposeOptions& opts = {}) {
    (void)weight;
    const Grid& grid = u.grid();
    const std::size_t n = grid.size();
    const double dx = grid.spacing();
    if (!u.all_finite()) throw DecompositionError("decompose: non-finite input field");
    double uu = 0.0;
    for (std::size_t j = 0; j < n; ++j) uu += u[j] * u[j];

    double c = guess.c;
    double xi = guess.xi;
    int it = 0;
    for (;; ++it) {
        double a = 0, b = 0, ucp = 0, uxp = 0, ucz = 0, pp = 0, pz = 0, pcp = 0, cpz = 0, pcz = 0;
        const double rc = std::sqrt(c);
        const double z_inf = 3.0 / rc, zc_inf = -1.5 / (c * rc);
        for (std::size_t j = 0; j < n; ++j) {
            const double y = grid.wrap_centered(grid.x(j) - xi);
            const auto t = profile::detail::terms(c, y);
            const double ph = 1.5 * c * t.sech2;
            const double px = -1.5 * c * rc * t.sech2 * t.tanh;
            const double pc = 1.5 * t.sech2 * (1.0 - t.s * t.tanh);
            const double z = detail::truncated_line_value(1.5 / rc * (t.one_plus_tanh + t.s * t.sech2), z_inf, y, grid);
            const double zc = detail::truncated_line_value(0.75 / (c * rc) * profile::detail::h(t), zc_inf, y, grid);
            const double uj = u[j];
            a += uj * ph;
            b += uj * z;
            ucp += uj * pc;
            uxp += uj * px;
            ucz += uj * zc;
            pp += ph * ph;
            pz += ph * z;
            pcp += ph * pc;
            cpz += pc * z;
            pcz += ph * zc;
        }
        const double g1 = (a - pp) * dx;
        const double g2 = (b - pz) * dx;
        const double v_norm = std::sqrt(std::max(0.0, (uu - 2.0 * a + pp) * dx));
        if (std::max(std::abs(g1), std::abs(g2)) <= opts.tol * (1.0 + v_norm)) break;
        if (it >= opts.max_iterations)
            throw DecompositionError("decompose: Newton did not converge in " + std::to_string(opts.max_iterations) +
                                     " iterations");
        const Mat2 jac{(ucp - 2.0 * pcp) * dx, -uxp * dx, (ucz - cpz - pcz) * dx, -ucp * dx};
        std::array<double, 2> step;
        try {
            step = jac.solve({-g1, -g2});
        } catch (const SingularModulation&) {
            throw DecompositionError("decompose: singular Jacobian");
        }
        double lambda = 1.0;
        while (c + lambda * step[0] <= 0.25 * c && lambda > 1e-3) lambda *= 0.5;
        c += lambda * step[0];
        xi += lambda * step[1];
        if (!(c > 0.0) || !std::isfinite(c) || !std::isfinite(xi))
            throw DecompositionError("decompose: amplitude left (0, inf)");
        if (std::abs(step[0]) + std::abs(step[1]) < 1e-15 * (1.0 + std::abs(xi))) break;
    }

    xi = grid.wrap_centered(xi);
    Field v = translate(u, xi) - phi(c, grid);
    const double r1 = inner_product(v, phi(c, grid));
    const double r2 = inner_product(v, zeta(c, grid));
    return {c, xi, std::move(v), r1, r2, it};
}

// ---------------------------------------------------------------------------
// Modulation coefficients
// ---------------------------------------------------------------------------

/// K_c(v) = [[<-phi + v, d_c phi>, <d_x v, phi>],
///           [<v, d_c zeta> - <d_c phi, zeta>, <d_x(phi + v), zeta>]].
inline Mat2 assemble_K(const Field& v, const ProfileSet& p) {
    const Field vx = spectral_derivative(v, 1);
    return {inner_product(v - p.phi, p.dphi_dc), inner_product(vx, p.phi),
            inner_product(v, p.dzeta_dc) - inner_product(p.dphi_dc, p.zeta), inner_product(p.dphi_dx + vx, p.zeta)};
}

inline Mat2 assemble_K(const Field& v, double c) { return assemble_K(v, ProfileSet(c, v.grid())); }

struct StochasticCoefficients {
    Field c_s;
    Field omega_s;
};

/// [c_s; Omega_s] = -K^{-1} [(phi + v) phi; (phi + v) zeta], pointwise.
inline StochasticCoefficients stochastic_coefficients(const Field& v, const ProfileSet& p, const Mat2& K) {
    const double d = K.det();
    const double s = K.scale();
    if (!(std::abs(d) >= 1e-10 * s * s)) throw SingularModulation("modulation matrix K is singular");
    const Grid& grid = v.grid();
    StochasticCoefficients out{Field(grid), Field(grid)};
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double u = p.phi[j] + v[j];
        const double b1 = u * p.phi[j];
        const double b2 = u * p.zeta[j];
        out.c_s[j] = -(K.a22 * b1 - K.a12 * b2) / d;
        out.omega_s[j] = -(K.a11 * b2 - K.a21 * b1) / d;
    }
    return out;
}

inline StochasticCoefficients stochastic_coefficients(const Field& v, double c) {
    const ProfileSet p(c, v.grid());
    return stochastic_coefficients(v, p, assemble_K(v, p));
}

/// Z(v,c)[h] = (h + <Omega_s, h> d_x) v + (h + <Omega_s, h> d_x - <c_s, h> d_c) phi_c.
inline Field apply_Z(const Field& v, const ProfileSet& p, const StochasticCoefficients& s, const Field& h) {
    const double ho = inner_product(s.omega_s, h);
    const double hc = inner_product(s.c_s, h);
    const Field vx = spectral_derivative(v, 1);
    return h * (v + p.phi) + ho * (vx + p.dphi_dx) - hc * p.dphi_dc;
}

/// L^2 adjoint of h -> Z(v,c)[h]:
/// Z*[g] = g (phi_c + v) + Omega_s <g, d_x(phi_c + v)> - c_s <g, d_c phi_c>.
inline Field apply_Z_adjoint(const Field& v, const ProfileSet& p, const StochasticCoefficients& s, const Field& g) {
    const Field vx = spectral_derivative(v, 1);
    const double gx = inner_product(g, p.dphi_dx + vx);
    const double gc = inner_product(g, p.dphi_dc);
    return g * (p.phi + v) + gx * s.omega_s - gc * s.c_s;
}

struct ModulationCoefficients {
    Field c_s;
    Field omega_s;
    double c_d0, omega_d0;
    double c_f, omega_f;
    double c_d, omega_d;
    /// c_d0 + eps f(t) c_f + sigma^2 c_d, and likewise for Omega.
    double c_drift, omega_drift;
};

/// Second-order (Ito) part of the remainder drift.
///   ito:       Y_d = 1/2 A_Omega d_x^2(phi + v) - 1/2 A_c d_c^2 phi + d_x((phi + v) Q Omega_s)
///   displayed: Y_d = 1/2 A_Omega d_x^2(phi + v) + 1/2 A_c d_c^2 phi
/// with A = ||Q^{1/2} .||^2. The Ito form is what the remainder of
/// v = u(. + xi) - phi_c actually picks up: the -d_c^2 phi term comes from
/// expanding phi_{c(t)} and the last term is the covariation of d xi with the
/// translated noise. Only the Ito form reproduces the mean drift of the
/// decomposed amplitude; the displayed form is kept for comparison.
enum class DriftForm { ito, displayed };

/// All modulation coefficients at (v, c). N(v) = -d_x(v^2), Q^{1/2} norms
/// through the kernel multipliers.
inline ModulationCoefficients drift_coefficients(const Field& v, const ProfileSet& p, const CovarianceKernel& kernel,
                                                 double sigma, double epsilon, double f_t,
                                                 DriftForm form = DriftForm::ito) {
    const Mat2 K = assemble_K(v, p);
    auto s = stochastic_coefficients(v, p, K);

    const Field nl = -1.0 * spectral_derivative(v * v, 1);
    const auto d0 = K.solve({-inner_product(nl, p.phi), -inner_product(nl, p.zeta)});
    const Field u = p.phi + v;
    const auto f = K.solve({-inner_product(u, p.phi), -inner_product(u, p.zeta)});

    const Field q_cs = apply_Q(kernel, s.c_s);
    const double a_c = inner_product(q_cs, s.c_s);
    const Field q_om = apply_Q(kernel, s.omega_s);
    const double a_omega = inner_product(q_om, s.omega_s);
    Field y_d = (0.5 * a_omega) * (spectral_derivative(v, 2) + p.d2phi_dx2);
    if (form == DriftForm::ito)
        y_d += spectral_derivative(u * q_om, 1) - (0.5 * a_c) * p.d2phi_dc2;
    else
        y_d += (0.5 * a_c) * p.d2phi_dc2;
    const double rhs1 = inner_product(y_d, p.phi) + 0.5 * a_c * inner_product(v, p.d2phi_dc2) +
                        inner_product(apply_Z_adjoint(v, p, s, p.dphi_dc), q_cs);
    const double rhs2 = inner_product(y_d, p.zeta) + 0.5 * a_c * inner_product(v, p.d2zeta_dc2) +
                        inner_product(apply_Z_adjoint(v, p, s, p.dzeta_dc), q_cs);
    const auto d = K.solve({-rhs1, -rhs2});

    ModulationCoefficients out{std::move(s.c_s), std::move(s.omega_s), d0[0], d0[1], f[0], f[1], d[0], d[1], 0, 0};
    out.c_drift = out.c_d0 + epsilon * f_t * out.c_f + sigma * sigma * out.c_d;
    out.omega_drift = out.omega_d0 + epsilon * f_t * out.omega_f + sigma * sigma * out.omega_d;
    return out;
}

inline ModulationCoefficients drift_coefficients(const Field& v, double c, const CovarianceKernel& kernel,
                                                 double sigma, double epsilon, double f_t,
                                                 DriftForm form = DriftForm::ito) {
    return drift_coefficients(v, ProfileSet(c, v.grid()), kernel, sigma, epsilon, f_t, form);
}

// ---------------------------------------------------------------------------
// Reduced amplitude dynamics (v = 0)
// ---------------------------------------------------------------------------

/// Barycentric interpolation at the n Chebyshev points of the second kind on [lo, hi].
class ChebyshevInterpolant {
public:
    /// Node i of n on [lo, hi].
    static double node(double lo, double hi, int n, int i) {
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(std::numbers::pi * i / (n - 1));
    }

    ChebyshevInterpolant(double lo, double hi, std::vector<double> values) : lo_(lo), hi_(hi), values_(std::move(values)) {
        const int n = static_cast<int>(values_.size());
        if (!(hi > lo) || n < 2) throw std::invalid_argument("chebyshev: need lo < hi and n >= 2");
        nodes_.resize(n);
        for (int i = 0; i < n; ++i) nodes_[i] = node(lo, hi, n, i);
    }

    ChebyshevInterpolant(double lo, double hi, int n, const std::function<double(double)>& f)
        : ChebyshevInterpolant(lo, hi, sample(lo, hi, n, f)) {}

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::span<const double> nodes() const { return nodes_; }

    double operator()(double x) const {
        const int n = static_cast<int>(nodes_.size());
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            const double diff = x - nodes_[i];
            if (diff == 0.0) return values_[i];
            double w = (i % 2 == 0) ? 1.0 : -1.0;
            if (i == 0 || i == n - 1) w *= 0.5;
            num += w / diff * values_[i];
            den += w / diff;
        }
        return num / den;
    }

private:
    static std::vector<double> sample(double lo, double hi, int n, const std::function<double(double)>& f) {
        if (n < 2) throw std::invalid_argument("chebyshev: need n >= 2");
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) v[i] = f(node(lo, hi, n, i));
        return v;
    }

    double lo_, hi_;
    std::vector<double> values_, nodes_;
};

/// Coefficients of the reduced system at v = 0.
struct ReducedCoefficients {
    double g_q;      // c_d(0, c)
    double omega_d;  // Omega_d(0, c)
    double omega_f;  // Omega_f(0, c)
};

inline ReducedCoefficients reduced_coefficients(const CovarianceKernel& kernel, double c) {
    const auto m = drift_coefficients(Field(kernel.grid()), c, kernel, 0.0, 0.0, 0.0);
    return {m.c_d, m.omega_d, m.omega_f};
}

/// Tabulates the v = 0 coefficients on Chebyshev nodes over [c_lo, c_hi] and
/// checks the interpolant against direct evaluation between nodes. Outside the
/// table the coefficients are computed directly.
class ReducedModel {
public:
    ReducedModel(std::shared_ptr<const CovarianceKernel> kernel, double c_lo, double c_hi, int nodes = 64,
                 double verify_tol = 1e-9)
        : kernel_(std::move(kernel)) {
        if (!kernel_) return;
        auto direct = [this](double c) { return reduced_coefficients(*kernel_, c); };
        std::vector<double> g(nodes), od(nodes);
        for (int i = 0; i < nodes; ++i) {
            const auto r = direct(ChebyshevInterpolant::node(c_lo, c_hi, nodes, i));
            g[i] = r.g_q;
            od[i] = r.omega_d;
        }
        g_q_.emplace(c_lo, c_hi, std::move(g));
        omega_d_.emplace(c_lo, c_hi, std::move(od));
        for (int k = 0; k < 7; ++k) {
            const double c = c_lo + (c_hi - c_lo) * (k + 0.5) / 7.0;
            const auto ref = direct(c);
            verify_error_ = std::max({verify_error_, std::abs((*g_q_)(c) - ref.g_q),
                                      std::abs((*omega_d_)(c) - ref.omega_d)});
        }
        if (!(verify_error_ <= verify_tol))
            throw std::runtime_error("reduced model: interpolation error " + std::to_string(verify_error_) +
                                     " exceeds tolerance");
    }

    /// Interpolation error measured against direct evaluation at build time.
    double verification_error() const { return verify_error_; }

    ReducedCoefficients at(double c) const {
        const double omega_f = 2.0 / (3.0 * std::sqrt(c));
        if (!kernel_) return {0.0, 0.0, omega_f};
        if (c >= g_q_->lo() && c <= g_q_->hi()) return {(*g_q_)(c), (*omega_d_)(c), omega_f};
        auto r = reduced_coefficients(*kernel_, c);
        r.omega_f = omega_f;
        return r;
    }

    double g_Q(double c) const { return at(c).g_q; }

private:
    std::shared_ptr<const CovarianceKernel> kernel_;
    std::optional<ChebyshevInterpolant> g_q_, omega_d_;
    double verify_error_ = 0.0;
};

struct ReducedState {
    double c_ap;
    double omega_ap;
};

/// One-step integrator for
///   dc = [(4/3) c eps f + sigma^2 g_Q(c)] dt + (2/9) c^{-1/2} sigma <phi_c^2, T_xi dW>,
///   dOmega = [eps f Omega_f(0,c) + sigma^2 Omega_d(0,c)] dt + sigma <Omega_s(0,c), T_xi dW>.
/// The linear forcing term is integrated exactly (exponential Euler), the
/// rest by Euler-Maruyama.
class ReducedSde {
public:
    ReducedSde(const ReducedModel& model, const SimConfig& cfg, double c0)
        : model_(&model), cfg_(&cfg), state_{c0, 0.0} {
        if (!(c0 > 0.0)) throw std::invalid_argument("reduced SDE: c0 must be positive");
    }

    const ReducedState& state() const { return state_; }
    bool exited() const { return exited_; }

    /// Advances over [t, t + dt] with increment dW paired in the frame centred at xi.
    void step(double t, std::span<const double> dW, double xi) {
        if (exited_) return;
        const double c = state_.c_ap;
        const double dt = cfg_->dt;
        const double forcing = cfg_->epsilon * cfg_->forcing.integral(t, t + dt);
        const auto coef = model_->at(c);
        double noise_c = 0.0, noise_omega = 0.0;
        const double sigma = cfg_->sigma;
        if (sigma > 0.0) {
            // <c_s(0,c), T_xi dW> and <Omega_s(0,c), T_xi dW> with
            // c_s = -phi^2 / a, Omega_s = (b/a^2) phi^2 - phi zeta / a,
            // a = -(9/2) sqrt(c), b = -(9/2) / c.
            const Grid& grid = cfg_->grid;
            const double rc = std::sqrt(c);
            double s_pp = 0.0, s_pz = 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j) {
                const auto tm = profile::detail::terms(c, grid.wrap_centered(grid.x(j) - xi));
                const double ph = 1.5 * c * tm.sech2;
                const double z = 1.5 / rc * (tm.one_plus_tanh + tm.s * tm.sech2);
                s_pp += ph * ph * dW[j];
                s_pz += ph * z * dW[j];
            }
            s_pp *= grid.spacing();
            s_pz *= grid.spacing();
            const double a = -4.5 * rc;
            const double b = -4.5 / c;
            noise_c = sigma * (-s_pp / a);
            noise_omega = sigma * (b / (a * a) * s_pp - s_pz / a);
        }
        const double c_next =
            c * std::exp(4.0 / 3.0 * forcing) + sigma * sigma * coef.g_q * dt + noise_c;
        state_.omega_ap += forcing * coef.omega_f + sigma * sigma * coef.omega_d * dt + noise_omega;
        if (!(c_next > 0.0) || !std::isfinite(c_next)) {
            exited_ = true;
            return;
        }
        state_.c_ap = c_next;
    }

private:
    const ReducedModel* model_;
    const SimConfig* cfg_;
    ReducedState state_;
    bool exited_ = false;
};

enum class NoiseSource { independent, frame_coupled };

struct ReducedPath {
    std::vector<double> times;
    std::vector<double> c_ap;
    std::vector<double> omega_ap;
    bool exited = false;
    std::optional<double> exit_time;
};

/// Stream tag of the PDE increments; the independent reduced SDE uses another.
inline constexpr std::uint64_t kPdeStream = 0;
inline constexpr std::uint64_t kReducedStream = 1;

/// Integrates the reduced SDE alone on [0, cfg.t_end], recording every
/// cfg.record_every steps. frame_coupled regenerates the increments the PDE
/// run with the same (seed, trajectory) consumes, paired in the frame of the
/// reduced position int c_ap + Omega_ap; independent draws its own stream.
inline ReducedPath integrate_reduced_sde(double c0, const SimConfig& cfg, const ReducedModel& model,
                                         NoiseSource source, std::uint64_t trajectory = 0) {
    cfg.validate();
    ReducedSde sde(model, cfg, c0);
    std::optional<NoiseSampler> sampler;
    if (cfg.sigma > 0.0) sampler.emplace(*cfg.kernel);
    std::vector<double> dW(cfg.grid.size(), 0.0);
    const std::uint64_t stream = source == NoiseSource::independent ? kReducedStream : kPdeStream;

    ReducedPath path;
    path.times.push_back(0.0);
    path.c_ap.push_back(c0);
    path.omega_ap.push_back(0.0);
    double position = 0.0;
    const std::size_t n = cfg.n_steps();
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        if (sampler) sampler->sample(cfg.dt, {cfg.seed, trajectory, k, stream}, dW);
        const double c_before = sde.state().c_ap;
        const double omega_before = sde.state().omega_ap;
        sde.step(t, dW, position);
        if (sde.exited()) {
            path.exited = true;
            path.exit_time = t + cfg.dt;
            break;
        }
        position += 0.5 * (c_before + sde.state().c_ap) * cfg.dt + (sde.state().omega_ap - omega_before);
        if ((k + 1) % static_cast<std::size_t>(cfg.record_every) == 0 || k + 1 == n) {
            path.times.push_back(t + cfg.dt);
            path.c_ap.push_back(sde.state().c_ap);
            path.omega_ap.push_back(sde.state().omega_ap);
        }
    }
    return path;
}

// ---------------------------------------------------------------------------
// Exit times
// ---------------------------------------------------------------------------

struct ExitThresholds {
    double eta_h1w;
    double eta_l2;
    double lambda_ap;
};

/// First recorded time at which each condition fails. A trajectory that
/// stopped early counts as having left every tracked region at its failure
/// time unless it left earlier.
inline ExitTimes exit_times(const TrajectoryRecord& r, const ExitThresholds& th, const AmplitudeWindow& window) {
    ExitTimes out;
    auto mark = [](std::optional<double>& slot, double t) {
        if (!slot) slot = t;
    };
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double t = r.times[i];
        if (!(r.h1w_v[i] <= th.eta_h1w)) mark(out.t_st, t);
        if (!(r.l2_v[i] <= th.eta_l2)) mark(out.t_en, t);
        if (!window.contains(r.c[i])) mark(out.t_c, t);
        if (!(std::abs(r.c[i] - r.c_ap[i]) <= th.lambda_ap)) mark(out.t_ap, t);
    }
    if (r.failure) {
        const double t = r.failure_time.value_or(r.times.empty() ? 0.0 : r.times.back());
        mark(out.t_st, t);
        mark(out.t_en, t);
        mark(out.t_c, t);
        mark(out.t_ap, t);
    }
    return out;
}

}  // namespace skdv
