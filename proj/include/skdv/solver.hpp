#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skdv/grid.hpp"
#include "skdv/noise.hpp"
#include "skdv/soliton.hpp"

namespace skdv {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ForcingKind { zero, constant, exp_decay, bump };

inline ForcingKind parse_forcing_kind(const std::string& name) {
    if (name == "zero") return ForcingKind::zero;
    if (name == "constant") return ForcingKind::constant;
    if (name == "exp_decay" || name == "exp-decay") return ForcingKind::exp_decay;
    if (name == "bump") return ForcingKind::bump;
    throw std::invalid_argument("unknown forcing kind '" + name + "'");
}

inline std::string to_string(ForcingKind k) {
    switch (k) {
        case ForcingKind::zero: return "zero";
        case ForcingKind::constant: return "constant";
        case ForcingKind::exp_decay: return "exp_decay";
        case ForcingKind::bump: return "bump";
    }
    return "?";
}

/// Time profile f(t) of the deterministic forcing, |f| <= 1.
///   constant:  f = a
///   exp_decay: f = a exp(-t / tau)
///   bump:      f = a (1 - tanh((t - t_off) / width)) / 2, a smoothed indicator of [0, t_off]
struct ForcingProfile {
    ForcingKind kind = ForcingKind::zero;
    double amplitude = 1.0;
    double tau = 1.0;
    double t_off = 1.0;
    double width = 0.1;

    static ForcingProfile zero() { return {}; }
    static ForcingProfile constant(double a = 1.0) { return make({ForcingKind::constant, a}); }
    static ForcingProfile exp_decay(double a, double tau) {
        ForcingProfile p{ForcingKind::exp_decay, a};
        p.tau = tau;
        return make(p);
    }
    static ForcingProfile bump(double a, double t_off, double width) {
        ForcingProfile p{ForcingKind::bump, a};
        p.t_off = t_off;
        p.width = width;
        return make(p);
    }

    void validate() const {
        if (!(std::abs(amplitude) <= 1.0)) throw std::invalid_argument("forcing: |amplitude| must be <= 1");
        if (kind == ForcingKind::exp_decay && !(tau > 0.0)) throw std::invalid_argument("forcing: tau must be > 0");
        if (kind == ForcingKind::bump && (!(width > 0.0) || !(t_off >= 0.0)))
            throw std::invalid_argument("forcing: bump needs width > 0 and t_off >= 0");
    }

    double value(double t) const {
        switch (kind) {
            case ForcingKind::zero: return 0.0;
            case ForcingKind::constant: return amplitude;
            case ForcingKind::exp_decay: return amplitude * std::exp(-t / tau);
            case ForcingKind::bump: return amplitude * 0.5 * (1.0 - std::tanh((t - t_off) / width));
        }
        return 0.0;
    }

    /// Exact integral of f over [t0, t1].
    double integral(double t0, double t1) const { return primitive(t1) - primitive(t0); }

    /// int_0^horizon |f(t)| dt; pass +inf for the whole half line.
    double abs_integral(double horizon = std::numeric_limits<double>::infinity()) const {
        switch (kind) {
            case ForcingKind::zero: return 0.0;
            case ForcingKind::constant:
                return amplitude == 0.0 ? 0.0 : std::abs(amplitude) * horizon;
            case ForcingKind::exp_decay:
            case ForcingKind::bump:
                // f does not change sign.
                if (std::isinf(horizon)) {
                    if (kind == ForcingKind::exp_decay) return std::abs(amplitude) * tau;
                    return std::abs(amplitude) * 0.5 *
                           (t_off + width * std::log(2.0) + width * log_cosh(t_off / width));
                }
                return std::abs(integral(0.0, horizon));
        }
        return 0.0;
    }

private:
    static ForcingProfile make(ForcingProfile p) {
        p.validate();
        return p;
    }

    static double log_cosh(double z) {
        const double a = std::abs(z);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }

    double primitive(double t) const {
        switch (kind) {
            case ForcingKind::zero: return 0.0;
            case ForcingKind::constant: return amplitude * t;
            case ForcingKind::exp_decay: return -amplitude * tau * std::exp(-t / tau);
            case ForcingKind::bump: return amplitude * 0.5 * (t - width * log_cosh((t - t_off) / width));
        }
        return 0.0;
    }
};

/// Absorbing layer centred on the antipode of a reference soliton position
/// X(t) = xi0 + int_0^t c_ref, with c_ref(t) = c_* exp((4/3) eps int_0^t f).
/// Damping rate * (1 + cos(pi d / width)) / 2 at distance d < width from the
/// antipode. width = 0 disables it.
struct SpongeConfig {
    double width = 10.0;
    double rate = 200.0;

    bool enabled() const { return width > 0.0 && rate > 0.0; }
};

struct SimConfig {
    Grid grid{80.0, 1024};
    std::shared_ptr<const CovarianceKernel> kernel;
    double epsilon = 0.0;
    double sigma = 0.0;
    ForcingProfile forcing;
    double t_end = 10.0;
    double dt = 1e-3;
    double c_star = 1.0;
    int record_every = 10;
    /// Weight rate used for the L^2_w / H^1_w diagnostics.
    double weight = 0.25;
    SpongeConfig sponge;
    std::uint64_t seed = 0;

    std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("config: dt must be positive");
        if (!(t_end >= 0.0)) throw std::invalid_argument("config: t_end must be nonnegative");
        if (!(c_star > 0.0)) throw std::invalid_argument("config: c_star must be positive");
        if (!(epsilon >= 0.0) || !(sigma >= 0.0)) throw std::invalid_argument("config: epsilon, sigma must be >= 0");
        if (record_every < 1) throw std::invalid_argument("config: record_every must be >= 1");
        if (!(weight > 0.0)) throw std::invalid_argument("config: weight must be positive");
        if (sigma > 0.0 && !kernel) throw std::invalid_argument("config: sigma > 0 needs a covariance kernel");
        if (kernel && !(kernel->grid() == grid)) throw std::invalid_argument("config: kernel built on another grid");
        forcing.validate();
        // Explicit RK4 on -d_x(u^2): |2 u k| dt must stay inside the stability
        // region (2.78) for the dealiased band, with amplitude headroom 2x.
        const double k_dealias = grid.max_wavenumber() * 2.0 / 3.0;
        const double u_max = 2.0 * 1.5 * c_star * std::exp(4.0 / 3.0 * epsilon * forcing.abs_integral(t_end));
        if (2.0 * u_max * k_dealias * dt > 2.5)
            throw std::invalid_argument("config: dt too large for the nonlinear substep at this resolution");
    }
};

/// Strang-split integrator for
///   du = -(u_xxx + 2 u u_x) dt + eps f(t) u dt + sigma u dW^Q.
/// One step is: half Airy step (exact multiplier exp(i k^3 dt/2)), RK4 for
/// u_t = -(u^2)_x with 2/3-rule dealiasing, pointwise multiplication by
/// exp(eps int f + sigma dW - sigma^2 q(0) dt / 2) (and the sponge damping),
/// half Airy step. The state is kept in Fourier space between steps.
class KdvStepper {
public:
    explicit KdvStepper(const SimConfig& cfg)
        : cfg_(cfg), grid_(cfg.grid), fft_(grid_.fft()), n_(grid_.size()), half_(n_ / 2),
          state_(half_ + 1), airy_half_(half_ + 1), ik_(half_ + 1), dealias_(half_ + 1),
          k1_(half_ + 1), k2_(half_ + 1), k3_(half_ + 1), k4_(half_ + 1), stage_(half_ + 1),
          tmp_(half_ + 1), phys_(n_), dW_(n_, 0.0) {
        cfg_.validate();
        for (std::size_t m = 0; m <= half_; ++m) {
            const double k = (m == half_) ? 0.0 : grid_.wavenumber(m);
            airy_half_[m] = std::polar(1.0, k * k * k * 0.5 * cfg_.dt);
            ik_[m] = Complex(0.0, k);
            dealias_[m] = (3 * m <= n_) ? 1.0 : 0.0;
        }
        if (cfg_.sigma > 0.0) sampler_.emplace(*cfg_.kernel);
    }

    const SimConfig& config() const { return cfg_; }

    void set_state(const Field& u) {
        if (!(u.grid() == grid_)) throw GridMismatch();
        fft_->forward(u.values(), state_);
    }

    Field state() const { return from_spectrum(grid_, state_); }

    /// Uses -dW instead of dW (antithetic partner of the same stream).
    void set_antithetic(bool on) { noise_sign_ = on ? -1.0 : 1.0; }

    /// Increment used by the most recent step (zero when sigma = 0).
    std::span<const double> last_increment() const { return dW_; }

    /// Sponge reference position X(t) after the most recent step.
    double reference_position() const { return ref_position_; }

    void reset_reference(double xi0) {
        ref_position_ = xi0;
        ref_forcing_integral_ = 0.0;
    }

    /// Advances the state from t to t + dt. `key` selects the noise stream.
    void step(double t, const StreamKey& key) {
        const double dt = cfg_.dt;
        airy(state_);
        nonlinear_rk4(dt);
        fft_->backward(state_, phys_);

        const double forcing = cfg_.epsilon * cfg_.forcing.integral(t, t + dt);
        double exponent_shift = forcing;
        if (cfg_.sigma > 0.0) {
            sampler_->sample(dt, key, dW_);
            if (noise_sign_ < 0.0)
                for (double& d : dW_) d = -d;
            exponent_shift -= 0.5 * cfg_.sigma * cfg_.sigma * cfg_.kernel->q0() * dt;
        }
        for (std::size_t j = 0; j < n_; ++j) {
            double e = exponent_shift;
            if (cfg_.sigma > 0.0) e += cfg_.sigma * dW_[j];
            phys_[j] *= std::exp(e);
            if (!std::isfinite(phys_[j])) {
                std::ostringstream msg;
                msg << "non-finite solution at t=" << t + dt << " (x=" << grid_.x(j) << ")";
                throw SimulationError(msg.str());
            }
        }
        if (cfg_.sponge.enabled()) apply_sponge(dt);
        fft_->forward(phys_, state_);
        airy(state_);

        // Reference trajectory for the sponge: the unperturbed amplitude law.
        const double c_ref = cfg_.c_star * std::exp(4.0 / 3.0 * cfg_.epsilon * ref_forcing_integral_);
        ref_forcing_integral_ += cfg_.forcing.integral(t, t + dt);
        const double c_ref_next = cfg_.c_star * std::exp(4.0 / 3.0 * cfg_.epsilon * ref_forcing_integral_);
        ref_position_ += 0.5 * (c_ref + c_ref_next) * dt;
    }

private:
    void apply_sponge(double dt) {
        const double dx = grid_.spacing();
        const double antipode = grid_.wrap(ref_position_ + 0.5 * grid_.length());
        const auto centre = static_cast<long long>(std::llround((antipode - grid_.origin()) / dx));
        const auto reach = static_cast<long long>(std::ceil(cfg_.sponge.width / dx));
        const auto n = static_cast<long long>(n_);
        for (long long m = -reach; m <= reach; ++m) {
            const auto j = static_cast<std::size_t>(((centre + m) % n + n) % n);
            const double d = std::abs(grid_.wrap_centered(grid_.x(j) - antipode));
            if (d >= cfg_.sponge.width) continue;
            const double profile = 0.5 * (1.0 + std::cos(std::numbers::pi * d / cfg_.sponge.width));
            phys_[j] *= std::exp(-cfg_.sponge.rate * profile * dt);
        }
    }

    void airy(std::vector<Complex>& s) const {
        for (std::size_t m = 0; m <= half_; ++m) s[m] *= airy_half_[m];
    }

    // out = -ik * dealias(FFT((IFFT in)^2))
    void nonlinear_term(const std::vector<Complex>& in, std::vector<Complex>& out) {
        fft_->backward(in, phys_);
        for (double& v : phys_) v *= v;
        fft_->forward(phys_, out);
        for (std::size_t m = 0; m <= half_; ++m) out[m] *= -ik_[m] * dealias_[m];
    }

    void nonlinear_rk4(double dt) {
        nonlinear_term(state_, k1_);
        for (std::size_t m = 0; m <= half_; ++m) stage_[m] = state_[m] + 0.5 * dt * k1_[m];
        nonlinear_term(stage_, k2_);
        for (std::size_t m = 0; m <= half_; ++m) stage_[m] = state_[m] + 0.5 * dt * k2_[m];
        nonlinear_term(stage_, k3_);
        for (std::size_t m = 0; m <= half_; ++m) stage_[m] = state_[m] + dt * k3_[m];
        nonlinear_term(stage_, k4_);
        for (std::size_t m = 0; m <= half_; ++m)
            state_[m] += dt / 6.0 * (k1_[m] + 2.0 * k2_[m] + 2.0 * k3_[m] + k4_[m]);
    }

    SimConfig cfg_;
    Grid grid_;
    std::shared_ptr<const FftPlan> fft_;
    std::size_t n_, half_;
    std::vector<Complex> state_, airy_half_, ik_;
    std::vector<double> dealias_;
    std::vector<Complex> k1_, k2_, k3_, k4_, stage_, tmp_;
    std::vector<double> phys_, dW_;
    std::optional<NoiseSampler> sampler_;
    double noise_sign_ = 1.0;
    double ref_position_ = 0.0;
    double ref_forcing_integral_ = 0.0;
};

/// One step of the split scheme from (u, t). Builds a stepper per call; use
/// KdvStepper directly in loops.
inline Field step(const Field& u, double t, const SimConfig& cfg, const StreamKey& key) {
    KdvStepper stepper(cfg);
    stepper.set_state(u);
    stepper.step(t, key);
    return stepper.state();
}

/// ||u||_{L^2}^2.
inline double energy(const Field& u) { return inner_product(u, u); }

}  // namespace skdv
