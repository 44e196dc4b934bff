#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "skdv/grid.hpp"
#include "skdv/modulation.hpp"
#include "skdv/record.hpp"
#include "skdv/solver.hpp"

namespace skdv {

/// Norms of the remainder v in the soliton frame, with the weight precomputed.
class RemainderNorms {
public:
    RemainderNorms(const Grid& grid, double w) : weight_(grid), weighted_(grid) {
        for (std::size_t j = 0; j < grid.size(); ++j) weight_[j] = std::exp(w * grid.x(j));
    }

    struct Values {
        double l2, l2w, h1w;
    };

    Values operator()(const Field& v) {
        for (std::size_t j = 0; j < v.size(); ++j) weighted_[j] = weight_[j] * v[j];
        const double l2w_sq = inner_product(weighted_, weighted_);
        const Field d = spectral_derivative(weighted_, 1);
        return {l2_norm(v), std::sqrt(l2w_sq), std::sqrt(l2w_sq + inner_product(d, d))};
    }

private:
    Field weight_, weighted_;
};

/// Amplitude range the reduced model is tabulated on for a run: the window
/// c_* exp(-/+ 3 E) widened by a factor 1.5 on both sides.
inline std::pair<double, double> reduced_table_range(const SimConfig& cfg) {
    const double e = cfg.epsilon * cfg.forcing.abs_integral(cfg.t_end);
    return {cfg.c_star * std::exp(-3.0 * e) / 1.5, cfg.c_star * std::exp(3.0 * e) * 1.5};
}

/// Runs one trajectory from u(0) = phi_{c_*}. Every record_every steps the
/// solution is decomposed (Newton started from the previous record advanced
/// by c dt_record) and the remainder norms are stored. The reduced amplitude
/// c_ap is integrated alongside with the same increments, paired in the frame
/// of the last decomposed position extrapolated at speed c.
inline TrajectoryRecord simulate_trajectory(const SimConfig& cfg, std::uint64_t trajectory,
                                            const ReducedModel& model) {
    KdvStepper stepper(cfg);
    const Grid& grid = cfg.grid;
    const WeightConfig weight(cfg.weight);
    stepper.set_state(phi(cfg.c_star, grid));
    stepper.reset_reference(0.0);
    ReducedSde reduced(model, cfg, cfg.c_star);
    RemainderNorms norms(grid, cfg.weight);

    const std::size_t n = cfg.n_steps();
    TrajectoryRecord rec;
    rec.trajectory = trajectory;
    rec.reserve(n / static_cast<std::size_t>(cfg.record_every) + 2);

    double c = cfg.c_star;
    double xi = 0.0;          // unwrapped lab position
    double int_c = 0.0;       // int_0^t c by the trapezoid rule over records
    double t_rec = 0.0;
    auto record = [&](double t, const Field& u) {
        const double guess_xi = xi + c * (t - t_rec);
        const auto d = decompose(u, SolitonParams(c, grid.wrap_centered(guess_xi)), weight);
        const double new_xi = guess_xi + grid.wrap_centered(d.xi - guess_xi);
        if (!rec.times.empty()) int_c += 0.5 * (c + d.c) * (t - t_rec);
        c = d.c;
        xi = new_xi;
        t_rec = t;
        const auto nv = norms(d.v);
        rec.times.push_back(t);
        rec.c.push_back(d.c);
        rec.xi.push_back(new_xi);
        rec.omega.push_back(new_xi - int_c);
        rec.c_ap.push_back(reduced.state().c_ap);
        rec.l2_v.push_back(nv.l2);
        rec.l2w_v.push_back(nv.l2w);
        rec.h1w_v.push_back(nv.h1w);
        rec.energy.push_back(energy(u));
    };

    double t = 0.0;
    try {
        record(0.0, stepper.state());
        for (std::size_t k = 0; k < n; ++k) {
            t = static_cast<double>(k) * cfg.dt;
            stepper.step(t, {cfg.seed, trajectory, k, kPdeStream});
            reduced.step(t, stepper.last_increment(), xi + c * (t - t_rec));
            if (reduced.exited()) throw DecompositionError("reduced amplitude left (0, inf)");
            if ((k + 1) % static_cast<std::size_t>(cfg.record_every) == 0 || k + 1 == n)
                record(static_cast<double>(k + 1) * cfg.dt, stepper.state());
        }
    } catch (const SimulationError& e) {
        rec.failure = e.what();
        rec.failure_time = t + cfg.dt;
    } catch (const DecompositionError& e) {
        rec.failure = e.what();
        rec.failure_time = t + cfg.dt;
    } catch (const SingularModulation& e) {
        rec.failure = e.what();
        rec.failure_time = t + cfg.dt;
    }
    return rec;
}

inline TrajectoryRecord simulate_trajectory(const SimConfig& cfg, std::uint64_t trajectory) {
    const auto [lo, hi] = reduced_table_range(cfg);
    const ReducedModel model(cfg.sigma > 0.0 ? cfg.kernel : nullptr, lo, hi);
    return simulate_trajectory(cfg, trajectory, model);
}

}  // namespace skdv
