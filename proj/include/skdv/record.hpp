#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace skdv {

/// First recorded times at which each tracking condition fails; empty when the
/// condition held up to the horizon.
struct ExitTimes {
    std::optional<double> t_st;  // ||v||_{H^1_w} > eta_h1w
    std::optional<double> t_en;  // ||v||_{L^2} > eta_l2
    std::optional<double> t_c;   // c outside the amplitude window
    std::optional<double> t_ap;  // |c - c_ap| > lambda_ap

    friend bool operator==(const ExitTimes&, const ExitTimes&) = default;
};

/// Decimated time series of one trajectory.
struct TrajectoryRecord {
    std::uint64_t trajectory = 0;
    std::vector<double> times;
    std::vector<double> c, xi, omega, c_ap;
    std::vector<double> l2_v, l2w_v, h1w_v, energy;
    ExitTimes exit;
    /// Set when the trajectory stopped early (blow-up, lost decomposition);
    /// `failure_time` is the last time reached.
    std::optional<std::string> failure;
    std::optional<double> failure_time;

    std::size_t size() const { return times.size(); }

    void reserve(std::size_t n) {
        for (auto* v : {&times, &c, &xi, &omega, &c_ap, &l2_v, &l2w_v, &h1w_v, &energy}) v->reserve(n);
    }
};

}  // namespace skdv
