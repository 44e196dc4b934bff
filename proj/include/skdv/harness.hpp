#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "skdv/modulation.hpp"
#include "skdv/noise.hpp"
#include "skdv/record.hpp"
#include "skdv/solver.hpp"
#include "skdv/trajectory.hpp"

namespace skdv {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    SimConfig sim;
    ExitThresholds thresholds{0.5, 1.0, 0.05};
    AmplitudeWindow window{0.5, 2.0, 0.2};
    int n_trajectories = 1;
    std::uint64_t seed = 0;
    std::string output_dir;
    unsigned threads = 0;  // 0: hardware concurrency

    // Inputs kept for hashing and reporting.
    KernelFamily kernel_family = KernelFamily::gaussian;
    double correlation_length = 1.0;
    bool normalize_kernel = true;
    double energy_budget = 0.0;  // E >= eps int_0^T |f|
    /// Canonical key=value listing of every parsed setting (hash input).
    std::string canonical;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

/// Hash of the canonical configuration (seed included, output directory and
/// thread count excluded).
inline std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a(cfg.canonical)); }

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class ConfigReader {
public:
    explicit ConfigReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

    std::optional<std::string> raw(const std::string& key) {
        known_.insert(key);
        auto v = tree_.get_optional<std::string>(key);
        if (!v) return std::nullopt;
        std::string s = *v;
        // Trailing comments and TOML-style quotes.
        if (auto hash = s.find(" #"); hash != std::string::npos) s.erase(hash);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
            s = s.substr(1, s.size() - 2);
        return s;
    }

    double number(const std::string& key, double fallback) {
        const auto s = raw(key);
        double v = fallback;
        if (s) {
            try {
                std::size_t used = 0;
                v = std::stod(*s, &used);
                if (used != s->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError("config: '" + key + "' is not a number: '" + *s + "'");
            }
        }
        canonical_ << key << '=' << format_double(v) << '\n';
        return v;
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        const auto s = raw(key);
        std::uint64_t v = fallback;
        if (s) {
            try {
                std::size_t used = 0;
                v = std::stoull(*s, &used);
                if (used != s->size() || s->front() == '-') throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError("config: '" + key + "' is not a nonnegative integer: '" + *s + "'");
            }
        }
        canonical_ << key << '=' << v << '\n';
        return v;
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const std::string v = raw(key).value_or(fallback);
        canonical_ << key << '=' << v << '\n';
        return v;
    }

    bool flag(const std::string& key, bool fallback) {
        const auto s = raw(key);
        bool v = fallback;
        if (s) {
            if (*s == "true" || *s == "1") v = true;
            else if (*s == "false" || *s == "0") v = false;
            else throw ConfigError("config: '" + key + "' must be true or false");
        }
        canonical_ << key << '=' << (v ? "true" : "false") << '\n';
        return v;
    }

    std::string canonical() const { return canonical_.str(); }

    /// Throws on keys present in the file that were never read.
    void reject_unknown() const {
        for (const auto& [section, child] : tree_)
            for (const auto& [key, value] : child)
                if (!known_.count(section + "." + key))
                    throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }

private:
    const boost::property_tree::ptree& tree_;
    std::ostringstream canonical_;
    std::set<std::string> known_;
};

}  // namespace detail

/// Parses the sectioned key = value configuration ([grid], [noise], [forcing],
/// [run], [thresholds]). Missing keys take the defaults listed in the README.
inline ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    static const std::vector<std::string> sections{"grid", "noise", "forcing", "run", "thresholds"};
    for (const auto& [name, child] : tree) {
        if (std::find(sections.begin(), sections.end(), name) == sections.end() || child.empty())
            throw ConfigError("config: unknown section or top-level key '" + name + "'");
    }
    detail::ConfigReader r(tree);
    ExperimentConfig cfg;
    try {
        const double length = r.number("grid.length", 80.0);
        const auto n_points = r.integer("grid.n_points", 1024);
        SimConfig& sim = cfg.sim;
        sim.grid = Grid(length, n_points);

        sim.sigma = r.number("noise.sigma", 0.0);
        cfg.kernel_family = parse_kernel_family(r.text("noise.kernel", "gaussian"));
        cfg.correlation_length = r.number("noise.correlation_length", 1.0);
        cfg.normalize_kernel = r.flag("noise.normalize", true);
        if (sim.sigma > 0.0)
            sim.kernel = std::make_shared<const CovarianceKernel>(
                build_kernel(cfg.kernel_family, cfg.correlation_length, sim.grid, cfg.normalize_kernel));

        sim.epsilon = r.number("forcing.epsilon", 0.0);
        const auto kind = parse_forcing_kind(r.text("forcing.kind", "zero"));
        const double amplitude = r.number("forcing.amplitude", 1.0);
        const double tau = r.number("forcing.tau", 1.0);
        const double t_off = r.number("forcing.t_off", 1.0);
        const double width = r.number("forcing.width", 0.1);
        switch (kind) {
            case ForcingKind::zero: sim.forcing = ForcingProfile::zero(); break;
            case ForcingKind::constant: sim.forcing = ForcingProfile::constant(amplitude); break;
            case ForcingKind::exp_decay: sim.forcing = ForcingProfile::exp_decay(amplitude, tau); break;
            case ForcingKind::bump: sim.forcing = ForcingProfile::bump(amplitude, t_off, width); break;
        }

        sim.t_end = r.number("run.t_end", 10.0);
        sim.dt = r.number("run.dt", 1e-3);
        sim.c_star = r.number("run.c_star", 1.0);
        sim.record_every = static_cast<int>(r.integer("run.record_every", 10));
        sim.weight = r.number("run.weight", 0.25);
        sim.sponge.width = r.number("run.sponge_width", 10.0);
        sim.sponge.rate = r.number("run.sponge_rate", 200.0);
        cfg.n_trajectories = static_cast<int>(r.integer("run.n_trajectories", 1));
        cfg.seed = r.integer("run.seed", 0);
        sim.seed = cfg.seed;
        cfg.threads = static_cast<unsigned>(r.raw("run.threads") ? std::stoul(*r.raw("run.threads")) : 0);

        const double needed = sim.epsilon * sim.forcing.abs_integral(sim.t_end);
        cfg.energy_budget = r.number("run.energy_budget", needed);
        if (cfg.energy_budget < needed * (1.0 - 1e-12))
            throw ConfigError("config: run.energy_budget is below eps * int_0^T |f|");

        cfg.thresholds.eta_h1w = r.number("thresholds.eta", 0.5);
        cfg.thresholds.eta_l2 = r.number("thresholds.eta_l2", 1.0);
        cfg.thresholds.lambda_ap = r.number("thresholds.lambda", 0.05);
        const double c_min = r.number("thresholds.c_min", sim.c_star * std::exp(-3.0 * cfg.energy_budget));
        const double c_max = r.number("thresholds.c_max", sim.c_star * std::exp(3.0 * cfg.energy_budget));
        if (!(c_min < c_max))
            throw ConfigError("config: amplitude window is empty; set run.energy_budget > 0 or thresholds.c_min/c_max");
        cfg.window = AmplitudeWindow(c_min, c_max, sim.weight);
        sim.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.n_trajectories < 1) throw ConfigError("config: run.n_trajectories must be >= 1");
    if (!(cfg.thresholds.eta_h1w > 0.0) || !(cfg.thresholds.eta_l2 > 0.0) || !(cfg.thresholds.lambda_ap > 0.0))
        throw ConfigError("config: thresholds must be positive");
    r.reject_unknown();
    cfg.canonical = r.canonical();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    return parse_config(in);
}

/// Replaces the seed (and its contribution to the hash).
inline void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.sim.seed = seed;
    const std::string key = "run.seed=";
    auto pos = cfg.canonical.find(key);
    if (pos != std::string::npos) {
        const auto end = cfg.canonical.find('\n', pos);
        cfg.canonical.replace(pos, end - pos, key + std::to_string(seed));
    }
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct Proportion {
    double p = 0.0;
    double stderr_ = 0.0;
};

inline Proportion proportion(std::size_t hits, std::size_t n) {
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

/// Linear-interpolation quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// sup over recorded times of |c - c_ap|.
inline double sup_error(const TrajectoryRecord& r) {
    double m = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) m = std::max(m, std::abs(r.c[i] - r.c_ap[i]));
    return m;
}

struct EnsembleStats {
    std::string config_hash;
    std::size_t n = 0;
    Proportion exit_st, exit_en, exit_c, exit_ap;
    double sup_err_q50 = 0.0;
    double sup_err_q90 = 0.0;
    std::size_t failures = 0;
};

/// Exit frequencies before the horizon with binomial standard errors and
/// quantiles of sup |c - c_ap|. Records must already carry their exit times.
inline EnsembleStats summarize(const std::vector<TrajectoryRecord>& records, const std::string& hash = {}) {
    if (records.empty()) throw std::invalid_argument("no trajectories");
    EnsembleStats s;
    s.config_hash = hash;
    s.n = records.size();
    std::size_t st = 0, en = 0, c = 0, ap = 0;
    std::vector<double> errs;
    errs.reserve(records.size());
    for (const auto& r : records) {
        st += r.exit.t_st.has_value();
        en += r.exit.t_en.has_value();
        c += r.exit.t_c.has_value();
        ap += r.exit.t_ap.has_value();
        s.failures += r.failure.has_value();
        errs.push_back(sup_error(r));
    }
    s.exit_st = proportion(st, s.n);
    s.exit_en = proportion(en, s.n);
    s.exit_c = proportion(c, s.n);
    s.exit_ap = proportion(ap, s.n);
    s.sup_err_q50 = quantile(errs, 0.5);
    s.sup_err_q90 = quantile(errs, 0.9);
    return s;
}

struct EnsembleResult {
    EnsembleStats stats;
    std::vector<TrajectoryRecord> records;
};

/// Runs cfg.n_trajectories independent trajectories on a pool of worker
/// threads pulling indices from a shared counter. Results are stored by index,
/// so the output does not depend on scheduling. Per-trajectory failures are
/// counted, never propagated.
inline EnsembleResult run_ensemble(const ExperimentConfig& cfg) {
    const auto [lo, hi] = reduced_table_range(cfg.sim);
    const ReducedModel model(cfg.sim.sigma > 0.0 ? cfg.sim.kernel : nullptr,
                             std::min(lo, cfg.window.c_min), std::max(hi, cfg.window.c_max));
    const auto n = static_cast<std::size_t>(cfg.n_trajectories);
    std::vector<TrajectoryRecord> records(n);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::optional<std::string> fatal;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                records[i] = simulate_trajectory(cfg.sim, i, model);
            } catch (const std::exception& e) {
                records[i] = TrajectoryRecord{};
                records[i].trajectory = i;
                records[i].failure = e.what();
                records[i].failure_time = 0.0;
            }
            records[i].exit = exit_times(records[i], cfg.thresholds, cfg.window);
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return {summarize(records, config_hash(cfg)), std::move(records)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& trajectory_columns() {
    static const std::vector<std::string> cols{"t", "c", "xi", "omega", "c_ap", "l2_v", "l2w_v", "h1w_v", "energy"};
    return cols;
}

inline void write_trajectory_csv(const TrajectoryRecord& r, std::ostream& out) {
    const auto& cols = trajectory_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double row[] = {r.times[i], r.c[i], r.xi[i], r.omega[i], r.c_ap[i],
                              r.l2_v[i], r.l2w_v[i], r.h1w_v[i], r.energy[i]};
        for (std::size_t k = 0; k < std::size(row); ++k) out << (k ? "," : "") << detail::format_double(row[k]);
        out << '\n';
    }
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

inline double parse_cell(const std::string& cell, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw std::runtime_error("csv: bad number '" + cell + "' on line " + std::to_string(line));
    return v;
}
}  // namespace detail

inline TrajectoryRecord read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
    if (detail::split_csv(line) != trajectory_columns()) throw std::runtime_error("csv: unexpected header");
    TrajectoryRecord r;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 9) throw std::runtime_error("csv: expected 9 columns on line " + std::to_string(lineno));
        std::vector<double> v(9);
        for (std::size_t k = 0; k < 9; ++k) v[k] = detail::parse_cell(cells[k], lineno);
        r.times.push_back(v[0]);
        r.c.push_back(v[1]);
        r.xi.push_back(v[2]);
        r.omega.push_back(v[3]);
        r.c_ap.push_back(v[4]);
        r.l2_v.push_back(v[5]);
        r.l2w_v.push_back(v[6]);
        r.h1w_v.push_back(v[7]);
        r.energy.push_back(v[8]);
    }
    return r;
}

/// Field snapshot with columns x,u.
inline Field read_snapshot_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("snapshot: empty input");
    if (detail::split_csv(line) != std::vector<std::string>{"x", "u"})
        throw std::runtime_error("snapshot: header must be x,u");
    std::vector<double> xs, us;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != 2) throw std::runtime_error("snapshot: expected 2 columns on line " + std::to_string(lineno));
        xs.push_back(detail::parse_cell(cells[0], lineno));
        us.push_back(detail::parse_cell(cells[1], lineno));
    }
    if (xs.size() < 8) throw std::runtime_error("snapshot: too few points");
    const double dx = xs[1] - xs[0];
    for (std::size_t j = 1; j < xs.size(); ++j)
        if (std::abs(xs[j] - xs[0] - static_cast<double>(j) * dx) > 1e-9 * std::abs(dx) * static_cast<double>(xs.size()))
            throw std::runtime_error("snapshot: x must be uniformly spaced");
    const Grid grid(dx * static_cast<double>(xs.size()), xs.size(), xs[0]);
    return Field(grid, std::move(us));
}

inline void write_snapshot_csv(const Field& u, std::ostream& out) {
    out << "x,u\n";
    for (std::size_t j = 0; j < u.size(); ++j)
        out << detail::format_double(u.grid().x(j)) << ',' << detail::format_double(u[j]) << '\n';
}

inline nlohmann::ordered_json summary_json(const EnsembleStats& s) {
    nlohmann::ordered_json j;
    j["config_hash"] = s.config_hash;
    j["n"] = s.n;
    j["p_exit_st"] = s.exit_st.p;
    j["p_exit_st_stderr"] = s.exit_st.stderr_;
    j["p_exit_ap"] = s.exit_ap.p;
    j["p_exit_ap_stderr"] = s.exit_ap.stderr_;
    j["p_exit_c"] = s.exit_c.p;
    j["sup_err_q50"] = s.sup_err_q50;
    j["sup_err_q90"] = s.sup_err_q90;
    j["failures"] = s.failures;
    return j;
}

/// Writes summary.json and, when `trajectories` is set, one
/// trajectory_<index>.csv per record into dir.
inline void write_outputs(const EnsembleStats& stats, const std::vector<TrajectoryRecord>& records,
                          const std::filesystem::path& dir, const ExperimentConfig* cfg = nullptr,
                          bool trajectories = true) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw OutputError("cannot write " + p.string());
        return f;
    };
    auto j = summary_json(stats);
    if (cfg) {
        nlohmann::ordered_json meta;
        meta["record_interval"] = cfg->sim.dt * cfg->sim.record_every;
        meta["exit_time_resolution"] = cfg->sim.dt * cfg->sim.record_every;
        meta["t_end"] = cfg->sim.t_end;
        meta["seed"] = cfg->seed;
        meta["window"] = {cfg->window.c_min, cfg->window.c_max};
        meta["weight"] = cfg->window.w;
        meta["energy_budget"] = cfg->energy_budget;
        meta["p_exit_en"] = stats.exit_en.p;
        meta["p_exit_c_stderr"] = stats.exit_c.stderr_;
        j["metadata"] = meta;
    }
    {
        auto f = open(dir / "summary.json");
        f << j.dump(2) << '\n';
        if (!f) throw OutputError("failed writing " + (dir / "summary.json").string());
    }
    if (!trajectories) return;
    for (const auto& r : records) {
        char name[64];
        std::snprintf(name, sizeof name, "trajectory_%05llu.csv", static_cast<unsigned long long>(r.trajectory));
        auto f = open(dir / name);
        write_trajectory_csv(r, f);
        if (!f) throw OutputError("failed writing " + (dir / name).string());
    }
}

}  // namespace skdv
