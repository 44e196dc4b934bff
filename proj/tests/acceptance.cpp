// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance [--only 1,5,9]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "skdv/skdv.hpp"

using namespace skdv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(i) for i in [0, n) on a small pool; results must be written by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < std::min<std::size_t>(worker_count(), n); ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

std::shared_ptr<const CovarianceKernel> gaussian(const Grid& g) {
    return std::make_shared<const CovarianceKernel>(build_kernel(KernelFamily::gaussian, 1.0, g));
}

// 1 -------------------------------------------------------------------------
Outcome closed_form_identities() {
    const Grid g(80.0, 1024);
    const auto k = gaussian(g);
    double err_k = 0.0, err_cs = 0.0, err_cf = 0.0, err_d0 = 0.0;
    const Mat2 k1 = assemble_K(Field(g), 1.0);
    err_k = std::max({std::abs(k1.a11 + 4.5), std::abs(k1.a12), std::abs(k1.a21 + 4.5), std::abs(k1.a22 + 4.5)});
    for (double c : {0.5, 1.0, 2.0}) {
        const auto m = drift_coefficients(Field(g), c, *k, 0.0, 0.0, 0.0);
        const Field ph = phi(c, g);
        err_cs = std::max(err_cs, (m.c_s - (2.0 / 9.0 / std::sqrt(c)) * (ph * ph)).max_abs());
        err_cf = std::max(err_cf, std::abs(m.c_f - 4.0 / 3.0 * c));
        err_d0 = std::max({err_d0, std::abs(m.c_d0), std::abs(m.omega_d0)});
    }
    const bool pass = err_k <= 1e-9 && err_cs <= 1e-9 && err_cf <= 1e-9 && err_d0 <= 1e-10;
    return {pass, fmt("|K_1(0)+4.5[[1,0],[1,1]]|=%.2e  |c_s-(2/9)c^-1/2 phi^2|=%.2e  |c_f-4c/3|=%.2e  |c_d0|,|Omega_d0|=%.2e",
                      err_k, err_cs, err_cf, err_d0)};
}

// 2 -------------------------------------------------------------------------
Outcome soliton_propagation() {
    SimConfig cfg;
    cfg.t_end = 10.0;
    KdvStepper st(cfg);
    const Field u0 = phi(1.0, cfg.grid);
    st.set_state(u0);
    st.reset_reference(0.0);
    for (std::size_t k = 0; k < cfg.n_steps(); ++k) st.step(static_cast<double>(k) * cfg.dt, {0, 0, k, 0});
    const Field u = st.state();
    const double sup = (u - phi(1.0, cfg.grid, 10.0)).max_abs();
    const double drift = std::abs(energy(u) / energy(u0) - 1.0);
    return {sup <= 1e-5 && drift <= 1e-8, fmt("sup|u-phi_1(x-t)|=%.3e (<=1e-5)  energy drift=%.3e (<=1e-8)", sup, drift)};
}

// 3 -------------------------------------------------------------------------
Outcome deterministic_amplitude_law() {
    SimConfig cfg;
    cfg.epsilon = 0.01;
    cfg.forcing = ForcingProfile::constant(1.0);
    cfg.t_end = 10.0;
    cfg.record_every = 100;
    const auto rec = simulate_trajectory(cfg, 0);
    if (rec.failure) return {false, "trajectory failed: " + *rec.failure};
    const double expected = std::exp(4.0 / 3.0 * 0.01 * 10.0);
    const double rel = std::abs(rec.c.back() / expected - 1.0);
    const double h1w = rec.h1w_v.back();
    return {rel <= 5e-3 && h1w <= 1e-3,
            fmt("c(T)=%.8f vs %.8f (rel %.2e <= 5e-3)  ||v(T)||_H1w=%.3e (<=1e-3, w=%.2f)  ||v(T)||_L2=%.3e",
                rec.c.back(), expected, rel, h1w, cfg.weight, rec.l2_v.back())};
}

// 4 -------------------------------------------------------------------------
Outcome noise_statistics() {
    const Grid g(80.0, 1024);
    const auto k = gaussian(g);
    NoiseSampler sampler(*k);
    const Field p1 = phi(1.0, g);
    const double dt = 1e-3;
    const int n = 10000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto inc = sampler.sample(dt, {2024, 0, static_cast<std::uint64_t>(i), 0});
        const double x = inner_product(p1, inc.dW);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double ratio = (s2 / n - mean * mean) / (dt * q_inner(*k, p1, p1));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    double asym = 0.0, neg = 0.0;
    for (int t = 0; t < 20; ++t) {
        Field a(g), b(g);
        for (std::size_t j = 0; j < g.size(); ++j) a[j] = n01(rng), b[j] = n01(rng);
        const double ab = q_inner(*k, a, b), ba = q_inner(*k, b, a);
        asym = std::max(asym, std::abs(ab - ba) / (1.0 + std::abs(ab)));
        neg = std::max(neg, -q_inner(*k, a, a));
    }
    const bool pass = ratio >= 0.95 && ratio <= 1.05 && asym <= 1e-10 && neg <= 1e-10;
    return {pass, fmt("Var<phi_1,dW>/(dt<Q phi_1,phi_1>)=%.4f in [0.95,1.05]  asymmetry=%.1e  min<Qa,a>=%.1e",
                      ratio, asym, -neg)};
}

// 5 -------------------------------------------------------------------------
Outcome energy_ito_drift() {
    SimConfig cfg;
    cfg.sigma = 0.05;
    cfg.kernel = gaussian(cfg.grid);
    cfg.t_end = 2.0;
    cfg.seed = 5;
    cfg.sponge.width = 0.0;  // closed periodic system: no absorbed energy
    const std::size_t pairs = 500, every = 100;
    const std::size_t n_rec = cfg.n_steps() / every + 1;
    std::vector<std::vector<double>> plus(pairs, std::vector<double>(n_rec)), minus = plus;
    const Field u0 = phi(1.0, cfg.grid);
    parallel_for(2 * pairs, [&](std::size_t job) {
        const std::size_t i = job / 2;
        const bool anti = job % 2;
        KdvStepper st(cfg);
        st.set_antithetic(anti);
        st.set_state(u0);
        st.reset_reference(0.0);
        auto& out = anti ? minus[i] : plus[i];
        out[0] = energy(u0);
        for (std::size_t k = 0; k < cfg.n_steps(); ++k) {
            st.step(static_cast<double>(k) * cfg.dt, {cfg.seed, i, k, kPdeStream});
            if ((k + 1) % every == 0) out[(k + 1) / every] = energy(st.state());
        }
    });
    auto slope = [&](bool antithetic_mean) {
        double st = 0, sl = 0, stt = 0, stl = 0;
        for (std::size_t r = 0; r < n_rec; ++r) {
            double m = 0.0;
            for (std::size_t i = 0; i < pairs; ++i) m += antithetic_mean ? 0.5 * (plus[i][r] + minus[i][r]) : plus[i][r];
            m /= static_cast<double>(pairs);
            const double t = static_cast<double>(r * every) * cfg.dt, l = std::log(m);
            st += t, sl += l, stt += t * t, stl += t * l;
        }
        const double n = static_cast<double>(n_rec);
        return (n * stl - st * sl) / (n * stt - st * st);
    };
    const double target = cfg.sigma * cfg.sigma * cfg.kernel->q0();
    const double fitted = slope(true);
    // Endpoint rate and its standard error from the spread of pair means.
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        const double y = 0.5 * (plus[i].back() + minus[i].back()) / plus[i].front();
        m += y, m2 += y * y;
    }
    m /= static_cast<double>(pairs);
    const double se_m = std::sqrt((m2 / static_cast<double>(pairs) - m * m) / static_cast<double>(pairs - 1));
    const double endpoint = std::log(m) / cfg.t_end, endpoint_se = se_m / m / cfg.t_end;
    const double rel = std::abs(fitted / target - 1.0);
    return {rel <= 0.15, fmt("d/dt log E||u||^2 = %.5f vs sigma^2 = %.5f (rel %.3f <= 0.15; %zu antithetic pairs = %zu "
                             "trajectories)  endpoint rate %.5f +- %.5f  plain mean over %zu paths: %.5f",
                             fitted, target, rel, pairs, 2 * pairs, endpoint, endpoint_se, pairs, slope(false))};
}

// 6 -------------------------------------------------------------------------
Outcome spectral_structure() {
    const Grid g(80.0, 512);
    const double c = 1.0, w = 0.3;
    const auto op = build_weighted_operator(c, w, g);
    const auto raw = eigenvalues(op, true);
    const auto spec = filter_spurious(raw, op);
    double dropped = 0.0;
    for (const auto& l : raw.values) {
        if (std::find(spec.values.begin(), spec.values.end(), l) == spec.values.end()) dropped = l.real();
    }
    int zeros = 0;
    double top = -1e300;
    for (const auto& l : spec.values) {
        if (std::abs(l) < 1e-5) ++zeros;
        else top = std::max(top, l.real());
    }
    const Field y = propagate_weighted(c, w, dphi_dc(c, g), 1.0, 1e-3);
    // L d_c phi = -d_x phi for this operator, so the amplitude mode drifts backwards.
    const Field expected = weight_field(dphi_dc(c, g) - dphi_dx(c, g), w);
    const double jordan = l2_norm(y - expected);
    const double plus_form = l2_norm(y - weight_field(dphi_dc(c, g) + dphi_dx(c, g), w));
    const bool pass = zeros == 2 && top <= -0.27 && jordan <= 1e-6;
    return {pass, fmt("dropped %zu delocalized box mode(s) (Re %.4f)  eigenvalues with |lambda|<1e-5: %d (==2)  max Re of the rest=%.5f (<=-0.27; w(c-w^2)=%.3f)  "
                      "||e^{Lt}d_c phi-(d_c phi-t d_x phi)||_L2w=%.2e (<=1e-6)  [with +t d_x phi: %.3f]",
                      raw.values.size() - spec.values.size(), dropped, zeros, top, w * (c - w * w), jordan, plus_form)};
}

// 7 -------------------------------------------------------------------------
Outcome reduced_dynamics_trend() {
    SimConfig base;
    base.epsilon = 0.01;
    base.forcing = ForcingProfile::constant(1.0);
    base.t_end = 20.0;
    base.record_every = 50;
    base.weight = 0.2;
    base.kernel = gaussian(base.grid);
    base.seed = 7;
    const std::size_t n = 200;

    // sigma = 0 path, used only for the diagnostic below.
    SimConfig det = base;
    det.kernel = nullptr;
    const auto det_rec = simulate_trajectory(det, 0);

    double med[2], med_excess[2];
    std::size_t failures[2];
    const double sigmas[2] = {0.02, 0.01};
    for (int s = 0; s < 2; ++s) {
        SimConfig cfg = base;
        cfg.sigma = sigmas[s];
        const auto [lo, hi] = reduced_table_range(cfg);
        const ReducedModel model(cfg.kernel, lo, hi);
        std::vector<double> err(n), excess(n);
        std::vector<int> failed(n, 0);
        parallel_for(n, [&](std::size_t i) {
            const auto r = simulate_trajectory(cfg, i, model);
            failed[i] = r.failure.has_value();
            err[i] = sup_error(r);
            double e = 0.0;
            for (std::size_t j = 0; j < std::min(r.size(), det_rec.size()); ++j)
                e = std::max(e, std::abs((r.c[j] - r.c_ap[j]) - (det_rec.c[j] - det_rec.c_ap[j])));
            excess[i] = e;
        });
        med[s] = quantile(err, 0.5);
        med_excess[s] = quantile(excess, 0.5);
        failures[s] = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
    }
    const double ratio = med[0] / med[1];
    return {ratio >= 2.8 && ratio <= 5.7,
            fmt("median sup|c-c_ap|: %.3e (sigma=0.02), %.3e (sigma=0.01); ratio %.2f in [2.8,5.7]  "
                "[diagnostic: sigma=0 sup|c-c_ap|=%.3e; median excess over it %.3e, %.3e, ratio %.2f; failures %zu,%zu]",
                med[0], med[1], ratio, sup_error(det_rec), med_excess[0], med_excess[1], med_excess[0] / med_excess[1],
                failures[0], failures[1])};
}

// 8 -------------------------------------------------------------------------
Outcome stability_trend() {
    const double sigmas[2] = {0.04, 0.02};
    const std::vector<double> etas{0.06, 0.08, 0.1, 0.13, 0.17, 0.25};
    const std::size_t n = 200;
    const AmplitudeWindow window(0.6, 1.6, 0.25);
    std::vector<std::vector<Proportion>> p(2);
    for (int s = 0; s < 2; ++s) {
        SimConfig cfg;
        cfg.sigma = sigmas[s];
        cfg.kernel = gaussian(cfg.grid);
        cfg.t_end = 20.0;
        cfg.record_every = 50;
        cfg.weight = 0.25;
        cfg.seed = 8;
        const ReducedModel model(cfg.kernel, 0.5, 2.0);
        std::vector<TrajectoryRecord> recs(n);
        parallel_for(n, [&](std::size_t i) { recs[i] = simulate_trajectory(cfg, i, model); });
        for (double eta : etas) {
            std::size_t hits = 0;
            for (const auto& r : recs) hits += exit_times(r, {eta, 1e9, 1e9}, window).t_st.has_value();
            p[s].push_back(proportion(hits, n));
        }
    }
    bool pass = true;
    bool any_exit = false;
    for (int s = 0; s < 2; ++s)
        for (std::size_t e = 0; e < etas.size(); ++e) {
            any_exit = any_exit || p[s][e].p > 0.0;
            if (e > 0) {
                const double se = std::hypot(p[s][e].stderr_, p[s][e - 1].stderr_);
                pass = pass && p[s][e].p <= p[s][e - 1].p + 2.0 * se;
            }
            if (s > 0) {
                const double se = std::hypot(p[s][e].stderr_, p[s - 1][e].stderr_);
                pass = pass && p[s][e].p <= p[s - 1][e].p + 2.0 * se;
            }
        }
    pass = pass && any_exit;
    std::ostringstream d;
    for (int s = 0; s < 2; ++s) {
        d << "sigma=" << sigmas[s] << " P[t_st<T]:";
        for (std::size_t e = 0; e < etas.size(); ++e) d << fmt(" eta=%.2f:%.3f", etas[e], p[s][e].p);
        d << (s == 0 ? "  " : "");
    }
    return {pass, d.str()};
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
    const auto dir = fs::temp_directory_path() / ("skdv_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "config.toml");
        f << "[grid]\nlength = 80\nn_points = 1024\n\n[noise]\nsigma = 0.02\nkernel = gaussian\n\n"
             "[forcing]\nepsilon = 0.01\nkind = constant\n\n"
             "[run]\nt_end = 2\ndt = 0.001\nrecord_every = 20\nn_trajectories = 4\nseed = 99\n";
    }
    const std::string cli = SKDV_CLI_PATH;
    auto run = [&](const std::string& out) {
        const std::string cmd = cli + " ensemble --config " + (dir / "config.toml").string() + " --out " +
                                (dir / out).string() + " > /dev/null";
        return std::system(cmd.c_str());
    };
    if (run("a") != 0 || run("b") != 0) return {false, "CLI ensemble run failed"};
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        auto slurp = [](const fs::path& p) {
            std::ifstream f(p, std::ios::binary);
            std::ostringstream s;
            s << f.rdbuf();
            return s.str();
        };
        ++files;
        const auto other = dir / "b" / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
    const std::size_t files_b = std::distance(fs::directory_iterator(dir / "b"), fs::directory_iterator{});
    fs::remove_all(dir);
    return {differing == 0 && files == 5 && files_b == files,
            fmt("%zu files compared (summary.json + 4 CSV), %zu differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string only;
    app.add_option("--only", only, "comma-separated criterion numbers");
    CLI11_PARSE(app, argc, argv);
    std::set<int> selected;
    for (std::stringstream ss(only); ss.good();) {
        std::string tok;
        std::getline(ss, tok, ',');
        if (!tok.empty()) selected.insert(std::stoi(tok));
    }

    const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
        {"closed-form modulation identities", closed_form_identities},
        {"soliton propagation", soliton_propagation},
        {"deterministic amplitude law", deterministic_amplitude_law},
        {"noise statistics", noise_statistics},
        {"energy Ito drift", energy_ito_drift},
        {"spectral structure", spectral_structure},
        {"reduced-dynamics validity trend", reduced_dynamics_trend},
        {"stability trend", stability_trend},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
