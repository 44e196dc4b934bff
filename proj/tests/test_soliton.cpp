#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "skdv/soliton.hpp"

using namespace skdv;
using boost::math::quadrature::gauss_kronrod;

namespace {
double integrate(const std::function<double(double)>& f, double a, double b) {
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}
const double kC[] = {0.5, 1.0, 2.0};
}  // namespace

TEST(Profile, SolvesTravellingWaveEquation) {
    // -c phi' + phi''' + 2 phi phi' = 0, derivatives by centred differences.
    const double h = 1e-3;
    for (double c : kC) {
        for (double x = -6.0; x <= 6.0; x += 0.37) {
            auto p = [c](double y) { return profile::phi(c, y); };
            const double d1 = (p(x + h) - p(x - h)) / (2 * h);
            const double d3 = (p(x + 2 * h) - 2 * p(x + h) + 2 * p(x - h) - p(x - 2 * h)) / (2 * h * h * h);
            EXPECT_NEAR(-c * d1 + d3 + 2.0 * p(x) * d1, 0.0, 2e-5 * c * c * c);
        }
    }
}

TEST(Profile, DerivativesMatchFiniteDifferences) {
    // Fourth-order centred differences keep truncation well below the tolerance.
    const double h = 1e-3;
    auto five = [h](auto f) { return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h); };
    for (double c : kC) {
        for (double x = -8.0; x <= 8.0; x += 0.53) {
            auto fdx = [&](auto f) { return five([&](double d) { return f(c, x + d); }); };
            auto fdc = [&](auto f) { return five([&](double d) { return f(c + d, x); }); };
            EXPECT_NEAR(profile::dphi_dx(c, x), fdx(profile::phi), 1e-7);
            EXPECT_NEAR(profile::d2phi_dx2(c, x), fdx(profile::dphi_dx), 1e-7);
            EXPECT_NEAR(profile::d3phi_dx3(c, x), fdx(profile::d2phi_dx2), 1e-7);
            EXPECT_NEAR(profile::dphi_dc(c, x), fdc(profile::phi), 1e-7);
            EXPECT_NEAR(profile::d2phi_dc2(c, x), fdc(profile::dphi_dc), 1e-7);
            EXPECT_NEAR(profile::d2phi_dxdc(c, x), fdc(profile::dphi_dx), 1e-7);
            EXPECT_NEAR(profile::dzeta_dc(c, x), fdc(profile::zeta), 1e-7);
            EXPECT_NEAR(profile::d2zeta_dc2(c, x), fdc(profile::dzeta_dc), 1e-7);
        }
    }
}

TEST(Profile, ZetaIsPrimitiveOfAmplitudeDerivative) {
    for (double c : kC) {
        for (double x : {-10.0, -2.0, -0.3, 0.0, 0.8, 3.0, 12.0}) {
            const double ref = integrate([c](double y) { return profile::dphi_dc(c, y); }, -80.0, x);
            EXPECT_NEAR(profile::zeta(c, x), ref, 1e-11);
        }
        EXPECT_NEAR(profile::zeta(c, 60.0), 3.0 / std::sqrt(c), 1e-12);
    }
}

TEST(Profile, TailsStayFinite) {
    EXPECT_EQ(profile::phi(1.0, 1e4), 0.0);
    EXPECT_TRUE(std::isfinite(profile::d2zeta_dc2(1.0, -1e4)));
    EXPECT_THROW(phi(-1.0, Grid(80.0, 64)), std::invalid_argument);
}

TEST(SampledProfile, MassAndEnergyMatchClosedForms) {
    const Grid g(80.0, 1024);
    for (double c : kC) {
        const Field p = phi(c, g, 3.3);
        double mass = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) mass += p[j] * g.spacing();
        EXPECT_NEAR(mass, 6.0 * std::sqrt(c), 1e-10);
        EXPECT_NEAR(inner_product(p, p), 6.0 * std::pow(c, 1.5), 1e-10);
    }
}

TEST(SampledProfile, ZetaPairingsMatchQuadrature) {
    const Grid g(80.0, 1024);
    for (double c : kC) {
        const Field z = zeta(c, g);
        const double ref_x = integrate([c](double y) { return profile::dphi_dx(c, y) * profile::zeta(c, y); }, -40, 40);
        const double ref_c = integrate([c](double y) { return profile::dphi_dc(c, y) * profile::zeta(c, y); }, -40, 40);
        EXPECT_NEAR(inner_product(dphi_dx(c, g), z), ref_x, 1e-10);
        EXPECT_NEAR(inner_product(dphi_dx(c, g), z), -4.5 * std::sqrt(c), 1e-9);
        EXPECT_NEAR(inner_product(dphi_dc(c, g), z), ref_c, 1e-10);
        EXPECT_NEAR(inner_product(dphi_dc(c, g), phi(c, g)), 4.5 * std::sqrt(c), 1e-9);
    }
}

TEST(SampledProfile, ZetaPairingContinuousAcrossSeam) {
    // Field nonzero at the window seam: the pairing must not jump when the
    // seam crosses a grid point.
    const Grid g(80.0, 512);
    const Field u = Field::sample(g, [](double x) { return 0.1 + 0.01 * std::sin(x); });
    const double xi0 = 4.0 * g.spacing();
    double max_jump = 0.0;
    double prev = inner_product(u, zeta(1.0, g, xi0 - 0.5 * g.spacing()));
    for (int i = 1; i <= 200; ++i) {
        const double xi = xi0 - 0.5 * g.spacing() + i * g.spacing() / 200.0;
        const double cur = inner_product(u, zeta(1.0, g, xi));
        max_jump = std::max(max_jump, std::abs(cur - prev));
        prev = cur;
    }
    // Smooth drift per sub-step is about u * zeta_inf * dx / 200.
    EXPECT_LT(max_jump, 0.11 * 3.0 * g.spacing() / 200.0 * 1.5);
}

TEST(Projection, SpansGeneralizedKernel) {
    const Grid g(80.0, 1024);
    for (double c : kC) {
        const Field px = dphi_dx(c, g, 0.7);
        const Field pc = dphi_dc(c, g, 0.7);
        EXPECT_LT((spectral_projection(px, c, 0.7) - px).max_abs(), 1e-9);
        EXPECT_LT((spectral_projection(pc, c, 0.7) - pc).max_abs(), 1e-9);
    }
}

TEST(Projection, IdempotentAndComplementOrthogonal) {
    const Grid g(80.0, 1024);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (double c : kC) {
        Field f(g);
        for (std::size_t j = 0; j < g.size(); ++j) f[j] = n01(rng) * std::exp(-0.05 * g.x(j) * g.x(j));
        const Field p = spectral_projection(f, c);
        EXPECT_LT((spectral_projection(p, c) - p).max_abs(), 1e-9 * (1.0 + p.max_abs()));
        const Field q = complementary_projection(f, c);
        EXPECT_NEAR(inner_product(q, phi(c, g)), 0.0, 1e-9);
        EXPECT_NEAR(inner_product(q, zeta(c, g)), 0.0, 1e-9);
    }
}

TEST(AmplitudeWindow, Validates) {
    EXPECT_THROW(AmplitudeWindow(1.0, 1.0, 0.1), std::invalid_argument);
    EXPECT_THROW(AmplitudeWindow(0.0, 2.0, 0.1), std::invalid_argument);
    EXPECT_THROW(AmplitudeWindow(0.81, 2.0, 0.3), std::invalid_argument);  // w >= sqrt(c_min)/3
    const AmplitudeWindow w(0.5, 2.0, 0.2);
    EXPECT_TRUE(w.contains(1.0));
    EXPECT_FALSE(w.contains(2.5));
    EXPECT_THROW(SolitonParams(-1.0, 0.0), std::invalid_argument);
}
