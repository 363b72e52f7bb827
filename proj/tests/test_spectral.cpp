/// Fourier-space machinery: transforms, derivatives, Poisson inversion,
/// dealiasing, sharp filtering, and the conservation identities the solver
/// relies on.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "marles/dns.hpp"
#include "marles/rng.hpp"
#include "marles/spectral.hpp"

using namespace marles;

namespace {

constexpr double kPi = 3.14159265358979323846;

RealField grid_function(int n, double (*f)(double, double)) {
    RealField out(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            out(i, j) = f(2.0 * kPi * i / n, 2.0 * kPi * j / n);
        }
    }
    return out;
}

double rel_err(const RealField& a, const RealField& b) {
    const double scale = b.abs().maxCoeff();
    return scale > 0 ? (a - b).abs().maxCoeff() / scale : (a - b).abs().maxCoeff();
}

}  // namespace

TEST_CASE("make_grid validates and lays out wavenumbers") {
    CHECK_THROWS_AS(make_grid(3), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(2), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(7), std::invalid_argument);

    auto g = make_grid(4);
    // Full-spectrum wavenumbers span -n/2+1 .. n/2 in FFT order.
    CHECK(g->kx_full(0) == 0);
    CHECK(g->kx_full(1) == 1);
    CHECK(g->kx_full(2) == 2);
    CHECK(g->kx_full(3) == -1);
    // Two-thirds rule on n=4 keeps |k| <= 1.
    CHECK(g->dealias_kmax == 1);
    CHECK(g->dealias_mask(0, 0) == 1.0);
    CHECK(g->dealias_mask(1, 0) == 1.0);
    CHECK(g->dealias_mask(2, 0) == 0.0);
    CHECK(g->dealias_mask(0, 2) == 0.0);
    CHECK(g->dealias_mask(1, 3) == 1.0);

    auto g1024 = make_grid(1024);
    CHECK(g1024->n == 1024);
    CHECK(g1024->dealias_kmax == 341);
    CHECK(g1024->rows() == 513);
}

TEST_CASE("zero field transforms to zero") {
    auto g = make_grid(16);
    const RealField phys = to_physical(zero_field(g));
    CHECK(phys.abs().maxCoeff() == 0.0);
}

TEST_CASE("single mode sin(3x) round trips exactly") {
    auto g = make_grid(32);
    SpectralField f(g);
    set_mode(f, 3, 0, Complex(0.0, -0.5));  // sin(3x)
    const RealField phys = to_physical(f);
    const RealField expected = grid_function(32, [](double x, double) { return std::sin(3 * x); });
    CHECK(rel_err(phys, expected) < 1e-12);

    const SpectralField back = from_physical(phys, g);
    CHECK((back.c - f.c).abs().maxCoeff() < 1e-12);
}

TEST_CASE("random dealiased field round trips below 1e-12") {
    auto g = make_grid(64);
    const SpectralField f = random_spectrum_field(g, 4, 20240601);
    const SpectralField back = from_physical(to_physical(f), g);
    const double scale = f.c.abs().maxCoeff();
    CHECK((back.c - f.c).abs().maxCoeff() / scale < 1e-12);
}

TEST_CASE("from_physical rejects mismatched shapes") {
    auto g = make_grid(16);
    RealField wrong(8, 8);
    CHECK_THROWS_AS(from_physical(wrong, g), std::invalid_argument);
}

TEST_CASE("Parseval: spectral sum matches grid mean square") {
    auto g = make_grid(48);
    const SpectralField f = random_spectrum_field(g, 5, 7);
    const RealField phys = to_physical(f);
    const double phys_ms = phys.square().mean();
    const double spec_ms = spectral_sum_sq(f);
    CHECK(std::abs(phys_ms - spec_ms) / phys_ms < 1e-10);
}

TEST_CASE("poisson_solve inverts single modes") {
    auto g = make_grid(32);

    SUBCASE("sin(3x) -> sin(3x)/9") {
        SpectralField w(g);
        set_mode(w, 3, 0, Complex(0.0, -0.5));
        const RealField psi = to_physical(poisson_solve(w));
        const RealField expected =
            grid_function(32, [](double x, double) { return std::sin(3 * x) / 9.0; });
        CHECK(rel_err(psi, expected) < 1e-12);
    }

    SUBCASE("zero -> zero") {
        const SpectralField psi = poisson_solve(zero_field(g));
        CHECK(psi.c.abs().maxCoeff() == 0.0);
    }

    SUBCASE("2cos(4x)cos(4y) -> same/32") {
        SpectralField w(g);
        // 2 cos(4x) cos(4y) = sum over the four (+-4, +-4) modes, each 1/2.
        set_mode(w, 4, 4, Complex(0.5, 0.0));
        set_mode(w, 4, -4, Complex(0.5, 0.0));
        const RealField psi = to_physical(poisson_solve(w));
        const RealField expected = grid_function(
            32, [](double x, double y) { return 2.0 * std::cos(4 * x) * std::cos(4 * y) / 32.0; });
        CHECK(rel_err(psi, expected) < 1e-12);
    }

    SUBCASE("nonzero mean mode rejected") {
        SpectralField w(g);
        w.c(0, 0) = 1e-6;
        CHECK_THROWS_AS(poisson_solve(w), std::invalid_argument);
    }
}

TEST_CASE("poisson_solve then -laplacian recovers the input") {
    auto g = make_grid(32);
    const SpectralField w = random_spectrum_field(g, 4, 99);
    const SpectralField psi = poisson_solve(w);
    SpectralField back(g);
    back.c = g->k2.cast<Complex>() * psi.c;  // -lap psi = k^2 psi = omega
    CHECK((back.c - w.c).abs().maxCoeff() / w.c.abs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient identities") {
    auto g = make_grid(32);

    SUBCASE("sin(x): d/dx = cos(x), d/dy = 0") {
        SpectralField f(g);
        set_mode(f, 1, 0, Complex(0.0, -0.5));
        auto [fx, fy] = gradient(f);
        const RealField expected =
            grid_function(32, [](double x, double) { return std::cos(x); });
        CHECK(rel_err(to_physical(fx), expected) < 1e-12);
        CHECK(to_physical(fy).abs().maxCoeff() < 1e-14);
    }

    SUBCASE("constant: gradient vanishes") {
        SpectralField f(g);
        f.c(0, 0) = 3.7;
        auto [fx, fy] = gradient(f);
        CHECK(fx.c.abs().maxCoeff() == 0.0);
        CHECK(fy.c.abs().maxCoeff() == 0.0);
    }

    SUBCASE("cos(2y): d/dy = -2 sin(2y)") {
        SpectralField f(g);
        set_mode(f, 0, 2, Complex(0.5, 0.0));
        auto fy = derivative_y(f);
        const RealField expected =
            grid_function(32, [](double, double y) { return -2.0 * std::sin(2 * y); });
        CHECK(rel_err(to_physical(fy), expected) < 1e-12);
    }
}

TEST_CASE("linearity of filter, gradient and Poisson solve") {
    auto g = make_grid(64);
    const SpectralField f = random_spectrum_field(g, 4, 11);
    const SpectralField h = random_spectrum_field(g, 6, 12);
    const double a = 2.25, b = -0.75;

    SpectralField combo(g);
    combo.c = a * f.c + b * h.c;

    SpectralField want(g);
    want.c = a * poisson_solve(f).c + b * poisson_solve(h).c;
    CHECK((poisson_solve(combo).c - want.c).abs().maxCoeff() < 1e-13);

    want.c = a * derivative_x(f).c + b * derivative_x(h).c;
    CHECK((derivative_x(combo).c - want.c).abs().maxCoeff() < 1e-11);

    const SpectralField fc = sharp_filter(combo, 32);
    SpectralField want_c(fc.grid);
    want_c.c = a * sharp_filter(f, 32).c + b * sharp_filter(h, 32).c;
    CHECK((fc.c - want_c.c).abs().maxCoeff() < 1e-13);
}

TEST_CASE("jacobian vanishes for functionally dependent fields") {
    auto g = make_grid(32);

    SUBCASE("constant psi: no flow") {
        const SpectralField w = random_spectrum_field(g, 4, 3);
        SpectralField psi(g);
        psi.c(0, 0) = 5.0;
        const SpectralField n = jacobian(w, psi);
        CHECK(n.c.abs().maxCoeff() < 1e-14);
    }

    SUBCASE("psi = sin(x)sin(y), omega = 2 psi") {
        SpectralField psi(g);
        // sin(x) sin(y) = -1/2 cos(x+y) + 1/2 cos(x-y)
        set_mode(psi, 1, 1, Complex(-0.25, 0.0));
        set_mode(psi, 1, -1, Complex(0.25, 0.0));
        SpectralField w(g);
        w.c = 2.0 * psi.c;
        const SpectralField n = jacobian(w, psi);
        CHECK(n.c.abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("jacobian skew-symmetry: <N omega> = <N psi> = 0") {
    auto g = make_grid(64);
    const SpectralField w = random_spectrum_field(g, 5, 314);
    const SpectralField psi = poisson_solve(w);
    const SpectralField n = jacobian(w, psi);

    // <a b> over the domain = sum_k a_k conj(b_k) for real fields.
    const auto inner = [&](const SpectralField& a, const SpectralField& b) {
        return ((a.c * b.c.conjugate()).real() * g->mode_weight).sum();
    };
    const double n_mag = std::sqrt(spectral_sum_sq(n));
    const double w_mag = std::sqrt(spectral_sum_sq(w));
    const double p_mag = std::sqrt(spectral_sum_sq(psi));
    CHECK(std::abs(inner(n, w)) / (n_mag * w_mag) < 1e-8);
    CHECK(std::abs(inner(n, psi)) / (n_mag * p_mag) < 1e-8);
}

TEST_CASE("jacobian with a mean flow adds pure advection") {
    auto g = make_grid(32);
    const SpectralField w = random_spectrum_field(g, 4, 5);
    const SpectralField psi = poisson_solve(w);
    const MeanFlow mf{1.5, -0.5};
    const SpectralField n0 = jacobian(w, psi);
    const SpectralField n1 = jacobian(w, psi, mf);
    SpectralField expected(g);
    expected.c = n0.c + Complex(0, 1) * (mf.u * g->dkx + mf.v * g->dky).cast<Complex>() * w.c;
    dealias_inplace(expected);
    CHECK((n1.c - expected.c).abs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian rejects grid mismatch") {
    const SpectralField a = random_spectrum_field(make_grid(32), 4, 1);
    const SpectralField b = random_spectrum_field(make_grid(64), 4, 1);
    CHECK_THROWS_AS(jacobian(a, b), std::invalid_argument);
}

TEST_CASE("sharp_filter") {
    auto g = make_grid(1024);

    SUBCASE("cuts high modes, keeps low ones") {
        SpectralField f(g);
        set_mode(f, 3, 0, Complex(0.0, -0.5));    // sin(3x)
        set_mode(f, 100, 0, Complex(0.0, -0.5));  // sin(100x)
        const SpectralField coarse = sharp_filter(f, 32);
        CHECK(coarse.grid->n == 32);
        const RealField expected =
            grid_function(32, [](double x, double) { return std::sin(3 * x); });
        CHECK(rel_err(to_physical(coarse), expected) < 1e-12);
    }

    SUBCASE("identity at same size on dealiased fields") {
        auto g64 = make_grid(64);
        const SpectralField f = random_spectrum_field(g64, 4, 8);
        const SpectralField same = sharp_filter(f, 64);
        CHECK((same.c - f.c).abs().maxCoeff() == 0.0);
    }

    SUBCASE("idempotent projection") {
        auto g128 = make_grid(128);
        const SpectralField f = random_spectrum_field(g128, 10, 9);
        const SpectralField once = sharp_filter(f, 32);
        const SpectralField twice = sharp_filter(once, 32);
        CHECK((once.c - twice.c).abs().maxCoeff() == 0.0);
    }

    SUBCASE("rejects upsampling") {
        const SpectralField f = random_spectrum_field(make_grid(32), 4, 10);
        CHECK_THROWS_AS(sharp_filter(f, 64), std::invalid_argument);
    }

    SUBCASE("filtered field stays real-representable") {
        auto g64 = make_grid(64);
        const SpectralField f = random_spectrum_field(g64, 8, 21);
        const SpectralField coarse = sharp_filter(f, 16);
        const SpectralField back = from_physical(to_physical(coarse), coarse.grid);
        CHECK((back.c - coarse.c).abs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("set_mode/get_mode handle conjugate pairs") {
    auto g = make_grid(16);
    SpectralField f(g);
    set_mode(f, 2, 3, Complex(0.25, -0.75));
    CHECK(get_mode(f, 2, 3) == Complex(0.25, -0.75));
    CHECK(get_mode(f, -2, -3) == Complex(0.25, 0.75));

    set_mode(f, 0, 5, Complex(0.5, 0.25));
    CHECK(get_mode(f, 0, 5) == Complex(0.5, 0.25));
    CHECK(get_mode(f, 0, -5) == Complex(0.5, -0.25));

    // Physical field built from these modes must be real: round trip agrees.
    const SpectralField back = from_physical(to_physical(f), g);
    CHECK((back.c - f.c).abs().maxCoeff() < 1e-14);
}

TEST_CASE("energy and enstrophy of a single mode") {
    auto g = make_grid(32);
    SpectralField w(g);
    set_mode(w, 3, 0, Complex(0.0, -0.5));  // omega = sin(3x)
    // <omega^2> = 1/2, so Z = 1/4; E = Z / |k|^2 = 1/36.
    CHECK(total_enstrophy(w) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(total_energy(w) == doctest::Approx(0.25 / 9.0).epsilon(1e-12));
}
