/// Eddy-viscosity closures: strain fields, Smagorinsky/Leith viscosity, the
/// SGS curl-divergence term and its uniform-viscosity identity, dissipation,
/// Galilean invariance, and the localized dynamic baselines.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "marles/closures.hpp"
#include "marles/dns.hpp"
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

// psi = sin(x) sin(y), omega = -lap psi = 2 psi.
SpectralField sinsin_vorticity(const GridPtr& g) {
    SpectralField w(g);
    set_mode(w, 1, 1, Complex(-0.5, 0.0));
    set_mode(w, 1, -1, Complex(0.5, 0.0));
    return w;
}

}  // namespace

TEST_CASE("strain fields of quiescent flow vanish") {
    auto g = make_grid(32);
    const StrainFields sf = strain_fields(zero_field(g));
    CHECK(sf.s11.abs().maxCoeff() == 0.0);
    CHECK(sf.s12.abs().maxCoeff() == 0.0);
    CHECK(sf.s_mag.abs().maxCoeff() == 0.0);
    CHECK(sf.grad_omega_mag.abs().maxCoeff() == 0.0);
}

TEST_CASE("strain fields of psi = sin(x)sin(y) match the hand computation") {
    auto g = make_grid(64);
    const SpectralField w = sinsin_vorticity(g);
    const StrainFields sf = strain_fields(w);

    // u = sin(x)cos(y), v = -cos(x)sin(y); s11 = cos(x)cos(y), s12 = 0,
    // |S| = 2 |cos(x) cos(y)|.
    const RealField s11 =
        grid_function(64, [](double x, double y) { return std::cos(x) * std::cos(y); });
    const RealField smag = grid_function(
        64, [](double x, double y) { return 2.0 * std::abs(std::cos(x) * std::cos(y)); });
    CHECK((sf.s11 - s11).abs().maxCoeff() < 1e-12);
    CHECK(sf.s12.abs().maxCoeff() < 1e-12);
    CHECK((sf.s_mag - smag).abs().maxCoeff() < 1e-12);

    // |grad omega| for omega = 2 sin(x) sin(y).
    const RealField gw = grid_function(64, [](double x, double y) {
        const double wx = 2.0 * std::cos(x) * std::sin(y);
        const double wy = 2.0 * std::sin(x) * std::cos(y);
        return std::sqrt(wx * wx + wy * wy);
    });
    CHECK((sf.grad_omega_mag - gw).abs().maxCoeff() < 1e-12);
}

TEST_CASE("incompressibility: |S| is consistent with s22 = -s11") {
    // s22 = -s11 is implicit in StrainFields; verify |S| on a random field:
    // |S|^2 = 2(s11^2 + s22^2 + 2 s12^2) = 4(s11^2 + s12^2).
    auto g = make_grid(48);
    const SpectralField w = random_spectrum_field(g, 5, 42);
    const StrainFields sf = strain_fields(w);
    const RealField expected = 2.0 * (sf.s11.square() + sf.s12.square()).sqrt();
    CHECK((sf.s_mag - expected).abs().maxCoeff() < 1e-13);
}

TEST_CASE("eddy viscosity formulas") {
    const int n = 32;
    const double delta = 2.0 * kPi / n;

    StrainFields sf;
    sf.s11 = RealField::Zero(n, n);
    sf.s12 = RealField::Zero(n, n);
    sf.s_mag = RealField::Constant(n, n, 2.0);
    sf.grad_omega_mag = RealField::Constant(n, n, 5.0);

    SUBCASE("zero coefficient gives zero viscosity") {
        const ClosureField c =
            make_closure_field(ClosureKind::smagorinsky, RealField::Zero(n, n), n);
        CHECK(eddy_viscosity(c, sf).abs().maxCoeff() == 0.0);
    }

    SUBCASE("Smagorinsky: c delta^2 |S|") {
        const ClosureField c =
            make_closure_field(ClosureKind::smagorinsky, RealField::Constant(n, n, 0.1), n);
        const RealField nu = eddy_viscosity(c, sf);
        CHECK(nu(3, 7) == doctest::Approx(0.1 * delta * delta * 2.0).epsilon(1e-12));
        CHECK(nu(3, 7) == doctest::Approx(7.7106e-3).epsilon(1e-3));
        CHECK((nu >= 0.0).all());
    }

    SUBCASE("Leith: c delta^3 |grad omega|") {
        const ClosureField c =
            make_closure_field(ClosureKind::leith, RealField::Constant(n, n, 0.2), n);
        const RealField nu = eddy_viscosity(c, sf);
        CHECK(nu(0, 0) == doctest::Approx(0.2 * delta * delta * delta * 5.0).epsilon(1e-12));
        CHECK(nu(0, 0) == doctest::Approx(7.5700e-3).epsilon(1e-3));
    }

    SUBCASE("negative coefficients are rejected") {
        RealField c = RealField::Constant(n, n, 0.1);
        c(5, 5) = -1e-12;
        CHECK_THROWS_AS(make_closure_field(ClosureKind::smagorinsky, c, n),
                        std::invalid_argument);
    }
}

TEST_CASE("sgs_pi identities") {
    auto g = make_grid(64);

    SUBCASE("zero viscosity gives zero tendency") {
        const SpectralField w = random_spectrum_field(g, 4, 17);
        const SpectralField pi = sgs_pi(RealField::Zero(64, 64), w);
        CHECK(pi.c.abs().maxCoeff() == 0.0);
    }

    SUBCASE("uniform viscosity reduces to nu lap(omega)") {
        const double nu0 = 3.5e-3;
        const SpectralField w = random_spectrum_field(g, 4, 18);
        const SpectralField pi = sgs_pi(RealField::Constant(64, 64, nu0), w);
        SpectralField expected(g);
        expected.c = -nu0 * g->k2.cast<Complex>() * w.c;
        const double scale = expected.c.abs().maxCoeff();
        CHECK((pi.c - expected.c).abs().maxCoeff() / scale < 1e-10);
    }

    SUBCASE("uniform viscosity with omega = sin(3x): pi = -9 nu sin(3x)") {
        const double nu0 = 0.01;
        SpectralField w(g);
        set_mode(w, 3, 0, Complex(0.0, -0.5));
        const SpectralField pi = sgs_pi(RealField::Constant(64, 64, nu0), w);
        const RealField expected =
            grid_function(64, [](double x, double) { return -0.09 * std::sin(3 * x); });
        CHECK((to_physical(pi) - expected).abs().maxCoeff() < 1e-12);
    }

    SUBCASE("non-finite viscosity is rejected") {
        RealField nu = RealField::Zero(64, 64);
        nu(1, 1) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(sgs_pi(nu, random_spectrum_field(g, 4, 19)), std::invalid_argument);
    }
}

TEST_CASE("closure dissipates enstrophy for uniform non-negative viscosity") {
    auto g = make_grid(64);
    const SpectralField w = random_spectrum_field(g, 6, 23);
    const SpectralField pi = sgs_pi(RealField::Constant(64, 64, 2e-3), w);
    // <omega Pi> = -nu <|grad omega|^2> <= 0.
    const double production = ((w.c * pi.c.conjugate()).real() * g->mode_weight).sum();
    const double w_mag = std::sqrt(spectral_sum_sq(w));
    const double pi_mag = std::sqrt(spectral_sum_sq(pi));
    CHECK(production < 1e-8 * w_mag * pi_mag);
    CHECK(production < 0.0);
}

TEST_CASE("pointwise locality of the coefficient before the spectral step") {
    auto g = make_grid(32);
    const SpectralField w = random_spectrum_field(g, 4, 29);
    const StrainFields sf = strain_fields(w);

    RealField c_base = RealField::Constant(32, 32, 0.1);
    RealField c_bump = c_base;
    for (int j = 10; j < 14; ++j) {
        for (int i = 10; i < 14; ++i) c_bump(i, j) = 0.4;
    }
    const RealField nu_base =
        eddy_viscosity(make_closure_field(ClosureKind::smagorinsky, c_base, 32), sf);
    const RealField nu_bump =
        eddy_viscosity(make_closure_field(ClosureKind::smagorinsky, c_bump, 32), sf);
    for (int j = 0; j < 32; ++j) {
        for (int i = 0; i < 32; ++i) {
            const bool inside = i >= 10 && i < 14 && j >= 10 && j < 14;
            if (inside) continue;
            CHECK(nu_base(i, j) == nu_bump(i, j));
        }
    }
}

TEST_CASE("Galilean invariance: mean flow translates, closure fields follow") {
    // Advance the same initial field with and without a uniform mean flow
    // chosen so the translation after time T is an exact number of grid
    // cells; all closure quantities must be the translated copies.
    auto g = make_grid(32);
    PhysicsParams p;
    p.re = 500.0;
    p.beta = 0.0;
    p.drag = 0.0;
    p.kappa_f = 4;
    p.forcing_enabled = false;

    const int shift_cells = 4;
    const long n_steps = 256;
    const double dt = 2.5e-3;
    const double dx = g->length / g->n;
    const MeanFlow mf{shift_cells * dx / (n_steps * dt), 0.0};

    SimState rest, moving;
    rest.omega = random_spectrum_field(g, 4, 97);
    moving.omega = rest.omega;
    Stepper srest(g, p, dt), smove(g, p, dt);
    for (long i = 0; i < n_steps; ++i) {
        srest.advance(rest);
        smove.advance(moving, nullptr, mf);
    }

    const StrainFields sf_rest = strain_fields(rest.omega);
    const StrainFields sf_move = strain_fields(moving.omega);

    // Translate the rest-frame fields by the integer cell shift in x.
    auto shifted = [&](const RealField& f) {
        RealField out(32, 32);
        for (int j = 0; j < 32; ++j) {
            for (int i = 0; i < 32; ++i) out((i + shift_cells) % 32, j) = f(i, j);
        }
        return out;
    };
    // The continuous dynamics are exactly covariant; the residual here is
    // time-integration error, O(dt^4), far below any formulation defect.
    const double scale = sf_rest.s_mag.maxCoeff();
    CHECK((sf_move.s_mag - shifted(sf_rest.s_mag)).abs().maxCoeff() / scale < 1e-5);
    CHECK((sf_move.grad_omega_mag - shifted(sf_rest.grad_omega_mag)).abs().maxCoeff() /
              sf_rest.grad_omega_mag.maxCoeff() <
          1e-5);

    // Scalar summaries are unchanged outright.
    CHECK(total_enstrophy(moving.omega) ==
          doctest::Approx(total_enstrophy(rest.omega)).epsilon(1e-8));
}

TEST_CASE("dynamic coefficient: zero field gives zero coefficient") {
    auto g = make_grid(32);
    const ClosureField c = dynamic_coefficient(zero_field(g), ClosureKind::smagorinsky);
    CHECK(c.c.abs().maxCoeff() == 0.0);
    CHECK(c.delta == doctest::Approx(2.0 * kPi / 32));
}

TEST_CASE("dynamic coefficient stays finite and inside [0, 1]") {
    auto g = make_grid(32);
    // Band-limited field fully below the test cutoff.
    const SpectralField w = sharp_truncate(random_spectrum_field(g, 3, 31), 7);
    for (ClosureKind kind : {ClosureKind::smagorinsky, ClosureKind::leith}) {
        const ClosureField c = dynamic_coefficient(w, kind);
        CHECK(c.c.allFinite());
        CHECK((c.c >= 0.0).all());
        CHECK((c.c <= 1.0).all());
    }
}

TEST_CASE("dynamic Smagorinsky on a stationary field lands in the classical range") {
    // Spin a small forced run to statistical stationarity, then check the
    // spatial mean coefficient against the classical sanity band.
    auto g = make_grid(32);
    PhysicsParams p;
    p.re = 300.0;
    p.beta = 0.0;
    p.drag = 0.15;
    p.kappa_f = 4;

    SimState s;
    s.omega = random_spectrum_field(g, 4, 404);
    Stepper stepper(g, p, 5e-3);
    for (int i = 0; i < 8000; ++i) stepper.advance(s);

    const ClosureField c = dynamic_coefficient(s.omega, ClosureKind::smagorinsky);
    const double mean_c = c.c.mean();
    CHECK(mean_c >= 0.01);
    CHECK(mean_c <= 0.2);
}

TEST_CASE("dynamic coefficient requires a resolvable test filter") {
    auto g = make_grid(4);
    CHECK_THROWS_AS(dynamic_coefficient(zero_field(g), ClosureKind::leith),
                    std::invalid_argument);
}
