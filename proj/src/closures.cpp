#include "marles/closures.hpp"

#include <cmath>
#include <stdexcept>

namespace marles {

const char* to_string(ClosureKind kind) {
    return kind == ClosureKind::smagorinsky ? "smagorinsky" : "leith";
}

ClosureKind closure_kind_from_string(const std::string& s) {
    if (s == "smagorinsky") return ClosureKind::smagorinsky;
    if (s == "leith") return ClosureKind::leith;
    throw std::invalid_argument("unknown closure kind: " + s);
}

ClosureField make_closure_field(ClosureKind kind, RealField c, int n_les) {
    if (c.rows() != n_les || c.cols() != n_les) {
        throw std::invalid_argument("coefficient field shape does not match LES grid");
    }
    if ((c < 0.0).any()) {
        throw std::invalid_argument("closure coefficient must be non-negative everywhere");
    }
    ClosureField f;
    f.kind = kind;
    f.c = std::move(c);
    f.delta = 2.0 * 3.14159265358979323846 / n_les;
    return f;
}

StrainFields strain_fields(const SpectralField& omega_bar) {
    const auto& grid = omega_bar.grid;
    const Eigen::ArrayXXcd psi = omega_bar.c * grid->inv_k2.cast<Complex>();

    // s11 = psi_xy, s12 = (psi_yy - psi_xx)/2, both spectral multipliers.
    SpectralField s11s(grid), s12s(grid);
    s11s.c = -(grid->dkx * grid->dky).cast<Complex>() * psi;
    s12s.c = (0.5 * (grid->dkx.square() - grid->dky.square())).cast<Complex>() * psi;

    StrainFields sf;
    sf.s11 = to_physical(s11s);
    sf.s12 = to_physical(s12s);
    sf.s_mag = 2.0 * (sf.s11.square() + sf.s12.square()).sqrt();

    const RealField wx = to_physical(derivative_x(omega_bar));
    const RealField wy = to_physical(derivative_y(omega_bar));
    sf.grad_omega_mag = (wx.square() + wy.square()).sqrt();
    return sf;
}

RealField eddy_viscosity(const ClosureField& closure, const StrainFields& sf) {
    if ((closure.c < 0.0).any()) {
        throw std::invalid_argument("closure coefficient must be non-negative");
    }
    if (closure.kind == ClosureKind::smagorinsky) {
        if (closure.c.rows() != sf.s_mag.rows() || closure.c.cols() != sf.s_mag.cols()) {
            throw std::invalid_argument("coefficient and strain fields on different grids");
        }
        return closure.c * (closure.delta * closure.delta) * sf.s_mag;
    }
    if (closure.c.rows() != sf.grad_omega_mag.rows() ||
        closure.c.cols() != sf.grad_omega_mag.cols()) {
        throw std::invalid_argument("coefficient and gradient fields on different grids");
    }
    return closure.c * (closure.delta * closure.delta * closure.delta) * sf.grad_omega_mag;
}

SpectralField sgs_pi(const RealField& nu_e, const SpectralField& omega_bar,
                     const StrainFields* sf) {
    if (!nu_e.allFinite()) throw std::invalid_argument("eddy viscosity contains non-finite values");
    const auto& grid = omega_bar.grid;
    if (nu_e.rows() != grid->n || nu_e.cols() != grid->n) {
        throw std::invalid_argument("eddy viscosity shape does not match grid");
    }

    StrainFields local;
    if (sf == nullptr) {
        local = strain_fields(omega_bar);
        sf = &local;
    }

    // Pi = 2 (d_xx - d_yy)(nu_e s12) - 4 d_xy (nu_e s11), assembled in
    // physical space, differentiated spectrally. Uniform nu_e collapses this
    // to nu_e lap(omega).
    const SpectralField a = from_physical(nu_e * sf->s12, grid);
    const SpectralField b = from_physical(nu_e * sf->s11, grid);

    SpectralField pi(grid);
    pi.c = 2.0 * (grid->dky.square() - grid->dkx.square()).cast<Complex>() * a.c +
           4.0 * (grid->dkx * grid->dky).cast<Complex>() * b.c;
    dealias_inplace(pi);
    pi.c(0, 0) = 0.0;
    return pi;
}

namespace {

RealField test_filtered(const RealField& phys, const GridPtr& grid, int k_keep) {
    return to_physical(sharp_truncate(from_physical(phys, grid), k_keep));
}

}  // namespace

ClosureField dynamic_coefficient(const SpectralField& omega_bar, ClosureKind kind) {
    const auto& grid = omega_bar.grid;
    const int n = grid->n;
    if (n < 8) throw std::invalid_argument("grid too coarse to resolve a 2*Delta test filter");
    const int k_test = n / 4;  // sharp test filter at twice the grid filter size

    const double delta = grid->length / n;
    const double delta_test = 2.0 * delta;
    const double pow_grid = kind == ClosureKind::smagorinsky ? delta * delta
                                                             : delta * delta * delta;
    const double pow_test = kind == ClosureKind::smagorinsky
                                ? delta_test * delta_test
                                : delta_test * delta_test * delta_test;

    // Grid-level resolved quantities.
    const SpectralField psi = poisson_solve(omega_bar);
    const RealField u = to_physical(derivative_y(psi));
    const RealField v = -to_physical(derivative_x(psi));
    const RealField w = to_physical(omega_bar);
    const RealField wx = to_physical(derivative_x(omega_bar));
    const RealField wy = to_physical(derivative_y(omega_bar));
    const StrainFields sf = strain_fields(omega_bar);
    const RealField& mag = kind == ClosureKind::smagorinsky ? sf.s_mag : sf.grad_omega_mag;

    // Test-level resolved quantities from the truncated vorticity.
    const SpectralField omega_t = sharp_truncate(omega_bar, k_test);
    const SpectralField psi_t = poisson_solve(omega_t);
    const RealField ut = to_physical(derivative_y(psi_t));
    const RealField vt = -to_physical(derivative_x(psi_t));
    const RealField wt = to_physical(omega_t);
    const RealField wtx = to_physical(derivative_x(omega_t));
    const RealField wty = to_physical(derivative_y(omega_t));
    const StrainFields sft = strain_fields(omega_t);
    const RealField& mag_t = kind == ClosureKind::smagorinsky ? sft.s_mag : sft.grad_omega_mag;

    // Resolved (Leonard) vorticity flux between the two filter levels.
    const RealField lx = test_filtered(u * w, grid, k_test) - ut * wt;
    const RealField ly = test_filtered(v * w, grid, k_test) - vt * wt;

    // Model flux difference.
    const RealField mx = pow_test * mag_t * wtx - pow_grid * test_filtered(mag * wx, grid, k_test);
    const RealField my = pow_test * mag_t * wty - pow_grid * test_filtered(mag * wy, grid, k_test);

    const RealField num = lx * mx + ly * my;
    const RealField den = mx * mx + my * my;

    RealField c(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double d = den(i, j);
            const double value = std::abs(d) < 1e-14 ? 0.0 : -num(i, j) / d;
            c(i, j) = std::clamp(value, 0.0, 1.0);
        }
    }
    return make_closure_field(kind, std::move(c), n);
}

}  // namespace marles
