#pragma once

#include "marles/spectral.hpp"

namespace marles {

enum class ClosureKind { smagorinsky, leith };

const char* to_string(ClosureKind kind);
ClosureKind closure_kind_from_string(const std::string& s);

/// Spatially varying closure coefficient c(x, y) >= 0 on the LES grid,
/// together with the filter size Delta = L / n_les.
struct ClosureField {
    ClosureKind kind = ClosureKind::smagorinsky;
    RealField c;
    double delta = 0.0;
};

/// Validates c >= 0 everywhere and fills in Delta from the grid size.
ClosureField make_closure_field(ClosureKind kind, RealField c, int n_les);

/// Strain-rate information of the resolved flow, on the collocation grid.
/// s22 = -s11 by incompressibility and is not stored.
struct StrainFields {
    RealField s11;             ///< du/dx
    RealField s12;             ///< (du/dy + dv/dx) / 2
    RealField s_mag;           ///< |S| = sqrt(2 S_ij S_ij) = 2 sqrt(s11^2 + s12^2)
    RealField grad_omega_mag;  ///< |grad omega|
};

StrainFields strain_fields(const SpectralField& omega_bar);

/// Pointwise eddy viscosity: c Delta^2 |S| (Smagorinsky) or
/// c Delta^3 |grad omega| (Leith).
RealField eddy_viscosity(const ClosureField& closure, const StrainFields& sf);

/// SGS vorticity tendency from tau = -2 nu_e S: divergence then curl taken
/// spectrally, dealiased. Signs are normalized so that a uniform nu_e yields
/// exactly +nu_e lap(omega) -- a purely diffusive contribution -- when the
/// result is added to the right-hand side.
///
/// Pass precomputed strain fields to avoid recomputing them; they must come
/// from the same omega_bar.
SpectralField sgs_pi(const RealField& nu_e, const SpectralField& omega_bar,
                     const StrainFields* sf = nullptr);

/// Localized dynamic coefficient: Germano-identity least squares with a
/// sharp test filter at half the LES cutoff, no averaging over homogeneous
/// directions, clipped pointwise into [0, 1]. Points where the denominator
/// degenerates (|M.M| < 1e-14) get coefficient 0.
ClosureField dynamic_coefficient(const SpectralField& omega_bar, ClosureKind kind);

}  // namespace marles
