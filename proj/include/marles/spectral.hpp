#pragma once

#include <Eigen/Core>
#include <complex>
#include <memory>
#include <utility>

namespace marles {

/// Physical-space scalar field on the n x n collocation grid of the doubly
/// periodic domain [0, 2*pi)^2. Element (ix, iy) is the value at
/// x = 2*pi*ix/n, y = 2*pi*iy/n.
using RealField = Eigen::ArrayXXd;

using Complex = std::complex<double>;

/// Uniform translation velocity added to the periodic flow. A mean flow has
/// no periodic streamfunction, so it travels as an explicit parameter.
struct MeanFlow {
    double u = 0.0;
    double v = 0.0;
};

/// Fourier-space description of an n x n grid with L = 2*pi, so wavenumbers
/// are integers spanning -n/2+1 .. n/2 in each direction.
///
/// Coefficients are stored half-spectrum (conjugate symmetry exploited):
/// shape (n/2+1, n), row r = kx in 0..n/2, column c = ky in standard FFT
/// order (0, 1, ..., n/2, -n/2+1, ..., -1). Modes with kx < 0 are implicit
/// conjugates.
struct SpectralGrid {
    int n = 0;
    double length = 6.283185307179586476925286766559;

    Eigen::ArrayXd kx;       ///< stored kx values, size n/2+1: 0..n/2
    Eigen::ArrayXd ky;       ///< signed ky values, size n, FFT order
    Eigen::ArrayXd kx_full;  ///< signed kx values of the full spectrum, size n, FFT order

    Eigen::ArrayXXd kx2d;    ///< kx broadcast to (n/2+1, n)
    Eigen::ArrayXXd ky2d;    ///< ky broadcast to (n/2+1, n)
    Eigen::ArrayXXd k2;      ///< kx^2 + ky^2
    Eigen::ArrayXXd inv_k2;  ///< 1/k2 with the (0,0) entry set to 0
    Eigen::ArrayXXd dkx;     ///< derivative multiplier kx with Nyquist zeroed
    Eigen::ArrayXXd dky;     ///< derivative multiplier ky with Nyquist zeroed

    /// 1.0 on modes kept by the two-thirds rule (|kx| <= n/3 and |ky| <= n/3), else 0.0.
    Eigen::ArrayXXd dealias_mask;
    int dealias_kmax = 0;  ///< floor(n/3)

    /// Multiplicity of each stored mode in the full spectrum: 2, except 1 on
    /// the kx = 0 and kx = n/2 columns. Used for Parseval-style sums.
    Eigen::ArrayXXd mode_weight;

    int rows() const { return n / 2 + 1; }
    int cols() const { return n; }
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

/// Complex Fourier coefficients of a real scalar field, normalized so that
/// f(x) = sum_k c(k) exp(i k.x) over the full (conjugate-complete) spectrum.
struct SpectralField {
    GridPtr grid;
    Eigen::ArrayXXcd c;

    SpectralField() = default;
    explicit SpectralField(GridPtr g)
        : grid(std::move(g)), c(Eigen::ArrayXXcd::Zero(grid->rows(), grid->cols())) {}
};

/// Build the grid descriptor. n must be even and >= 4.
GridPtr make_grid(int n);

SpectralField zero_field(const GridPtr& grid);

/// Inverse transform to collocation values. Exact inverse of from_physical.
RealField to_physical(const SpectralField& f);

/// Forward transform of collocation values (applies the 1/n^2 analysis scaling).
SpectralField from_physical(const RealField& phys, const GridPtr& grid);

/// Streamfunction from vorticity: psi_hat = omega_hat / |k|^2, zero mean.
/// Throws if |mean mode| > 1e-10 (the inversion is ill-posed otherwise).
SpectralField poisson_solve(const SpectralField& omega);

/// Spectral derivatives (d/dx, d/dy) via multiplication by i*k.
std::pair<SpectralField, SpectralField> gradient(const SpectralField& f);

SpectralField derivative_x(const SpectralField& f);
SpectralField derivative_y(const SpectralField& f);

/// Advection term N(omega, psi) = psi_y omega_x - psi_x omega_y, computed
/// pseudo-spectrally (products on the collocation grid) and dealiased with
/// the two-thirds mask. An optional uniform mean flow adds
/// mf.u * omega_x + mf.v * omega_y.
SpectralField jacobian(const SpectralField& omega, const SpectralField& psi,
                       const MeanFlow& mf = {});

/// Sharp spectral filter: retains exactly the modes with
/// |kx| < n_coarse/2 and |ky| < n_coarse/2 and re-embeds them on the
/// n_coarse grid. Idempotent projection; linear.
SpectralField sharp_filter(const SpectralField& f, int n_coarse);

/// Zero all modes outside |kx| < k_keep, |ky| < k_keep on the same grid.
SpectralField sharp_truncate(const SpectralField& f, int k_keep);

void dealias_inplace(SpectralField& f);

/// Set the coefficient of exp(i(kx x + ky y)) to z together with its
/// conjugate partner, so the represented field stays real. The pair
/// contributes 2*Re(z exp(i k.x)) to the physical field. kx may be negative.
void set_mode(SpectralField& f, int kx, int ky, Complex z);

/// Coefficient of exp(i(kx x + ky y)), resolving implicit conjugate modes.
Complex get_mode(const SpectralField& f, int kx, int ky);

/// Restore the intra-column conjugate symmetry the kx = 0 and kx = n/2
/// columns must satisfy (pairs (kx, ky) <-> (kx, -ky) averaged).
void enforce_conjugate_symmetry(SpectralField& f);

/// Sum of |c|^2 over the full spectrum (equals the grid mean of the squared
/// physical field by Parseval).
double spectral_sum_sq(const SpectralField& f);

/// Total enstrophy 0.5 <omega^2> of a vorticity field.
double total_enstrophy(const SpectralField& omega);

/// Total kinetic energy 0.5 <|grad psi|^2> of the flow induced by omega.
double total_energy(const SpectralField& omega);

bool all_finite(const SpectralField& f);

/// Maximum pointwise flow speed max sqrt(u^2 + v^2) of the flow induced by
/// omega (used by CFL checks).
double max_speed(const SpectralField& omega);

void check_same_grid(const SpectralField& a, const SpectralField& b);

}  // namespace marles
