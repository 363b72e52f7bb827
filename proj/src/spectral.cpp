#include "marles/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace marles {

namespace {

// FFTW plan creation/destruction is not thread-safe; executions on distinct
// buffers are. Each thread owns its plans and buffers (see engine_for).
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Unnormalized 2D r2c/c2r transforms for one grid size, with owned buffers.
// Layout contract: physical (n, n) column-major with x contiguous, spectral
// (n/2+1, n) column-major with kx contiguous -- exactly FFTW's row-major
// (y, x) layout viewed through Eigen's column-major lens.
class Fft2 {
public:
    explicit Fft2(int n) : n_(n), half_(n / 2 + 1) {
        rbuf_ = fftw_alloc_real(static_cast<size_t>(n_) * n_);
        cbuf_ = fftw_alloc_complex(static_cast<size_t>(half_) * n_);
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(n_, n_, rbuf_, cbuf_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(n_, n_, cbuf_, rbuf_, FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw std::runtime_error("fftw plan creation failed");
    }

    ~Fft2() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(rbuf_);
        fftw_free(cbuf_);
    }

    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    void forward(const double* phys, Complex* spec) {
        std::memcpy(rbuf_, phys, sizeof(double) * n_ * n_);
        fftw_execute(fwd_);
        std::memcpy(spec, cbuf_, sizeof(fftw_complex) * half_ * n_);
    }

    void backward(const Complex* spec, double* phys) {
        std::memcpy(cbuf_, spec, sizeof(fftw_complex) * half_ * n_);
        fftw_execute(bwd_);
        std::memcpy(phys, rbuf_, sizeof(double) * n_ * n_);
    }

private:
    int n_;
    int half_;
    double* rbuf_;
    fftw_complex* cbuf_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

Fft2& engine_for(int n) {
    thread_local std::map<int, std::unique_ptr<Fft2>> engines;
    auto it = engines.find(n);
    if (it == engines.end()) it = engines.emplace(n, std::make_unique<Fft2>(n)).first;
    return *it->second;
}

int wrap_index(int k, int n) { return k >= 0 ? k : k + n; }

}  // namespace

GridPtr make_grid(int n) {
    if (n < 4 || n % 2 != 0) {
        throw std::invalid_argument("grid size must be even and >= 4, got " + std::to_string(n));
    }
    auto g = std::make_shared<SpectralGrid>();
    g->n = n;
    const int half = n / 2 + 1;

    g->kx = Eigen::ArrayXd::LinSpaced(half, 0.0, n / 2);
    g->ky.resize(n);
    g->kx_full.resize(n);
    for (int i = 0; i < n; ++i) {
        const int k = i <= n / 2 ? i : i - n;
        g->ky(i) = k;
        g->kx_full(i) = k;
    }

    g->kx2d = g->kx.replicate(1, n);
    g->ky2d = g->ky.transpose().replicate(half, 1);
    g->k2 = g->kx2d.square() + g->ky2d.square();
    g->inv_k2 = (g->k2 > 0.0).select(g->k2.inverse(), 0.0);

    g->dkx = (g->kx2d.abs() < n / 2.0).select(g->kx2d, 0.0);
    g->dky = (g->ky2d.abs() < n / 2.0).select(g->ky2d, 0.0);

    g->dealias_kmax = n / 3;
    g->dealias_mask = ((g->kx2d.abs() <= g->dealias_kmax) && (g->ky2d.abs() <= g->dealias_kmax))
                          .select(Eigen::ArrayXXd::Ones(half, n), 0.0);

    g->mode_weight = Eigen::ArrayXXd::Constant(half, n, 2.0);
    g->mode_weight.row(0) = 1.0;
    g->mode_weight.row(half - 1) = 1.0;
    return g;
}

SpectralField zero_field(const GridPtr& grid) { return SpectralField(grid); }

RealField to_physical(const SpectralField& f) {
    const int n = f.grid->n;
    if (f.c.rows() != f.grid->rows() || f.c.cols() != f.grid->cols()) {
        throw std::invalid_argument("coefficient shape does not match grid");
    }
    RealField phys(n, n);
    engine_for(n).backward(f.c.data(), phys.data());
    return phys;
}

SpectralField from_physical(const RealField& phys, const GridPtr& grid) {
    const int n = grid->n;
    if (phys.rows() != n || phys.cols() != n) {
        throw std::invalid_argument("physical field shape does not match grid");
    }
    SpectralField f(grid);
    engine_for(n).forward(phys.data(), f.c.data());
    f.c *= 1.0 / (static_cast<double>(n) * n);
    return f;
}

SpectralField poisson_solve(const SpectralField& omega) {
    if (std::abs(omega.c(0, 0)) > 1e-10) {
        throw std::invalid_argument("poisson_solve: vorticity has nonzero mean mode");
    }
    SpectralField psi(omega.grid);
    psi.c = omega.c * omega.grid->inv_k2.cast<Complex>();
    return psi;
}

SpectralField derivative_x(const SpectralField& f) {
    SpectralField g(f.grid);
    g.c = Complex(0.0, 1.0) * f.c * f.grid->dkx.cast<Complex>();
    return g;
}

SpectralField derivative_y(const SpectralField& f) {
    SpectralField g(f.grid);
    g.c = Complex(0.0, 1.0) * f.c * f.grid->dky.cast<Complex>();
    return g;
}

std::pair<SpectralField, SpectralField> gradient(const SpectralField& f) {
    return {derivative_x(f), derivative_y(f)};
}

SpectralField jacobian(const SpectralField& omega, const SpectralField& psi,
                       const MeanFlow& mf) {
    check_same_grid(omega, psi);
    const auto& grid = omega.grid;

    const RealField wx = to_physical(derivative_x(omega));
    const RealField wy = to_physical(derivative_y(omega));
    const RealField px = to_physical(derivative_x(psi));
    const RealField py = to_physical(derivative_y(psi));

    const RealField n_phys = py * wx - px * wy;
    SpectralField n = from_physical(n_phys, grid);
    if (mf.u != 0.0 || mf.v != 0.0) {
        n.c += Complex(0.0, 1.0) * omega.c *
               (mf.u * grid->dkx + mf.v * grid->dky).cast<Complex>();
    }
    dealias_inplace(n);
    n.c(0, 0) = 0.0;
    return n;
}

SpectralField sharp_filter(const SpectralField& f, int n_coarse) {
    const int n = f.grid->n;
    if (n_coarse > n) {
        throw std::invalid_argument("sharp_filter: coarse grid larger than source grid");
    }
    GridPtr coarse_grid = n_coarse == n ? f.grid : make_grid(n_coarse);
    SpectralField out(coarse_grid);
    const int kc = n_coarse / 2;  // retain |kx|, |ky| < kc
    for (int col = 0; col < n_coarse; ++col) {
        const int ky = col <= n_coarse / 2 ? col : col - n_coarse;
        if (std::abs(ky) >= kc) continue;
        const int src_col = wrap_index(ky, n);
        for (int row = 0; row < kc; ++row) {
            out.c(row, col) = f.c(row, src_col);
        }
    }
    return out;
}

SpectralField sharp_truncate(const SpectralField& f, int k_keep) {
    SpectralField out(f.grid);
    const int n = f.grid->n;
    for (int col = 0; col < n; ++col) {
        const int ky = col <= n / 2 ? col : col - n;
        if (std::abs(ky) >= k_keep) continue;
        for (int row = 0; row < std::min(k_keep, n / 2 + 1); ++row) {
            out.c(row, col) = f.c(row, col);
        }
    }
    return out;
}

void dealias_inplace(SpectralField& f) { f.c *= f.grid->dealias_mask.cast<Complex>(); }

void set_mode(SpectralField& f, int kx, int ky, Complex z) {
    const int n = f.grid->n;
    if (std::abs(kx) > n / 2 || std::abs(ky) > n / 2) {
        throw std::invalid_argument("set_mode: wavenumber outside resolved band");
    }
    if (kx < 0) {
        set_mode(f, -kx, -ky, std::conj(z));
        return;
    }
    const bool self_conj_x = (kx == 0 || kx == n / 2);
    const bool self_conj_y = (ky == 0 || std::abs(ky) == n / 2);
    const int col = wrap_index(ky, n);
    if (self_conj_x && self_conj_y) {
        f.c(kx, col) = z + std::conj(z);
    } else if (self_conj_x) {
        f.c(kx, col) = z;
        f.c(kx, wrap_index(-ky, n)) = std::conj(z);
    } else {
        f.c(kx, col) = z;
    }
}

Complex get_mode(const SpectralField& f, int kx, int ky) {
    const int n = f.grid->n;
    if (std::abs(kx) > n / 2 || std::abs(ky) > n / 2) {
        throw std::invalid_argument("get_mode: wavenumber outside resolved band");
    }
    if (kx < 0 || (kx == 0 && ky < 0)) return std::conj(get_mode(f, -kx, -ky));
    return f.c(kx, wrap_index(ky, n));
}

void enforce_conjugate_symmetry(SpectralField& f) {
    const int n = f.grid->n;
    for (int row : {0, n / 2}) {
        f.c(row, 0) = f.c(row, 0).real();
        f.c(row, n / 2) = f.c(row, n / 2).real();
        for (int ky = 1; ky < n / 2; ++ky) {
            const Complex a = f.c(row, ky);
            const Complex b = f.c(row, n - ky);
            const Complex h = 0.5 * (a + std::conj(b));
            f.c(row, ky) = h;
            f.c(row, n - ky) = std::conj(h);
        }
    }
}

double spectral_sum_sq(const SpectralField& f) {
    return (f.c.abs2() * f.grid->mode_weight).sum();
}

double total_enstrophy(const SpectralField& omega) { return 0.5 * spectral_sum_sq(omega); }

double total_energy(const SpectralField& omega) {
    return 0.5 * (omega.c.abs2() * omega.grid->mode_weight * omega.grid->inv_k2).sum();
}

bool all_finite(const SpectralField& f) { return f.c.allFinite(); }

double max_speed(const SpectralField& omega) {
    const SpectralField psi = poisson_solve(omega);
    const RealField u = to_physical(derivative_y(psi));
    const RealField v = -to_physical(derivative_x(psi));
    return (u.square() + v.square()).sqrt().maxCoeff();
}

void check_same_grid(const SpectralField& a, const SpectralField& b) {
    if (a.grid->n != b.grid->n) {
        throw std::invalid_argument("fields live on different grids (" +
                                    std::to_string(a.grid->n) + " vs " +
                                    std::to_string(b.grid->n) + ")");
    }
}

}  // namespace marles
