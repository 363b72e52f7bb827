#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "marles/spectral.hpp"

namespace marles {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Dimensionless parameters of one forced beta-plane turbulence case.
/// re may be +infinity to disable the viscous term entirely.
struct PhysicsParams {
    double re = 20000.0;
    double beta = 0.0;
    double drag = 0.1;
    int kappa_f = 4;
    bool forcing_enabled = true;

    double nu() const;
};

void validate(const PhysicsParams& p);

struct SimState {
    SpectralField omega;
    double t = 0.0;
    long step_count = 0;
};

/// Numerical blow-up (non-finite values appeared in the state).
struct BlowupError : std::runtime_error {
    long step_count;
    explicit BlowupError(long step);
};

/// CFL limit exceeded; advisory_dt is the largest admissible step.
struct CflError : std::runtime_error {
    double advisory_dt;
    CflError(double cfl, double advisory);
};

/// Deterministic forcing kappa_f * [cos(kappa_f x) + cos(kappa_f y)].
/// kappa_f must survive the two-thirds dealiasing of the grid.
SpectralField forcing_field(const GridPtr& grid, int kappa_f);

/// Full tendency d(omega)/dt in spectral space, dealiased:
/// -N(omega, psi) + (1/Re) lap omega - f - r omega + beta d(psi)/dx (+ pi).
SpectralField rhs(const SimState& state, const PhysicsParams& p,
                  const SpectralField* closure_pi = nullptr, const MeanFlow& mf = {});

/// Stage-fresh closure tendency: called with the stage vorticity, returns the
/// SGS term to add to the explicit right-hand side.
using ClosureFn = std::function<SpectralField(const SpectralField& omega)>;

/// Time integrator: classical RK4 on the advection/forcing/beta/closure
/// terms combined with the exact integrating factor for the viscous and
/// drag terms (which are diagonal in spectral space).
class Stepper {
public:
    Stepper(GridPtr grid, const PhysicsParams& p, double dt);

    void advance(SimState& state, const SpectralField* closure_pi = nullptr,
                 const MeanFlow& mf = {}) const;
    void advance_with_closure(SimState& state, const ClosureFn& closure,
                              const MeanFlow& mf = {}) const;

    double dt() const { return dt_; }
    const PhysicsParams& params() const { return params_; }

private:
    GridPtr grid_;
    PhysicsParams params_;
    double dt_ = 0.0;
    Eigen::ArrayXXd decay_full_;  ///< exp(-(nu k^2 + r) dt)
    Eigen::ArrayXXd decay_half_;  ///< exp(-(nu k^2 + r) dt/2)
};

/// Single-step convenience wrapper around Stepper.
SimState step(const SimState& state, const PhysicsParams& p, double dt,
              const SpectralField* closure_pi = nullptr, const MeanFlow& mf = {});

double cfl_number(const SimState& state, double dt);

struct Snapshot {
    double t = 0.0;
    Eigen::ArrayXXcd coeffs;
};

/// One file per run: JSON header describing the binary layout, followed by
/// the raw little-endian snapshot records. Round trips bit-exactly.
struct SnapshotArchive {
    int n = 0;
    PhysicsParams params;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::string code_version = kCodeVersion;
    std::vector<Snapshot> snapshots;
};

struct RunResult {
    SimState state;
    SnapshotArchive archive;
};

/// Advance n_steps with a fixed dt, archiving the spectral vorticity every
/// snapshot_every steps. The CFL bound (max speed * dt / dx <= 0.5) is
/// checked at start and every 100 steps. Deterministic given the initial
/// state and parameters.
RunResult run(const SimState& initial, const PhysicsParams& p, double dt, long n_steps,
              long snapshot_every, std::uint64_t seed_for_header = 0,
              bool include_initial = false);

/// Random vorticity with an isotropic spectrum peaked at kappa_peak, random
/// phases from the seeded generator, normalized to unit total energy.
SpectralField random_spectrum_field(const GridPtr& grid, int kappa_peak, std::uint64_t seed);

void save_archive(const SnapshotArchive& archive, const std::string& path);
SnapshotArchive load_archive(const std::string& path);

}  // namespace marles
