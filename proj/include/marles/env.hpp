#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "marles/closures.hpp"
#include "marles/diagnostics.hpp"
#include "marles/dns.hpp"
#include "marles/spectral.hpp"

namespace marles {

/// m x m agents on a uniform sub-lattice of the LES grid.
struct AgentLayout {
    int m = 16;
};

void validate_layout(const AgentLayout& layout, int n_les);

/// Per-agent state: 5 local invariants of the resolved velocity gradients
/// and Hessians, plus the global log enstrophy spectrum over the dealiased
/// band. All entries are Galilean invariant.
struct AgentObservation {
    Eigen::ArrayXd local;                ///< 5 scalars
    Eigen::ArrayXd global_log_spectrum;  ///< log spectrum, shells 1..n_les/3
};

/// Time-averaged DNS enstrophy spectrum, sharp-filtered to the LES grid and
/// restricted to the dealiased band (shells 1..n_les/3).
struct TargetSpectrum {
    Eigen::ArrayXd values;
    int n_snapshots = 0;
    int n_les = 0;
};

TargetSpectrum build_target(const SnapshotArchive& archive, int n_les);

void save_target(const TargetSpectrum& target, const std::string& path);
TargetSpectrum load_target(const std::string& path);

/// The 5 local invariants at every agent point, rows ordered agent-major
/// (a = i + j*m for the agent at grid point (i, j) * stride):
/// |S|^2, omega^2, |grad omega|^2, lap omega, |grad |S||^2.
Eigen::ArrayXXd local_invariants(const SpectralField& omega_bar, const AgentLayout& layout);

/// Bilinear interpolation of per-agent coefficients from the periodic agent
/// lattice onto every LES grid point. A partition of unity: constant actions
/// produce a constant field, and values stay within the action min/max.
RealField interpolate_actions(const Eigen::ArrayXd& actions, const AgentLayout& layout,
                              int n_les);

struct EnvConfig {
    PhysicsParams params;
    int n_les = 32;
    double dt_les = 5e-3;       ///< LES time step (= dt_ratio * DNS dt)
    int steps_per_action = 10;  ///< LES steps per action interval (policy-update cadence)
    long horizon_actions = 1000;
    AgentLayout layout{16};
    ClosureKind kind = ClosureKind::smagorinsky;
    double c_max = 1.0;
    double reward_cap = 1e6;
    double reward_cap_error = 1e-6;  ///< cap applies when the log-error drops below this
};

struct EnvInfo {
    double spectrum_error = 0.0;
    bool blowup = false;
    bool time_limit = false;
    double enstrophy = 0.0;
};

struct EnvStep {
    std::vector<AgentObservation> observations;
    double reward = 0.0;  ///< shared by all agents
    bool done = false;
    EnvInfo info;
};

/// RL environment wrapping the LES solver. Each instance is confined to one
/// logical execution stream; run independent instances for parallel episodes.
class MarlEnv {
public:
    /// init_pool: DNS snapshots (on the init_pool_n grid) used as filtered
    /// initial conditions; when empty, resets use seeded random fields.
    MarlEnv(EnvConfig cfg, TargetSpectrum target, std::vector<Snapshot> init_pool = {},
            int init_pool_n = 0);

    std::vector<AgentObservation> reset(std::uint64_t seed);

    /// Applies the per-agent coefficient actions (clipped to [0, c_max]),
    /// advances one action interval, and returns the shared reward
    /// r' = 1 / ||log target - log current||^2, capped at reward_cap.
    EnvStep step(const Eigen::ArrayXd& actions);

    const EnvConfig& config() const { return cfg_; }
    const TargetSpectrum& target() const { return target_; }
    const SimState& state() const { return state_; }
    int n_agents() const { return cfg_.layout.m * cfg_.layout.m; }
    int band() const { return cfg_.n_les / 3; }
    long action_count() const { return action_count_; }

    std::vector<AgentObservation> observations() const;

private:
    EnvConfig cfg_;
    TargetSpectrum target_;
    std::vector<Snapshot> init_pool_;
    int init_pool_n_ = 0;
    GridPtr grid_;
    GridPtr pool_grid_;
    std::unique_ptr<Stepper> stepper_;
    SimState state_;
    long action_count_ = 0;
    bool ready_ = false;
};

/// Spatio-temporal coarsening factor (n_dns/n_les)^2 * dt_ratio.
double coarsening_factor(int n_dns, int n_les, double dt_ratio);

/// The reward rule: r' = 1/error, capped at `cap` once the error drops
/// below `cap_error`. Strictly decreasing in the error below the cap.
double reward_from_error(double error, double cap = 1e6, double cap_error = 1e-6);

}  // namespace marles
