#pragma once

#include <cstdint>
#include <string>

#include "marles/trainer.hpp"

namespace marles {

/// Everything needed to reproduce a run. A config file alone (plus the code
/// version) determines every output byte, timestamps excluded.
struct RunConfig {
    int case_id = 1;
    PhysicsParams physics;

    int n_dns = 1024;
    int n_les = 32;
    double dt_dns = 5e-4;
    double dt_ratio = 10.0;  ///< dt_RL / dt_DNS; the LES advances with dt_RL

    long spinup_steps = 100000;
    long production_steps = 80000;
    long snapshot_every = 4000;
    int target_snapshots = 10;

    std::uint64_t dns_seed = 1;
    std::uint64_t train_seed = 2;
    std::uint64_t eval_seed = 3;

    int agents_per_side = 16;  ///< m; agents on an m x m sub-lattice
    ClosureKind kind = ClosureKind::smagorinsky;
    double c_max = 1.0;

    long horizon_rl = 10000;     ///< training horizon in dt_RL units
    int update_cadence_rl = 10;  ///< action interval in dt_RL units

    TrainerHyper hyper;
    int n_envs = 4;
    int steps_per_update = 16;
    int n_updates = 200;
    int checkpoint_every = 50;
    int spectrum_bins = 8;
    int hidden = 64;

    long eval_horizon_actions = 200;
    double scale = 1.0;  ///< record of the applied --scale factor

    double dt_les() const { return dt_dns * dt_ratio; }
    long horizon_actions() const { return horizon_rl / update_cadence_rl; }

    EnvConfig env_config() const;
    TrainConfig train_config(const std::string& out_dir) const;
    EvalConfig eval_config() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Table of the three reference cases (shared: Re = 20e3, r = 0.1,
/// n_dns = 1024):
///   case 1: beta = 0,  kappa_f = 4,  n_les = 32,  horizon 1e4, cadence 10
///   case 2: beta = 20, kappa_f = 4,  n_les = 32,  horizon 2e4, cadence 20
///   case 3: beta = 0,  kappa_f = 25, n_les = 256, horizon 1e4, cadence 10
RunConfig case_defaults(int case_id);

/// Reference sigma(omega) of the full-scale case, for the long-running
/// fidelity check.
double case_reference_sigma(int case_id);

/// Uniformly shrink a configuration for desk-scale runs: divides n_dns, Re,
/// the spin-up/production lengths and the training horizon by the factor,
/// scales dt up to keep the CFL number, and clamps n_les to n_dns/4.
void apply_scale(RunConfig& cfg, double factor);

std::string emit_config(const RunConfig& cfg);              // JSON text
RunConfig parse_config(const std::string& json_text);       // inverse of emit_config
void save_config(const RunConfig& cfg, const std::string& path);
RunConfig load_config(const std::string& path);

}  // namespace marles
