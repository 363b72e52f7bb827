#include "marles/env.hpp"

#include <cmath>
#include <stdexcept>

#include "marles/errors.hpp"

namespace marles {

void validate_layout(const AgentLayout& layout, int n_les) {
    if (layout.m < 2 || layout.m > n_les) {
        throw std::invalid_argument("agent count per direction must be in [2, n_les]");
    }
    if (n_les % layout.m != 0) {
        throw std::invalid_argument(
            "agents must sit on a uniform sub-lattice: m must divide n_les");
    }
}

TargetSpectrum build_target(const SnapshotArchive& archive, int n_les) {
    if (archive.snapshots.empty()) throw std::invalid_argument("empty snapshot archive");
    if (n_les > archive.n) {
        throw std::invalid_argument("LES grid cannot exceed the DNS grid");
    }
    const GridPtr dns_grid = make_grid(archive.n);
    const int band = n_les / 3;

    TargetSpectrum target;
    target.n_les = n_les;
    target.n_snapshots = static_cast<int>(archive.snapshots.size());
    target.values = Eigen::ArrayXd::Zero(band);

    SpectralField field(dns_grid);
    for (const Snapshot& snap : archive.snapshots) {
        field.c = snap.coeffs;
        const SpectralField filtered = sharp_filter(field, n_les);
        const Spectrum spec = truncate_spectrum(enstrophy_spectrum(filtered), band);
        target.values += spec.values;
    }
    target.values /= target.n_snapshots;
    target.values = target.values.max(1e-30);
    return target;
}

void save_target(const TargetSpectrum& target, const std::string& path) {
    Spectrum s;
    s.k_bins.resize(target.values.size());
    for (int i = 0; i < target.values.size(); ++i) s.k_bins[i] = i + 1;
    s.values = target.values;
    write_spectrum_csv(path, s,
                       {{"n_snapshots", std::to_string(target.n_snapshots)},
                        {"n_les", std::to_string(target.n_les)}});
}

TargetSpectrum load_target(const std::string& path) {
    Metadata meta;
    const Spectrum s = read_spectrum_csv(path, &meta);
    TargetSpectrum target;
    target.values = s.values;
    if (meta.count("n_snapshots")) target.n_snapshots = std::stoi(meta["n_snapshots"]);
    if (meta.count("n_les")) target.n_les = std::stoi(meta["n_les"]);
    if (target.n_les == 0) throw IoError("target spectrum file missing n_les metadata: " + path);
    return target;
}

Eigen::ArrayXXd local_invariants(const SpectralField& omega_bar, const AgentLayout& layout) {
    const auto& grid = omega_bar.grid;
    const int n = grid->n;
    validate_layout(layout, n);
    const int m = layout.m;
    const int stride = n / m;

    const StrainFields sf = strain_fields(omega_bar);
    const RealField w = to_physical(omega_bar);

    SpectralField lap(grid);
    lap.c = -grid->k2.cast<Complex>() * omega_bar.c;
    const RealField lap_w = to_physical(lap);

    const SpectralField smag_hat = from_physical(sf.s_mag, grid);
    const RealField smag_x = to_physical(derivative_x(smag_hat));
    const RealField smag_y = to_physical(derivative_y(smag_hat));

    Eigen::ArrayXXd inv(m * m, 5);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            const int gi = i * stride;
            const int gj = j * stride;
            const int a = i + j * m;
            inv(a, 0) = sf.s_mag(gi, gj) * sf.s_mag(gi, gj);
            inv(a, 1) = w(gi, gj) * w(gi, gj);
            inv(a, 2) = sf.grad_omega_mag(gi, gj) * sf.grad_omega_mag(gi, gj);
            inv(a, 3) = lap_w(gi, gj);
            inv(a, 4) = smag_x(gi, gj) * smag_x(gi, gj) + smag_y(gi, gj) * smag_y(gi, gj);
        }
    }
    return inv;
}

RealField interpolate_actions(const Eigen::ArrayXd& actions, const AgentLayout& layout,
                              int n_les) {
    validate_layout(layout, n_les);
    const int m = layout.m;
    if (actions.size() != static_cast<Eigen::Index>(m) * m) {
        throw std::invalid_argument("action vector size does not match agent layout");
    }
    if (!actions.allFinite()) throw std::invalid_argument("actions must be finite");

    const int stride = n_les / m;
    RealField c(n_les, n_les);
    for (int gj = 0; gj < n_les; ++gj) {
        const int j0 = gj / stride;
        const int j1 = (j0 + 1) % m;
        const double ty = static_cast<double>(gj - j0 * stride) / stride;
        for (int gi = 0; gi < n_les; ++gi) {
            const int i0 = gi / stride;
            const int i1 = (i0 + 1) % m;
            const double tx = static_cast<double>(gi - i0 * stride) / stride;
            const double a00 = actions(i0 + j0 * m);
            const double a10 = actions(i1 + j0 * m);
            const double a01 = actions(i0 + j1 * m);
            const double a11 = actions(i1 + j1 * m);
            c(gi, gj) = (1.0 - tx) * (1.0 - ty) * a00 + tx * (1.0 - ty) * a10 +
                        (1.0 - tx) * ty * a01 + tx * ty * a11;
        }
    }
    return c;
}

MarlEnv::MarlEnv(EnvConfig cfg, TargetSpectrum target, std::vector<Snapshot> init_pool,
                 int init_pool_n)
    : cfg_(std::move(cfg)),
      target_(std::move(target)),
      init_pool_(std::move(init_pool)),
      init_pool_n_(init_pool_n) {
    validate(cfg_.params);
    validate_layout(cfg_.layout, cfg_.n_les);
    if (target_.values.size() != cfg_.n_les / 3) {
        throw std::invalid_argument("target spectrum band does not match n_les/3");
    }
    if (cfg_.steps_per_action < 1) throw std::invalid_argument("steps_per_action must be >= 1");
    if (cfg_.horizon_actions < 1) throw std::invalid_argument("horizon must be >= 1");
    grid_ = make_grid(cfg_.n_les);
    if (!init_pool_.empty()) {
        if (init_pool_n_ < cfg_.n_les) {
            throw std::invalid_argument("init snapshots must live on a grid >= n_les");
        }
        pool_grid_ = make_grid(init_pool_n_);
    }
    stepper_ = std::make_unique<Stepper>(grid_, cfg_.params, cfg_.dt_les);
}

std::vector<AgentObservation> MarlEnv::reset(std::uint64_t seed) {
    if (init_pool_.empty()) {
        state_.omega = random_spectrum_field(grid_, cfg_.params.kappa_f, seed);
    } else {
        const std::size_t idx = seed % init_pool_.size();
        SpectralField dns_field(pool_grid_);
        dns_field.c = init_pool_[idx].coeffs;
        state_.omega = sharp_filter(dns_field, cfg_.n_les);
    }
    state_.t = 0.0;
    state_.step_count = 0;
    action_count_ = 0;
    ready_ = true;
    return observations();
}

std::vector<AgentObservation> MarlEnv::observations() const {
    const Eigen::ArrayXXd inv = local_invariants(state_.omega, cfg_.layout);
    const Spectrum spec = truncate_spectrum(enstrophy_spectrum(state_.omega), band());
    const Eigen::ArrayXd log_spec = spec.values.max(1e-30).log();

    std::vector<AgentObservation> obs(n_agents());
    for (int a = 0; a < n_agents(); ++a) {
        obs[a].local = inv.row(a).transpose();
        obs[a].global_log_spectrum = log_spec;
    }
    return obs;
}

EnvStep MarlEnv::step(const Eigen::ArrayXd& actions) {
    if (!ready_) throw std::logic_error("step() before reset() or after episode end");
    if (!actions.allFinite()) throw std::invalid_argument("actions must be finite");

    const Eigen::ArrayXd clipped = actions.min(cfg_.c_max).max(0.0);
    const ClosureField closure =
        make_closure_field(cfg_.kind, interpolate_actions(clipped, cfg_.layout, cfg_.n_les),
                           cfg_.n_les);
    const ClosureFn closure_fn = [&closure](const SpectralField& omega) {
        const StrainFields sf = strain_fields(omega);
        const RealField nu_e = eddy_viscosity(closure, sf);
        return sgs_pi(nu_e, omega, &sf);
    };

    EnvStep out;
    try {
        for (int s = 0; s < cfg_.steps_per_action; ++s) {
            stepper_->advance_with_closure(state_, closure_fn);
        }
    } catch (const BlowupError&) {
        out.reward = 0.0;
        out.done = true;
        out.info.blowup = true;
        out.info.enstrophy = std::numeric_limits<double>::quiet_NaN();
        ready_ = false;
        return out;
    }

    ++action_count_;
    const Spectrum current = truncate_spectrum(enstrophy_spectrum(state_.omega), band());
    Spectrum target_spec;
    target_spec.k_bins = current.k_bins;
    target_spec.values = target_.values;
    const double error = spectrum_log_error(target_spec, current);

    out.info.spectrum_error = error;
    out.info.enstrophy = total_enstrophy(state_.omega);
    out.reward = reward_from_error(error, cfg_.reward_cap, cfg_.reward_cap_error);
    out.observations = observations();
    if (action_count_ >= cfg_.horizon_actions) {
        out.done = true;
        out.info.time_limit = true;
        ready_ = false;
    }
    return out;
}

double coarsening_factor(int n_dns, int n_les, double dt_ratio) {
    const double r = static_cast<double>(n_dns) / n_les;
    return r * r * dt_ratio;
}

double reward_from_error(double error, double cap, double cap_error) {
    if (!(error >= 0.0)) throw std::invalid_argument("spectrum error must be non-negative");
    return error < cap_error ? cap : 1.0 / error;
}

}  // namespace marles
