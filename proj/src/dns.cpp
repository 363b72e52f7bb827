#include "marles/dns.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "marles/errors.hpp"
#include "marles/rng.hpp"
#include "nlohmann/json.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive format is little-endian; big-endian hosts unsupported");

namespace marles {

double PhysicsParams::nu() const { return std::isinf(re) ? 0.0 : 1.0 / re; }

void validate(const PhysicsParams& p) {
    if (!(p.re > 0.0)) throw std::invalid_argument("Re must be positive");
    if (!(p.drag >= 0.0)) throw std::invalid_argument("drag must be non-negative");
    if (p.kappa_f < 1) throw std::invalid_argument("forcing wavenumber must be >= 1");
    if (!std::isfinite(p.beta)) throw std::invalid_argument("beta must be finite");
}

BlowupError::BlowupError(long step)
    : std::runtime_error("solution blew up (non-finite values) at step " + std::to_string(step)),
      step_count(step) {}

CflError::CflError(double cfl, double advisory)
    : std::runtime_error("CFL number " + std::to_string(cfl) +
                         " exceeds 0.5; reduce dt to at most " + std::to_string(advisory)),
      advisory_dt(advisory) {}

SpectralField forcing_field(const GridPtr& grid, int kappa_f) {
    if (kappa_f < 1 || kappa_f > grid->dealias_kmax) {
        throw std::invalid_argument("forcing wavenumber " + std::to_string(kappa_f) +
                                    " outside the dealiased band (max " +
                                    std::to_string(grid->dealias_kmax) + ")");
    }
    SpectralField f(grid);
    const double half_amp = 0.5 * kappa_f;
    set_mode(f, kappa_f, 0, half_amp);  // kappa_f cos(kappa_f x)
    set_mode(f, 0, kappa_f, half_amp);  // kappa_f cos(kappa_f y)
    return f;
}

namespace {

// Everything except the diagonal viscous + drag terms, which the stepper
// integrates exactly.
SpectralField explicit_rhs(const SpectralField& omega, const PhysicsParams& p,
                           const SpectralField* closure_pi, const MeanFlow& mf) {
    const auto& grid = omega.grid;
    const SpectralField psi = poisson_solve(omega);
    SpectralField g = jacobian(omega, psi, mf);
    g.c = -g.c + Complex(0.0, p.beta) * psi.c * grid->dkx.cast<Complex>();
    if (p.forcing_enabled) {
        const int kf = p.kappa_f;
        if (kf > grid->dealias_kmax) {
            throw std::invalid_argument("forcing wavenumber outside the dealiased band");
        }
        const double half_amp = 0.5 * kf;
        g.c(kf, 0) -= half_amp;
        g.c(0, kf) -= half_amp;
        g.c(0, grid->n - kf) -= half_amp;
    }
    if (closure_pi) {
        check_same_grid(omega, *closure_pi);
        g.c += closure_pi->c;
    }
    dealias_inplace(g);
    g.c(0, 0) = 0.0;
    return g;
}

}  // namespace

SpectralField rhs(const SimState& state, const PhysicsParams& p,
                  const SpectralField* closure_pi, const MeanFlow& mf) {
    validate(p);
    const auto& grid = state.omega.grid;
    SpectralField g = explicit_rhs(state.omega, p, closure_pi, mf);
    g.c -= (p.nu() * grid->k2 + p.drag).cast<Complex>() * state.omega.c;
    return g;
}

Stepper::Stepper(GridPtr grid, const PhysicsParams& p, double dt)
    : grid_(std::move(grid)), params_(p), dt_(dt) {
    validate(p);
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    const Eigen::ArrayXXd decay_rate = p.nu() * grid_->k2 + p.drag;
    decay_full_ = (-dt * decay_rate).exp();
    decay_half_ = (-0.5 * dt * decay_rate).exp();
}

void Stepper::advance_with_closure(SimState& state, const ClosureFn& closure,
                                   const MeanFlow& mf) const {
    if (state.omega.grid->n != grid_->n) {
        throw std::invalid_argument("state grid does not match stepper grid");
    }
    const double h = dt_;
    auto g = [&](const SpectralField& w) {
        if (!closure) return explicit_rhs(w, params_, nullptr, mf);
        // Stage states feed the closure, which rejects non-finite input;
        // surface that as the blow-up it is.
        if (!all_finite(w)) throw BlowupError(state.step_count + 1);
        const SpectralField pi = closure(w);
        return explicit_rhs(w, params_, &pi, mf);
    };
    const auto& ef = decay_full_.cast<Complex>();
    const auto& eh = decay_half_.cast<Complex>();

    const SpectralField& w0 = state.omega;
    const SpectralField f1 = g(w0);

    SpectralField ws(w0.grid);
    ws.c = eh * (w0.c + (0.5 * h) * f1.c);
    const SpectralField f2 = g(ws);

    ws.c = eh * w0.c + (0.5 * h) * f2.c;
    const SpectralField f3 = g(ws);

    ws.c = ef * w0.c + h * eh * f3.c;
    const SpectralField f4 = g(ws);

    state.omega.c = ef * w0.c +
                    (h / 6.0) * (ef * f1.c + 2.0 * eh * (f2.c + f3.c) + f4.c);
    state.omega.c(0, 0) = 0.0;
    state.t += h;
    ++state.step_count;
    if (!all_finite(state.omega)) throw BlowupError(state.step_count);
}

void Stepper::advance(SimState& state, const SpectralField* closure_pi,
                      const MeanFlow& mf) const {
    if (closure_pi == nullptr) {
        advance_with_closure(state, ClosureFn{}, mf);
    } else {
        advance_with_closure(
            state, [closure_pi](const SpectralField&) { return *closure_pi; }, mf);
    }
}

SimState step(const SimState& state, const PhysicsParams& p, double dt,
              const SpectralField* closure_pi, const MeanFlow& mf) {
    Stepper stepper(state.omega.grid, p, dt);
    SimState next = state;
    stepper.advance(next, closure_pi, mf);
    return next;
}

double cfl_number(const SimState& state, double dt) {
    const double dx = state.omega.grid->length / state.omega.grid->n;
    return max_speed(state.omega) * dt / dx;
}

RunResult run(const SimState& initial, const PhysicsParams& p, double dt, long n_steps,
              long snapshot_every, std::uint64_t seed_for_header, bool include_initial) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (snapshot_every < 1) throw std::invalid_argument("snapshot_every must be >= 1");

    RunResult result;
    result.state = initial;
    result.archive.n = initial.omega.grid->n;
    result.archive.params = p;
    result.archive.dt = dt;
    result.archive.seed = seed_for_header;
    if (include_initial) {
        result.archive.snapshots.push_back({initial.t, initial.omega.c});
    }

    Stepper stepper(initial.omega.grid, p, dt);
    const double dx = initial.omega.grid->length / initial.omega.grid->n;
    for (long s = 0; s < n_steps; ++s) {
        if (s % 100 == 0) {
            const double u = max_speed(result.state.omega);
            const double cfl = u * dt / dx;
            if (cfl > 0.5) throw CflError(cfl, 0.5 * dx / u);
        }
        stepper.advance(result.state);
        if ((s + 1) % snapshot_every == 0) {
            result.archive.snapshots.push_back({result.state.t, result.state.omega.c});
        }
    }
    return result;
}

SpectralField random_spectrum_field(const GridPtr& grid, int kappa_peak, std::uint64_t seed) {
    if (kappa_peak < 1) throw std::invalid_argument("spectrum peak wavenumber must be >= 1");
    Rng rng(seed);
    SpectralField w(grid);
    const int n = grid->n;
    const double kp = kappa_peak;

    // Shell energy ~ k^2 exp(-k^2/kp^2), peaked at kp. Amplitude below is the
    // per-mode |omega_hat| giving that shape for isotropic mode counts.
    auto amplitude = [&](double k) {
        if (k <= 0.0 || k > grid->dealias_kmax) return 0.0;
        return std::pow(k, 1.5) * std::exp(-0.5 * k * k / (kp * kp));
    };

    for (int row = 0; row < grid->rows(); ++row) {
        for (int col = 0; col < n; ++col) {
            const double k = std::sqrt(grid->k2(row, col));
            const double a = amplitude(k);
            const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            w.c(row, col) = a * Complex(std::cos(phase), std::sin(phase));
        }
    }
    w.c(0, 0) = 0.0;
    enforce_conjugate_symmetry(w);
    dealias_inplace(w);

    const double e = total_energy(w);
    if (e > 0.0) w.c *= 1.0 / std::sqrt(e);
    return w;
}

namespace {

nlohmann::json params_to_json(const PhysicsParams& p) {
    return {{"re", std::isinf(p.re) ? -1.0 : p.re},
            {"beta", p.beta},
            {"drag", p.drag},
            {"kappa_f", p.kappa_f},
            {"forcing_enabled", p.forcing_enabled}};
}

PhysicsParams params_from_json(const nlohmann::json& j) {
    PhysicsParams p;
    const double re = j.at("re").get<double>();
    p.re = re < 0.0 ? std::numeric_limits<double>::infinity() : re;
    p.beta = j.at("beta").get<double>();
    p.drag = j.at("drag").get<double>();
    p.kappa_f = j.at("kappa_f").get<int>();
    p.forcing_enabled = j.at("forcing_enabled").get<bool>();
    return p;
}

constexpr char kArchiveMagic[8] = {'M', 'R', 'L', 'A', 'R', 'C', 'H', '1'};

}  // namespace

void save_archive(const SnapshotArchive& archive, const std::string& path) {
    const int rows = archive.n / 2 + 1;
    const int cols = archive.n;

    nlohmann::json header = {
        {"format", 1},
        {"n", archive.n},
        {"params", params_to_json(archive.params)},
        {"dt", archive.dt},
        {"seed", archive.seed},
        {"code_version", archive.code_version},
        {"snapshot_count", archive.snapshots.size()},
        {"layout",
         {{"storage", "r2c half-spectrum"},
          {"rows", rows},
          {"cols", cols},
          {"order", "column-major, kx index contiguous; ky in FFT order"},
          {"scalar", "float64 little-endian"},
          {"snapshot_record", "float64 time stamp, then rows*cols complex values (re,im)"}}}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open archive for writing: " + path);
    out.write(kArchiveMagic, sizeof(kArchiveMagic));
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Snapshot& snap : archive.snapshots) {
        if (snap.coeffs.rows() != rows || snap.coeffs.cols() != cols) {
            throw IoError("snapshot shape does not match archive grid");
        }
        out.write(reinterpret_cast<const char*>(&snap.t), sizeof(double));
        out.write(reinterpret_cast<const char*>(snap.coeffs.data()),
                  static_cast<std::streamsize>(sizeof(Complex) * rows * cols));
    }
    if (!out) throw IoError("write failed: " + path);
}

SnapshotArchive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0) {
        throw IoError("not a snapshot archive: " + path);
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError("truncated archive header: " + path);

    const nlohmann::json header = nlohmann::json::parse(header_str);
    if (header.at("format").get<int>() != 1) {
        throw IoError("unsupported archive format version");
    }

    SnapshotArchive archive;
    archive.n = header.at("n").get<int>();
    archive.params = params_from_json(header.at("params"));
    archive.dt = header.at("dt").get<double>();
    archive.seed = header.at("seed").get<std::uint64_t>();
    archive.code_version = header.at("code_version").get<std::string>();

    const auto count = header.at("snapshot_count").get<std::uint64_t>();
    const int rows = archive.n / 2 + 1;
    const int cols = archive.n;
    archive.snapshots.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Snapshot& snap = archive.snapshots[i];
        snap.coeffs.resize(rows, cols);
        in.read(reinterpret_cast<char*>(&snap.t), sizeof(double));
        in.read(reinterpret_cast<char*>(snap.coeffs.data()),
                static_cast<std::streamsize>(sizeof(Complex) * rows * cols));
    }
    if (!in) throw IoError("truncated archive body: " + path);
    return archive;
}

}  // namespace marles
