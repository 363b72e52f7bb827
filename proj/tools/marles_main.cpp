// Command-line driver for the full pipeline: DNS snapshot generation, target
// spectrum extraction, closure training, and side-by-side evaluation.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "marles/config.hpp"
#include "marles/errors.hpp"

namespace fs = std::filesystem;
using namespace marles;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    int case_id = 1;
    double scale = 1.0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "path to a run configuration JSON");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--case", opts.case_id, "reference case (1, 2 or 3)")
        ->check(CLI::Range(1, 3));
    cmd->add_option("--scale", opts.scale, "uniform desk-scale shrink factor (>= 1)");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&opts](const std::uint64_t& v) { opts.seed = v; },
        "base seed (derives the DNS/train/eval seeds)");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg =
        opts.config_path.empty() ? case_defaults(opts.case_id) : load_config(opts.config_path);
    if (opts.scale != 1.0) apply_scale(cfg, opts.scale);
    if (opts.seed) {
        cfg.dns_seed = *opts.seed;
        cfg.train_seed = *opts.seed + 1;
        cfg.eval_seed = *opts.seed + 2;
    }
    return cfg;
}

void materialize(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    save_config(cfg, out_dir + "/config.json");
}

// Evenly spaced snapshot indices, last one included.
std::vector<std::size_t> target_subset_indices(std::size_t total, std::size_t want) {
    std::vector<std::size_t> idx;
    if (total == 0 || want == 0) return idx;
    want = std::min(want, total);
    for (std::size_t i = 0; i < want; ++i) {
        idx.push_back(want == 1 ? total - 1 : (i * (total - 1)) / (want - 1));
    }
    return idx;
}

int cmd_dns(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    materialize(cfg, opts.out_dir);

    std::cout << "dns: n=" << cfg.n_dns << " Re=" << cfg.physics.re
              << " beta=" << cfg.physics.beta << " kappa_f=" << cfg.physics.kappa_f
              << " dt=" << cfg.dt_dns << "\n";

    const GridPtr grid = make_grid(cfg.n_dns);
    SimState state;
    state.omega = random_spectrum_field(grid, cfg.physics.kappa_f, cfg.dns_seed);

    std::cout << "dns: spin-up " << cfg.spinup_steps << " steps\n";
    RunResult spinup =
        run(state, cfg.physics, cfg.dt_dns, cfg.spinup_steps, cfg.spinup_steps, cfg.dns_seed);

    std::cout << "dns: production " << cfg.production_steps << " steps, snapshot every "
              << cfg.snapshot_every << "\n";
    RunResult production = run(spinup.state, cfg.physics, cfg.dt_dns, cfg.production_steps,
                               cfg.snapshot_every, cfg.dns_seed);

    const auto& snaps = production.archive.snapshots;
    if (snaps.size() < static_cast<std::size_t>(cfg.target_snapshots) + 1) {
        throw std::invalid_argument(
            "production run too short: need at least target_snapshots + 1 snapshots, got " +
            std::to_string(snaps.size()));
    }

    save_archive(production.archive, opts.out_dir + "/archive.bin");

    const auto target_idx =
        target_subset_indices(snaps.size(), static_cast<std::size_t>(cfg.target_snapshots));
    SnapshotArchive target_arch = production.archive;
    SnapshotArchive init_arch = production.archive;
    target_arch.snapshots.clear();
    init_arch.snapshots.clear();
    std::vector<bool> is_target(snaps.size(), false);
    for (std::size_t i : target_idx) is_target[i] = true;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        (is_target[i] ? target_arch : init_arch).snapshots.push_back(snaps[i]);
    }
    save_archive(target_arch, opts.out_dir + "/target_snapshots.bin");
    save_archive(init_arch, opts.out_dir + "/init_snapshots.bin");

    std::cout << "dns: wrote " << snaps.size() << " snapshots ("
              << target_arch.snapshots.size() << " target, " << init_arch.snapshots.size()
              << " init), final E=" << total_energy(production.state.omega)
              << " Z=" << total_enstrophy(production.state.omega) << "\n";
    return 0;
}

int cmd_target(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    const SnapshotArchive arch = load_archive(opts.out_dir + "/target_snapshots.bin");
    const TargetSpectrum target = build_target(arch, cfg.n_les);
    save_target(target, opts.out_dir + "/target_spectrum.csv");
    std::cout << "target: " << target.values.size() << " shells from " << target.n_snapshots
              << " snapshots -> " << opts.out_dir << "/target_spectrum.csv\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    materialize(cfg, opts.out_dir);
    const TargetSpectrum target = load_target(opts.out_dir + "/target_spectrum.csv");
    const SnapshotArchive init_arch = load_archive(opts.out_dir + "/init_snapshots.bin");

    std::cout << "train: " << cfg.n_updates << " updates, " << cfg.n_envs << " envs, "
              << cfg.agents_per_side * cfg.agents_per_side << " agents, closure "
              << to_string(cfg.kind) << "\n";
    const TrainResult result =
        train(cfg.train_config(opts.out_dir), target, init_arch.snapshots, init_arch.n);

    long blowups = 0;
    for (const auto& ep : result.episodes) blowups += ep.blowup ? 1 : 0;
    std::cout << "train: " << result.episodes.size() << " episodes (" << blowups
              << " blow-ups), final mean episode reward "
              << (result.log.empty() ? 0.0 : result.log.back().mean_episode_reward) << "\n";
    std::cout << "train: checkpoint -> " << opts.out_dir << "/checkpoint.bin\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint_path) {
    const RunConfig cfg = resolve_config(opts);
    const std::string ckpt =
        checkpoint_path.empty() ? opts.out_dir + "/checkpoint.bin" : checkpoint_path;
    const PolicySnapshot policy = load_checkpoint(ckpt);
    const TargetSpectrum target = load_target(opts.out_dir + "/target_spectrum.csv");
    const SnapshotArchive reference = load_archive(opts.out_dir + "/archive.bin");
    const SnapshotArchive init_arch = load_archive(opts.out_dir + "/init_snapshots.bin");

    const EvalReport report = evaluate(policy, cfg.eval_config(), target, reference,
                                       init_arch.snapshots, init_arch.n, cfg.dt_ratio, cfg.n_dns);

    const std::string eval_dir = opts.out_dir + "/eval";
    fs::create_directories(eval_dir);
    nlohmann::json summary = {
        {"case_id", cfg.case_id},
        {"n_dns", cfg.n_dns},
        {"n_les", cfg.n_les},
        {"dt_ratio", cfg.dt_ratio},
        {"coarsening_factor", report.coarsening},
        {"bundles", nlohmann::json::array()}};
    for (const EvalBundle& b : report.bundles) {
        const Metadata meta = {{"name", b.name},
                               {"n_les", std::to_string(cfg.n_les)},
                               {"case_id", std::to_string(cfg.case_id)}};
        if (b.intervals_completed > 0) {
            write_spectrum_csv(eval_dir + "/" + b.name + "_enstrophy.csv", b.enstrophy, meta);
            write_spectrum_csv(eval_dir + "/" + b.name + "_energy.csv", b.energy, meta);
            write_pdf_csv(eval_dir + "/" + b.name + "_pdf.csv", b.pdf, meta);
        }
        summary["bundles"].push_back({{"name", b.name},
                                      {"stable", b.stable},
                                      {"spectrum_log_error", b.spectrum_log_error},
                                      {"mean_step_error", b.mean_step_error},
                                      {"sigma_omega", b.pdf.sigma},
                                      {"tail_3sigma", b.pdf.tail3},
                                      {"tail_4sigma", b.pdf.tail4},
                                      {"intervals", b.intervals_completed}});
    }
    std::ofstream out(eval_dir + "/summary.json");
    if (!out) throw IoError("cannot write " + eval_dir + "/summary.json");
    out << summary.dump(2) << "\n";

    std::cout << "evaluate: coarsening factor " << report.coarsening << "x\n";
    for (const EvalBundle& b : report.bundles) {
        std::cout << "  " << std::left << std::setw(22) << b.name
                  << " stable=" << (b.stable ? "yes" : "no ")
                  << " spec_err=" << std::setw(12) << b.spectrum_log_error
                  << " sigma=" << std::setw(10) << b.pdf.sigma << " P(>3s)=" << b.pdf.tail3
                  << "\n";
    }
    std::cout << "evaluate: summary -> " << eval_dir << "/summary.json\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& summaries) {
    std::cout << std::left << std::setw(28) << "summary" << std::setw(22) << "bundle"
              << std::setw(9) << "stable" << std::setw(14) << "spec_err" << std::setw(12)
              << "sigma" << std::setw(12) << "P(>3s)" << "\n";
    for (const std::string& path : summaries) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open summary: " + path);
        nlohmann::json j;
        in >> j;
        for (const auto& b : j.at("bundles")) {
            std::cout << std::left << std::setw(28) << fs::path(path).parent_path().string()
                      << std::setw(22) << b.at("name").get<std::string>() << std::setw(9)
                      << (b.at("stable").get<bool>() ? "yes" : "no") << std::setw(14)
                      << b.at("spectrum_log_error").get<double>() << std::setw(12)
                      << b.at("sigma_omega").get<double>() << std::setw(12)
                      << b.at("tail_3sigma").get<double>() << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudo-spectral beta-plane turbulence: DNS, LES closures, and "
                 "multi-agent RL closure training"};
    app.require_subcommand(1);

    CommonOpts dns_opts, target_opts, train_opts, eval_opts;
    std::string checkpoint_path;
    std::vector<std::string> summaries;

    add_common(app.add_subcommand("dns", "run spin-up + production DNS, write snapshot archives"),
               dns_opts);
    add_common(app.add_subcommand("target",
                                  "build the time-averaged target enstrophy spectrum"),
               target_opts);
    add_common(app.add_subcommand("train", "train the closure policy against the target"),
               train_opts);
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "compare the trained closure with classical baselines and filtered DNS");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "policy checkpoint path");
    auto* compare_cmd = app.add_subcommand("compare", "tabulate one or more evaluation summaries");
    compare_cmd->add_option("summaries", summaries, "summary.json paths")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand("dns")) return cmd_dns(dns_opts);
        if (app.got_subcommand("target")) return cmd_target(target_opts);
        if (app.got_subcommand("train")) return cmd_train(train_opts);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(eval_opts, checkpoint_path);
        if (app.got_subcommand("compare")) return cmd_compare(summaries);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const BlowupError& e) {
        std::cerr << "numerical blow-up: " << e.what() << "\n";
        return 2;
    } catch (const CflError& e) {
        std::cerr << "stability: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    }
}
