#include "marles/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "marles/errors.hpp"
#include "nlohmann/json.hpp"

namespace marles {

EnvConfig RunConfig::env_config() const {
    EnvConfig e;
    e.params = physics;
    e.n_les = n_les;
    e.dt_les = dt_les();
    e.steps_per_action = update_cadence_rl;
    e.horizon_actions = horizon_actions();
    e.layout.m = agents_per_side;
    e.kind = kind;
    e.c_max = c_max;
    return e;
}

TrainConfig RunConfig::train_config(const std::string& out_dir) const {
    TrainConfig t;
    t.env = env_config();
    t.hyper = hyper;
    t.n_envs = n_envs;
    t.steps_per_update = steps_per_update;
    t.n_updates = n_updates;
    t.seed = train_seed;
    t.checkpoint_every = checkpoint_every;
    t.spectrum_bins = spectrum_bins;
    t.hidden = hidden;
    t.out_dir = out_dir;
    return t;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig e;
    e.env = env_config();
    e.horizon_actions = eval_horizon_actions;
    e.seed = eval_seed;
    e.spectrum_bins = spectrum_bins;
    return e;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return emit_config(a) == emit_config(b);
}

RunConfig case_defaults(int case_id) {
    RunConfig cfg;
    cfg.case_id = case_id;
    cfg.physics.re = 20e3;
    cfg.physics.drag = 0.1;
    switch (case_id) {
        case 1:
            cfg.physics.beta = 0.0;
            cfg.physics.kappa_f = 4;
            cfg.n_les = 32;
            cfg.horizon_rl = 10000;
            cfg.update_cadence_rl = 10;
            break;
        case 2:
            cfg.physics.beta = 20.0;
            cfg.physics.kappa_f = 4;
            cfg.n_les = 32;
            cfg.horizon_rl = 20000;
            cfg.update_cadence_rl = 20;
            break;
        case 3:
            cfg.physics.beta = 0.0;
            cfg.physics.kappa_f = 25;
            cfg.n_les = 256;
            cfg.horizon_rl = 10000;
            cfg.update_cadence_rl = 10;
            break;
        default:
            throw std::invalid_argument("case must be 1, 2 or 3");
    }
    cfg.agents_per_side = cfg.n_les / 2;
    return cfg;
}

double case_reference_sigma(int case_id) {
    switch (case_id) {
        case 1: return 5.51;
        case 2: return 10.75;
        case 3: return 13.01;
        default: throw std::invalid_argument("case must be 1, 2 or 3");
    }
}

namespace {

int round_even(double x, int minimum) {
    int v = static_cast<int>(std::lround(x / 2.0)) * 2;
    return std::max(minimum, v);
}

}  // namespace

void apply_scale(RunConfig& cfg, double factor) {
    if (!(factor >= 1.0)) throw std::invalid_argument("scale factor must be >= 1");
    if (factor == 1.0) return;
    cfg.scale *= factor;
    cfg.n_dns = round_even(cfg.n_dns / factor, 32);
    cfg.physics.re = std::max(100.0, cfg.physics.re / factor);
    cfg.dt_dns *= factor;
    cfg.spinup_steps = std::max<long>(1, static_cast<long>(cfg.spinup_steps / factor));
    cfg.production_steps = std::max<long>(1, static_cast<long>(cfg.production_steps / factor));
    cfg.snapshot_every = std::max<long>(1, static_cast<long>(cfg.snapshot_every / factor));
    cfg.horizon_rl = std::max<long>(cfg.update_cadence_rl,
                                    static_cast<long>(cfg.horizon_rl / factor));
    if (cfg.n_les > cfg.n_dns / 4) {
        cfg.n_les = round_even(cfg.n_dns / 4.0, 16);
        cfg.agents_per_side = cfg.n_les / 2;
    }
}

namespace {

nlohmann::json hyper_to_json(const TrainerHyper& h) {
    return {{"gamma", h.gamma},
            {"lambda", h.lambda},
            {"clip", h.clip},
            {"learning_rate", h.learning_rate},
            {"epochs", h.epochs},
            {"minibatch", h.minibatch},
            {"value_coef", h.value_coef},
            {"entropy_coef", h.entropy_coef},
            {"max_grad_norm", h.max_grad_norm}};
}

TrainerHyper hyper_from_json(const nlohmann::json& j) {
    TrainerHyper h;
    h.gamma = j.at("gamma").get<double>();
    h.lambda = j.at("lambda").get<double>();
    h.clip = j.at("clip").get<double>();
    h.learning_rate = j.at("learning_rate").get<double>();
    h.epochs = j.at("epochs").get<int>();
    h.minibatch = j.at("minibatch").get<int>();
    h.value_coef = j.at("value_coef").get<double>();
    h.entropy_coef = j.at("entropy_coef").get<double>();
    h.max_grad_norm = j.at("max_grad_norm").get<double>();
    return h;
}

}  // namespace

std::string emit_config(const RunConfig& cfg) {
    nlohmann::json j = {
        {"case_id", cfg.case_id},
        {"physics",
         {{"re", std::isinf(cfg.physics.re) ? -1.0 : cfg.physics.re},
          {"beta", cfg.physics.beta},
          {"drag", cfg.physics.drag},
          {"kappa_f", cfg.physics.kappa_f},
          {"forcing_enabled", cfg.physics.forcing_enabled}}},
        {"grids", {{"n_dns", cfg.n_dns}, {"n_les", cfg.n_les}}},
        {"time", {{"dt_dns", cfg.dt_dns}, {"dt_ratio", cfg.dt_ratio}}},
        {"dns",
         {{"spinup_steps", cfg.spinup_steps},
          {"production_steps", cfg.production_steps},
          {"snapshot_every", cfg.snapshot_every},
          {"target_snapshots", cfg.target_snapshots}}},
        {"seeds",
         {{"dns", cfg.dns_seed}, {"train", cfg.train_seed}, {"eval", cfg.eval_seed}}},
        {"agents",
         {{"per_side", cfg.agents_per_side},
          {"closure", to_string(cfg.kind)},
          {"c_max", cfg.c_max}}},
        {"rl",
         {{"horizon_rl", cfg.horizon_rl},
          {"update_cadence_rl", cfg.update_cadence_rl},
          {"n_envs", cfg.n_envs},
          {"steps_per_update", cfg.steps_per_update},
          {"n_updates", cfg.n_updates},
          {"checkpoint_every", cfg.checkpoint_every},
          {"spectrum_bins", cfg.spectrum_bins},
          {"hidden", cfg.hidden},
          {"hyper", hyper_to_json(cfg.hyper)}}},
        {"eval", {{"horizon_actions", cfg.eval_horizon_actions}}},
        {"scale", cfg.scale}};
    return j.dump(2) + "\n";
}

RunConfig parse_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        RunConfig cfg;
        cfg.case_id = j.at("case_id").get<int>();
        const auto& p = j.at("physics");
        const double re = p.at("re").get<double>();
        cfg.physics.re = re < 0.0 ? std::numeric_limits<double>::infinity() : re;
        cfg.physics.beta = p.at("beta").get<double>();
        cfg.physics.drag = p.at("drag").get<double>();
        cfg.physics.kappa_f = p.at("kappa_f").get<int>();
        cfg.physics.forcing_enabled = p.at("forcing_enabled").get<bool>();
        cfg.n_dns = j.at("grids").at("n_dns").get<int>();
        cfg.n_les = j.at("grids").at("n_les").get<int>();
        cfg.dt_dns = j.at("time").at("dt_dns").get<double>();
        cfg.dt_ratio = j.at("time").at("dt_ratio").get<double>();
        const auto& d = j.at("dns");
        cfg.spinup_steps = d.at("spinup_steps").get<long>();
        cfg.production_steps = d.at("production_steps").get<long>();
        cfg.snapshot_every = d.at("snapshot_every").get<long>();
        cfg.target_snapshots = d.at("target_snapshots").get<int>();
        const auto& s = j.at("seeds");
        cfg.dns_seed = s.at("dns").get<std::uint64_t>();
        cfg.train_seed = s.at("train").get<std::uint64_t>();
        cfg.eval_seed = s.at("eval").get<std::uint64_t>();
        const auto& a = j.at("agents");
        cfg.agents_per_side = a.at("per_side").get<int>();
        cfg.kind = closure_kind_from_string(a.at("closure").get<std::string>());
        cfg.c_max = a.at("c_max").get<double>();
        const auto& r = j.at("rl");
        cfg.horizon_rl = r.at("horizon_rl").get<long>();
        cfg.update_cadence_rl = r.at("update_cadence_rl").get<int>();
        cfg.n_envs = r.at("n_envs").get<int>();
        cfg.steps_per_update = r.at("steps_per_update").get<int>();
        cfg.n_updates = r.at("n_updates").get<int>();
        cfg.checkpoint_every = r.at("checkpoint_every").get<int>();
        cfg.spectrum_bins = r.at("spectrum_bins").get<int>();
        cfg.hidden = r.at("hidden").get<int>();
        cfg.hyper = hyper_from_json(r.at("hyper"));
        cfg.eval_horizon_actions = j.at("eval").at("horizon_actions").get<long>();
        cfg.scale = j.at("scale").get<double>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config missing or mistyped field: ") + e.what());
    }
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open config for writing: " + path);
    out << emit_config(cfg);
    if (!out) throw IoError("config write failed: " + path);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

}  // namespace marles
