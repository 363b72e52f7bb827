#include "marles/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "marles/errors.hpp"
#include "nlohmann/json.hpp"

namespace marles {

long TrajectoryBatch::total_agent_steps() const {
    long total = 0;
    for (const EnvStream& env : envs) {
        for (const StepRecord& s : env.steps) total += s.actions.size();
    }
    return total;
}

AdvantageView compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda,
                                 bool normalize) {
    const long n = batch.total_agent_steps();
    if (n == 0) throw std::invalid_argument("compute_advantages: empty batch");

    const auto obs_dim = batch.envs.front().steps.front().obs.rows();
    AdvantageView view;
    view.obs.resize(obs_dim, n);
    view.actions.resize(n);
    view.old_log_probs.resize(n);
    view.advantages.resize(n);
    view.returns.resize(n);

    long col = 0;
    for (const EnvStream& env : batch.envs) {
        const long t_count = static_cast<long>(env.steps.size());
        if (t_count == 0) continue;
        const long n_agents = env.steps.front().actions.size();

        // GAE backward recursion per agent stream; done resets the accumulator.
        Eigen::ArrayXXd adv(n_agents, t_count);
        Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(n_agents);
        for (long t = t_count - 1; t >= 0; --t) {
            const StepRecord& s = env.steps[static_cast<size_t>(t)];
            const Eigen::ArrayXd delta = s.reward + gamma * s.next_values - s.values;
            if (s.done) acc.setZero();
            acc = delta + gamma * lambda * acc;
            adv.col(t) = acc;
        }
        for (long t = 0; t < t_count; ++t) {
            const StepRecord& s = env.steps[static_cast<size_t>(t)];
            for (long a = 0; a < n_agents; ++a, ++col) {
                view.obs.col(col) = s.obs.col(a);
                view.actions(col) = s.actions(a);
                view.old_log_probs(col) = s.log_probs(a);
                view.advantages(col) = adv(a, t);
                view.returns(col) = adv(a, t) + s.values(a);
            }
        }
    }

    if (normalize) {
        const double mean = view.advantages.mean();
        const double sd = std::sqrt((view.advantages - mean).square().mean());
        view.advantages = (view.advantages - mean) / (sd + 1e-8);
    }
    return view;
}

namespace {

struct WeightLayout {
    int d = 0, h = 0;
    long w1 = 0, b1 = 0, w2 = 0, b2 = 0, wm = 0, bm = 0, wv = 0, bv = 0, total = 0;
    explicit WeightLayout(const std::vector<int>& sizes) {
        d = sizes.at(0);
        h = sizes.at(1);
        long off = 0;
        w1 = off; off += static_cast<long>(h) * d;
        b1 = off; off += h;
        w2 = off; off += static_cast<long>(h) * h;
        b2 = off; off += h;
        wm = off; off += h;
        bm = off; off += 1;
        wv = off; off += h;
        bv = off; off += 1;
        total = off;
    }
};

void seeded_shuffle(std::vector<long>& idx, Rng& rng) {
    for (long i = static_cast<long>(idx.size()) - 1; i > 0; --i) {
        const long j = static_cast<long>(rng.raw() % static_cast<std::uint64_t>(i + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
}

}  // namespace

double ppo_loss_grad(const PolicySnapshot& p, const Minibatch& mb, const TrainerHyper& hyper,
                     Eigen::VectorXd& grad, UpdateStats* parts) {
    const WeightLayout lay(p.layer_sizes);
    const long n_params = lay.total + 1;  // weights + log_std
    const long b = mb.actions.size();
    if (b == 0) throw std::invalid_argument("empty minibatch");

    ForwardCache cache;
    Eigen::ArrayXd mean_raw, value;
    policy_forward_batch(p, mb.obs, mean_raw, value, &cache);

    const double s = std::exp(p.log_std);
    const Eigen::ArrayXd sig = 1.0 / (1.0 + (-mean_raw).exp());
    const Eigen::ArrayXd mu = p.action_max * sig;
    const Eigen::ArrayXd z = (mb.actions - mu) / s;
    const Eigen::ArrayXd logp = -0.5 * z.square() - p.log_std - 0.91893853320467274178;
    const Eigen::ArrayXd ratio = (logp - mb.old_log_probs).exp();

    const Eigen::ArrayXd surr1 = ratio * mb.advantages;
    const Eigen::ArrayXd surr2 =
        ratio.min(1.0 + hyper.clip).max(1.0 - hyper.clip) * mb.advantages;
    const double policy_loss = -surr1.min(surr2).mean();
    const Eigen::ArrayXd verr = value - mb.returns;
    const double value_loss = verr.square().mean();
    const double entropy = p.log_std + 0.5 + 0.91893853320467274178;
    const double loss =
        policy_loss + hyper.value_coef * value_loss - hyper.entropy_coef * entropy;

    // d loss / d logp: the clipped-surrogate term only passes gradient where
    // the unclipped branch attains the min.
    Eigen::ArrayXd dlogp = Eigen::ArrayXd::Zero(b);
    for (long i = 0; i < b; ++i) {
        if (surr1(i) <= surr2(i)) dlogp(i) = -mb.advantages(i) * ratio(i) / b;
    }
    const Eigen::ArrayXd dmu = dlogp * z / s;  // d logp / d mu = z / s
    const Eigen::ArrayXd dmean_raw = dmu * p.action_max * sig * (1.0 - sig);
    const Eigen::ArrayXd dvalue = 2.0 * hyper.value_coef * verr / b;
    const double dlog_std = (dlogp * (z.square() - 1.0)).sum() - hyper.entropy_coef;

    // Backprop through the two-hidden-layer tanh net.
    using MapM = Eigen::Map<const Eigen::MatrixXd>;
    using MapV = Eigen::Map<const Eigen::VectorXd>;
    const double* w = p.weights.data();
    MapM w2m(w + lay.w2, lay.h, lay.h);
    MapV wmv(w + lay.wm, lay.h);
    MapV wvv(w + lay.wv, lay.h);

    const Eigen::MatrixXd dmean_row = dmean_raw.matrix().transpose();
    const Eigen::MatrixXd dvalue_row = dvalue.matrix().transpose();
    const Eigen::MatrixXd da2 = wmv * dmean_row + wvv * dvalue_row;
    const Eigen::MatrixXd dz2 = da2.array() * (1.0 - cache.a2.array().square());
    const Eigen::MatrixXd da1 = w2m.transpose() * dz2;
    const Eigen::MatrixXd dz1 = da1.array() * (1.0 - cache.a1.array().square());

    grad = Eigen::VectorXd::Zero(n_params);
    Eigen::Map<Eigen::MatrixXd>(grad.data() + lay.w1, lay.h, lay.d) = dz1 * mb.obs.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + lay.b1, lay.h) = dz1.rowwise().sum();
    Eigen::Map<Eigen::MatrixXd>(grad.data() + lay.w2, lay.h, lay.h) =
        dz2 * cache.a1.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + lay.b2, lay.h) = dz2.rowwise().sum();
    Eigen::Map<Eigen::VectorXd>(grad.data() + lay.wm, lay.h) = cache.a2 * dmean_row.transpose();
    grad(lay.bm) = dmean_raw.sum();
    Eigen::Map<Eigen::VectorXd>(grad.data() + lay.wv, lay.h) = cache.a2 * dvalue_row.transpose();
    grad(lay.bv) = dvalue.sum();
    grad(n_params - 1) = dlog_std;

    if (parts) {
        parts->policy_loss = policy_loss;
        parts->value_loss = value_loss;
        parts->entropy = entropy;
        parts->approx_kl = (mb.old_log_probs - logp).mean();
    }
    return loss;
}

PolicySnapshot update(const PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                      const TrainerHyper& hyper, AdamState& adam, std::uint64_t shuffle_seed,
                      UpdateStats* stats) {
    if (batch.version != snapshot.version) {
        throw std::invalid_argument(
            "on-policy update requires a batch from the snapshot's own version (batch " +
            std::to_string(batch.version) + ", snapshot " + std::to_string(snapshot.version) +
            ")");
    }
    const AdvantageView data = compute_advantages(batch, hyper.gamma, hyper.lambda, true);
    const long n = data.actions.size();

    PolicySnapshot next = snapshot;
    const WeightLayout lay(next.layer_sizes);
    const long n_params = lay.total + 1;  // weights + log_std
    if (adam.m.size() != n_params) {
        adam.m = Eigen::VectorXd::Zero(n_params);
        adam.v = Eigen::VectorXd::Zero(n_params);
        adam.t = 0;
    }

    Rng shuffle_rng(shuffle_seed);
    std::vector<long> idx(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;

    UpdateStats agg;
    long agg_count = 0;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        seeded_shuffle(idx, shuffle_rng);
        for (long start = 0; start < n; start += hyper.minibatch) {
            const long b = std::min<long>(hyper.minibatch, n - start);

            Minibatch mb;
            mb.obs.resize(next.obs_dim(), b);
            mb.actions.resize(b);
            mb.old_log_probs.resize(b);
            mb.advantages.resize(b);
            mb.returns.resize(b);
            for (long i = 0; i < b; ++i) {
                const long src = idx[static_cast<size_t>(start + i)];
                mb.obs.col(i) = data.obs.col(src);
                mb.actions(i) = data.actions(src);
                mb.old_log_probs(i) = data.old_log_probs(src);
                mb.advantages(i) = data.advantages(src);
                mb.returns(i) = data.returns(src);
            }

            Eigen::VectorXd grad;
            UpdateStats parts;
            const double loss = ppo_loss_grad(next, mb, hyper, grad, &parts);
            if (!std::isfinite(loss)) {
                throw std::runtime_error(
                    "non-finite loss during update (policy " +
                    std::to_string(parts.policy_loss) + ", value " +
                    std::to_string(parts.value_loss) + ")");
            }

            const double gnorm = grad.norm();
            if (!std::isfinite(gnorm)) throw std::runtime_error("non-finite gradient");
            if (hyper.max_grad_norm > 0.0 && gnorm > hyper.max_grad_norm) {
                grad *= hyper.max_grad_norm / gnorm;
            }

            ++adam.t;
            const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
            adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grad;
            adam.v = adam.beta2 * adam.v.array().matrix() +
                     (1.0 - adam.beta2) * grad.array().square().matrix();
            const Eigen::ArrayXd step_vec = hyper.learning_rate * (adam.m.array() / bc1) /
                                            ((adam.v.array() / bc2).sqrt() + adam.eps);
            next.weights -= step_vec.head(lay.total).matrix();
            next.log_std -= step_vec(n_params - 1);
            next.log_std = std::clamp(next.log_std, -5.0, 1.0);

            agg.policy_loss += parts.policy_loss;
            agg.value_loss += parts.value_loss;
            agg.entropy += parts.entropy;
            agg.approx_kl += parts.approx_kl;
            ++agg_count;
        }
    }

    if (stats && agg_count > 0) {
        stats->policy_loss = agg.policy_loss / agg_count;
        stats->value_loss = agg.value_loss / agg_count;
        stats->entropy = agg.entropy / agg_count;
        stats->approx_kl = agg.approx_kl / agg_count;
    }
    ++next.version;
    return next;
}

namespace {

struct TraceLine {
    int env;
    long episode;
    long step;
    double reward;
    double spectrum_error;
    bool blowup;
};

// Per-environment rollout context persisting across update rounds.
struct EnvContext {
    std::unique_ptr<MarlEnv> env;
    Rng rng;
    Eigen::MatrixXd obs_raw;   // (obs_dim, n_agents) encoded, not normalized
    long episode_index = 0;
    long episode_step = 0;
    double episode_reward = 0.0;

    EnvContext(std::unique_ptr<MarlEnv> e, std::uint64_t rng_seed)
        : env(std::move(e)), rng(rng_seed) {}
};

struct RolloutSlot {
    EnvStream stream;
    std::vector<Eigen::MatrixXd> raw_obs_blocks;
    std::vector<EpisodeReturn> episodes;
    std::vector<TraceLine> traces;
    double error_sum = 0.0;
    long error_count = 0;
};

Eigen::MatrixXd encode_all(const std::vector<AgentObservation>& obs, int spectrum_bins) {
    const int n_agents = static_cast<int>(obs.size());
    Eigen::MatrixXd m(5 + spectrum_bins, n_agents);
    for (int a = 0; a < n_agents; ++a) m.col(a) = encode_observation(obs[a], spectrum_bins);
    return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

// steps_per_update transitions for one environment under a frozen snapshot.
void collect_rollout(EnvContext& ctx, const PolicySnapshot& policy, const TrainConfig& cfg,
                     std::uint64_t base_seed, RolloutSlot& slot) {
    const int n_agents = ctx.env->n_agents();
    for (int t = 0; t < cfg.steps_per_update; ++t) {
        StepRecord rec;
        rec.obs.resize(policy.obs_dim(), n_agents);
        for (int a = 0; a < n_agents; ++a) {
            rec.obs.col(a) = normalize_observation(policy, ctx.obs_raw.col(a));
        }
        slot.raw_obs_blocks.push_back(ctx.obs_raw);

        Eigen::ArrayXd mean_raw, value;
        policy_forward_batch(policy, rec.obs, mean_raw, value);
        rec.actions.resize(n_agents);
        rec.log_probs.resize(n_agents);
        rec.values = value;
        const double s = std::exp(policy.log_std);
        for (int a = 0; a < n_agents; ++a) {
            const double mu = squash_mean(mean_raw(a), policy.action_max);
            auto [action, logp] = sample_action(mu, s, policy.action_max, ctx.rng);
            rec.actions(a) = action;
            rec.log_probs(a) = logp;
        }

        const EnvStep result = ctx.env->step(rec.actions);
        rec.reward = result.reward;
        rec.done = result.done;
        ctx.episode_reward += result.reward;
        ++ctx.episode_step;
        if (!result.info.blowup) {
            slot.error_sum += result.info.spectrum_error;
            ++slot.error_count;
        }
        slot.traces.push_back({0, ctx.episode_index, ctx.episode_step, result.reward,
                               result.info.spectrum_error, result.info.blowup});

        if (result.done) {
            slot.episodes.push_back({0, ctx.episode_index, ctx.episode_reward,
                                     ctx.episode_step, result.info.blowup});
            if (result.info.blowup) {
                rec.next_values = Eigen::ArrayXd::Zero(n_agents);
            } else {
                // Horizon truncation: bootstrap with the terminal observation.
                const Eigen::MatrixXd term = encode_all(result.observations, cfg.spectrum_bins);
                Eigen::MatrixXd term_norm(policy.obs_dim(), n_agents);
                for (int a = 0; a < n_agents; ++a) {
                    term_norm.col(a) = normalize_observation(policy, term.col(a));
                }
                Eigen::ArrayXd tmr, tv;
                policy_forward_batch(policy, term_norm, tmr, tv);
                rec.next_values = tv;
            }
            ++ctx.episode_index;
            ctx.episode_step = 0;
            ctx.episode_reward = 0.0;
            const auto obs =
                ctx.env->reset(mix_seed(base_seed, static_cast<std::uint64_t>(ctx.episode_index)));
            ctx.obs_raw = encode_all(obs, cfg.spectrum_bins);
        } else {
            ctx.obs_raw = encode_all(result.observations, cfg.spectrum_bins);
            Eigen::MatrixXd next_norm(policy.obs_dim(), n_agents);
            for (int a = 0; a < n_agents; ++a) {
                next_norm.col(a) = normalize_observation(policy, ctx.obs_raw.col(a));
            }
            Eigen::ArrayXd nmr, nv;
            policy_forward_batch(policy, next_norm, nmr, nv);
            rec.next_values = nv;
        }
        slot.stream.steps.push_back(std::move(rec));
    }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TargetSpectrum& target,
                  const std::vector<Snapshot>& init_pool, int init_pool_n) {
    if (cfg.n_envs < 1) throw std::invalid_argument("need at least one environment");
    if (cfg.steps_per_update < 1) throw std::invalid_argument("steps_per_update must be >= 1");
    if (cfg.n_updates < 0) throw std::invalid_argument("n_updates must be >= 0");

    const int obs_dim = 5 + cfg.spectrum_bins;
    TrainResult result;
    result.policy = make_policy(obs_dim, cfg.hidden, cfg.env.c_max, mix_seed(cfg.seed, 0));

    const bool writing = !cfg.out_dir.empty();
    std::ofstream log_file, trace_file;
    if (writing) {
        std::filesystem::create_directories(cfg.out_dir);
        log_file.open(cfg.out_dir + "/training_log.jsonl");
        trace_file.open(cfg.out_dir + "/trace.jsonl");
        if (!log_file || !trace_file) throw IoError("cannot open training outputs in " + cfg.out_dir);
    }

    std::vector<EnvContext> contexts;
    contexts.reserve(static_cast<size_t>(cfg.n_envs));
    for (int e = 0; e < cfg.n_envs; ++e) {
        auto env = std::make_unique<MarlEnv>(cfg.env, target, init_pool, init_pool_n);
        contexts.emplace_back(std::move(env), mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(e)));
        const auto obs = contexts.back().env->reset(mix_seed(cfg.seed + e, 0));
        contexts.back().obs_raw = encode_all(obs, cfg.spectrum_bins);
    }

    // Prime the normalization statistics with the initial observations so the
    // very first rollout does not see wildly unscaled inputs.
    for (const EnvContext& ctx : contexts) update_obs_stats(result.policy, ctx.obs_raw);

    AdamState adam;
    const auto t0 = std::chrono::steady_clock::now();

    for (int u = 0; u < cfg.n_updates; ++u) {
        std::vector<RolloutSlot> slots(static_cast<size_t>(cfg.n_envs));
        {
            std::vector<std::thread> workers;
            workers.reserve(static_cast<size_t>(cfg.n_envs));
            for (int e = 0; e < cfg.n_envs; ++e) {
                workers.emplace_back([&, e]() {
                    collect_rollout(contexts[static_cast<size_t>(e)], result.policy, cfg,
                                    cfg.seed + static_cast<std::uint64_t>(e), slots[static_cast<size_t>(e)]);
                });
            }
            for (auto& w : workers) w.join();
        }

        TrajectoryBatch batch;
        batch.version = result.policy.version;
        double error_sum = 0.0;
        long error_count = 0;
        for (int e = 0; e < cfg.n_envs; ++e) {
            RolloutSlot& slot = slots[static_cast<size_t>(e)];
            batch.envs.push_back(std::move(slot.stream));
            for (auto& ep : slot.episodes) {
                ep.env = e;
                result.episodes.push_back(ep);
            }
            for (const Eigen::MatrixXd& block : slot.raw_obs_blocks) {
                update_obs_stats(result.policy, block);
            }
            error_sum += slot.error_sum;
            error_count += slot.error_count;
            if (writing) {
                for (const TraceLine& tl : slot.traces) {
                    nlohmann::json j = {{"env", e},           {"episode", tl.episode},
                                        {"step", tl.step},    {"reward", tl.reward},
                                        {"spectrum_error", tl.spectrum_error},
                                        {"blowup", tl.blowup}};
                    trace_file << j.dump() << "\n";
                }
            }
        }

        result.policy = update(result.policy, batch, cfg.hyper, adam,
                               mix_seed(cfg.seed, 7000 + static_cast<std::uint64_t>(u)));

        TrainLogEntry entry;
        entry.update = u;
        const size_t n_eps = result.episodes.size();
        if (n_eps > 0) {
            const size_t window = std::min<size_t>(10, n_eps);
            double sum = 0.0;
            for (size_t i = n_eps - window; i < n_eps; ++i) sum += result.episodes[i].total_reward;
            entry.mean_episode_reward = sum / static_cast<double>(window);
        }
        entry.spectrum_error = error_count > 0 ? error_sum / static_cast<double>(error_count) : 0.0;
        entry.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(entry);

        if (writing) {
            nlohmann::json j = {{"update", entry.update},
                                {"mean_episode_reward", entry.mean_episode_reward},
                                {"spectrum_error", entry.spectrum_error},
                                {"wall_time", entry.wall_time}};
            log_file << j.dump() << "\n";
            if (cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0) {
                save_checkpoint(result.policy,
                                cfg.out_dir + "/checkpoint_" + std::to_string(u + 1) + ".bin");
            }
        }
    }

    if (writing) save_checkpoint(result.policy, cfg.out_dir + "/checkpoint.bin");
    return result;
}

namespace {

struct RolloutStats {
    Eigen::ArrayXd enstrophy_sum;
    Eigen::ArrayXd energy_sum;
    std::vector<RealField> fields;
    double error_sum = 0.0;
    long intervals = 0;
    std::vector<int> k_bins;

    void accumulate(const SpectralField& omega, const TargetSpectrum& target, int band) {
        const Spectrum ens = enstrophy_spectrum(omega);
        const Spectrum ene = energy_spectrum(omega);
        if (enstrophy_sum.size() == 0) {
            enstrophy_sum = Eigen::ArrayXd::Zero(ens.values.size());
            energy_sum = Eigen::ArrayXd::Zero(ene.values.size());
            k_bins = ens.k_bins;
        }
        enstrophy_sum += ens.values;
        energy_sum += ene.values;
        fields.push_back(to_physical(omega));

        Spectrum band_spec = truncate_spectrum(ens, band);
        Spectrum target_spec;
        target_spec.k_bins = band_spec.k_bins;
        target_spec.values = target.values;
        error_sum += spectrum_log_error(target_spec, band_spec);
        ++intervals;
    }

    EvalBundle finish(const std::string& name, const TargetSpectrum& target, int band,
                      bool stable) const {
        EvalBundle b;
        b.name = name;
        b.stable = stable;
        b.intervals_completed = intervals;
        if (intervals == 0) return b;
        b.enstrophy.k_bins = k_bins;
        b.enstrophy.values = enstrophy_sum / static_cast<double>(intervals);
        b.energy.k_bins = k_bins;
        b.energy.values = energy_sum / static_cast<double>(intervals);
        b.pdf = vorticity_pdf(fields);
        b.mean_step_error = error_sum / static_cast<double>(intervals);

        Spectrum avg_band = truncate_spectrum(b.enstrophy, band);
        Spectrum target_spec;
        target_spec.k_bins = avg_band.k_bins;
        target_spec.values = target.values;
        b.spectrum_log_error = spectrum_log_error(target_spec, avg_band);
        return b;
    }
};

}  // namespace

EvalBundle eval_rollout(EvalCloser closer, const PolicySnapshot* policy, const EvalConfig& cfg,
                        const TargetSpectrum& target, const std::vector<Snapshot>& init_pool,
                        int init_pool_n) {
    if (cfg.horizon_actions < 1) {
        throw std::invalid_argument("evaluation horizon must be >= 1");
    }
    if (closer == EvalCloser::policy && policy == nullptr) {
        throw std::invalid_argument("policy rollout requires a policy snapshot");
    }

    const int band = cfg.env.n_les / 3;
    RolloutStats stats;
    bool stable = true;
    std::string name;

    if (closer == EvalCloser::policy) {
        name = "marl_policy";
        EnvConfig env_cfg = cfg.env;
        env_cfg.horizon_actions = cfg.horizon_actions;
        MarlEnv env(env_cfg, target, init_pool, init_pool_n);
        auto obs = env.reset(cfg.seed);
        for (long i = 0; i < cfg.horizon_actions; ++i) {
            Eigen::ArrayXd actions(env.n_agents());
            for (int a = 0; a < env.n_agents(); ++a) {
                const auto out = policy_forward(*policy, encode_observation(obs[a], cfg.spectrum_bins));
                actions(a) = out.mean;
            }
            const EnvStep step = env.step(actions);
            if (step.info.blowup) {
                stable = false;
                break;
            }
            stats.accumulate(env.state().omega, target, band);
            obs = step.observations;
            if (step.done) break;
        }
        return stats.finish(name, target, band, stable);
    }

    // Fixed closures: dynamic coefficient recomputed every LES step.
    const GridPtr grid = make_grid(cfg.env.n_les);
    SimState state;
    if (!init_pool.empty()) {
        const GridPtr pool_grid = make_grid(init_pool_n);
        SpectralField f(pool_grid);
        f.c = init_pool[cfg.seed % init_pool.size()].coeffs;
        state.omega = sharp_filter(f, cfg.env.n_les);
    } else {
        state.omega = random_spectrum_field(grid, cfg.env.params.kappa_f, cfg.seed);
    }

    ClosureFn closure_fn;
    switch (closer) {
        case EvalCloser::dynamic_smagorinsky:
            name = "dynamic_smagorinsky";
            closure_fn = [](const SpectralField& omega) {
                const ClosureField c = dynamic_coefficient(omega, ClosureKind::smagorinsky);
                const StrainFields sf = strain_fields(omega);
                return sgs_pi(eddy_viscosity(c, sf), omega, &sf);
            };
            break;
        case EvalCloser::dynamic_leith:
            name = "dynamic_leith";
            closure_fn = [](const SpectralField& omega) {
                const ClosureField c = dynamic_coefficient(omega, ClosureKind::leith);
                const StrainFields sf = strain_fields(omega);
                return sgs_pi(eddy_viscosity(c, sf), omega, &sf);
            };
            break;
        default:
            name = "unclosed";
            break;
    }

    Stepper stepper(grid, cfg.env.params, cfg.env.dt_les);
    try {
        for (long i = 0; i < cfg.horizon_actions; ++i) {
            for (int s = 0; s < cfg.env.steps_per_action; ++s) {
                stepper.advance_with_closure(state, closure_fn);
            }
            stats.accumulate(state.omega, target, band);
        }
    } catch (const BlowupError&) {
        stable = false;
    }
    return stats.finish(name, target, band, stable);
}

EvalBundle filtered_dns_bundle(const SnapshotArchive& archive, int n_les,
                               const TargetSpectrum& target) {
    if (archive.snapshots.empty()) throw std::invalid_argument("empty reference archive");
    const GridPtr dns_grid = make_grid(archive.n);
    const int band = n_les / 3;
    RolloutStats stats;
    SpectralField f(dns_grid);
    for (const Snapshot& snap : archive.snapshots) {
        f.c = snap.coeffs;
        stats.accumulate(sharp_filter(f, n_les), target, band);
    }
    return stats.finish("filtered_dns", target, band, true);
}

EvalReport evaluate(const PolicySnapshot& policy, const EvalConfig& cfg,
                    const TargetSpectrum& target, const SnapshotArchive& reference,
                    const std::vector<Snapshot>& init_pool, int init_pool_n, double dt_ratio,
                    int n_dns) {
    EvalReport report;
    report.bundles.push_back(
        eval_rollout(EvalCloser::policy, &policy, cfg, target, init_pool, init_pool_n));
    report.bundles.push_back(eval_rollout(EvalCloser::dynamic_smagorinsky, nullptr, cfg, target,
                                          init_pool, init_pool_n));
    report.bundles.push_back(
        eval_rollout(EvalCloser::dynamic_leith, nullptr, cfg, target, init_pool, init_pool_n));
    report.bundles.push_back(
        eval_rollout(EvalCloser::none, nullptr, cfg, target, init_pool, init_pool_n));
    report.bundles.push_back(filtered_dns_bundle(reference, cfg.env.n_les, target));
    report.coarsening = coarsening_factor(n_dns, cfg.env.n_les, dt_ratio);
    return report;
}

}  // namespace marles
