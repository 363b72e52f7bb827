#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marles/policy.hpp"

namespace marles {

struct TrainerHyper {
    double gamma = 0.99;
    double lambda = 0.95;
    double clip = 0.2;
    double learning_rate = 3e-4;
    int epochs = 4;
    int minibatch = 256;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double max_grad_norm = 0.5;
};

/// One environment transition with per-agent quantities. Observations are
/// stored normalized exactly as the policy saw them at behavior time.
struct StepRecord {
    Eigen::MatrixXd obs;         ///< (obs_dim, n_agents), normalized
    Eigen::ArrayXd actions;      ///< per agent
    Eigen::ArrayXd log_probs;    ///< pre-clip Gaussian log-probabilities
    Eigen::ArrayXd values;       ///< V(obs) under the behavior snapshot
    Eigen::ArrayXd next_values;  ///< bootstrap values; zero on blow-up terminals
    double reward = 0.0;         ///< shared scalar reward
    bool done = false;           ///< episode boundary after this step
};

struct EnvStream {
    std::vector<StepRecord> steps;
};

/// On-policy rollout data tagged with the snapshot version that produced it.
struct TrajectoryBatch {
    long version = -1;
    std::vector<EnvStream> envs;

    long total_agent_steps() const;
};

/// Flattened batch with generalized advantage estimates.
struct AdvantageView {
    Eigen::MatrixXd obs;  ///< (obs_dim, N)
    Eigen::ArrayXd actions;
    Eigen::ArrayXd old_log_probs;
    Eigen::ArrayXd advantages;
    Eigen::ArrayXd returns;
};

/// GAE along each (environment, agent) stream; advantage accumulation never
/// crosses a done boundary. With normalize, advantages are standardized to
/// zero mean and unit variance over the whole batch.
AdvantageView compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda,
                                 bool normalize = true);

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One minibatch of flattened transitions.
struct Minibatch {
    Eigen::MatrixXd obs;  ///< (obs_dim, b), normalized
    Eigen::ArrayXd actions;
    Eigen::ArrayXd old_log_probs;
    Eigen::ArrayXd advantages;
    Eigen::ArrayXd returns;
};

/// Clipped-surrogate loss (policy + value - entropy bonus) and its gradient
/// with respect to [weights; log_std]. The backbone of update(), exposed so
/// the analytic gradient can be checked against finite differences.
double ppo_loss_grad(const PolicySnapshot& p, const Minibatch& mb, const TrainerHyper& hyper,
                     Eigen::VectorXd& grad, UpdateStats* parts = nullptr);

/// One clipped-surrogate policy-gradient update with value regression:
/// `epochs` passes over seeded-shuffled minibatches, global gradient-norm
/// clipping, Adam. Rejects batches whose version differs from the
/// snapshot's (on-policy discipline). Returns the snapshot with version + 1.
PolicySnapshot update(const PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                      const TrainerHyper& hyper, AdamState& adam, std::uint64_t shuffle_seed,
                      UpdateStats* stats = nullptr);

struct TrainLogEntry {
    int update = 0;
    double mean_episode_reward = 0.0;
    double spectrum_error = 0.0;
    double wall_time = 0.0;
};

struct EpisodeReturn {
    int env = 0;
    long episode = 0;
    double total_reward = 0.0;
    long length = 0;
    bool blowup = false;
};

struct TrainConfig {
    EnvConfig env;
    TrainerHyper hyper;
    int n_envs = 4;
    int steps_per_update = 16;  ///< env transitions collected per env per update
    int n_updates = 200;
    std::uint64_t seed = 1;
    int checkpoint_every = 50;
    int spectrum_bins = 8;
    int hidden = 64;
    std::string out_dir;  ///< empty: keep everything in memory, write no files
};

struct TrainResult {
    PolicySnapshot policy;
    std::vector<TrainLogEntry> log;
    std::vector<EpisodeReturn> episodes;
};

/// Full training loop: parallel environment rollouts, observation-statistics
/// accumulation, updates, JSON-lines training log and episode traces,
/// periodic checkpoints. Blow-ups terminate episodes (logged), never the
/// trainer. Deterministic given (seed, config) on a fixed platform.
TrainResult train(const TrainConfig& cfg, const TargetSpectrum& target,
                  const std::vector<Snapshot>& init_pool, int init_pool_n);

/// Statistics of one evaluation rollout (or of the filtered-DNS reference).
struct EvalBundle {
    std::string name;
    Spectrum enstrophy;  ///< time-averaged shell spectrum
    Spectrum energy;
    PdfEstimate pdf;
    bool stable = true;
    double spectrum_log_error = 0.0;  ///< time-averaged band spectrum vs target
    double mean_step_error = 0.0;     ///< mean instantaneous band error
    long intervals_completed = 0;
};

enum class EvalCloser { policy, dynamic_smagorinsky, dynamic_leith, none };

struct EvalConfig {
    EnvConfig env;
    long horizon_actions = 200;
    std::uint64_t seed = 1234;  ///< held-out initial condition
    int spectrum_bins = 8;
};

/// Deterministic rollout: the policy acts with its mean action each action
/// interval; dynamic baselines recompute their coefficient every LES step;
/// `none` runs the unclosed LES. Blow-up is recorded in the bundle, not
/// thrown.
EvalBundle eval_rollout(EvalCloser closer, const PolicySnapshot* policy, const EvalConfig& cfg,
                        const TargetSpectrum& target, const std::vector<Snapshot>& init_pool,
                        int init_pool_n);

/// Reference statistics from the archive snapshots sharp-filtered to n_les.
EvalBundle filtered_dns_bundle(const SnapshotArchive& archive, int n_les,
                               const TargetSpectrum& target);

struct EvalReport {
    std::vector<EvalBundle> bundles;  ///< policy, dyn. Smagorinsky, dyn. Leith, unclosed, filtered DNS
    double coarsening = 0.0;
};

/// Side-by-side evaluation of the trained policy against both classical
/// dynamic baselines, the unclosed LES, and the filtered-DNS reference.
EvalReport evaluate(const PolicySnapshot& policy, const EvalConfig& cfg,
                    const TargetSpectrum& target, const SnapshotArchive& reference,
                    const std::vector<Snapshot>& init_pool, int init_pool_n, double dt_ratio,
                    int n_dns);

}  // namespace marles
