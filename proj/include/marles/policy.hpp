#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marles/env.hpp"
#include "marles/rng.hpp"

namespace marles {

/// The trainable artifact: a shared tanh MLP mapping one agent's observation
/// to the action mean (squashed into [0, action_max]) and a value estimate,
/// plus a learned global exploration log-std and the observation
/// normalization statistics. Serialization round trips bit-exactly.
struct PolicySnapshot {
    std::vector<int> layer_sizes;  ///< {obs_dim, hidden, hidden}
    Eigen::VectorXd weights;       ///< flat: W1, b1, W2, b2, w_mean, b_mean, w_value, b_value
    double log_std = 0.0;          ///< bounded to [-5, 1]
    double action_max = 1.0;
    Eigen::VectorXd obs_mean;
    Eigen::VectorXd obs_var;
    long obs_count = 0;
    long version = 0;

    int obs_dim() const { return layer_sizes.at(0); }
    int hidden() const { return layer_sizes.at(1); }
};

/// Number of flat weights for the given layer sizes.
long weight_count(const std::vector<int>& layer_sizes);

/// Hidden layers get seeded scaled-normal init; the output heads start at
/// zero, so the initial mean is the midpoint of the action range and the
/// initial value estimate is 0. Initial std is 0.3 * action_max.
PolicySnapshot make_policy(int obs_dim, int hidden, double action_max, std::uint64_t seed);

struct PolicyOutput {
    double mean = 0.0;
    double std = 0.0;
    double value = 0.0;
};

/// Normalize a raw observation with the snapshot's running statistics
/// (entries clipped to +-10 after scaling).
Eigen::VectorXd normalize_observation(const PolicySnapshot& p, const Eigen::VectorXd& raw);

/// Forward pass on one already-normalized observation.
PolicyOutput policy_forward_normalized(const PolicySnapshot& p, const Eigen::VectorXd& obs);

/// Forward pass on a raw observation (normalizes internally).
PolicyOutput policy_forward(const PolicySnapshot& p, const Eigen::VectorXd& raw_obs);

/// Batched forward pass: obs columns are normalized observations. Outputs
/// are row vectors of size batch. Hidden activations are returned for
/// backpropagation when caches are supplied.
struct ForwardCache {
    Eigen::MatrixXd a1;  ///< (hidden, batch)
    Eigen::MatrixXd a2;  ///< (hidden, batch)
};
void policy_forward_batch(const PolicySnapshot& p, const Eigen::MatrixXd& obs,
                          Eigen::ArrayXd& mean_raw, Eigen::ArrayXd& value,
                          ForwardCache* cache = nullptr);

/// mean = action_max * sigmoid(mean_raw)
double squash_mean(double mean_raw, double action_max);

double gaussian_log_prob(double x, double mean, double std);

/// Draw a ~ N(mean, std), clip into [0, action_max]; the log-probability is
/// that of the pre-clipping Gaussian.
std::pair<double, double> sample_action(double mean, double std, double action_max, Rng& rng);

/// Flatten an AgentObservation into the network input: 5 local invariants
/// followed by the global log spectrum folded into `spectrum_bins`
/// log-spaced bins.
Eigen::VectorXd encode_observation(const AgentObservation& obs, int spectrum_bins = 8);

/// Fold shell values (shells 1..band) into log-spaced coarse bins by
/// averaging; empty bins inherit the nearest lower filled bin.
Eigen::ArrayXd log_spaced_bins(const Eigen::ArrayXd& shell_values, int bins);

/// Merge a batch of raw observations into the running normalization stats.
void update_obs_stats(PolicySnapshot& p, const Eigen::MatrixXd& raw_obs);

void save_checkpoint(const PolicySnapshot& p, const std::string& path);
PolicySnapshot load_checkpoint(const std::string& path);

}  // namespace marles
