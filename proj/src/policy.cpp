#include "marles/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "marles/errors.hpp"

namespace marles {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

struct WeightLayout {
    int d = 0, h = 0;
    long w1 = 0, b1 = 0, w2 = 0, b2 = 0, wm = 0, bm = 0, wv = 0, bv = 0;  // offsets

    explicit WeightLayout(const std::vector<int>& sizes) {
        d = sizes.at(0);
        h = sizes.at(1);
        if (sizes.size() != 3 || sizes.at(2) != h) {
            throw std::invalid_argument("policy expects layer sizes {obs_dim, hidden, hidden}");
        }
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
    long total = 0;
};

}  // namespace

long weight_count(const std::vector<int>& layer_sizes) {
    return WeightLayout(layer_sizes).total;
}

PolicySnapshot make_policy(int obs_dim, int hidden, double action_max, std::uint64_t seed) {
    if (obs_dim < 1 || hidden < 1) throw std::invalid_argument("bad policy dimensions");
    if (!(action_max > 0.0)) throw std::invalid_argument("action_max must be positive");

    PolicySnapshot p;
    p.layer_sizes = {obs_dim, hidden, hidden};
    const WeightLayout lay(p.layer_sizes);
    p.weights = Eigen::VectorXd::Zero(lay.total);

    Rng rng(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(obs_dim));
    for (long i = 0; i < static_cast<long>(hidden) * obs_dim; ++i) {
        p.weights(lay.w1 + i) = s1 * rng.normal();
    }
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (long i = 0; i < static_cast<long>(hidden) * hidden; ++i) {
        p.weights(lay.w2 + i) = s2 * rng.normal();
    }
    // Output heads stay zero: initial mean sits at the midpoint of the action
    // range, initial value estimate is 0.

    p.log_std = std::log(0.3 * action_max);
    p.action_max = action_max;
    p.obs_mean = Eigen::VectorXd::Zero(obs_dim);
    p.obs_var = Eigen::VectorXd::Ones(obs_dim);
    p.obs_count = 0;
    p.version = 0;
    return p;
}

Eigen::VectorXd normalize_observation(const PolicySnapshot& p, const Eigen::VectorXd& raw) {
    if (raw.size() != p.obs_dim()) {
        throw std::invalid_argument("observation dimension does not match policy input");
    }
    const Eigen::ArrayXd scale = (p.obs_var.array() + 1e-8).sqrt();
    Eigen::ArrayXd z = (raw.array() - p.obs_mean.array()) / scale;
    return z.min(10.0).max(-10.0).matrix();
}

void policy_forward_batch(const PolicySnapshot& p, const Eigen::MatrixXd& obs,
                          Eigen::ArrayXd& mean_raw, Eigen::ArrayXd& value,
                          ForwardCache* cache) {
    const WeightLayout lay(p.layer_sizes);
    if (obs.rows() != lay.d) {
        throw std::invalid_argument("observation dimension does not match policy input");
    }
    if (p.weights.size() != lay.total) {
        throw std::invalid_argument("weight vector size does not match layer sizes");
    }
    using MapM = Eigen::Map<const Eigen::MatrixXd>;
    using MapV = Eigen::Map<const Eigen::VectorXd>;
    const double* w = p.weights.data();
    MapM w1(w + lay.w1, lay.h, lay.d);
    MapV b1(w + lay.b1, lay.h);
    MapM w2(w + lay.w2, lay.h, lay.h);
    MapV b2(w + lay.b2, lay.h);
    MapV wm(w + lay.wm, lay.h);
    MapV wv(w + lay.wv, lay.h);
    const double bm = p.weights(lay.bm);
    const double bv = p.weights(lay.bv);

    Eigen::MatrixXd a1 = ((w1 * obs).colwise() + b1).array().tanh();
    Eigen::MatrixXd a2 = ((w2 * a1).colwise() + b2).array().tanh();
    mean_raw = (wm.transpose() * a2).array() + bm;
    value = (wv.transpose() * a2).array() + bv;
    if (cache) {
        cache->a1 = std::move(a1);
        cache->a2 = std::move(a2);
    }
}

double squash_mean(double mean_raw, double action_max) {
    if (mean_raw >= 0.0) {
        return action_max / (1.0 + std::exp(-mean_raw));
    }
    const double e = std::exp(mean_raw);
    return action_max * e / (1.0 + e);
}

PolicyOutput policy_forward_normalized(const PolicySnapshot& p, const Eigen::VectorXd& obs) {
    Eigen::ArrayXd mean_raw(1), value(1);
    policy_forward_batch(p, obs, mean_raw, value);
    PolicyOutput out;
    out.mean = squash_mean(mean_raw(0), p.action_max);
    out.std = std::exp(p.log_std);
    out.value = value(0);
    return out;
}

PolicyOutput policy_forward(const PolicySnapshot& p, const Eigen::VectorXd& raw_obs) {
    return policy_forward_normalized(p, normalize_observation(p, raw_obs));
}

double gaussian_log_prob(double x, double mean, double std) {
    const double z = (x - mean) / std;
    return -0.5 * z * z - std::log(std) - kHalfLog2Pi;
}

std::pair<double, double> sample_action(double mean, double std, double action_max, Rng& rng) {
    if (!(std > 0.0)) throw std::invalid_argument("action std must be positive");
    const double raw = mean + std * rng.normal();
    const double log_prob = gaussian_log_prob(raw, mean, std);
    const double action = std::clamp(raw, 0.0, action_max);
    return {action, log_prob};
}

Eigen::ArrayXd log_spaced_bins(const Eigen::ArrayXd& shell_values, int bins) {
    if (bins < 1) throw std::invalid_argument("bins must be >= 1");
    const int band = static_cast<int>(shell_values.size());
    if (band < 1) throw std::invalid_argument("empty shell values");

    Eigen::ArrayXd sums = Eigen::ArrayXd::Zero(bins);
    Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(bins);
    const double log_band = band > 1 ? std::log(static_cast<double>(band)) : 1.0;
    for (int s = 1; s <= band; ++s) {
        int j = band > 1 ? static_cast<int>(std::floor(bins * std::log(static_cast<double>(s)) /
                                                       log_band))
                         : 0;
        j = std::min(bins - 1, std::max(0, j));
        sums(j) += shell_values(s - 1);
        counts(j) += 1.0;
    }
    Eigen::ArrayXd out(bins);
    double carry = 0.0;  // bin 0 always holds shell 1
    for (int j = 0; j < bins; ++j) {
        if (counts(j) > 0.0) carry = sums(j) / counts(j);
        out(j) = carry;
    }
    return out;
}

Eigen::VectorXd encode_observation(const AgentObservation& obs, int spectrum_bins) {
    if (obs.local.size() != 5) throw std::invalid_argument("expected 5 local invariants");
    Eigen::VectorXd x(5 + spectrum_bins);
    x.head(5) = obs.local.matrix();
    x.tail(spectrum_bins) = log_spaced_bins(obs.global_log_spectrum, spectrum_bins).matrix();
    return x;
}

void update_obs_stats(PolicySnapshot& p, const Eigen::MatrixXd& raw_obs) {
    const long b = raw_obs.cols();
    if (b == 0) return;
    if (raw_obs.rows() != p.obs_dim()) {
        throw std::invalid_argument("observation dimension does not match policy input");
    }
    const Eigen::VectorXd batch_mean = raw_obs.rowwise().mean();
    const Eigen::VectorXd batch_var =
        (raw_obs.colwise() - batch_mean).array().square().rowwise().mean();

    if (p.obs_count == 0) {
        p.obs_mean = batch_mean;
        p.obs_var = batch_var;
        p.obs_count = b;
        return;
    }
    const double na = static_cast<double>(p.obs_count);
    const double nb = static_cast<double>(b);
    const double nt = na + nb;
    const Eigen::VectorXd delta = batch_mean - p.obs_mean;
    const Eigen::VectorXd new_mean = p.obs_mean + delta * (nb / nt);
    const Eigen::VectorXd m2 = p.obs_var * na + batch_var * nb +
                               delta.array().square().matrix() * (na * nb / nt);
    p.obs_mean = new_mean;
    p.obs_var = m2 / nt;
    p.obs_count += b;
}

namespace {
constexpr char kCheckpointMagic[8] = {'M', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
}
}  // namespace

void save_checkpoint(const PolicySnapshot& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(out, std::uint32_t{1});  // format version

    write_pod(out, static_cast<std::uint32_t>(p.layer_sizes.size()));
    for (int s : p.layer_sizes) write_pod(out, static_cast<std::int32_t>(s));

    write_pod(out, static_cast<std::uint64_t>(p.weights.size()));
    out.write(reinterpret_cast<const char*>(p.weights.data()),
              static_cast<std::streamsize>(sizeof(double) * p.weights.size()));
    write_pod(out, p.log_std);
    write_pod(out, p.action_max);

    write_pod(out, static_cast<std::uint64_t>(p.obs_mean.size()));
    out.write(reinterpret_cast<const char*>(p.obs_mean.data()),
              static_cast<std::streamsize>(sizeof(double) * p.obs_mean.size()));
    out.write(reinterpret_cast<const char*>(p.obs_var.data()),
              static_cast<std::streamsize>(sizeof(double) * p.obs_var.size()));
    write_pod(out, static_cast<std::int64_t>(p.obs_count));
    write_pod(out, static_cast<std::int64_t>(p.version));
    if (!out) throw IoError("checkpoint write failed: " + path);
}

PolicySnapshot load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError("not a policy checkpoint: " + path);
    }
    std::uint32_t format = 0;
    read_pod(in, format);
    if (format != 1) throw IoError("unsupported checkpoint format version");

    PolicySnapshot p;
    std::uint32_t n_sizes = 0;
    read_pod(in, n_sizes);
    p.layer_sizes.resize(n_sizes);
    for (auto& s : p.layer_sizes) {
        std::int32_t v = 0;
        read_pod(in, v);
        s = v;
    }

    std::uint64_t n_weights = 0;
    read_pod(in, n_weights);
    p.weights.resize(static_cast<Eigen::Index>(n_weights));
    in.read(reinterpret_cast<char*>(p.weights.data()),
            static_cast<std::streamsize>(sizeof(double) * n_weights));
    read_pod(in, p.log_std);
    read_pod(in, p.action_max);

    std::uint64_t obs_dim = 0;
    read_pod(in, obs_dim);
    p.obs_mean.resize(static_cast<Eigen::Index>(obs_dim));
    p.obs_var.resize(static_cast<Eigen::Index>(obs_dim));
    in.read(reinterpret_cast<char*>(p.obs_mean.data()),
            static_cast<std::streamsize>(sizeof(double) * obs_dim));
    in.read(reinterpret_cast<char*>(p.obs_var.data()),
            static_cast<std::streamsize>(sizeof(double) * obs_dim));
    std::int64_t obs_count = 0, version = 0;
    read_pod(in, obs_count);
    read_pod(in, version);
    p.obs_count = obs_count;
    p.version = version;
    if (!in) throw IoError("truncated checkpoint: " + path);
    return p;
}

}  // namespace marles
