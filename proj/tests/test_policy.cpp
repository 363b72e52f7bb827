/// Gaussian policy network: forward determinism, squashing, sampling,
/// observation encoding/normalization, checkpoint serialization, and the
/// finite-difference oracle for the analytic gradients.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "marles/errors.hpp"
#include "marles/policy.hpp"
#include "marles/trainer.hpp"

using namespace marles;

TEST_CASE("zero-initialized heads put the mean at the midpoint of the range") {
    const PolicySnapshot p = make_policy(13, 32, 1.0, 7);
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd obs(13);
        for (int i = 0; i < 13; ++i) obs(i) = rng.uniform(-3.0, 3.0);
        const PolicyOutput out = policy_forward(p, obs);
        CHECK(out.mean == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(out.value == 0.0);
        CHECK(out.std == doctest::Approx(0.3).epsilon(1e-12));
    }
}

TEST_CASE("forward is deterministic and respects the action range") {
    PolicySnapshot p = make_policy(13, 32, 0.8, 11);
    Rng rng(5);
    for (long i = 0; i < p.weights.size(); ++i) p.weights(i) += 0.05 * rng.normal();

    Eigen::VectorXd obs(13);
    for (int i = 0; i < 13; ++i) obs(i) = rng.uniform(-2.0, 2.0);
    const PolicyOutput a = policy_forward(p, obs);
    const PolicyOutput b = policy_forward(p, obs);
    CHECK(a.mean == b.mean);
    CHECK(a.value == b.value);
    CHECK(a.mean > 0.0);
    CHECK(a.mean < 0.8);
}

TEST_CASE("dimension mismatches are rejected") {
    const PolicySnapshot p = make_policy(13, 16, 1.0, 1);
    Eigen::VectorXd wrong(7);
    wrong.setZero();
    CHECK_THROWS_AS(policy_forward(p, wrong), std::invalid_argument);
}

TEST_CASE("analytic gradient matches finite differences on a tiny network") {
    // Tiny net, few transitions; check d loss / d theta for every parameter.
    PolicySnapshot p = make_policy(3, 4, 1.0, 99);
    Rng rng(17);
    for (long i = 0; i < p.weights.size(); ++i) p.weights(i) += 0.3 * rng.normal();
    p.log_std = -0.7;

    TrainerHyper hyper;
    hyper.clip = 0.2;
    hyper.value_coef = 0.5;
    hyper.entropy_coef = 0.01;

    Minibatch mb;
    const int b = 6;
    mb.obs.resize(3, b);
    mb.actions.resize(b);
    mb.old_log_probs.resize(b);
    mb.advantages.resize(b);
    mb.returns.resize(b);
    for (int i = 0; i < b; ++i) {
        for (int d = 0; d < 3; ++d) mb.obs(d, i) = rng.uniform(-1.5, 1.5);
        mb.actions(i) = rng.uniform(0.05, 0.95);
        mb.old_log_probs(i) = rng.uniform(-1.2, 0.2);
        mb.advantages(i) = rng.normal();
        mb.returns(i) = rng.normal();
    }

    Eigen::VectorXd grad;
    ppo_loss_grad(p, mb, hyper, grad);
    const long n_params = p.weights.size() + 1;
    REQUIRE(grad.size() == n_params);

    const double eps = 1e-6;
    double max_rel = 0.0;
    for (long k = 0; k < n_params; ++k) {
        PolicySnapshot plus = p, minus = p;
        if (k < p.weights.size()) {
            plus.weights(k) += eps;
            minus.weights(k) -= eps;
        } else {
            plus.log_std += eps;
            minus.log_std -= eps;
        }
        Eigen::VectorXd dummy;
        const double lp = ppo_loss_grad(plus, mb, hyper, dummy);
        const double lm = ppo_loss_grad(minus, mb, hyper, dummy);
        const double fd = (lp - lm) / (2.0 * eps);
        const double scale = std::max({std::abs(fd), std::abs(grad(k)), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - grad(k)) / scale);
    }
    CHECK(max_rel < 1e-5);
}

TEST_CASE("sample_action") {
    SUBCASE("vanishing std collapses to the mean") {
        Rng rng(1);
        const auto [action, logp] = sample_action(0.4, 1e-12, 1.0, rng);
        CHECK(action == doctest::Approx(0.4).epsilon(1e-9));
        CHECK(std::isfinite(logp));
    }

    SUBCASE("non-positive std is rejected") {
        Rng rng(1);
        CHECK_THROWS_AS(sample_action(0.4, 0.0, 1.0, rng), std::invalid_argument);
        CHECK_THROWS_AS(sample_action(0.4, -1.0, 1.0, rng), std::invalid_argument);
    }

    SUBCASE("fixed seed reproduces the sample") {
        Rng r1(77), r2(77);
        const auto a = sample_action(0.5, 0.2, 1.0, r1);
        const auto b = sample_action(0.5, 0.2, 1.0, r2);
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }

    SUBCASE("empirical mean within 3 standard errors") {
        Rng rng(2024);
        const double mean = 0.5, std = 0.1;  // essentially no clipping at 5 sigma
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += sample_action(mean, std, 1.0, rng).first;
        const double se = std / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(sum / n - mean) < 3.0 * se);
    }

    SUBCASE("clipping keeps actions in range, log_prob is pre-clip") {
        Rng rng(31);
        for (int i = 0; i < 200; ++i) {
            const auto [action, logp] = sample_action(0.9, 0.5, 1.0, rng);
            CHECK(action >= 0.0);
            CHECK(action <= 1.0);
            CHECK(std::isfinite(logp));
        }
    }
}

TEST_CASE("gaussian_log_prob matches the closed form") {
    const double lp = gaussian_log_prob(1.3, 1.0, 0.5);
    const double expected = -0.5 * 0.36 - std::log(0.5) - 0.5 * std::log(2.0 * 3.14159265358979323846);
    CHECK(lp == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("observation encoding folds the spectrum into 8 bins") {
    AgentObservation obs;
    obs.local = Eigen::ArrayXd::LinSpaced(5, 1.0, 5.0);
    obs.global_log_spectrum = Eigen::ArrayXd::LinSpaced(10, -3.0, 6.0);
    const Eigen::VectorXd x = encode_observation(obs, 8);
    REQUIRE(x.size() == 13);
    CHECK((x.head(5).array() - obs.local).abs().maxCoeff() == 0.0);
    // Shell 1 always lands alone in the first bin.
    CHECK(x(5) == obs.global_log_spectrum(0));
    // Bins cover all shells; values stay within the shell-value range.
    CHECK(x.tail(8).minCoeff() >= obs.global_log_spectrum.minCoeff());
    CHECK(x.tail(8).maxCoeff() <= obs.global_log_spectrum.maxCoeff());
    // The last bin aggregates the top shells.
    CHECK(x(12) > x(5));
}

TEST_CASE("parameter sharing: each agent's output depends only on its own observation") {
    PolicySnapshot p = make_policy(6, 16, 1.0, 44);
    Rng rng(45);
    for (long i = 0; i < p.weights.size(); ++i) p.weights(i) += 0.1 * rng.normal();

    Eigen::MatrixXd obs(6, 5);
    for (int j = 0; j < 5; ++j) {
        for (int i = 0; i < 6; ++i) obs(i, j) = rng.uniform(-1.0, 1.0);
    }
    Eigen::ArrayXd mean_raw, value;
    policy_forward_batch(p, obs, mean_raw, value);

    // Permuting the agents permutes the outputs identically.
    const std::vector<int> perm = {3, 0, 4, 2, 1};
    Eigen::MatrixXd permuted(6, 5);
    for (int j = 0; j < 5; ++j) permuted.col(j) = obs.col(perm[j]);
    Eigen::ArrayXd mean_perm, value_perm;
    policy_forward_batch(p, permuted, mean_perm, value_perm);
    for (int j = 0; j < 5; ++j) {
        CHECK(mean_perm(j) == mean_raw(perm[j]));
        CHECK(value_perm(j) == value(perm[j]));
    }
}

TEST_CASE("running observation statistics match a direct computation") {
    PolicySnapshot p = make_policy(4, 8, 1.0, 3);
    Rng rng(8);
    Eigen::MatrixXd all(4, 23);
    long fed = 0;
    for (int chunk : {5, 11, 7}) {
        Eigen::MatrixXd block(4, chunk);
        for (int j = 0; j < chunk; ++j) {
            for (int i = 0; i < 4; ++i) block(i, j) = rng.uniform(-4.0, 9.0);
        }
        all.middleCols(fed, chunk) = block;
        update_obs_stats(p, block);
        fed += chunk;
    }
    REQUIRE(fed == 23);
    const Eigen::VectorXd mean = all.rowwise().mean();
    const Eigen::VectorXd var = (all.colwise() - mean).array().square().rowwise().mean();
    CHECK((p.obs_mean - mean).norm() < 1e-12);
    CHECK((p.obs_var - var).norm() < 1e-12);
    CHECK(p.obs_count == 23);

    // Normalization uses those statistics and clips at +-10.
    Eigen::VectorXd raw = mean + 2.0 * var.array().sqrt().matrix();
    const Eigen::VectorXd z = normalize_observation(p, raw);
    CHECK((z.array() - 2.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    PolicySnapshot p = make_policy(13, 64, 1.0, 12345);
    Rng rng(9);
    for (long i = 0; i < p.weights.size(); ++i) p.weights(i) = rng.normal();
    p.log_std = -1.234567890123456;
    p.obs_mean = Eigen::VectorXd::Random(13);
    p.obs_var = Eigen::VectorXd::Random(13).cwiseAbs();
    p.obs_count = 424242;
    p.version = 17;

    const std::string path = "/tmp/marles_ckpt_test.bin";
    save_checkpoint(p, path);
    const PolicySnapshot q = load_checkpoint(path);

    CHECK(q.layer_sizes == p.layer_sizes);
    CHECK((q.weights - p.weights).cwiseAbs().maxCoeff() == 0.0);
    CHECK(q.log_std == p.log_std);
    CHECK(q.action_max == p.action_max);
    CHECK((q.obs_mean - p.obs_mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((q.obs_var - p.obs_var).cwiseAbs().maxCoeff() == 0.0);
    CHECK(q.obs_count == p.obs_count);
    CHECK(q.version == p.version);

    // Re-saving reproduces the file bytes.
    const std::string path2 = "/tmp/marles_ckpt_test2.bin";
    save_checkpoint(q, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), IoError);
}
