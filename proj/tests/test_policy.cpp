#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pegrl/policy.hpp"
#include "pegrl/ppo.hpp"

#include <cmath>
#include <filesystem>

using namespace pegrl;

namespace {

PolicyConfig toy_config(int obs = 2, int window = 2, int hidden = 4, int d = 2) {
    PolicyConfig cfg;
    cfg.obs_dim = obs;
    cfg.window = window;
    cfg.hidden = hidden;
    cfg.action_dim = d;
    return cfg;
}

Eigen::VectorXd flatten_grads(const PolicyNet::Grads& g) {
    const Eigen::Index total = g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size() +
                               g.wa.size() + g.ba.size() + g.wc.size() + 1 + g.log_std.size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
    };
    put(g.w1);
    put(g.b1);
    put(g.w2);
    put(g.b2);
    put(g.wa);
    put(g.ba);
    put(g.wc);
    flat[at++] = g.bc;
    put(g.log_std);
    return flat;
}

}  // namespace

TEST_CASE("initialization protocol") {
    PolicyConfig cfg;
    cfg.action_dim = 3;
    Rng rng(1);
    PolicyNet net(cfg, rng);
    SUBCASE("actor head is exactly zero, so the mean is exactly zero") {
        Rng obs_rng(2);
        for (int i = 0; i < 20; ++i) {
            Eigen::VectorXd x(cfg.input_dim());
            for (int j = 0; j < x.size(); ++j) x[j] = obs_rng.normal();
            Eigen::VectorXd mean;
            double value;
            net.forward(x, mean, value);
            for (int j = 0; j < mean.size(); ++j) CHECK(mean[j] == 0.0);
            CHECK(value != 0.0);  // critic head is not zero-initialized
        }
    }
    SUBCASE("hidden layers are semi-orthogonal with gain sqrt(2)") {
        const Eigen::MatrixXd w1wt = net.w1 * net.w1.transpose();  // 24x24, rows orthonormal
        CHECK((w1wt - 2.0 * Eigen::MatrixXd::Identity(w1wt.rows(), w1wt.cols())).norm() < 1e-9);
        const Eigen::MatrixXd w2tw = net.w2.transpose() * net.w2;
        CHECK((w2tw - 2.0 * Eigen::MatrixXd::Identity(64, 64)).norm() < 1e-9);
        CHECK(net.wc.squaredNorm() == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("log std starts at the configured value") {
        for (int j = 0; j < 3; ++j) CHECK(net.log_std()[j] == -0.5);
    }
    SUBCASE("forward is pure") {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(cfg.input_dim(), 0.3);
        Eigen::VectorXd m1, m2;
        double v1, v2;
        net.forward(x, m1, v1);
        net.forward(x, m2, v2);
        CHECK(m1 == m2);
        CHECK(v1 == v2);
    }
    SUBCASE("non-finite input raises") {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.input_dim());
        x[3] = std::numeric_limits<double>::infinity();
        Eigen::VectorXd mean;
        double value;
        CHECK_THROWS_AS(net.forward(x, mean, value), PlantError);
    }
}

TEST_CASE("mean parameter-jacobian matches finite differences on a toy net") {
    const PolicyConfig cfg = toy_config();
    Rng rng(3);
    PolicyNet net(cfg, rng);
    // give the actor head nonzero weights so the mean actually varies
    for (int i = 0; i < net.wa.rows(); ++i)
        for (int j = 0; j < net.wa.cols(); ++j) net.wa(i, j) = rng.normal(0.0, 0.4);

    Eigen::MatrixXd x(1, cfg.input_dim());
    for (int j = 0; j < x.cols(); ++j) x(0, j) = rng.normal();

    for (int out = 0; out < cfg.action_dim; ++out) {
        PolicyNet::Cache cache;
        net.forward_batch(x, cache);
        Eigen::MatrixXd dmean = Eigen::MatrixXd::Zero(1, cfg.action_dim);
        dmean(0, out) = 1.0;
        PolicyNet::Grads grads;
        net.backward(cache, dmean, Eigen::VectorXd::Zero(1),
                     Eigen::VectorXd::Zero(cfg.action_dim), grads);
        const Eigen::VectorXd analytic = flatten_grads(grads);

        Eigen::VectorXd theta = net.flatten();
        Eigen::VectorXd fd(theta.size());
        const double h = 1e-6;
        PolicyNet probe = net;
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            Eigen::VectorXd mean;
            double value;
            probe.set_from_flat(tp);
            probe.forward(x.row(0).transpose(), mean, value);
            const double up = mean[out];
            probe.set_from_flat(tm);
            probe.forward(x.row(0).transpose(), mean, value);
            fd[k] = (up - mean[out]) / (2 * h);
        }
        const double rel = (analytic - fd).norm() / std::max(1.0, fd.norm());
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("gaussian sampling") {
    SUBCASE("vanishing sigma collapses to the mean") {
        Rng rng(5);
        Eigen::VectorXd mean(2);
        mean << 0.3, -0.7;
        const Eigen::VectorXd log_std = Eigen::VectorXd::Constant(2, std::log(1e-8));
        const GaussianSample s = sample_action(mean, log_std, rng);
        CHECK((s.action - mean).norm() < 1e-6);
    }
    SUBCASE("log prob at the mean matches the closed form") {
        Eigen::VectorXd mean(3);
        mean << 0.1, 0.2, 0.3;
        Eigen::VectorXd log_std(3);
        log_std << -0.5, -0.2, 0.1;
        const double lp = gaussian_log_prob(mean, mean, log_std);
        const double expected = -0.5 * 3 * std::log(2 * kPi) - log_std.sum();
        CHECK(lp == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("moment oracle over 1e5 samples") {
        Rng rng(7);
        Eigen::VectorXd mean(3);
        mean << 0.5, -1.0, 2.0;
        Eigen::VectorXd log_std(3);
        log_std << -0.5, 0.0, -1.0;
        const int n = 100000;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
        Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(3);
        for (int i = 0; i < n; ++i) {
            const GaussianSample s = sample_action(mean, log_std, rng);
            sum += s.action;
            sum2 += s.action.cwiseProduct(s.action).eval();
        }
        for (int j = 0; j < 3; ++j) {
            const double sigma = std::exp(log_std[j]);
            const double emp_mean = sum[j] / n;
            const double emp_var = sum2[j] / n - emp_mean * emp_mean;
            CHECK(std::abs(emp_mean - mean[j]) < 3.0 * sigma / std::sqrt(n));
            CHECK(std::abs(emp_var - sigma * sigma) <
                  3.0 * sigma * sigma * std::sqrt(2.0 / n));
        }
    }
}

TEST_CASE("generalized advantage estimation") {
    OptimConfig cfg;
    SUBCASE("single terminal step: advantage is r - V") {
        RolloutBuffer buf;
        buf.push(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1), 0.0, 0.4, 1.0, true,
                 Phase::Insertion);
        buf.episodes = 1;
        const GaeResult g = compute_gae(buf, cfg);
        CHECK(g.returns[0] == doctest::Approx(1.0).epsilon(1e-12));  // A + V = r
    }
    SUBCASE("gamma = lambda = 1 reduces to Monte Carlo") {
        OptimConfig mc = cfg;
        mc.gamma = 1.0;
        mc.gae_lambda = 1.0;
        RolloutBuffer buf;
        const double rewards[4] = {0.5, -0.25, 1.0, 2.0};
        const double values[4] = {0.1, 0.2, 0.3, 0.4};
        for (int t = 0; t < 4; ++t)
            buf.push(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), 0.0, values[t],
                     rewards[t], t == 3, Phase::SearchHole);
        buf.episodes = 1;
        const GaeResult g = compute_gae(buf, mc);
        for (int t = 0; t < 4; ++t) {
            double mc_return = 0.0;
            for (int i = t; i < 4; ++i) mc_return += rewards[i];
            CHECK(g.returns[t] == doctest::Approx(mc_return).epsilon(1e-12));
        }
    }
    SUBCASE("random 20-step buffer matches the brute-force double loop") {
        Rng rng(11);
        RolloutBuffer buf;
        const int n = 20;
        std::vector<double> r(n), v(n);
        std::vector<int> done(n, 0);
        for (int t = 0; t < n; ++t) {
            r[t] = rng.normal();
            v[t] = rng.normal();
            done[t] = (t == 7 || t == 15 || t == n - 1) ? 1 : 0;
            buf.push(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), 0.0, v[t], r[t],
                     done[t] == 1, Phase::SearchHole);
        }
        buf.episodes = 3;
        const GaeResult g = compute_gae(buf, cfg);

        // brute force: A_t = sum_l (gamma*lambda)^l delta_{t+l}, stopping at dones
        Eigen::VectorXd adv(n);
        for (int t = 0; t < n; ++t) {
            double acc = 0.0;
            double w = 1.0;
            for (int l = t; l < n; ++l) {
                const double next_v = (done[l] || l + 1 >= n) ? 0.0 : v[l + 1];
                const double delta = r[l] + cfg.gamma * next_v - v[l];
                acc += w * delta;
                if (done[l]) break;
                w *= cfg.gamma * cfg.gae_lambda;
            }
            adv[t] = acc;
        }
        // same normalization as the implementation
        const double mean = adv.mean();
        const double std = std::sqrt((adv.array() - mean).square().sum() / n);
        const Eigen::VectorXd norm_adv = (adv.array() - mean) / std::max(std, 1e-8);
        for (int t = 0; t < n; ++t) {
            CHECK(std::abs(g.advantages[t] - norm_adv[t]) < 1e-10);
            CHECK(std::abs(g.returns[t] - (adv[t] + v[t])) < 1e-10);
        }
    }
    SUBCASE("advantages are normalized") {
        Rng rng(13);
        RolloutBuffer buf;
        for (int t = 0; t < 64; ++t)
            buf.push(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), 0.0, rng.normal(),
                     rng.normal(), t % 9 == 8, Phase::SearchHole);
        buf.episodes = 7;
        const GaeResult g = compute_gae(buf, cfg);
        CHECK(std::abs(g.advantages.mean()) < 1e-10);
        const double std =
            std::sqrt(g.advantages.array().square().sum() / g.advantages.size());
        CHECK(std::abs(std - 1.0) < 1e-6);
    }
    SUBCASE("empty buffer is a usage error") {
        RolloutBuffer buf;
        CHECK_THROWS_AS(compute_gae(buf, cfg), UsageError);
    }
}

TEST_CASE("ppo loss gradient matches central finite differences") {
    const PolicyConfig cfg = toy_config(2, 2, 4, 2);
    OptimConfig ocfg;
    Rng rng(17);
    PolicyNet net(cfg, rng);
    for (int i = 0; i < net.wa.rows(); ++i)
        for (int j = 0; j < net.wa.cols(); ++j) net.wa(i, j) = rng.normal(0.0, 0.3);

    const int b = 8;
    PpoBatch batch;
    batch.obs.resize(b, cfg.input_dim());
    batch.action.resize(b, cfg.action_dim);
    batch.advantage.resize(b);
    batch.ret.resize(b);
    batch.log_prob_old.resize(b);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < cfg.input_dim(); ++j) batch.obs(i, j) = rng.normal();
        Eigen::VectorXd mean;
        double value;
        net.forward(batch.obs.row(i).transpose(), mean, value);
        const GaussianSample s = sample_action(mean, net.log_std(), rng);
        batch.action.row(i) = s.action.transpose();
        // keep ratios strictly inside the clip region so the loss is smooth
        batch.log_prob_old[i] = s.log_prob + rng.uniform(-0.05, 0.05);
        batch.advantage[i] = rng.normal();
        batch.ret[i] = rng.normal();
    }

    PolicyNet::Grads grads;
    ppo_loss(net, batch, ocfg, false, &grads);
    const Eigen::VectorXd analytic = flatten_grads(grads);

    Eigen::VectorXd theta = net.flatten();
    Eigen::VectorXd fd(theta.size());
    const double h = 1e-6;
    PolicyNet probe = net;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        probe.set_from_flat(tp);
        const double up = ppo_loss(probe, batch, ocfg, false);
        probe.set_from_flat(tm);
        const double down = ppo_loss(probe, batch, ocfg, false);
        fd[k] = (up - down) / (2 * h);
    }
    const double rel = (analytic - fd).norm() / std::max(1.0, fd.norm());
    CHECK(rel < 1e-4);
}

TEST_CASE("update rules") {
    const PolicyConfig cfg = toy_config(2, 2, 8, 1);
    OptimConfig ocfg;
    ocfg.critic_warmup_episodes = 50;
    SUBCASE("zero-advantage batch leaves the actor untouched") {
        Rng rng(19);
        PolicyNet net(cfg, rng);
        PpoOptimizer opt(cfg, ocfg);
        RolloutBuffer buf;
        for (int t = 0; t < 32; ++t)
            buf.push(Eigen::VectorXd::Constant(cfg.input_dim(), 0.1 * t),
                     Eigen::VectorXd::Zero(1), -0.918938533204672741 + 0.5,  // logp at mean
                     0.0, 0.0, t % 8 == 7, Phase::SearchHole);
        buf.episodes = 4;
        const Eigen::VectorXd actor_before = net.actor_head_flat();
        const Eigen::VectorXd trunk_before = net.flatten();
        Rng update_rng(20);
        opt.update(net, buf, 100, update_rng);  // past warmup
        const Eigen::VectorXd actor_after = net.actor_head_flat();
        CHECK((actor_after - actor_before).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((net.flatten() - trunk_before).cwiseAbs().maxCoeff() > 0.0);  // critic trained
    }
    SUBCASE("critic warm-up freezes the actor head bitwise") {
        Rng rng(21);
        PolicyNet net(cfg, rng);
        PpoOptimizer opt(cfg, ocfg);
        RolloutBuffer buf;
        Rng data_rng(22);
        for (int t = 0; t < 64; ++t)
            buf.push(Eigen::VectorXd::Constant(cfg.input_dim(), data_rng.normal()),
                     Eigen::VectorXd::Constant(1, data_rng.normal()), data_rng.normal(),
                     data_rng.normal(), data_rng.uniform() < 0.2 ? 1.0 : 0.0, t % 16 == 15,
                     Phase::Insertion);
        buf.episodes = 4;
        const Eigen::VectorXd actor_before = net.actor_head_flat();
        Rng update_rng(23);
        const UpdateDiagnostics diag = opt.update(net, buf, 10, update_rng);
        CHECK(diag.actor_frozen);
        const Eigen::VectorXd actor_after = net.actor_head_flat();
        for (Eigen::Index i = 0; i < actor_after.size(); ++i)
            CHECK(actor_after[i] == actor_before[i]);

        // past the warm-up the actor must move
        const UpdateDiagnostics diag2 = opt.update(net, buf, 60, update_rng);
        CHECK_FALSE(diag2.actor_frozen);
        CHECK((net.actor_head_flat() - actor_before).cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("one-dimensional bandit converges to the analytic optimum") {
        PolicyConfig bandit = toy_config(2, 1, 8, 1);
        OptimConfig bcfg;
        bcfg.critic_warmup_episodes = 0;
        bcfg.lr = 1e-2;
        bcfg.epochs = 5;
        Rng rng(25);
        PolicyNet net(bandit, rng);
        net.ba[0] = 0.8;  // start away from the optimum
        PpoOptimizer opt(bandit, bcfg);
        Rng sample_rng(26);
        Rng update_rng(27);
        const Eigen::VectorXd obs = Eigen::VectorXd::Zero(bandit.input_dim());
        double mean_abs = 1.0;
        for (int update = 0; update < 200 && mean_abs > 0.05; ++update) {
            RolloutBuffer buf;
            for (int i = 0; i < 64; ++i) {
                Eigen::VectorXd mean;
                double value;
                net.forward(obs, mean, value);
                const GaussianSample s = sample_action(mean, net.log_std(), sample_rng);
                buf.push(obs, s.action, s.log_prob, value, -s.action[0] * s.action[0], true,
                         Phase::SearchHole);
            }
            buf.episodes = 64;
            opt.update(net, buf, 1000, update_rng);
            Eigen::VectorXd mean;
            double value;
            net.forward(obs, mean, value);
            mean_abs = std::abs(mean[0]);
        }
        CHECK(mean_abs <= 0.05);
    }
    SUBCASE("identical seeds give identical parameter trajectories") {
        auto run_one = [&]() {
            Rng rng(29);
            PolicyNet net(cfg, rng);
            PpoOptimizer opt(cfg, ocfg);
            Rng data_rng(30);
            Rng update_rng(31);
            for (int round = 0; round < 3; ++round) {
                RolloutBuffer buf;
                for (int t = 0; t < 48; ++t)
                    buf.push(Eigen::VectorXd::Constant(cfg.input_dim(), data_rng.normal()),
                             Eigen::VectorXd::Constant(1, data_rng.normal()),
                             data_rng.normal(), data_rng.normal(),
                             data_rng.uniform() < 0.3 ? 1.0 : 0.0, t % 12 == 11,
                             Phase::SearchHole);
                buf.episodes = 4;
                opt.update(net, buf, 100 + round, update_rng);
            }
            return net.flatten();
        };
        const Eigen::VectorXd a = run_one();
        const Eigen::VectorXd b = run_one();
        CHECK(a == b);
    }
}

TEST_CASE("checkpoint round trip") {
    const PolicyConfig cfg = toy_config(3, 2, 6, 2);
    Rng rng(33);
    PolicyNet net(cfg, rng);
    const std::string dir = "/tmp/pegrl_test_checkpoint";
    net.save(dir, 42, 1234);
    const PolicyNet loaded = PolicyNet::load(dir);
    CHECK(loaded.flatten() == net.flatten());
    CHECK(loaded.config().action_dim == cfg.action_dim);
    std::filesystem::remove_all(dir);
}

TEST_CASE("observation window stacks and zero-pads") {
    ObsWindow w(2, 3);
    CHECK(w.vec().norm() == 0.0);
    Eigen::VectorXd a(2), b(2);
    a << 1, 2;
    b << 3, 4;
    w.push(a);
    CHECK(w.vec()[4] == 1.0);
    CHECK(w.vec()[5] == 2.0);
    CHECK(w.vec().head(4).norm() == 0.0);
    w.push(b);
    CHECK(w.vec()[2] == 1.0);
    CHECK(w.vec()[4] == 3.0);
    w.reset();
    CHECK(w.vec().norm() == 0.0);
}
