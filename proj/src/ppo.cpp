#include "pegrl/ppo.hpp"

#include "pegrl/arm.hpp"

#include <cmath>

namespace pegrl {

void OptimConfig::validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("optim: gamma must be in (0, 1]");
    if (gae_lambda <= 0.0 || gae_lambda > 1.0) throw ConfigError("optim: lambda must be in (0, 1]");
    if (critic_warmup_episodes < 0) throw ConfigError("optim: warmup must be >= 0");
    if (minibatch < 1 || epochs < 1) throw ConfigError("optim: epochs/minibatch must be >= 1");
}

void RolloutBuffer::clear() {
    obs.clear();
    action.clear();
    log_prob.clear();
    value.clear();
    reward.clear();
    done.clear();
    phase_tag.clear();
    episodes = 0;
}

void RolloutBuffer::push(const Eigen::VectorXd& o, const Eigen::VectorXd& a, double logp,
                         double v, double r, bool d, Phase tag) {
    obs.push_back(o);
    action.push_back(a);
    log_prob.push_back(logp);
    value.push_back(v);
    reward.push_back(r);
    done.push_back(d ? 1 : 0);
    phase_tag.push_back(tag);
}

void RolloutBuffer::fold_reward(double r) {
    if (!reward.empty()) reward.back() += r;
}

void RolloutBuffer::mark_last_done() {
    if (!done.empty()) done.back() = 1;
}

GaeResult compute_gae(const RolloutBuffer& buffer, const OptimConfig& cfg) {
    if (buffer.empty()) throw UsageError("compute_gae: empty buffer");
    const auto n = static_cast<Eigen::Index>(buffer.size());
    GaeResult out;
    out.advantages = Eigen::VectorXd::Zero(n);
    out.returns = Eigen::VectorXd::Zero(n);
    double next_adv = 0.0;
    double next_value = 0.0;  // episodes always end done, so no bootstrap tail
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double not_done = buffer.done[t] ? 0.0 : 1.0;
        const double delta =
            buffer.reward[t] + cfg.gamma * next_value * not_done - buffer.value[t];
        next_adv = delta + cfg.gamma * cfg.gae_lambda * not_done * next_adv;
        out.advantages[t] = next_adv;
        out.returns[t] = next_adv + buffer.value[t];
        next_value = buffer.value[t];
    }
    const double mean = out.advantages.mean();
    const double std =
        std::sqrt((out.advantages.array() - mean).square().sum() / static_cast<double>(n));
    out.advantages = (out.advantages.array() - mean) / std::max(std, 1e-8);
    return out;
}

double ppo_loss(const PolicyNet& net, const PpoBatch& batch, const OptimConfig& cfg,
                bool freeze_actor, PolicyNet::Grads* grads, PpoBatchStats* stats) {
    const auto bs = static_cast<Eigen::Index>(batch.obs.rows());
    const int d = net.config().action_dim;
    PolicyNet::Cache cache;
    net.forward_batch(batch.obs, cache);

    const Eigen::ArrayXd sigma = net.log_std().array().exp();
    const Eigen::MatrixXd diff = batch.action - cache.mean;
    const Eigen::ArrayXXd z = diff.array().rowwise() / sigma.transpose();
    const Eigen::ArrayXd logp_new = -0.5 * z.square().rowwise().sum() - net.log_std().sum() -
                                    0.5 * d * std::log(2.0 * kPi);
    const Eigen::ArrayXd ratio = (logp_new - batch.log_prob_old.array()).exp();
    const Eigen::ArrayXd clipped = ratio.min(1.0 + cfg.clip_ratio).max(1.0 - cfg.clip_ratio);
    const Eigen::ArrayXd surr1 = ratio * batch.advantage.array();
    const Eigen::ArrayXd surr2 = clipped * batch.advantage.array();
    const double policy_loss = freeze_actor ? 0.0 : -surr1.min(surr2).mean();

    const Eigen::ArrayXd verr = cache.value.array() - batch.ret.array();
    const double value_loss = verr.square().mean();
    const double entropy = net.log_std().sum() +
                           0.5 * d * std::log(2.0 * kPi * std::exp(1.0));
    const double total = policy_loss + cfg.value_coef * value_loss -
                         (freeze_actor ? 0.0 : cfg.entropy_coef * entropy);

    if (stats) {
        stats->clipped +=
            ((ratio < 1.0 - cfg.clip_ratio) || (ratio > 1.0 + cfg.clip_ratio)).count();
        stats->kl_sum += (batch.log_prob_old.array() - logp_new).sum();
        stats->policy_loss = policy_loss;
        stats->value_loss = value_loss;
    }
    if (grads == nullptr) return total;

    const double inv_b = 1.0 / static_cast<double>(bs);
    Eigen::MatrixXd dmean = Eigen::MatrixXd::Zero(bs, d);
    Eigen::VectorXd dlog_std = Eigen::VectorXd::Zero(d);
    if (!freeze_actor) {
        // Gradient flows through the ratio only where the unclipped surrogate
        // is the active branch of the min.
        const Eigen::ArrayXd use_unclipped = (surr1 <= surr2).cast<double>();
        const Eigen::ArrayXd dlogp = -batch.advantage.array() * ratio * use_unclipped * inv_b;
        dmean = ((diff.array().rowwise() / sigma.square().transpose()).colwise() * dlogp).matrix();
        const Eigen::ArrayXXd zsq = (z.square() - 1.0).colwise() * dlogp;
        dlog_std = zsq.colwise().sum().matrix().transpose();
        dlog_std.array() -= cfg.entropy_coef;
    }
    const Eigen::VectorXd dvalue = (2.0 * cfg.value_coef * inv_b * verr).matrix();
    net.backward(cache, dmean, dvalue, dlog_std, *grads);
    return total;
}

PpoOptimizer::PpoOptimizer(const PolicyConfig& policy_cfg, const OptimConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    m_.setZero(policy_cfg);
    v_.setZero(policy_cfg);
}

namespace {

void adam_tensor(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                 Eigen::MatrixXd& v, double lr, double b1, double b2, double eps, double bc1,
                 double bc2) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void adam_tensor(Eigen::VectorXd& param, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                 Eigen::VectorXd& v, double lr, double b1, double b2, double eps, double bc1,
                 double bc2) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void adam_scalar(double& param, double grad, double& m, double& v, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

void PpoOptimizer::adam_step(PolicyNet& net, const PolicyNet::Grads& grads, bool freeze_actor) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    adam_tensor(net.w1, grads.w1, m_.w1, v_.w1, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    adam_tensor(net.b1, grads.b1, m_.b1, v_.b1, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    adam_tensor(net.w2, grads.w2, m_.w2, v_.w2, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    adam_tensor(net.b2, grads.b2, m_.b2, v_.b2, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    adam_tensor(net.wc, grads.wc, m_.wc, v_.wc, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    adam_scalar(net.bc, grads.bc, m_.bc, v_.bc, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
    if (!freeze_actor) {
        adam_tensor(net.wa, grads.wa, m_.wa, v_.wa, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
        adam_tensor(net.ba, grads.ba, m_.ba, v_.ba, cfg_.lr, b1, b2, cfg_.adam_eps, bc1, bc2);
        adam_tensor(net.log_std_, grads.log_std, m_.log_std, v_.log_std, cfg_.lr, b1, b2,
                    cfg_.adam_eps, bc1, bc2);
    }
}

UpdateDiagnostics PpoOptimizer::update(PolicyNet& net, const RolloutBuffer& buffer,
                                       long episode_count, Rng& rng) {
    if (buffer.episodes < 1) throw UsageError("ppo: update needs at least one completed episode");
    const auto n = static_cast<Eigen::Index>(buffer.size());
    const int d = net.config().action_dim;
    const GaeResult gae = compute_gae(buffer, cfg_);
    const bool freeze_actor = episode_count < cfg_.critic_warmup_episodes;

    Eigen::MatrixXd all_obs(n, net.config().input_dim());
    Eigen::MatrixXd all_act(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        all_obs.row(i) = buffer.obs[i].transpose();
        all_act.row(i) = buffer.action[i].transpose();
    }

    UpdateDiagnostics diag;
    diag.actor_frozen = freeze_actor;
    PpoBatchStats stats;
    double policy_loss_sum = 0.0;
    double value_loss_sum = 0.0;
    long batches = 0;
    long sample_count = 0;

    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

    PolicyNet::Grads grads;
    PpoBatch batch;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (Eigen::Index i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.index(static_cast<std::size_t>(i + 1))]);
        for (Eigen::Index start = 0; start < n; start += cfg_.minibatch) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg_.minibatch, n - start);
            batch.obs.resize(bs, all_obs.cols());
            batch.action.resize(bs, d);
            batch.advantage.resize(bs);
            batch.ret.resize(bs);
            batch.log_prob_old.resize(bs);
            for (Eigen::Index r = 0; r < bs; ++r) {
                const Eigen::Index idx = order[start + r];
                batch.obs.row(r) = all_obs.row(idx);
                batch.action.row(r) = all_act.row(idx);
                batch.advantage[r] = gae.advantages[idx];
                batch.ret[r] = gae.returns[idx];
                batch.log_prob_old[r] = buffer.log_prob[idx];
            }
            ppo_loss(net, batch, cfg_, freeze_actor, &grads, &stats);
            const double norm = std::sqrt(grads.squared_norm());
            if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) grads.scale(cfg_.grad_clip / norm);
            adam_step(net, grads, freeze_actor);
            policy_loss_sum += stats.policy_loss;
            value_loss_sum += stats.value_loss;
            sample_count += bs;
            ++batches;
        }
    }
    if (batches > 0) {
        diag.policy_loss = policy_loss_sum / static_cast<double>(batches);
        diag.value_loss = value_loss_sum / static_cast<double>(batches);
        diag.clip_fraction =
            static_cast<double>(stats.clipped) / static_cast<double>(sample_count);
        diag.approx_kl = stats.kl_sum / static_cast<double>(sample_count);
    }
    if (!std::isfinite(diag.policy_loss) || !std::isfinite(diag.value_loss))
        throw PlantError("ppo: non-finite loss");
    return diag;
}

}  // namespace pegrl
