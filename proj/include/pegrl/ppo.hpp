#pragma once

#include "pegrl/controller.hpp"
#include "pegrl/policy.hpp"

#include <vector>

namespace pegrl {

struct OptimConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_ratio = 0.2;
    int epochs = 10;
    int minibatch = 64;
    double lr = 3e-4;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double grad_clip = 0.5;
    int critic_warmup_episodes = 50;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// On-policy storage. Only RL-gated steps enter; rewards earned in non-gated
// periods are folded into the preceding gated step.
struct RolloutBuffer {
    std::vector<Eigen::VectorXd> obs;
    std::vector<Eigen::VectorXd> action;  // raw, pre-squash
    std::vector<double> log_prob;
    std::vector<double> value;
    std::vector<double> reward;
    std::vector<std::uint8_t> done;
    std::vector<Phase> phase_tag;
    int episodes = 0;

    std::size_t size() const { return obs.size(); }
    bool empty() const { return obs.empty(); }
    void clear();
    void push(const Eigen::VectorXd& o, const Eigen::VectorXd& a, double logp, double v,
              double r, bool d, Phase tag);
    // Fold a non-gated reward into the last recorded step, if any.
    void fold_reward(double r);
    void mark_last_done();
};

struct GaeResult {
    Eigen::VectorXd advantages;  // normalized (mean 0, std 1)
    Eigen::VectorXd returns;     // A + V, pre-normalization
};

GaeResult compute_gae(const RolloutBuffer& buffer, const OptimConfig& cfg);

struct UpdateDiagnostics {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    bool actor_frozen = false;
};

struct PpoBatch {
    Eigen::MatrixXd obs;       // B x in
    Eigen::MatrixXd action;    // B x d
    Eigen::VectorXd advantage;
    Eigen::VectorXd ret;
    Eigen::VectorXd log_prob_old;
};

struct PpoBatchStats {
    long clipped = 0;
    double kl_sum = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
};

// Scalar clipped-surrogate loss and its parameter gradient for one batch.
// freeze_actor drops the policy and entropy terms entirely.
double ppo_loss(const PolicyNet& net, const PpoBatch& batch, const OptimConfig& cfg,
                bool freeze_actor, PolicyNet::Grads* grads = nullptr,
                PpoBatchStats* stats = nullptr);

// Clipped-surrogate PPO with Adam and global gradient-norm clipping. During
// the critic warm-up the actor head and log-std are left untouched and only
// the value loss trains the trunk.
class PpoOptimizer {
  public:
    PpoOptimizer(const PolicyConfig& policy_cfg, const OptimConfig& cfg);

    UpdateDiagnostics update(PolicyNet& net, const RolloutBuffer& buffer, long episode_count,
                             Rng& rng);

    const OptimConfig& config() const { return cfg_; }

  private:
    void adam_step(PolicyNet& net, const PolicyNet::Grads& grads, bool freeze_actor);

    OptimConfig cfg_;
    PolicyNet::Grads m_;
    PolicyNet::Grads v_;
    long t_ = 0;
};

}  // namespace pegrl
