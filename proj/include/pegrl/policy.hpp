#pragma once

#include "pegrl/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pegrl {

struct PolicyConfig {
    int obs_dim = 6;
    int window = 4;   // stacked observation frames
    int hidden = 64;  // two tanh layers
    int action_dim = 3;
    double log_std_init = -0.5;

    int input_dim() const { return obs_dim * window; }
};

// Shared-trunk Gaussian actor-critic. Hidden layers are (semi-)orthogonal with
// gain sqrt(2); the actor head starts at exactly zero so episode 0 replays the
// bare controller.
class PolicyNet {
  public:
    PolicyNet() = default;
    PolicyNet(const PolicyConfig& cfg, Rng& init_rng);

    const PolicyConfig& config() const { return cfg_; }

    void forward(const Eigen::VectorXd& x, Eigen::VectorXd& mean, double& value) const;
    Eigen::VectorXd mean_only(const Eigen::VectorXd& x) const;

    struct Cache {
        Eigen::MatrixXd x, h1, h2, mean;  // B x {in, h, h, d}
        Eigen::VectorXd value;            // B
    };
    void forward_batch(const Eigen::MatrixXd& x, Cache& cache) const;

    struct Grads {
        Eigen::MatrixXd w1, w2, wa, wc;
        Eigen::VectorXd b1, b2, ba, log_std;
        double bc = 0.0;

        void setZero(const PolicyConfig& cfg);
        double squared_norm() const;
        void scale(double s);
    };
    // dmean: B x d, dvalue: B, dlog_std: d (accumulated upstream).
    void backward(const Cache& cache, const Eigen::MatrixXd& dmean,
                  const Eigen::VectorXd& dvalue, const Eigen::VectorXd& dlog_std,
                  Grads& grads) const;

    const Eigen::VectorXd& log_std() const { return log_std_; }

    // Flat parameter vector in a fixed layer order (for finite differences,
    // checkpoints, and determinism checks).
    Eigen::VectorXd flatten() const;
    void set_from_flat(const Eigen::VectorXd& flat);
    Eigen::VectorXd actor_head_flat() const;  // wa, ba, log_std

    void save(const std::string& dir, std::uint64_t seed, long episode_count) const;
    static PolicyNet load(const std::string& dir);

    // Exposed for the optimizer.
    Eigen::MatrixXd w1, w2, wa, wc;
    Eigen::VectorXd b1, b2, ba;
    double bc = 0.0;
    Eigen::VectorXd log_std_;

  private:
    PolicyConfig cfg_;
};

// Orthogonal (or semi-orthogonal) matrix of the given gain, rows x cols.
Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain, Rng& rng);

struct GaussianSample {
    Eigen::VectorXd action;  // raw, pre-squash
    double log_prob = 0.0;
};

GaussianSample sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                             Rng& rng);
double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);

// Rolling window of the last `window` observations, zero-padded after reset.
class ObsWindow {
  public:
    ObsWindow(int obs_dim, int window) : obs_dim_(obs_dim), window_(window) { reset(); }
    void reset() { data_ = Eigen::VectorXd::Zero(obs_dim_ * window_); }
    void push(const Eigen::VectorXd& obs) {
        const int n = obs_dim_ * (window_ - 1);
        data_.head(n) = data_.tail(n).eval();
        data_.tail(obs_dim_) = obs;
    }
    const Eigen::VectorXd& vec() const { return data_; }

  private:
    int obs_dim_;
    int window_;
    Eigen::VectorXd data_;
};

}  // namespace pegrl
