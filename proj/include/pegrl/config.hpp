#pragma once

#include "pegrl/curriculum.hpp"
#include "pegrl/env.hpp"
#include "pegrl/ppo.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pegrl {

// Plain-text key/value config with [section] headers, '#' comments, and
// strict unknown-key rejection once loading has consumed what it knows.
class ConfigFile {
  public:
    ConfigFile() = default;
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double def) const;
    int get_int(const std::string& section, const std::string& key, int def) const;
    long get_long(const std::string& section, const std::string& key, long def) const;
    bool get_bool(const std::string& section, const std::string& key, bool def) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& def) const;
    std::vector<double> get_vector(const std::string& section, const std::string& key,
                                   const std::vector<double>& def) const;
    std::vector<std::uint64_t> get_seeds(const std::string& section, const std::string& key,
                                         const std::vector<std::uint64_t>& def) const;

    // Throws ConfigError listing any key never consumed by a getter.
    void reject_unknown_keys() const;

  private:
    std::string raw(const std::string& section, const std::string& key) const;
    std::map<std::string, std::map<std::string, std::string>> sections_;
    mutable std::set<std::string> consumed_;
};

struct ExperimentConfig {
    ResidualMode mode = ResidualMode::None;
    Experiment experiment = Experiment::Both;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int n_train_envs = 4;
    int n_eval_envs = 4;
    int total_episodes = 2000;
    int eval_every = 10;
    bool curriculum_enabled = true;
    bool scratch = false;
    std::string output_dir = "runs/out";
    EnvConfig env;
    OptimConfig optim;
    int policy_hidden = 64;
    int policy_window = 4;
    double policy_log_std_init = -0.5;
    bool save_checkpoints = false;

    PolicyConfig policy_config() const {
        PolicyConfig p;
        p.obs_dim = Observation::kDim;
        p.window = policy_window;
        p.hidden = policy_hidden;
        p.action_dim = scratch ? env.arm.n_joints : action_dim(mode, env.arm.n_joints);
        p.log_std_init = policy_log_std_init;
        return p;
    }
};

// Builds the full experiment config from a parsed file, applying defaults for
// anything absent and rejecting keys it does not know.
ExperimentConfig load_experiment_config(const ConfigFile& file);

}  // namespace pegrl
