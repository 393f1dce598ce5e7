#include "pegrl/config.hpp"

#include <fstream>
#include <sstream>

namespace pegrl {

namespace {
std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}
}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: bad section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

std::string ConfigFile::raw(const std::string& section, const std::string& key) const {
    const auto sec = sections_.find(section);
    if (sec == sections_.end()) return "";
    const auto it = sec->second.find(key);
    if (it == sec->second.end()) return "";
    consumed_.insert(section + "." + key);
    return it->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto sec = sections_.find(section);
    return sec != sections_.end() && sec->second.count(key) > 0;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double def) const {
    const std::string v = raw(section, key);
    if (v.empty()) return def;
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError("config: bad number for " + section + "." + key + ": " + v);
    }
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int def) const {
    return static_cast<int>(get_long(section, key, def));
}

long ConfigFile::get_long(const std::string& section, const std::string& key, long def) const {
    const std::string v = raw(section, key);
    if (v.empty()) return def;
    try {
        return std::stol(v);
    } catch (...) {
        throw ConfigError("config: bad integer for " + section + "." + key + ": " + v);
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool def) const {
    const std::string v = raw(section, key);
    if (v.empty()) return def;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: bad bool for " + section + "." + key + ": " + v);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& def) const {
    const std::string v = raw(section, key);
    return v.empty() ? def : v;
}

std::vector<double> ConfigFile::get_vector(const std::string& section, const std::string& key,
                                           const std::vector<double>& def) const {
    const std::string v = raw(section, key);
    if (v.empty()) return def;
    std::vector<double> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("config: bad vector entry for " + section + "." + key);
        }
    }
    if (out.empty()) throw ConfigError("config: empty vector for " + section + "." + key);
    return out;
}

std::vector<std::uint64_t> ConfigFile::get_seeds(const std::string& section,
                                                 const std::string& key,
                                                 const std::vector<std::uint64_t>& def) const {
    const std::string v = raw(section, key);
    if (v.empty()) return def;
    std::vector<std::uint64_t> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoull(item));
        } catch (...) {
            throw ConfigError("config: bad seed entry for " + section + "." + key);
        }
    }
    if (out.empty()) throw ConfigError("config: seeds must be non-empty");
    return out;
}

void ConfigFile::reject_unknown_keys() const {
    std::vector<std::string> unknown;
    for (const auto& [section, kv] : sections_)
        for (const auto& [key, value] : kv)
            if (consumed_.count(section + "." + key) == 0) unknown.push_back(section + "." + key);
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
}

namespace {
JointVec to_jointvec(const std::vector<double>& v) {
    JointVec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

std::vector<double> from_jointvec(const JointVec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace

ExperimentConfig load_experiment_config(const ConfigFile& file) {
    ExperimentConfig cfg;

    // [arm]
    const int n = file.get_int("arm", "n_joints", cfg.env.arm.n_joints);
    cfg.env.arm = ArmParams::defaults(n);
    cfg.env.gains = ImpedanceGains::defaults(n);
    auto vec_or = [&](const char* section, const char* key, const JointVec& def) {
        const std::vector<double> v = file.get_vector(section, key, from_jointvec(def));
        JointVec out = to_jointvec(v);
        if (out.size() == 1 && n > 1) out = JointVec::Constant(n, v[0]);
        if (out.size() != n) throw ConfigError(std::string("config: ") + section + "." + key +
                                               " must have n_joints entries");
        return out;
    };
    cfg.env.arm.link_lengths = vec_or("arm", "link_lengths", cfg.env.arm.link_lengths);
    cfg.env.arm.joint_inertia = vec_or("arm", "joint_inertia", cfg.env.arm.joint_inertia);
    cfg.env.arm.joint_damping = vec_or("arm", "joint_damping", cfg.env.arm.joint_damping);
    const double limit = file.get_double("arm", "joint_limit", 2.9);
    cfg.env.arm.joint_limit_lo = JointVec::Constant(n, -limit);
    cfg.env.arm.joint_limit_hi = JointVec::Constant(n, limit);
    cfg.env.arm.torque_limit = vec_or("arm", "torque_limit", cfg.env.arm.torque_limit);
    cfg.env.arm.damping_lambda =
        file.get_double("arm", "damping_lambda", cfg.env.arm.damping_lambda);
    if (file.has("arm", "home_q")) cfg.env.home_q = vec_or("arm", "home_q", JointVec::Zero(n));
    cfg.env.arm.validate();

    // [geometry]
    auto& g = cfg.env.geometry;
    g.hole_width = file.get_double("geometry", "hole_width", g.hole_width);
    g.peg_width = file.get_double("geometry", "peg_width", g.peg_width);
    g.peg_length = file.get_double("geometry", "peg_length", g.peg_length);
    g.hole_depth = file.get_double("geometry", "hole_depth", g.hole_depth);
    g.surface_y = file.get_double("geometry", "surface_y", g.surface_y);
    g.nominal_hole_pose.x = file.get_double("geometry", "hole_x", g.nominal_hole_pose.x);
    g.nominal_hole_pose.y = g.surface_y;
    g.validate();

    // [contact]
    auto& c = cfg.env.contact;
    c.k_c = file.get_double("contact", "k_c", c.k_c);
    c.d_c = file.get_double("contact", "d_c", c.d_c);
    c.mu = file.get_double("contact", "mu", c.mu);
    c.mu_static = file.get_double("contact", "mu_static", c.mu_static);
    c.v_stick = file.get_double("contact", "v_stick", c.v_stick);
    c.k_f = file.get_double("contact", "k_f", c.k_f);

    // [controller]
    cfg.env.gains.kp = vec_or("controller", "kp", cfg.env.gains.kp);
    cfg.env.gains.kd = vec_or("controller", "kd", cfg.env.gains.kd);

    // [machine]
    auto& m = cfg.env.machine;
    m.budget_move = file.get_int("machine", "budget_move", m.budget_move);
    m.budget_find = file.get_int("machine", "budget_find", m.budget_find);
    m.budget_search = file.get_int("machine", "budget_search", m.budget_search);
    m.budget_align = file.get_int("machine", "budget_align", m.budget_align);
    m.budget_insert = file.get_int("machine", "budget_insert", m.budget_insert);
    m.pre_insert_height = file.get_double("machine", "pre_insert_height", m.pre_insert_height);
    m.pre_insert_offset = file.get_double("machine", "pre_insert_offset", m.pre_insert_offset);
    m.pre_insert_tilt = file.get_double("machine", "pre_insert_tilt", m.pre_insert_tilt);
    m.move_ramp_s = file.get_double("machine", "move_ramp_s", m.move_ramp_s);
    m.move_pos_tol = file.get_double("machine", "move_pos_tol", m.move_pos_tol);
    m.move_ori_tol = file.get_double("machine", "move_ori_tol", m.move_ori_tol);
    m.settle_speed = file.get_double("machine", "settle_speed", m.settle_speed);
    m.descend_speed = file.get_double("machine", "descend_speed", m.descend_speed);
    m.search_amplitude = file.get_double("machine", "search_amplitude", m.search_amplitude);
    m.search_period_s = file.get_double("machine", "search_period_s", m.search_period_s);
    m.drop_threshold = file.get_double("machine", "drop_threshold", m.drop_threshold);
    m.down_force = file.get_double("machine", "down_force", m.down_force);
    m.seek_speed = file.get_double("machine", "seek_speed", m.seek_speed);
    m.wedge_bias = file.get_double("machine", "wedge_bias", m.wedge_bias);
    m.align_depth = file.get_double("machine", "align_depth", m.align_depth);
    m.align_rate = file.get_double("machine", "align_rate", m.align_rate);
    m.align_tol = file.get_double("machine", "align_tol", m.align_tol);
    m.insert_osc_amplitude =
        file.get_double("machine", "insert_osc_amplitude", m.insert_osc_amplitude);
    m.insert_osc_hz = file.get_double("machine", "insert_osc_hz", m.insert_osc_hz);
    m.success_epsilon = file.get_double("machine", "success_epsilon", m.success_epsilon);
    m.strict_threshold = file.get_double("machine", "strict_threshold", m.strict_threshold);
    m.ticks_per_period = file.get_int("machine", "ticks_per_period", m.ticks_per_period);

    // [residual]
    auto& b = cfg.env.bounds;
    b.torque = file.get_double("residual", "torque_bound", b.torque);
    const std::vector<double> wb =
        file.get_vector("residual", "wrench_bound", {b.wrench[0], b.wrench[1], b.wrench[2]});
    if (wb.size() != 3) throw ConfigError("config: residual.wrench_bound needs 3 entries");
    b.wrench = Vec3(wb[0], wb[1], wb[2]);
    b.joint_delta = file.get_double("residual", "joint_delta_bound", b.joint_delta);
    const std::vector<double> pb = file.get_vector(
        "residual", "pose_delta_bound", {b.pose_delta[0], b.pose_delta[1], b.pose_delta[2]});
    if (pb.size() != 3) throw ConfigError("config: residual.pose_delta_bound needs 3 entries");
    b.pose_delta = Vec3(pb[0], pb[1], pb[2]);
    cfg.env.fb_slew_joint = file.get_double("residual", "fb_slew_joint", cfg.env.fb_slew_joint);
    const std::vector<double> fs =
        file.get_vector("residual", "fb_slew_pose",
                        {cfg.env.fb_slew_pose[0], cfg.env.fb_slew_pose[1],
                         cfg.env.fb_slew_pose[2]});
    if (fs.size() != 3) throw ConfigError("config: residual.fb_slew_pose needs 3 entries");
    cfg.env.fb_slew_pose = Vec3(fs[0], fs[1], fs[2]);

    // [env]
    cfg.env.episode_cap_ticks = file.get_int("env", "episode_cap_ticks", cfg.env.episode_cap_ticks);
    cfg.env.reward_epsilon = file.get_double("env", "reward_epsilon", cfg.env.reward_epsilon);
    cfg.env.obs_noise_std = file.get_double("env", "obs_noise_std", cfg.env.obs_noise_std);
    cfg.env.scratch_torque_bound =
        file.get_double("env", "scratch_torque_bound", cfg.env.scratch_torque_bound);

    // [optimizer]
    auto& o = cfg.optim;
    o.gamma = file.get_double("optimizer", "gamma", o.gamma);
    o.gae_lambda = file.get_double("optimizer", "gae_lambda", o.gae_lambda);
    o.clip_ratio = file.get_double("optimizer", "clip_ratio", o.clip_ratio);
    o.epochs = file.get_int("optimizer", "epochs", o.epochs);
    o.minibatch = file.get_int("optimizer", "minibatch", o.minibatch);
    o.lr = file.get_double("optimizer", "lr", o.lr);
    o.entropy_coef = file.get_double("optimizer", "entropy_coef", o.entropy_coef);
    o.value_coef = file.get_double("optimizer", "value_coef", o.value_coef);
    o.grad_clip = file.get_double("optimizer", "grad_clip", o.grad_clip);
    o.critic_warmup_episodes =
        file.get_int("optimizer", "critic_warmup_episodes", o.critic_warmup_episodes);
    o.validate();

    // [policy]
    cfg.policy_hidden = file.get_int("policy", "hidden", cfg.policy_hidden);
    cfg.policy_window = file.get_int("policy", "window", cfg.policy_window);
    cfg.policy_log_std_init =
        file.get_double("policy", "log_std_init", cfg.policy_log_std_init);

    // [harness]
    cfg.mode = residual_mode_from_name(
        file.get_string("harness", "mode", residual_mode_name(cfg.mode)));
    cfg.experiment = experiment_from_name(
        file.get_string("harness", "experiment", experiment_name(cfg.experiment)));
    cfg.seeds = file.get_seeds("harness", "seeds", cfg.seeds);
    cfg.n_train_envs = file.get_int("harness", "n_train_envs", cfg.n_train_envs);
    cfg.n_eval_envs = file.get_int("harness", "n_eval_envs", cfg.n_eval_envs);
    cfg.total_episodes = file.get_int("harness", "total_episodes", cfg.total_episodes);
    cfg.eval_every = file.get_int("harness", "eval_every", cfg.eval_every);
    cfg.curriculum_enabled =
        file.get_bool("harness", "curriculum_enabled", cfg.curriculum_enabled);
    cfg.scratch = file.get_bool("harness", "scratch", cfg.scratch);
    cfg.env.machine.buffer_steps = file.get_int("harness", "buffer_steps", 0);
    cfg.env.machine.strict_condition = file.get_bool("harness", "strict_condition", false);
    cfg.output_dir = file.get_string("harness", "output_dir", cfg.output_dir);
    cfg.save_checkpoints = file.get_bool("harness", "save_checkpoints", cfg.save_checkpoints);

    cfg.env.mode = cfg.mode;
    cfg.env.scratch_mode = cfg.scratch;
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");

    file.reject_unknown_keys();
    return cfg;
}

}  // namespace pegrl
