#include "pegrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pegrl {

namespace {

constexpr std::uint64_t kPurposeTrainEnv = 1;
constexpr std::uint64_t kPurposeEvalEnv = 2;
constexpr std::uint64_t kPurposePolicyInit = 3;
constexpr std::uint64_t kPurposeAction = 4;
constexpr std::uint64_t kPurposeOptim = 5;

struct EpisodeStats {
    bool success = false;
    double ret = 0.0;
    int ticks = 0;
    Phase final_phase = Phase::MoveToPreInsert;
    int gated_steps = 0;
    long ik_fallbacks = 0;
};

ResidualCommand make_command(const ExperimentConfig& cfg, const Eigen::VectorXd& raw) {
    if (cfg.scratch) {
        ResidualCommand cmd;
        cmd.mode = ResidualMode::JointEffort;
        cmd.payload = cfg.env.scratch_torque_bound * raw.array().tanh().matrix();
        return cmd;
    }
    return ResidualCommand::from_raw(cfg.mode, raw, cfg.env.arm.n_joints, cfg.env.bounds);
}

EpisodeStats run_episode(PegInHoleEnv& env, const ExperimentConfig& cfg, const PolicyNet* net,
                         bool deterministic, Rng* action_rng, RolloutBuffer* buffer,
                         double pos_std, double ori_std) {
    EpisodeStats stats;
    ObsWindow window(Observation::kDim, cfg.policy_window);
    Observation obs = env.reset(pos_std, ori_std);
    window.push(obs.vec());

    const std::size_t ep_start = buffer ? buffer->size() : 0;
    while (!env.done()) {
        const bool gated = net != nullptr && env.next_gated();
        ResidualCommand cmd;
        const ResidualCommand* cmd_ptr = nullptr;
        Eigen::VectorXd raw;
        double logp = 0.0;
        double value = 0.0;
        Eigen::VectorXd policy_input;
        if (gated) {
            policy_input = window.vec();
            Eigen::VectorXd mean;
            net->forward(policy_input, mean, value);
            if (deterministic) {
                raw = mean;
            } else {
                const GaussianSample s = sample_action(mean, net->log_std(), *action_rng);
                raw = s.action;
                logp = s.log_prob;
            }
            cmd = make_command(cfg, raw);
            cmd_ptr = &cmd;
        }
        const Transition tr = env.step(cmd_ptr);
        window.push(tr.obs.vec());
        if (buffer != nullptr && !deterministic) {
            if (gated) {
                buffer->push(policy_input, raw, logp, value, tr.reward, tr.done,
                             tr.phase_during);
            } else if (buffer->size() > ep_start) {
                buffer->fold_reward(tr.reward);
                if (tr.done) buffer->mark_last_done();
            }
        }
        if (tr.done) {
            stats.success = tr.success;
            stats.ret = tr.success ? 1.0 : 0.0;
            stats.ticks = tr.tick;
            stats.final_phase = tr.phase_during;
        }
    }
    stats.gated_steps = env.gated_steps();
    stats.ik_fallbacks = env.ik_fallbacks();
    if (buffer != nullptr && !deterministic && buffer->size() > ep_start) ++buffer->episodes;
    return stats;
}

}  // namespace

RunResult run_training(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    if (cfg.scratch) {
        cfg.env.scratch_mode = true;
        cfg.env.gate_move = true;  // the controller keeps only Find and Align
    }
    if (cfg.seeds.empty()) throw ConfigError("harness: seeds must be non-empty");
    if (cfg.n_train_envs < 1) throw ConfigError("harness: n_train_envs must be >= 1");

    RunResult result;
    const DifficultyProfile profile = difficulty_profile(cfg.experiment);
    const char* mode_label = cfg.scratch ? "scratch" : residual_mode_name(cfg.mode);

    for (const std::uint64_t seed : cfg.seeds) {
        Rng init_rng = Rng::stream(seed, 0, kPurposePolicyInit);
        PolicyNet net(cfg.policy_config(), init_rng);
        PpoOptimizer optimizer(cfg.policy_config(), cfg.optim);
        Rng optim_rng = Rng::stream(seed, 0, kPurposeOptim);

        std::vector<PegInHoleEnv> train_envs;
        std::vector<PegInHoleEnv> eval_envs;
        std::vector<Rng> action_rngs;
        std::vector<CurriculumState> curricula;
        for (int i = 0; i < cfg.n_train_envs; ++i) {
            train_envs.emplace_back(cfg.env, Rng::stream(seed, i, kPurposeTrainEnv));
            action_rngs.push_back(Rng::stream(seed, i, kPurposeAction));
            CurriculumState c = profile.train;
            if (!cfg.curriculum_enabled) {
                c.pos_std = profile.eval_pos_std;
                c.ori_std = profile.eval_ori_std;
                c.pos_increment = 0.0;
                c.ori_increment = 0.0;
            }
            curricula.push_back(c);
        }
        for (int j = 0; j < cfg.n_eval_envs; ++j)
            eval_envs.emplace_back(cfg.env, Rng::stream(seed, j, kPurposeEvalEnv));

        long episode_count = 0;
        double last_clip_fraction = 0.0;
        long next_eval_marker = -1;  // forces a zero-shot eval pass first

        auto run_eval = [&]() {
            for (int j = 0; j < cfg.n_eval_envs; ++j) {
                const EpisodeStats st =
                    run_episode(eval_envs[static_cast<std::size_t>(j)], cfg, &net, true, nullptr,
                                nullptr, profile.eval_pos_std, profile.eval_ori_std);
                RunRow row;
                row.mode = mode_label;
                row.experiment = experiment_name(cfg.experiment);
                row.seed = seed;
                row.env_id = j;
                row.role = "eval";
                row.episode = static_cast<int>(episode_count);
                row.success = st.success ? 1 : 0;
                row.ret = st.ret;
                row.ticks = st.ticks;
                row.final_phase = phase_name(st.final_phase);
                row.pos_std = profile.eval_pos_std;
                row.ori_std = profile.eval_ori_std;
                row.ik_fallbacks = st.ik_fallbacks;
                row.clip_fraction = last_clip_fraction;
                result.rows.push_back(row);
            }
        };

        RolloutBuffer buffer;
        while (episode_count < cfg.total_episodes) {
            if (episode_count / cfg.eval_every > next_eval_marker) {
                next_eval_marker = episode_count / cfg.eval_every;
                run_eval();
            }
            buffer.clear();
            for (int i = 0; i < cfg.n_train_envs; ++i) {
                auto& curriculum = curricula[static_cast<std::size_t>(i)];
                const double pos_std = curriculum.pos_std;
                const double ori_std = curriculum.ori_std;
                const EpisodeStats st =
                    run_episode(train_envs[static_cast<std::size_t>(i)], cfg, &net, false,
                                &action_rngs[static_cast<std::size_t>(i)], &buffer, pos_std,
                                ori_std);
                ++episode_count;
                if (cfg.curriculum_enabled) {
                    curriculum = record_episode(curriculum, st.success);
                    curriculum = adapt(curriculum);
                }
                RunRow row;
                row.mode = mode_label;
                row.experiment = experiment_name(cfg.experiment);
                row.seed = seed;
                row.env_id = i;
                row.role = "train";
                row.episode = static_cast<int>(episode_count);
                row.success = st.success ? 1 : 0;
                row.ret = st.ret;
                row.ticks = st.ticks;
                row.final_phase = phase_name(st.final_phase);
                row.pos_std = pos_std;
                row.ori_std = ori_std;
                row.ik_fallbacks = st.ik_fallbacks;
                row.clip_fraction = last_clip_fraction;
                result.rows.push_back(row);
                result.curriculum.push_back({seed, i, static_cast<int>(episode_count), pos_std,
                                             ori_std, st.success ? 1 : 0});
            }
            if (!buffer.empty() && buffer.episodes > 0) {
                const UpdateDiagnostics diag =
                    optimizer.update(net, buffer, episode_count, optim_rng);
                last_clip_fraction = diag.clip_fraction;
            }
        }
        if (episode_count / cfg.eval_every > next_eval_marker || cfg.total_episodes == 0) {
            next_eval_marker = episode_count / cfg.eval_every;
            run_eval();
        }
        if (cfg.save_checkpoints) {
            net.save(cfg.output_dir + "/checkpoint_seed" + std::to_string(seed), seed,
                     episode_count);
        }
    }
    return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw ConfigError("harness: cannot create output dir " + cfg.output_dir);
    {
        std::ofstream probe(cfg.output_dir + "/run.csv");
        if (!probe) throw ConfigError("harness: cannot write to " + cfg.output_dir);
    }
    const RunResult result = run_training(cfg);
    write_run_csv(cfg.output_dir + "/run.csv", result.rows);
    write_curriculum_csv(cfg.output_dir + "/curriculum.csv", result.curriculum);
    return result;
}

RunResult run_scratch_baseline(ExperimentConfig cfg) {
    cfg.scratch = true;
    cfg.env.scratch_mode = true;
    // The controller keeps only contact finding and alignment; reaching the
    // pre-insert region is the agent's problem too.
    cfg.env.gate_move = true;
    return run_experiment(cfg);
}

std::vector<BufferDiagRow> buffer_steps_diagnostic(const ExperimentConfig& base,
                                                   const std::vector<int>& b_values,
                                                   double oracle_offset) {
    std::vector<BufferDiagRow> rows;
    const ResidualMode modes[2] = {ResidualMode::JointEffort, ResidualMode::JointPosFeedback};
    for (const ResidualMode mode : modes) {
        for (int strict = 0; strict <= 1; ++strict) {
            for (const int b : b_values) {
                ExperimentConfig cfg = base;
                cfg.mode = mode;
                cfg.scratch = false;
                cfg.env.mode = mode;
                cfg.env.scratch_mode = false;
                cfg.env.machine.buffer_steps = b;
                cfg.env.machine.strict_condition = strict == 1;
                cfg.env.gate_move = true;
                cfg.env.gate_search = false;
                cfg.env.gate_insert = false;
                // Let the probe run generously past the nominal budget.
                cfg.env.machine.budget_move = 4000;
                cfg.env.episode_cap_ticks = 8000;

                PegInHoleEnv env(cfg.env, Rng::stream(7, 0, kPurposeTrainEnv));
                env.reset(0.0, 0.0);
                const PlanarPose goal = env.machine().pre_insert_pose;
                const Vec2 target{goal.x + oracle_offset, goal.y};
                const int n = cfg.env.arm.n_joints;

                BufferDiagRow row;
                row.mode = residual_mode_name(mode);
                row.buffer_steps = b;
                row.strict = strict;
                double residual_norm_sum = 0.0;
                long residual_steps = 0;

                while (!env.done() && env.phase() == Phase::MoveToPreInsert) {
                    ResidualCommand cmd;
                    cmd.mode = mode;
                    const PlanarPose tcp = env.true_tcp();
                    const JointVec& q = env.plant_state().q;
                    if (mode == ResidualMode::JointEffort) {
                        // Aim past the target at full torque authority so the
                        // probe exercises the whole residual budget.
                        const Vec2 aim = target + (target - Vec2{goal.x, goal.y});
                        const Vec2 err = aim - tcp.position();
                        const JointVec tau_raw = jacobian(q, cfg.env.arm).transpose() *
                                                 Vec3(1e4 * err.x(), 1e4 * err.y(), 0.0);
                        const double peak = tau_raw.cwiseAbs().maxCoeff();
                        const double scale =
                            peak > cfg.env.bounds.torque ? cfg.env.bounds.torque / peak : 1.0;
                        cmd.payload = scale * tau_raw;
                    } else {
                        const Vec3 virtual_shift(goal.x - target.x(), goal.y - target.y(), 0.0);
                        const JointVec delta =
                            damped_pinv(jacobian(q, cfg.env.arm), cfg.env.arm.damping_lambda) *
                            virtual_shift;
                        cmd.payload =
                            delta.cwiseMin(JointVec::Constant(n, cfg.env.bounds.joint_delta))
                                .cwiseMax(JointVec::Constant(n, -cfg.env.bounds.joint_delta));
                    }
                    residual_norm_sum += cmd.payload.norm();
                    ++residual_steps;
                    const Transition tr = env.step(&cmd);
                    if (tr.phase != Phase::MoveToPreInsert || tr.done) {
                        row.displacement = tr.tcp.x - goal.x;
                        break;
                    }
                }
                row.error = env.machine().error ? 1 : 0;
                row.suc_tick = env.machine().suc_tick;
                row.exit_tick = env.tick();
                row.mean_residual_norm =
                    residual_steps > 0 ? residual_norm_sum / static_cast<double>(residual_steps)
                                       : 0.0;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<SummaryRow> export_summary(const std::vector<RunRow>& rows) {
    if (rows.empty()) throw UsageError("export_summary: no rows");
    // (mode, experiment, episode) -> seed -> (successes, count)
    std::map<std::tuple<std::string, std::string, int>,
             std::map<std::uint64_t, std::pair<double, int>>>
        buckets;
    for (const RunRow& row : rows) {
        if (row.role != "eval") continue;
        auto& per_seed = buckets[{row.mode, row.experiment, row.episode}];
        auto& [sum, count] = per_seed[row.seed];
        sum += row.success;
        ++count;
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, per_seed] : buckets) {
        std::vector<double> seed_means;
        for (const auto& [seed, sc] : per_seed)
            seed_means.push_back(sc.first / std::max(1, sc.second));
        const auto n = static_cast<double>(seed_means.size());
        double mean = 0.0;
        for (double m : seed_means) mean += m;
        mean /= n;
        double var = 0.0;
        for (double m : seed_means) var += (m - mean) * (m - mean);
        var /= n;
        SummaryRow row;
        row.mode = std::get<0>(key);
        row.experiment = std::get<1>(key);
        row.episode = std::get<2>(key);
        row.mean_success = mean;
        row.std_success = std::sqrt(var);
        row.n_seeds = static_cast<int>(seed_means.size());
        out.push_back(row);
    }
    return out;
}

namespace {
std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}
}  // namespace

void write_run_csv(const std::string& path, const std::vector<RunRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# pegrl run csv v1\n";
    out << "mode,experiment,seed,env_id,role,episode,success,return,ticks,final_phase,"
           "pos_std,ori_std,ik_fallbacks,clip_fraction\n";
    for (const RunRow& r : rows) {
        out << r.mode << ',' << r.experiment << ',' << r.seed << ',' << r.env_id << ','
            << r.role << ',' << r.episode << ',' << r.success << ',' << fmt_double(r.ret) << ','
            << r.ticks << ',' << r.final_phase << ',' << fmt_double(r.pos_std) << ','
            << fmt_double(r.ori_std) << ',' << r.ik_fallbacks << ','
            << fmt_double(r.clip_fraction) << '\n';
    }
}

void write_curriculum_csv(const std::string& path, const std::vector<CurriculumRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# pegrl curriculum csv v1\n";
    out << "seed,env_id,episode,pos_std,ori_std,success\n";
    for (const CurriculumRow& r : rows) {
        out << r.seed << ',' << r.env_id << ',' << r.episode << ',' << fmt_double(r.pos_std)
            << ',' << fmt_double(r.ori_std) << ',' << r.success << '\n';
    }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# pegrl summary csv v1\n";
    out << "mode,experiment,episode,mean_success,std_success,n_seeds\n";
    for (const SummaryRow& r : rows) {
        out << r.mode << ',' << r.experiment << ',' << r.episode << ','
            << fmt_double(r.mean_success) << ',' << fmt_double(r.std_success) << ','
            << r.n_seeds << '\n';
    }
}

void write_buffer_diag_csv(const std::string& path, const std::vector<BufferDiagRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# pegrl buffer-diagnostic csv v1\n";
    out << "mode,buffer_steps,strict,displacement,error,suc_tick,exit_tick,mean_residual_norm\n";
    for (const BufferDiagRow& r : rows) {
        out << r.mode << ',' << r.buffer_steps << ',' << r.strict << ','
            << fmt_double(r.displacement) << ',' << r.error << ',' << r.suc_tick << ','
            << r.exit_tick << ',' << fmt_double(r.mean_residual_norm) << '\n';
    }
}

std::vector<RunRow> read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::vector<RunRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("mode,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string field;
        RunRow r;
        auto next = [&]() {
            std::getline(ss, field, ',');
            return field;
        };
        r.mode = next();
        r.experiment = next();
        r.seed = std::stoull(next());
        r.env_id = std::stoi(next());
        r.role = next();
        r.episode = std::stoi(next());
        r.success = std::stoi(next());
        r.ret = std::stod(next());
        r.ticks = std::stoi(next());
        r.final_phase = next();
        r.pos_std = std::stod(next());
        r.ori_std = std::stod(next());
        r.ik_fallbacks = std::stol(next());
        r.clip_fraction = std::stod(next());
        rows.push_back(r);
    }
    return rows;
}

double eval_success_at(const RunResult& result, int episode) {
    double sum = 0.0;
    int count = 0;
    for (const RunRow& r : result.rows) {
        if (r.role == "eval" && r.episode == episode) {
            sum += r.success;
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

double final_eval_success(const RunResult& result, int window) {
    int max_episode = 0;
    for (const RunRow& r : result.rows)
        if (r.role == "eval") max_episode = std::max(max_episode, r.episode);
    double sum = 0.0;
    int count = 0;
    for (const RunRow& r : result.rows) {
        if (r.role == "eval" && r.episode > max_episode - window) {
            sum += r.success;
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

}  // namespace pegrl
