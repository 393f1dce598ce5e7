#include "pegrl/config.hpp"
#include "pegrl/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

pegrl::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return pegrl::load_experiment_config(pegrl::ConfigFile{});
    return pegrl::load_experiment_config(pegrl::ConfigFile::parse_file(path));
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pegrl: residual policy / feedback learning testbed"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode;
    std::string experiment;
    std::string seeds;
    std::string out_dir;
    int episodes = -1;
    int buffer_steps = -1;
    bool no_curriculum = false;
    bool strict = false;
    bool scratch = false;

    auto* run = app.add_subcommand("run", "train a residual policy and write run CSVs");
    run->add_option("--config", config_path, "config file");
    run->add_option("--mode", mode, "residual mode (none|joint_effort|ee_wrench|"
                                    "joint_pos_feedback|ee_pose_feedback|hybrid)");
    run->add_option("--experiment", experiment, "only_position|only_orientation|both");
    run->add_option("--seeds", seeds, "comma-separated seeds");
    run->add_option("--episodes", episodes, "total training episodes per seed");
    run->add_flag("--no-curriculum", no_curriculum, "train at fixed evaluation difficulty");
    run->add_option("--buffer-steps", buffer_steps, "controller buffer ticks");
    run->add_flag("--strict", strict, "strict exit-pose condition");
    run->add_flag("--scratch", scratch, "learning-from-scratch baseline");
    run->add_option("--out", out_dir, "output directory");

    std::string b_list = "0,10,50,100";
    double offset = 0.016;
    auto* diag = app.add_subcommand("diagnose-buffer", "buffer-steps resistance diagnostic");
    diag->add_option("--config", config_path, "config file");
    diag->add_option("--b", b_list, "comma-separated buffer step counts");
    diag->add_option("--offset", offset, "lateral oracle offset in meters");
    diag->add_option("--out", out_dir, "output directory");

    std::string in_dir;
    auto* summarize = app.add_subcommand("summarize", "aggregate run CSVs into a summary");
    summarize->add_option("--in", in_dir, "directory containing run.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            pegrl::ExperimentConfig cfg = load_config(config_path);
            if (!mode.empty()) {
                cfg.mode = pegrl::residual_mode_from_name(mode);
                cfg.env.mode = cfg.mode;
            }
            if (!experiment.empty()) cfg.experiment = pegrl::experiment_from_name(experiment);
            if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
            if (episodes >= 0) cfg.total_episodes = episodes;
            if (no_curriculum) cfg.curriculum_enabled = false;
            if (buffer_steps >= 0) cfg.env.machine.buffer_steps = buffer_steps;
            if (strict) cfg.env.machine.strict_condition = true;
            if (scratch) {
                cfg.scratch = true;
                cfg.env.scratch_mode = true;
            }
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            const pegrl::RunResult result = pegrl::run_experiment(cfg);
            const auto summary = pegrl::export_summary(result.rows);
            pegrl::write_summary_csv(cfg.output_dir + "/summary.csv", summary);
            std::cout << "wrote " << cfg.output_dir << "/run.csv (" << result.rows.size()
                      << " rows)\n";
            std::cout << "final eval success (last 100 episodes): "
                      << pegrl::final_eval_success(result, 100) << "\n";
        } else if (diag->parsed()) {
            pegrl::ExperimentConfig cfg = load_config(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            std::filesystem::create_directories(cfg.output_dir);
            const auto rows =
                pegrl::buffer_steps_diagnostic(cfg, parse_int_list(b_list), offset);
            const std::string path = cfg.output_dir + "/buffer_diagnostic.csv";
            pegrl::write_buffer_diag_csv(path, rows);
            std::cout << "wrote " << path << "\n";
            for (const auto& r : rows)
                std::cout << r.mode << " b=" << r.buffer_steps << " strict=" << r.strict
                          << " displacement=" << r.displacement << " error=" << r.error << "\n";
        } else if (summarize->parsed()) {
            const auto rows = pegrl::read_run_csv(in_dir + "/run.csv");
            const auto summary = pegrl::export_summary(rows);
            pegrl::write_summary_csv(in_dir + "/summary.csv", summary);
            std::cout << "wrote " << in_dir << "/summary.csv (" << summary.size() << " rows)\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
