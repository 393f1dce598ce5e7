#pragma once

#include "pegrl/config.hpp"

#include <string>
#include <vector>

namespace pegrl {

struct RunRow {
    std::string mode;
    std::string experiment;
    std::uint64_t seed = 0;
    int env_id = 0;
    std::string role;  // "train" | "eval"
    int episode = 0;   // train-episode counter at which this row was produced
    int success = 0;
    double ret = 0.0;
    int ticks = 0;
    std::string final_phase;
    double pos_std = 0.0;
    double ori_std = 0.0;
    long ik_fallbacks = 0;
    double clip_fraction = 0.0;
};

struct CurriculumRow {
    std::uint64_t seed = 0;
    int env_id = 0;
    int episode = 0;
    double pos_std = 0.0;
    double ori_std = 0.0;
    int success = 0;
};

struct RunResult {
    std::vector<RunRow> rows;
    std::vector<CurriculumRow> curriculum;
};

// Collect-update training across seeds with concurrent evaluation at the
// fixed evaluation difficulty. Deterministic per seed. Writes run.csv and
// curriculum.csv under cfg.output_dir.
RunResult run_experiment(const ExperimentConfig& cfg);

// Same pipeline with the learning-from-scratch control: FindContact and
// HybridForceAlign keep the controller, SearchHole and Insertion run on raw
// policy torques.
RunResult run_scratch_baseline(ExperimentConfig cfg);

// In-memory variant (no CSV output) shared by the CLI and the test suites.
RunResult run_training(const ExperimentConfig& cfg);

struct BufferDiagRow {
    std::string mode;
    int buffer_steps = 0;
    int strict = 0;
    double displacement = 0.0;  // net lateral TCP displacement at state exit
    int error = 0;              // strict-condition error flag
    int suc_tick = 0;
    int exit_tick = 0;
    double mean_residual_norm = 0.0;
};

// Resistance probe: a scripted residual drives the TCP toward a laterally
// offset target during MoveToPreInsert; records what survives the buffer.
std::vector<BufferDiagRow> buffer_steps_diagnostic(const ExperimentConfig& base,
                                                   const std::vector<int>& b_values,
                                                   double oracle_offset);

struct SummaryRow {
    std::string mode;
    std::string experiment;
    int episode = 0;
    double mean_success = 0.0;
    double std_success = 0.0;
    int n_seeds = 0;
};

// Across-seed mean/std of eval success per eval point.
std::vector<SummaryRow> export_summary(const std::vector<RunRow>& rows);

void write_run_csv(const std::string& path, const std::vector<RunRow>& rows);
void write_curriculum_csv(const std::string& path, const std::vector<CurriculumRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
void write_buffer_diag_csv(const std::string& path, const std::vector<BufferDiagRow>& rows);
std::vector<RunRow> read_run_csv(const std::string& path);

// Final eval success averaged over eval rows in the last `window` train
// episodes, across all seeds.
double final_eval_success(const RunResult& result, int window);
double eval_success_at(const RunResult& result, int episode);

}  // namespace pegrl
