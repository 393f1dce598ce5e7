#pragma once

#include <string>
#include <vector>

namespace pegrl {

enum class Experiment { OnlyPosition, OnlyOrientation, Both };

const char* experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

// Adaptive domain randomization state: one instance per training environment,
// pure value-semantics updates.
struct CurriculumState {
    double pos_std = 0.0;       // m
    double ori_std = 0.0;       // rad
    double pos_increment = 0.0;
    double ori_increment = 0.0;
    double lower_bound = 0.6;
    double upper_bound = 0.7;
    int window_capacity = 15;
    std::vector<int> window;
    double pos_floor = 0.0;
    double ori_floor = 0.0;
    double pos_ceiling = 1e9;
    double ori_ceiling = 1e9;

    double success_rate() const;
    bool window_full() const { return static_cast<int>(window.size()) >= window_capacity; }
};

CurriculumState record_episode(CurriculumState state, bool success);

// Widen above the upper bound, narrow below the lower bound, clamp to
// floors/ceilings; the window is cleared after any change so each difficulty
// level gathers fresh evidence.
CurriculumState adapt(CurriculumState state);

struct DifficultyProfile {
    CurriculumState train;
    double eval_pos_std = 0.0;
    double eval_ori_std = 0.0;
};

DifficultyProfile difficulty_profile(Experiment experiment);

}  // namespace pegrl
