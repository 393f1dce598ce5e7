#include "pegrl/curriculum.hpp"

#include "pegrl/arm.hpp"
#include "pegrl/math.hpp"

namespace pegrl {

const char* experiment_name(Experiment e) {
    switch (e) {
        case Experiment::OnlyPosition: return "only_position";
        case Experiment::OnlyOrientation: return "only_orientation";
        case Experiment::Both: return "both";
    }
    return "?";
}

Experiment experiment_from_name(const std::string& name) {
    if (name == "only_position") return Experiment::OnlyPosition;
    if (name == "only_orientation") return Experiment::OnlyOrientation;
    if (name == "both") return Experiment::Both;
    throw ConfigError("unknown experiment profile: " + name);
}

double CurriculumState::success_rate() const {
    if (window.empty()) return 0.0;
    int hits = 0;
    for (int s : window) hits += s;
    return static_cast<double>(hits) / static_cast<double>(window.size());
}

CurriculumState record_episode(CurriculumState state, bool success) {
    state.window.push_back(success ? 1 : 0);
    if (static_cast<int>(state.window.size()) > state.window_capacity)
        state.window.erase(state.window.begin());
    return state;
}

CurriculumState adapt(CurriculumState state) {
    if (!state.window_full()) return state;
    const double rate = state.success_rate();
    bool changed = false;
    if (rate > state.upper_bound) {
        state.pos_std = clamp(state.pos_std + state.pos_increment, state.pos_floor,
                              state.pos_ceiling);
        state.ori_std = clamp(state.ori_std + state.ori_increment, state.ori_floor,
                              state.ori_ceiling);
        changed = true;
    } else if (rate < state.lower_bound) {
        state.pos_std = clamp(state.pos_std - state.pos_increment, state.pos_floor,
                              state.pos_ceiling);
        state.ori_std = clamp(state.ori_std - state.ori_increment, state.ori_floor,
                              state.ori_ceiling);
        changed = true;
    }
    if (changed) state.window.clear();
    return state;
}

DifficultyProfile difficulty_profile(Experiment experiment) {
    DifficultyProfile p;
    switch (experiment) {
        case Experiment::OnlyPosition:
            p.train.pos_std = 0.007;
            p.train.pos_increment = 0.001;
            p.train.ori_std = 0.0;
            p.train.ori_increment = 0.0;
            p.eval_pos_std = 0.016;
            p.eval_ori_std = 0.0;
            break;
        case Experiment::OnlyOrientation:
            p.train.pos_std = 0.0;
            p.train.pos_increment = 0.0;
            p.train.ori_std = 0.05;
            p.train.ori_increment = 0.01;
            p.eval_pos_std = 0.0;
            p.eval_ori_std = 0.15;
            break;
        case Experiment::Both:
            p.train.pos_std = 0.007;
            p.train.pos_increment = 0.001;
            p.train.ori_std = 0.05;
            p.train.ori_increment = 0.01;
            p.eval_pos_std = 0.015;
            p.eval_ori_std = 0.1;
            break;
    }
    // Ceilings leave room for the curriculum to overshoot the evaluation level.
    p.train.pos_ceiling = 2.0 * p.eval_pos_std;
    p.train.ori_ceiling = 2.0 * p.eval_ori_std;
    return p;
}

}  // namespace pegrl
