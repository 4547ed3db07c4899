#pragma once

#include <cstdint>
#include <string>

#include "../core/error.hpp"

namespace vmms::rl {

enum class Ablation { none, no_teachers, no_asymmetry, no_pose, plain_ddpg };

inline std::string to_string(Ablation a)
{
    switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_teachers: return "no-teachers";
    case Ablation::no_asymmetry: return "no-asymmetry";
    case Ablation::no_pose: return "no-pose";
    case Ablation::plain_ddpg: return "plain-ddpg";
    }
    return "?";
}

inline Ablation parse_ablation(const std::string& s)
{
    for (auto a : {Ablation::none, Ablation::no_teachers, Ablation::no_asymmetry, Ablation::no_pose, Ablation::plain_ddpg})
        if (to_string(a) == s) return a;
    throw usage_error("unknown ablation '" + s + "' (expected none|no-teachers|no-asymmetry|no-pose|plain-ddpg)");
}

struct TrainConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double lr_actor = 1e-4;
    double lr_critic = 1e-3;
    int batch = 64;
    std::int64_t warmup_steps = 500;
    double noise_sigma = 0.005;
    int commit_window = 4;
    int ensemble = 5;
    std::int64_t replay_capacity = 50000;
    std::int64_t max_env_steps = 8000;
    std::int64_t eval_every = 500;
    std::int64_t checkpoint_every = 0; ///< 0 writes only the final checkpoint
    std::uint64_t seed = 0;
    bool use_teachers = true;
    bool asymmetric = true;  ///< critic reads the privileged state
    bool bootstrap_timeouts = true; ///< a step-limit cut is stored as non-terminal; only uncovering ends the return
    double actor_final_init = 3e-3;
    double critic_final_init = 3e-3;
    double action_input_scale = 20.0; ///< critic sees the action in units of the max step
    double state_input_scale = 10.0;  ///< relative positions (actor image and privileged state), metres to decimetres
    double critic_output_scale = 10.0; ///< returns span tens of reward units; Adam moves raw outputs ~lr per step
    int hidden = 256;
    int head_width = 32;
    int conv1 = 8;
    int conv2 = 16;
    int conv3 = 16;
    int eval_jobs = 1;
    bool record_wall_time = false; ///< off keeps metrics files bitwise reproducible

    void validate() const
    {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw usage_error("gamma must lie in [0, 1)");
        if (!(tau > 0.0 && tau <= 1.0)) throw usage_error("tau must lie in (0, 1]");
        if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw usage_error("learning rates must be positive");
        if (batch < 1) throw usage_error("batch must be positive");
        if (warmup_steps < 0 || max_env_steps < 0) throw usage_error("step counts must be non-negative");
        if (eval_every < 1) throw usage_error("eval_every must be positive");
        if (commit_window < 1) throw usage_error("commit_window must be positive");
        if (ensemble < 1) throw usage_error("ensemble must be positive");
        if (replay_capacity < 1) throw usage_error("replay_capacity must be positive");
        if (noise_sigma < 0.0) throw usage_error("noise_sigma must be non-negative");
        if (checkpoint_every < 0) throw usage_error("checkpoint_every must be non-negative");
    }
};

} // namespace vmms::rl
