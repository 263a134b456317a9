#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sibe/rng.hpp"

namespace sibe {

enum class TaskId { pointmass, pendulum, pendulum_sparse };
enum class DistractorMode { clean, white_noise, natural };

TaskId task_from_string(const std::string& s);
DistractorMode distractor_from_string(const std::string& s);
std::string to_string(TaskId t);
std::string to_string(DistractorMode m);

struct EnvConfig {
    TaskId task = TaskId::pointmass;
    DistractorMode distractor = DistractorMode::clean;
    std::int64_t distractor_dim = 16;  // d_n; ignored in clean mode
    std::int64_t frame_stack = 3;      // j
    std::int64_t action_repeat = 4;
    std::int64_t episode_len = 250;    // agent steps
    std::uint64_t seed = 0;
    // Test hook: pin the point-mass goal (e.g. outside the box).
    std::optional<std::array<double, 2>> goal_override;

    void validate() const;
};

// Task-irrelevant observation channels. White noise draws i.i.d. N(0,1)
// per agent step; natural mode runs independent Lorenz oscillators
// (sigma=10, rho=28, beta=8/3, dt=0.01, outputs scaled by 1/20) whose
// trajectory never depends on agent actions.
class DistractorProcess {
public:
    DistractorProcess(DistractorMode mode, std::int64_t dim);

    void reset(Rng stream);
    std::vector<double> advance();

    std::int64_t dim() const { return mode_ == DistractorMode::clean ? 0 : dim_; }

private:
    DistractorMode mode_;
    std::int64_t dim_;
    Rng rng_{0};
    std::vector<double> lorenz_;  // (x, y, z) per oscillator
};

struct StepResult {
    std::vector<double> obs;  // stacked
    double reward = 0.0;
    bool done = false;       // episode over (time limit here)
    bool truncated = false;  // true when done is a time-limit cut
};

// Simulated control task with frame stacking and distractor channels.
// Point mass: semi-implicit Euler, v <- 0.95 v + 0.5 a dt, p <- p + v dt,
// dt = 0.1, sparse reward inside a 0.1-radius goal region.
// Pendulum: theta'' = -(g/l) sin(theta) + 3 a / (m l^2), g = 10, m = l = 1,
// dt = 0.05; theta = 0 is the rewarded (upright) configuration.
class EnvInstance {
public:
    EnvInstance(EnvConfig cfg, Rng rng);
    explicit EnvInstance(const EnvConfig& cfg);

    std::vector<double> reset();
    StepResult step(std::span<const double> action);

    std::int64_t frame_dim() const;  // physical features + distractor channels
    std::int64_t obs_dim() const { return frame_dim() * cfg_.frame_stack; }
    std::int64_t action_dim() const;
    const EnvConfig& config() const { return cfg_; }
    std::int64_t steps_taken() const { return step_count_; }

private:
    void init_physical(Rng& rng);
    void physics_substep(std::span<const double> a);
    std::vector<double> physical_features() const;
    double compute_reward() const;
    std::vector<double> push_frame(const std::vector<double>& frame);

    EnvConfig cfg_;
    Rng init_master_{0};
    Rng distractor_master_{0};
    DistractorProcess distractor_;

    // point mass
    double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0, gx_ = 0, gy_ = 0;
    // pendulum
    double theta_ = 0, theta_dot_ = 0;

    std::int64_t episode_index_ = -1;
    std::int64_t step_count_ = 0;
    bool episode_active_ = false;
    bool warned_action_clamp_ = false;
    std::vector<double> stack_;
};

// Debug trajectory dump: step, reward, done, then obs and action columns.
class TrajectoryWriter {
public:
    TrajectoryWriter(const std::string& path, std::int64_t obs_dim, std::int64_t action_dim);
    ~TrajectoryWriter();
    void append(std::int64_t step, double reward, bool done, std::span<const double> obs,
                std::span<const double> action);

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace sibe
