#include "sibe/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "sibe/errors.hpp"

namespace sibe {

namespace {

constexpr double kPmDt = 0.1;
constexpr double kPmDamping = 0.05;
constexpr double kPmAccel = 0.5;
constexpr double kPmVMax = 2.0;
constexpr double kPmGoalRadius = 0.1;

constexpr double kPendDt = 0.05;
constexpr double kPendG = 10.0;
constexpr double kPendMaxSpeed = 8.0;

double wrap_angle(double t) {
    // into [-pi, pi)
    t = std::fmod(t + std::numbers::pi, 2.0 * std::numbers::pi);
    if (t < 0) t += 2.0 * std::numbers::pi;
    return t - std::numbers::pi;
}

}  // namespace

TaskId task_from_string(const std::string& s) {
    if (s == "pointmass") return TaskId::pointmass;
    if (s == "pendulum") return TaskId::pendulum;
    if (s == "pendulum-sparse") return TaskId::pendulum_sparse;
    throw ConfigError("unknown task '" + s + "' (expected pointmass|pendulum|pendulum-sparse)");
}

DistractorMode distractor_from_string(const std::string& s) {
    if (s == "clean") return DistractorMode::clean;
    if (s == "noise") return DistractorMode::white_noise;
    if (s == "natural") return DistractorMode::natural;
    throw ConfigError("unknown distractor mode '" + s + "' (expected clean|noise|natural)");
}

std::string to_string(TaskId t) {
    switch (t) {
        case TaskId::pointmass: return "pointmass";
        case TaskId::pendulum: return "pendulum";
        case TaskId::pendulum_sparse: return "pendulum-sparse";
    }
    return "?";
}

std::string to_string(DistractorMode m) {
    switch (m) {
        case DistractorMode::clean: return "clean";
        case DistractorMode::white_noise: return "noise";
        case DistractorMode::natural: return "natural";
    }
    return "?";
}

void EnvConfig::validate() const {
    if (distractor != DistractorMode::clean && distractor_dim <= 0)
        throw ConfigError("distractor_dim must be positive");
    if (frame_stack <= 0) throw ConfigError("frame_stack must be positive");
    if (action_repeat < 1) throw ConfigError("action_repeat must be >= 1");
    if (episode_len <= 0) throw ConfigError("episode_len must be positive");
}

// ---- DistractorProcess ------------------------------------------------------

DistractorProcess::DistractorProcess(DistractorMode mode, std::int64_t dim)
    : mode_(mode), dim_(mode == DistractorMode::clean ? 0 : dim) {}

void DistractorProcess::reset(Rng stream) {
    rng_ = stream;
    if (mode_ == DistractorMode::natural) {
        std::int64_t systems = (dim_ + 2) / 3;
        lorenz_.resize(static_cast<std::size_t>(systems * 3));
        for (std::int64_t s = 0; s < systems; ++s) {
            lorenz_[static_cast<std::size_t>(3 * s + 0)] = rng_.uniform(-15.0, 15.0);
            lorenz_[static_cast<std::size_t>(3 * s + 1)] = rng_.uniform(-15.0, 15.0);
            lorenz_[static_cast<std::size_t>(3 * s + 2)] = rng_.uniform(10.0, 40.0);
        }
    }
}

std::vector<double> DistractorProcess::advance() {
    switch (mode_) {
        case DistractorMode::clean: return {};
        case DistractorMode::white_noise: return rng_.normal_vector(static_cast<std::size_t>(dim_));
        case DistractorMode::natural: break;
    }
    // One RK4 step per oscillator at dt = 0.01.
    constexpr double sig = 10.0, rho = 28.0, beta = 8.0 / 3.0, dt = 0.01;
    auto deriv = [](const double s[3], double d[3]) {
        d[0] = sig * (s[1] - s[0]);
        d[1] = s[0] * (rho - s[2]) - s[1];
        d[2] = s[0] * s[1] - beta * s[2];
    };
    std::int64_t systems = static_cast<std::int64_t>(lorenz_.size()) / 3;
    for (std::int64_t sys = 0; sys < systems; ++sys) {
        double* s = lorenz_.data() + 3 * sys;
        double k1[3], k2[3], k3[3], k4[3], tmp[3];
        deriv(s, k1);
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
        deriv(tmp, k2);
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
        deriv(tmp, k3);
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + dt * k3[i];
        deriv(tmp, k4);
        for (int i = 0; i < 3; ++i)
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    std::vector<double> out(static_cast<std::size_t>(dim_));
    for (std::int64_t i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = lorenz_[static_cast<std::size_t>(i)] / 20.0;
    return out;
}

// ---- EnvInstance ------------------------------------------------------------

EnvInstance::EnvInstance(EnvConfig cfg, Rng rng)
    : cfg_(cfg), distractor_(cfg.distractor, cfg.distractor_dim) {
    cfg_.validate();
    init_master_ = rng.fork("init");
    distractor_master_ = rng.fork("distractor");
}

EnvInstance::EnvInstance(const EnvConfig& cfg) : EnvInstance(cfg, Rng(cfg.seed)) {}

std::int64_t EnvInstance::frame_dim() const {
    std::int64_t phys = (cfg_.task == TaskId::pointmass) ? 6 : 3;
    return phys + distractor_.dim();
}

std::int64_t EnvInstance::action_dim() const {
    return cfg_.task == TaskId::pointmass ? 2 : 1;
}

void EnvInstance::init_physical(Rng& rng) {
    if (cfg_.task == TaskId::pointmass) {
        px_ = rng.uniform(-0.85, -0.65);
        py_ = rng.uniform(-0.85, -0.65);
        vx_ = vy_ = 0.0;
        // Fresh goal every episode; the goal is part of the observation,
        // so the policy has to learn goal-conditioned navigation.
        gx_ = rng.uniform(-0.75, 0.75);
        gy_ = rng.uniform(-0.75, 0.75);
        if (cfg_.goal_override) {
            gx_ = (*cfg_.goal_override)[0];
            gy_ = (*cfg_.goal_override)[1];
        }
    } else {
        // Near the unstable bottom configuration.
        theta_ = wrap_angle(std::numbers::pi + rng.uniform(-0.2, 0.2));
        theta_dot_ = rng.uniform(-0.5, 0.5);
    }
}

std::vector<double> EnvInstance::physical_features() const {
    if (cfg_.task == TaskId::pointmass) return {px_, py_, vx_, vy_, gx_, gy_};
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

double EnvInstance::compute_reward() const {
    switch (cfg_.task) {
        case TaskId::pointmass: {
            double dx = px_ - gx_, dy = py_ - gy_;
            return std::sqrt(dx * dx + dy * dy) < kPmGoalRadius ? 1.0 : 0.0;
        }
        case TaskId::pendulum:
            return (std::cos(theta_) + 1.0) / 2.0;
        case TaskId::pendulum_sparse:
            return std::cos(theta_) > 0.95 ? 1.0 : 0.0;
    }
    return 0.0;
}

std::vector<double> EnvInstance::reset() {
    ++episode_index_;
    step_count_ = 0;
    episode_active_ = true;
    Rng init_stream = init_master_.fork("ep", static_cast<std::uint64_t>(episode_index_));
    init_physical(init_stream);
    distractor_.reset(distractor_master_.fork("ep", static_cast<std::uint64_t>(episode_index_)));

    std::vector<double> frame = physical_features();
    std::vector<double> dvec = distractor_.advance();
    frame.insert(frame.end(), dvec.begin(), dvec.end());
    // After reset all j slots hold the initial observation.
    stack_.clear();
    for (std::int64_t i = 0; i < cfg_.frame_stack; ++i)
        stack_.insert(stack_.end(), frame.begin(), frame.end());
    return stack_;
}

void EnvInstance::physics_substep(std::span<const double> a) {
    if (cfg_.task == TaskId::pointmass) {
        vx_ = (1.0 - kPmDamping) * vx_ + kPmAccel * a[0] * kPmDt;
        vy_ = (1.0 - kPmDamping) * vy_ + kPmAccel * a[1] * kPmDt;
        double speed = std::sqrt(vx_ * vx_ + vy_ * vy_);
        if (speed > kPmVMax) {
            vx_ *= kPmVMax / speed;
            vy_ *= kPmVMax / speed;
        }
        px_ = std::clamp(px_ + vx_ * kPmDt, -1.0, 1.0);
        py_ = std::clamp(py_ + vy_ * kPmDt, -1.0, 1.0);
    } else {
        double accel = -kPendG * std::sin(theta_) + 3.0 * a[0];
        theta_dot_ = std::clamp(theta_dot_ + accel * kPendDt, -kPendMaxSpeed, kPendMaxSpeed);
        theta_ = wrap_angle(theta_ + theta_dot_ * kPendDt);
    }
}

std::vector<double> EnvInstance::push_frame(const std::vector<double>& frame) {
    std::int64_t fd = frame_dim();
    // Ring shifted by exactly one slot: drop oldest, append newest last.
    std::move(stack_.begin() + fd, stack_.end(), stack_.begin());
    std::copy(frame.begin(), frame.end(), stack_.end() - fd);
    return stack_;
}

StepResult EnvInstance::step(std::span<const double> action) {
    if (!episode_active_)
        throw ValueError("step() on a finished episode; call reset() first");
    if (static_cast<std::int64_t>(action.size()) != action_dim())
        throw ShapeError("action dim mismatch: expected " + std::to_string(action_dim()) +
                         ", got " + std::to_string(action.size()));

    std::vector<double> a(action.begin(), action.end());
    for (auto& v : a) {
        if (v < -1.0 || v > 1.0) {
            if (!warned_action_clamp_) {
                std::fprintf(stderr, "[env] warning: action out of [-1,1], clamping\n");
                warned_action_clamp_ = true;
            }
            v = std::clamp(v, -1.0, 1.0);
        }
    }

    for (std::int64_t r = 0; r < cfg_.action_repeat; ++r) physics_substep(a);

    std::vector<double> frame = physical_features();
    std::vector<double> dvec = distractor_.advance();
    frame.insert(frame.end(), dvec.begin(), dvec.end());

    StepResult res;
    res.obs = push_frame(frame);
    res.reward = compute_reward();
    ++step_count_;
    if (step_count_ >= cfg_.episode_len) {
        res.done = true;
        res.truncated = true;  // time-limit cut, bootstrap continues
        episode_active_ = false;
    }
    return res;
}

// ---- TrajectoryWriter -------------------------------------------------------

struct TrajectoryWriter::Impl {
    std::ofstream out;
};

TrajectoryWriter::TrajectoryWriter(const std::string& path, std::int64_t obs_dim,
                                   std::int64_t action_dim)
    : impl_(new Impl) {
    impl_->out.open(path);
    if (!impl_->out) throw ConfigError("cannot open trajectory file '" + path + "'");
    impl_->out << "step,reward,done";
    for (std::int64_t i = 0; i < obs_dim; ++i) impl_->out << ",obs" << i;
    for (std::int64_t i = 0; i < action_dim; ++i) impl_->out << ",act" << i;
    impl_->out << "\n";
}

TrajectoryWriter::~TrajectoryWriter() { delete impl_; }

void TrajectoryWriter::append(std::int64_t step, double reward, bool done,
                              std::span<const double> obs, std::span<const double> action) {
    char buf[32];
    impl_->out << step << ",";
    std::snprintf(buf, sizeof buf, "%.6g", reward);
    impl_->out << buf << "," << (done ? 1 : 0);
    for (double v : obs) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        impl_->out << "," << buf;
    }
    for (double v : action) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        impl_->out << "," << buf;
    }
    impl_->out << "\n";
}

}  // namespace sibe
