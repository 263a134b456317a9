#pragma once

#include <cstdint>
#include <array>
#include <functional>
#include <optional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sibe/adam.hpp"
#include "sibe/env.hpp"
#include "sibe/model.hpp"
#include "sibe/replay.hpp"
#include "sibe/reward.hpp"
#include "sibe/sac.hpp"

namespace sibe {

struct RunConfig {
    std::string task = "pointmass";
    std::string distractor = "clean";
    std::uint64_t seed = 0;
    std::int64_t total_env_steps = 100000;
    std::int64_t batch_size = 256;
    std::int64_t chunk_len = 2;
    double alpha = 0.1;
    double lambda = 0.001;
    double tau = 0.05;
    double gamma = 0.99;
    double lr_model = 1e-4;
    double lr_actor_critic = 1e-3;
    std::int64_t initial_steps = 1000;
    std::int64_t eval_interval = 10000;
    std::int64_t eval_episodes = 10;
    bool no_intrinsic_reward = false;
    bool no_compression = false;
    std::string out_dir = "runs/out";

    std::int64_t distractor_dim = 16;
    std::int64_t frame_stack = 3;
    std::int64_t action_repeat = 4;
    std::int64_t episode_len = 250;
    std::int64_t replay_capacity = 100000;
    std::int64_t d_c = 50;
    std::int64_t d_z = 50;
    std::int64_t d_f = 50;
    std::int64_t hidden_dim = 1024;
    std::int64_t ac_hidden_dim = 1024;
    double init_temperature = 0.1;
    double critic_ema = 0.01;
    std::int64_t critic_target_interval = 2;
    // Pins the point-mass goal; mainly a test hook (null in JSON when unset).
    std::optional<std::array<double, 2>> goal_override;

    void validate() const;
    EnvConfig env_config() const;
    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
};

struct EvalResult {
    double mean_return = 0.0;
    double std_return = 0.0;
};

struct TrainResult {
    std::vector<std::int64_t> eval_steps;
    std::vector<double> eval_means;
    std::vector<double> eval_stds;
    double final_eval_mean = 0.0;
    double final_eval_std = 0.0;
    std::int64_t episodes = 0;
    std::int64_t gradient_steps = 0;
    std::int64_t critic_target_events = 0;
    double min_r_star = std::numeric_limits<double>::infinity();
    std::string metrics_path;
    std::string checkpoint_path;
    double wall_seconds = 0.0;
};

// Owns the whole training state for one run and executes the per-step
// loop: collect one transition, sample a chunk minibatch, representation
// update, reward relabeling, actor-critic updates, EMA maintenance.
class Trainer {
public:
    struct Options {
        // Skips the reward module entirely (r_aug = r_env); used to pin
        // down that lambda = 0 and "no reward module" are bit-identical.
        bool bypass_reward_module = false;
        // Invoked after every environment step (post-update).
        std::function<void(std::int64_t step, Trainer&)> probe;
    };

    explicit Trainer(RunConfig cfg) : Trainer(std::move(cfg), Options{}) {}
    Trainer(RunConfig cfg, Options opts);

    TrainResult train();

    // Deterministic-policy evaluation on fresh environments, keyed by
    // label so repeated calls reproduce. Never mutates training state.
    EvalResult evaluate(std::int64_t n_episodes, std::uint64_t stream_key) const;

    void save_checkpoint_file(const std::string& path) const;

    const RunConfig& config() const { return cfg_; }
    SibeModel& model() { return *model_; }
    const SibeModel& model() const { return *model_; }
    SacAgent& agent() { return *agent_; }
    const SacAgent& agent() const { return *agent_; }
    ReplayBuffer& buffer() { return *buffer_; }
    std::int64_t gradient_steps() const { return gradient_steps_; }

    std::vector<std::pair<std::string, Tensor>> all_named_parameters() const;

private:
    struct StepStats;
    void gradient_step(StepStats& stats);
    FlatBatch flatten(const ChunkBatch& batch, const std::vector<double>& r_aug) const;

    RunConfig cfg_;
    Options opts_;
    Rng root_;
    Rng warmup_rng_, policy_rng_, replay_rng_, update_rng_;
    Rng eval_root_;
    std::unique_ptr<EnvInstance> env_;
    std::unique_ptr<SibeModel> model_;
    std::unique_ptr<SacAgent> agent_;
    std::unique_ptr<ReplayBuffer> buffer_;
    std::unique_ptr<Adam> model_opt_, critic_opt_, actor_opt_, temp_opt_;
    RewardConfig reward_cfg_;
    std::int64_t gradient_steps_ = 0;
    std::int64_t critic_target_events_ = 0;
    double min_r_star_ = std::numeric_limits<double>::infinity();
};

// Loads a checkpoint written by Trainer and rebuilds model + agent for
// evaluation.
struct LoadedRun {
    RunConfig cfg;
    std::unique_ptr<SibeModel> model;
    std::unique_ptr<SacAgent> agent;

    EvalResult evaluate(std::int64_t n_episodes, std::uint64_t stream_key,
                        const std::string& dump_path = "") const;
};
LoadedRun load_run(const std::string& checkpoint_path);

// ---- ablation suite ---------------------------------------------------------

struct AblationRun {
    std::string variant;
    std::int64_t chunk_len = 2;
    std::uint64_t seed = 0;
    TrainResult result;
};

struct AblationOptions {
    std::vector<std::string> variants = {"full", "no_intrinsic_reward", "no_compression"};
    std::vector<std::int64_t> chunk_lens;  // empty: base chunk_len only
    std::int64_t num_seeds = 5;
    int jobs = 0;  // 0: hardware concurrency
    std::string out_dir;
};

RunConfig apply_variant(RunConfig cfg, const std::string& variant);

// Runs variants x chunk lengths x seeds (parallel across runs) and
// writes runs.csv (one row per run) and summary.csv (mean +- stderr per
// eval interval) under out_dir.
std::vector<AblationRun> run_ablation_suite(const RunConfig& base, const AblationOptions& opts);

// Simple worker pool over independent jobs; each job must own its state.
void parallel_run(std::vector<std::function<void()>> jobs, int workers);

}  // namespace sibe
