#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sibe/mlp.hpp"
#include "sibe/model.hpp"
#include "sibe/rng.hpp"
#include "sibe/tensor.hpp"

namespace sibe {

struct SacDims {
    std::int64_t d_c = 50;
    std::int64_t action = 1;
    std::int64_t hidden = 1024;
};

struct SacConfig {
    double gamma = 0.99;
    double init_temperature = 0.1;
    double critic_ema = 0.01;                // Q-function EMA coefficient
    std::int64_t critic_target_interval = 2;  // EMA every 2nd gradient step
    double log_std_min = -10.0;
    double log_std_max = 2.0;
};

enum class ActMode { stochastic, deterministic };

// Squashed-Gaussian policy over [-1, 1]^d_a. The head emits (mean,
// log-std) per action dim; log-std is clamped to [-10, 2] and the
// log-prob carries the tanh change-of-variables correction.
class Policy {
public:
    Policy() = default;
    Policy(SacDims dims, SacConfig cfg, Rng& rng);

    struct Sample {
        Tensor action;    // (B x d_a), componentwise in (-1, 1)
        Tensor log_prob;  // (B)
    };
    // Reparameterized sample with gradient flow into the policy head.
    Sample sample(const Tensor& c, Rng& rng) const;
    Tensor mean_action(const Tensor& c) const;  // tanh(mean)
    // (mean, log_std) of the pre-squash Gaussian, log_std already clamped.
    std::pair<Tensor, Tensor> head(const Tensor& c) const;

    std::vector<double> act(std::span<const double> c, ActMode mode, Rng& rng) const;

    std::vector<Tensor> parameters() const { return net_.parameters(); }

private:
    SacDims dims_;
    SacConfig cfg_;
    Mlp net_;  // d_c -> hidden -> hidden -> 2 d_a
};

// Double Q with EMA target copies. Targets never see an optimizer.
class TwinCritic {
public:
    TwinCritic() = default;
    TwinCritic(SacDims dims, Rng& rng);

    std::pair<Tensor, Tensor> q(const Tensor& c, const Tensor& a) const;         // (B) each
    std::pair<Tensor, Tensor> q_target(const Tensor& c, const Tensor& a) const;  // (B) each

    void ema_update(double coeff);

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> target_parameters() const;

private:
    Mlp q1_, q2_, q1_target_, q2_target_;
};

// Transitions flattened out of chunk structure for the actor-critic
// updates, with relabeled augmented rewards attached.
struct FlatBatch {
    Tensor obs;       // (N x obs_dim)
    Tensor actions;   // (N x d_a)
    Tensor next_obs;  // (N x obs_dim)
    std::vector<double> r_aug;
    std::vector<std::uint8_t> terminal;
    std::vector<std::uint8_t> truncated;
    std::int64_t size = 0;
};

// Soft actor-critic on deterministic state representations c. Critic
// gradients reach the online deterministic encoder; the actor and
// temperature never touch it.
class SacAgent {
public:
    SacAgent(SacDims dims, SacConfig cfg, Rng& rng);

    std::vector<double> act(std::span<const double> c, ActMode mode, Rng& rng) const {
        return policy_.act(c, mode, rng);
    }

    double alpha() const;
    double target_entropy() const { return -static_cast<double>(dims_.action); }

    // y = r_aug + gamma * (1 - terminal_done) * (min Q_target(c', a') -
    // alpha log pi(a'|c')), computed tape-free on the online encoder with
    // gradients structurally stopped.
    std::vector<double> critic_targets(const SibeModel& enc, const FlatBatch& batch,
                                       Rng& rng) const;
    // MSE of both critics against y; gradients reach critic params and
    // the online deterministic encoder.
    Tensor critic_loss(const SibeModel& enc, const FlatBatch& batch,
                       const std::vector<double>& targets) const;
    // E[alpha log pi(a|c) - min Q(c, a)] with c detached and critic
    // weights frozen: only policy parameters receive gradients.
    std::pair<Tensor, Tensor> actor_loss(const SibeModel& enc, const FlatBatch& batch,
                                         Rng& rng) const;  // (loss, log_prob)
    // Gradient step target for log alpha given detached log-probs.
    Tensor temperature_loss(const Tensor& log_prob_detached) const;

    // Counts gradient steps; applies the target-critic EMA on every
    // critic_target_interval-th call. Returns true when it fired.
    bool end_update_step();

    Policy& policy() { return policy_; }
    TwinCritic& critics() { return critics_; }
    const TwinCritic& critics() const { return critics_; }
    Tensor log_alpha() const { return log_alpha_; }
    const SacConfig& config() const { return cfg_; }
    std::int64_t update_count() const { return update_count_; }

    std::vector<Tensor> critic_parameters() const { return critics_.parameters(); }
    std::vector<Tensor> policy_parameters() const { return policy_.parameters(); }
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

private:
    SacDims dims_;
    SacConfig cfg_;
    Policy policy_;
    TwinCritic critics_;
    Tensor log_alpha_;
    std::int64_t update_count_ = 0;
};

}  // namespace sibe
