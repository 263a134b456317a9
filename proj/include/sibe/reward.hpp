#pragma once

#include <cstdint>
#include <vector>

namespace sibe {

struct RewardConfig {
    double lambda = 0.001;
    bool use_intrinsic = true;  // ablation switch
};

// r* = lambda * per-sample InfoNCE term, elementwise over the [B][L]
// matrix. Plain data in, plain data out: the reward is detached from the
// computation graph by construction. All entries are >= 0.
std::vector<double> intrinsic_reward(const std::vector<double>& per_sample_nce,
                                     const RewardConfig& cfg);

// r_aug = r_env + r*, elementwise.
std::vector<double> augment(const std::vector<double>& r_env, const std::vector<double>& r_star);

}  // namespace sibe
