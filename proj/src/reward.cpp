#include "sibe/reward.hpp"

#include "sibe/errors.hpp"

namespace sibe {

std::vector<double> intrinsic_reward(const std::vector<double>& per_sample_nce,
                                     const RewardConfig& cfg) {
    if (cfg.lambda < 0.0) throw ValueError("intrinsic_reward: lambda must be nonnegative");
    std::vector<double> out(per_sample_nce.size(), 0.0);
    if (!cfg.use_intrinsic) return out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cfg.lambda * per_sample_nce[i];
    return out;
}

std::vector<double> augment(const std::vector<double>& r_env,
                            const std::vector<double>& r_star) {
    if (r_env.size() != r_star.size())
        throw ShapeError("augment: reward matrices differ in size (" +
                         std::to_string(r_env.size()) + " vs " + std::to_string(r_star.size()) +
                         ")");
    std::vector<double> out(r_env.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r_env[i] + r_star[i];
    return out;
}

}  // namespace sibe
