#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sibe/tensor.hpp"

namespace sibe {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update on a raw parameter buffer. t is the
// step count after this update (1 on the first call).
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t t, const AdamConfig& cfg);

// Adam over a fixed list of leaf tensors. Gradients are read from the
// tensors' grad buffers; a parameter whose grad was never touched is
// treated as zero-gradient.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace sibe
