#pragma once

#include <cstdint>
#include <vector>

#include "sibe/rng.hpp"
#include "sibe/tensor.hpp"

namespace sibe {

// Fully-connected net with ReLU hidden activations and a linear output
// layer. Weights are (in x out) so a batch forward is x @ W + b on
// (B x in) rows.
class Mlp {
public:
    Mlp() = default;
    // dims = {in, hidden..., out}
    Mlp(std::vector<std::int64_t> dims, Rng& rng, bool requires_grad = true);

    Tensor forward(const Tensor& x) const;  // (B x in) -> (B x out), (in) -> (out)

    std::vector<Tensor> parameters() const;
    void copy_from(const Mlp& other);  // values only; grad flags unchanged

    std::int64_t in_dim() const { return dims_.front(); }
    std::int64_t out_dim() const { return dims_.back(); }
    const std::vector<std::int64_t>& dims() const { return dims_; }

private:
    std::vector<std::int64_t> dims_;
    std::vector<Tensor> weights_;
    std::vector<Tensor> biases_;
};

// Orthogonal (in x out) matrix from a Gaussian draw; orthonormal columns
// when in >= out, orthonormal rows otherwise.
Tensor orthogonal_init(std::int64_t in, std::int64_t out, Rng& rng, bool requires_grad);

// target <- tau * online + (1 - tau) * target, elementwise over matching
// parameter lists. tau must lie in (0, 1].
void ema_update_params(std::vector<Tensor>& target, const std::vector<Tensor>& online, double tau);

// Temporarily clears requires_grad on a parameter set so a forward pass
// treats the values as constants (gradients still flow through inputs).
class ParamFreeze {
public:
    explicit ParamFreeze(std::vector<Tensor> params);
    ~ParamFreeze();
    ParamFreeze(const ParamFreeze&) = delete;
    ParamFreeze& operator=(const ParamFreeze&) = delete;

private:
    std::vector<Tensor> params_;
    std::vector<bool> saved_;
};

}  // namespace sibe
