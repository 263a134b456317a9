#include "sibe/mlp.hpp"

#include <cmath>

#include "sibe/errors.hpp"

namespace sibe {

Tensor orthogonal_init(std::int64_t in, std::int64_t out, Rng& rng, bool requires_grad) {
    // Modified Gram-Schmidt on the long-axis vectors of a Gaussian draw.
    std::int64_t n = std::max(in, out), m = std::min(in, out);
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(m));
    for (auto& c : cols) c = rng.normal_vector(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            double dot = 0.0;
            for (std::int64_t r = 0; r < n; ++r) dot += cols[i][r] * cols[j][r];
            for (std::int64_t r = 0; r < n; ++r) cols[j][r] -= dot * cols[i][r];
        }
        double norm = 0.0;
        for (std::int64_t r = 0; r < n; ++r) norm += cols[j][r] * cols[j][r];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw; fall back to a unit vector on this axis.
            std::fill(cols[j].begin(), cols[j].end(), 0.0);
            cols[j][j % static_cast<std::size_t>(n)] = 1.0;
        } else {
            for (std::int64_t r = 0; r < n; ++r) cols[j][r] /= norm;
        }
    }
    std::vector<double> w(static_cast<std::size_t>(in * out));
    for (std::int64_t i = 0; i < in; ++i)
        for (std::int64_t j = 0; j < out; ++j)
            w[static_cast<std::size_t>(i * out + j)] =
                (in >= out) ? cols[static_cast<std::size_t>(j)][i]
                            : cols[static_cast<std::size_t>(i)][j];
    return Tensor::from_data({in, out}, std::move(w), requires_grad);
}

Mlp::Mlp(std::vector<std::int64_t> dims, Rng& rng, bool requires_grad) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw ConfigError("Mlp needs at least input and output dims");
    for (auto d : dims_)
        if (d <= 0) throw ConfigError("Mlp dims must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        weights_.push_back(orthogonal_init(dims_[l], dims_[l + 1], rng, requires_grad));
        biases_.push_back(Tensor::zeros({dims_[l + 1]}, requires_grad));
    }
}

Tensor Mlp::forward(const Tensor& x) const {
    if (weights_.empty()) throw ValueError("forward on an uninitialized Mlp");
    if (x.cols() != dims_.front())
        throw ShapeError("Mlp input dim mismatch: expected " + std::to_string(dims_.front()) +
                         " features, got " + shape_str(x.shape()));
    bool vector_in = x.ndim() == 1;
    Tensor h = vector_in ? reshape(x, {1, x.cols()}) : x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add(matmul(h, weights_[l]), biases_[l]);
        if (l + 1 < weights_.size()) h = relu(h);
    }
    return vector_in ? reshape(h, {h.cols()}) : h;
}

std::vector<Tensor> Mlp::parameters() const {
    std::vector<Tensor> out;
    out.reserve(weights_.size() * 2);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(weights_[l]);
        out.push_back(biases_[l]);
    }
    return out;
}

void Mlp::copy_from(const Mlp& other) {
    if (dims_ != other.dims_) throw ShapeError("Mlp::copy_from: architecture mismatch");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto src_w = other.weights_[l].value();
        auto dst_w = weights_[l].value_mut();
        std::copy(src_w.begin(), src_w.end(), dst_w.begin());
        auto src_b = other.biases_[l].value();
        auto dst_b = biases_[l].value_mut();
        std::copy(src_b.begin(), src_b.end(), dst_b.begin());
    }
}

void ema_update_params(std::vector<Tensor>& target, const std::vector<Tensor>& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0))
        throw ValueError("ema_update: tau must lie in (0, 1], got " + std::to_string(tau));
    if (target.size() != online.size())
        throw ShapeError("ema_update: parameter list sizes differ");
    for (std::size_t k = 0; k < target.size(); ++k) {
        if (target[k].shape() != online[k].shape())
            throw ShapeError("ema_update: parameter shape mismatch at index " + std::to_string(k));
        auto t = target[k].value_mut();
        auto o = online[k].value();
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * o[i] + (1.0 - tau) * t[i];
    }
}

ParamFreeze::ParamFreeze(std::vector<Tensor> params) : params_(std::move(params)) {
    saved_.reserve(params_.size());
    for (auto& p : params_) {
        saved_.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }
}

ParamFreeze::~ParamFreeze() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(saved_[i]);
}

}  // namespace sibe
