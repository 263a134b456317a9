#include "sibe/adam.hpp"

#include <cmath>

#include "sibe/errors.hpp"

namespace sibe {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t t, const AdamConfig& cfg) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw ShapeError("adam_update: buffer sizes disagree (param " +
                         std::to_string(param.size()) + ", grad " + std::to_string(grad.size()) +
                         ")");
    if (t < 1) throw ValueError("adam_update: step index must be >= 1");
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        std::size_t n = static_cast<std::size_t>(p.numel());
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }
}

void Adam::step() {
    ++step_;
    static const std::vector<double> kEmpty;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        std::span<const double> g = p.grad();
        if (g.empty()) {
            // Never-touched gradient: still advance the moments with zeros.
            std::vector<double> zeros(static_cast<std::size_t>(p.numel()), 0.0);
            adam_update(p.value_mut(), zeros, m_[k], v_[k], step_, cfg_);
        } else {
            adam_update(p.value_mut(), g, m_[k], v_[k], step_, cfg_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace sibe
