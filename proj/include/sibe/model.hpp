#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sibe/mlp.hpp"
#include "sibe/rng.hpp"
#include "sibe/tensor.hpp"

namespace sibe {

// Diagonal Gaussian over latent units. mu/sigma are (d) vectors or
// (B x d) batches; sigma is strictly positive (softplus floor).
struct DiagGaussian {
    Tensor mu;
    Tensor sigma;
};

inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kScoreClamp = 30.0;

enum class Branch { online, target };

struct ModelDims {
    std::int64_t obs = 0;      // stacked observation length
    std::int64_t action = 0;   // action dimension
    std::int64_t d_c = 50;     // deterministic state representation
    std::int64_t d_z = 50;     // latent bottleneck
    std::int64_t d_f = 50;     // prediction-head output
    std::int64_t hidden = 1024;
};

struct ModelCoeffs {
    double alpha = 0.1;   // compression weight
    double lambda = 0.001;  // intrinsic reward scale
    double tau = 0.05;    // encoder/head EMA coefficient
};

// All representation-learning parameter groups: online/target
// deterministic encoders, online/target stochastic encoders, the latent
// transition model, the projection head (online only), online/target
// prediction heads, and the bilinear score matrix. Target groups are
// EMA copies that never receive gradients.
class SibeModel {
public:
    SibeModel(ModelDims dims, ModelCoeffs coeffs, Rng& rng);

    // c = phi(s). Target branch contributes no gradients.
    Tensor det_encode(const Tensor& s, Branch which) const;
    // (mu, sigma) with sigma = softplus(raw) + 1e-4.
    DiagGaussian stoch_encode(const Tensor& c, Branch which) const;
    // q(z_next | z, a); input is concat(z, a).
    DiagGaussian transition_predict(const Tensor& z, const Tensor& a) const;

    // Score pathway. project_current = f_o(d_v(concat(z, a)));
    // embed_next = f_m(z_next).
    Tensor project_current(const Tensor& z, const Tensor& a) const;
    Tensor embed_next(const Tensor& z_next) const;
    // Exponents clamped to [-30, 30]; for (B x d_f) inputs the result is
    // the (B x B) matrix of pairwise exponents P w M^T.
    Tensor score_exponents(const Tensor& projected, const Tensor& embedded) const;
    // h = exp(clamp(p' w m)) for a single (z, a, z_next) triple; > 0.
    Tensor score(const Tensor& z, const Tensor& a, const Tensor& z_next) const;

    // Moves the three target groups (eta_m, theta_m, rho_m) toward
    // their online counterparts. Everything else is untouched.
    void ema_update();
    void ema_update(double tau);

    const ModelDims& dims() const { return dims_; }
    const ModelCoeffs& coeffs() const { return coeffs_; }

    // Parameter groups, in stable order.
    std::vector<Tensor> eta_online() const { return phi_online_.parameters(); }
    std::vector<Tensor> eta_target() const { return phi_target_.parameters(); }
    std::vector<Tensor> theta_online() const { return g_online_.parameters(); }
    std::vector<Tensor> theta_target() const { return g_target_.parameters(); }
    std::vector<Tensor> psi() const { return transition_.parameters(); }
    std::vector<Tensor> upsilon() const { return projection_.parameters(); }
    std::vector<Tensor> rho_online() const { return f_online_.parameters(); }
    std::vector<Tensor> rho_target() const { return f_target_.parameters(); }
    Tensor omega() const { return omega_; }

    // The optimizer-visible set: {eta_o, theta_o, psi, upsilon, rho_o, omega}.
    std::vector<Tensor> trainable_parameters() const;
    // Every group including targets, as (name, tensor) pairs in manifest order.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

private:
    DiagGaussian split_gaussian(const Tensor& raw) const;

    ModelDims dims_;
    ModelCoeffs coeffs_;
    Mlp phi_online_, phi_target_;  // eta
    Mlp g_online_, g_target_;      // theta
    Mlp transition_;               // psi
    Mlp projection_;               // upsilon
    Mlp f_online_, f_target_;      // rho
    Tensor omega_;
};

}  // namespace sibe
