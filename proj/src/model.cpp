#include "sibe/model.hpp"

#include "sibe/errors.hpp"

namespace sibe {

SibeModel::SibeModel(ModelDims dims, ModelCoeffs coeffs, Rng& rng)
    : dims_(dims), coeffs_(coeffs) {
    if (dims.obs <= 0 || dims.action <= 0)
        throw ConfigError("SibeModel: obs and action dims must be positive");
    if (dims.d_c <= 0 || dims.d_z <= 0 || dims.d_f <= 0 || dims.hidden <= 0)
        throw ConfigError("SibeModel: latent dims must be positive");
    if (!(coeffs.tau > 0.0 && coeffs.tau <= 1.0))
        throw ValueError("SibeModel: tau must lie in (0, 1]");
    if (coeffs.lambda < 0.0) throw ValueError("SibeModel: lambda must be nonnegative");

    Rng init = rng.fork("model-init");
    phi_online_ = Mlp({dims.obs, dims.hidden, dims.d_c}, init);
    g_online_ = Mlp({dims.d_c, dims.hidden, 2 * dims.d_z}, init);
    transition_ = Mlp({dims.d_z + dims.action, dims.hidden, dims.hidden, 2 * dims.d_z}, init);
    projection_ = Mlp({dims.d_z + dims.action, dims.d_z}, init);
    f_online_ = Mlp({dims.d_z, dims.hidden, dims.d_f}, init);
    omega_ = Tensor::zeros({dims.d_f, dims.d_f}, true);
    {
        auto w = omega_.value_mut();
        for (std::int64_t i = 0; i < dims.d_f; ++i) w[static_cast<std::size_t>(i * dims.d_f + i)] = 1.0;
    }

    // Targets start as exact copies and are never optimized.
    Rng scratch = rng.fork("target-scratch");
    phi_target_ = Mlp({dims.obs, dims.hidden, dims.d_c}, scratch, false);
    g_target_ = Mlp({dims.d_c, dims.hidden, 2 * dims.d_z}, scratch, false);
    f_target_ = Mlp({dims.d_z, dims.hidden, dims.d_f}, scratch, false);
    phi_target_.copy_from(phi_online_);
    g_target_.copy_from(g_online_);
    f_target_.copy_from(f_online_);
}

Tensor SibeModel::det_encode(const Tensor& s, Branch which) const {
    return (which == Branch::online ? phi_online_ : phi_target_).forward(s);
}

DiagGaussian SibeModel::split_gaussian(const Tensor& raw) const {
    std::int64_t d = raw.cols() / 2;
    Tensor mu = slice_last(raw, 0, d);
    Tensor sigma = add_scalar(softplus(slice_last(raw, d, d)), kSigmaFloor);
    return {mu, sigma};
}

DiagGaussian SibeModel::stoch_encode(const Tensor& c, Branch which) const {
    return split_gaussian((which == Branch::online ? g_online_ : g_target_).forward(c));
}

DiagGaussian SibeModel::transition_predict(const Tensor& z, const Tensor& a) const {
    return split_gaussian(transition_.forward(concat_last(z, a)));
}

Tensor SibeModel::project_current(const Tensor& z, const Tensor& a) const {
    return f_online_.forward(projection_.forward(concat_last(z, a)));
}

Tensor SibeModel::embed_next(const Tensor& z_next) const {
    return f_target_.forward(z_next);
}

Tensor SibeModel::score_exponents(const Tensor& projected, const Tensor& embedded) const {
    bool vectors = projected.ndim() == 1;
    Tensor p = vectors ? reshape(projected, {1, projected.cols()}) : projected;
    Tensor m = vectors ? reshape(embedded, {1, embedded.cols()}) : embedded;
    Tensor e = clamp(matmul(matmul(p, omega_), transpose(m)), -kScoreClamp, kScoreClamp);
    return vectors ? reshape(e, {1}) : e;
}

Tensor SibeModel::score(const Tensor& z, const Tensor& a, const Tensor& z_next) const {
    return exp(score_exponents(project_current(z, a), embed_next(z_next)));
}

void SibeModel::ema_update() { ema_update(coeffs_.tau); }

void SibeModel::ema_update(double tau) {
    auto eta_t = eta_target();
    auto theta_t = theta_target();
    auto rho_t = rho_target();
    ema_update_params(eta_t, eta_online(), tau);
    ema_update_params(theta_t, theta_online(), tau);
    ema_update_params(rho_t, rho_online(), tau);
}

std::vector<Tensor> SibeModel::trainable_parameters() const {
    std::vector<Tensor> out;
    for (const auto& group :
         {eta_online(), theta_online(), psi(), upsilon(), rho_online()})
        out.insert(out.end(), group.begin(), group.end());
    out.push_back(omega_);
    return out;
}

std::vector<std::pair<std::string, Tensor>> SibeModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push_group = [&out](const std::string& prefix, const std::vector<Tensor>& ts) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const char* kind = (i % 2 == 0) ? "w" : "b";
            out.emplace_back(prefix + "." + std::to_string(i / 2) + "." + kind, ts[i]);
        }
    };
    push_group("phi_online", eta_online());
    push_group("phi_target", eta_target());
    push_group("g_online", theta_online());
    push_group("g_target", theta_target());
    push_group("transition", psi());
    push_group("projection", upsilon());
    push_group("f_online", rho_online());
    push_group("f_target", rho_target());
    out.emplace_back("omega", omega_);
    return out;
}

}  // namespace sibe
