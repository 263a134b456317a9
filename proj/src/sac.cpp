#include "sibe/sac.hpp"

#include <cmath>
#include <numbers>

#include "sibe/errors.hpp"

namespace sibe {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
}

// ---- Policy -----------------------------------------------------------------

Policy::Policy(SacDims dims, SacConfig cfg, Rng& rng) : dims_(dims), cfg_(cfg) {
    net_ = Mlp({dims.d_c, dims.hidden, dims.hidden, 2 * dims.action}, rng);
}

std::pair<Tensor, Tensor> Policy::head(const Tensor& c) const {
    std::int64_t da = dims_.action;
    Tensor out = net_.forward(c);
    Tensor mu = slice_last(out, 0, da);
    Tensor log_std = clamp(slice_last(out, da, da), cfg_.log_std_min, cfg_.log_std_max);
    return {mu, log_std};
}

Policy::Sample Policy::sample(const Tensor& c, Rng& rng) const {
    std::int64_t da = dims_.action;
    auto [mu, log_std] = head(c);
    Tensor std_dev = exp(log_std);
    Tensor eps = Tensor::from_data(mu.shape(), rng.normal_vector(static_cast<std::size_t>(mu.numel())));
    Tensor u = add(mu, mul(std_dev, eps));
    Tensor action = tanh(u);

    // log N(u | mu, std) summed over dims...
    Tensor zsc = div(sub(u, mu), std_dev);
    Tensor base = sub(scale(square(zsc), -0.5), log_std);
    // ...minus the tanh log-det: log(1 - tanh(u)^2) = 2(log 2 - u - softplus(-2u)).
    Tensor logdet = scale(add_scalar(add(u, softplus(scale(u, -2.0))), -std::numbers::ln2), -2.0);
    Tensor log_prob = add_scalar(sum_last(sub(base, logdet)),
                                 -0.5 * kLog2Pi * static_cast<double>(da));
    return {action, log_prob};
}

Tensor Policy::mean_action(const Tensor& c) const {
    return tanh(head(c).first);
}

std::vector<double> Policy::act(std::span<const double> c, ActMode mode, Rng& rng) const {
    if (static_cast<std::int64_t>(c.size()) != dims_.d_c)
        throw ShapeError("Policy::act: expected representation of dim " +
                         std::to_string(dims_.d_c) + ", got " + std::to_string(c.size()));
    Tensor ct = Tensor::from_data({dims_.d_c}, std::vector<double>(c.begin(), c.end()));
    Tensor a = (mode == ActMode::deterministic) ? mean_action(ct) : sample(ct, rng).action;
    auto v = a.value();
    return std::vector<double>(v.begin(), v.end());
}

// ---- TwinCritic -------------------------------------------------------------

TwinCritic::TwinCritic(SacDims dims, Rng& rng) {
    std::vector<std::int64_t> arch = {dims.d_c + dims.action, dims.hidden, dims.hidden, 1};
    q1_ = Mlp(arch, rng);
    q2_ = Mlp(arch, rng);
    Rng scratch = rng.fork("critic-target-scratch");
    q1_target_ = Mlp(arch, scratch, false);
    q2_target_ = Mlp(arch, scratch, false);
    q1_target_.copy_from(q1_);
    q2_target_.copy_from(q2_);
}

namespace {
Tensor flatten_q(const Tensor& q) { return reshape(q, {q.rows()}); }
}  // namespace

std::pair<Tensor, Tensor> TwinCritic::q(const Tensor& c, const Tensor& a) const {
    Tensor in = concat_last(c, a);
    return {flatten_q(q1_.forward(in)), flatten_q(q2_.forward(in))};
}

std::pair<Tensor, Tensor> TwinCritic::q_target(const Tensor& c, const Tensor& a) const {
    Tensor in = concat_last(c, a);
    return {flatten_q(q1_target_.forward(in)), flatten_q(q2_target_.forward(in))};
}

void TwinCritic::ema_update(double coeff) {
    auto t1 = q1_target_.parameters();
    auto t2 = q2_target_.parameters();
    ema_update_params(t1, q1_.parameters(), coeff);
    ema_update_params(t2, q2_.parameters(), coeff);
}

std::vector<Tensor> TwinCritic::parameters() const {
    auto out = q1_.parameters();
    auto p2 = q2_.parameters();
    out.insert(out.end(), p2.begin(), p2.end());
    return out;
}

std::vector<Tensor> TwinCritic::target_parameters() const {
    auto out = q1_target_.parameters();
    auto p2 = q2_target_.parameters();
    out.insert(out.end(), p2.begin(), p2.end());
    return out;
}

// ---- SacAgent ---------------------------------------------------------------

SacAgent::SacAgent(SacDims dims, SacConfig cfg, Rng& rng) : dims_(dims), cfg_(cfg) {
    if (!(cfg.init_temperature > 0.0))
        throw ValueError("SacAgent: initial temperature must be positive");
    Rng init = rng.fork("sac-init");
    policy_ = Policy(dims, cfg, init);
    critics_ = TwinCritic(dims, init);
    log_alpha_ = Tensor::scalar(std::log(cfg.init_temperature), true);
}

double SacAgent::alpha() const { return std::exp(log_alpha_.value()[0]); }

std::vector<double> SacAgent::critic_targets(const SibeModel& enc, const FlatBatch& batch,
                                             Rng& rng) const {
    // No tape is active here: every quantity below is a constant to the
    // critic loss, including c' from the online encoder.
    Tensor c_next = enc.det_encode(batch.next_obs, Branch::online);
    Policy::Sample next = policy_.sample(c_next, rng);
    auto [q1, q2] = critics_.q_target(c_next, next.action);
    double a = alpha();
    std::vector<double> y(static_cast<std::size_t>(batch.size));
    for (std::int64_t i = 0; i < batch.size; ++i) {
        std::size_t k = static_cast<std::size_t>(i);
        bool terminal_done = batch.terminal[k] && !batch.truncated[k];
        double soft_value =
            std::min(q1.value()[k], q2.value()[k]) - a * next.log_prob.value()[k];
        y[k] = batch.r_aug[k] + cfg_.gamma * (terminal_done ? 0.0 : 1.0) * soft_value;
    }
    return y;
}

Tensor SacAgent::critic_loss(const SibeModel& enc, const FlatBatch& batch,
                             const std::vector<double>& targets) const {
    if (targets.size() != static_cast<std::size_t>(batch.size))
        throw ShapeError("critic_loss: target count mismatch");
    Tensor y = Tensor::from_data({batch.size}, targets);
    Tensor c = enc.det_encode(batch.obs, Branch::online);
    auto [q1, q2] = critics_.q(c, batch.actions);
    return add(mean(square(sub(q1, y))), mean(square(sub(q2, y))));
}

std::pair<Tensor, Tensor> SacAgent::actor_loss(const SibeModel& enc, const FlatBatch& batch,
                                               Rng& rng) const {
    // Gradient to the encoder is severed: c enters as a constant leaf.
    Tensor c = enc.det_encode(batch.obs, Branch::online).detach();
    Policy::Sample s = policy_.sample(c, rng);
    Tensor qmin;
    {
        // Critic weights act as constants; gradient still flows through
        // the sampled action into the policy.
        ParamFreeze freeze(critics_.parameters());
        auto [q1, q2] = critics_.q(c, s.action);
        qmin = minimum(q1, q2);
    }
    Tensor loss = mean(sub(scale(s.log_prob, alpha()), qmin));
    return {loss, s.log_prob};
}

Tensor SacAgent::temperature_loss(const Tensor& log_prob_detached) const {
    if (log_prob_detached.needs_grad())
        throw ValueError("temperature_loss expects detached log-probs");
    double mean_term = 0.0;
    for (double lp : log_prob_detached.value()) mean_term += lp + target_entropy();
    mean_term /= static_cast<double>(log_prob_detached.numel());
    // loss = -alpha * E[log pi + target_entropy]
    return scale(exp(log_alpha_), -mean_term);
}

bool SacAgent::end_update_step() {
    ++update_count_;
    if (update_count_ % cfg_.critic_target_interval == 0) {
        critics_.ema_update(cfg_.critic_ema);
        return true;
    }
    return false;
}

std::vector<std::pair<std::string, Tensor>> SacAgent::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push_group = [&out](const std::string& prefix, const std::vector<Tensor>& ts) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const char* kind = (i % 2 == 0) ? "w" : "b";
            out.emplace_back(prefix + "." + std::to_string(i / 2) + "." + kind, ts[i]);
        }
    };
    push_group("policy", policy_.parameters());
    push_group("critic", critics_.parameters());
    push_group("critic_target", critics_.target_parameters());
    out.emplace_back("log_alpha", log_alpha_);
    return out;
}

}  // namespace sibe
