#include "sibe/losses.hpp"

#include <cmath>

#include "sibe/errors.hpp"

namespace sibe {

namespace {

void check_sigma_positive(const DiagGaussian& d, const char* who) {
    for (double s : d.sigma.value())
        if (!(s > 0.0))
            throw ValueError(std::string("kl_diag_gauss: nonpositive sigma in ") + who);
}

// Gathers feature rows for one relative step across all chunks.
Tensor step_matrix(const std::vector<double>& src, const ChunkBatch& b, std::int64_t t,
                   std::int64_t dim) {
    std::vector<double> rows(static_cast<std::size_t>(b.num_chunks * dim));
    for (std::int64_t i = 0; i < b.num_chunks; ++i) {
        std::size_t off = b.flat(i, t) * static_cast<std::size_t>(dim);
        std::copy_n(src.data() + off, dim, rows.data() + i * dim);
    }
    return Tensor::from_data({b.num_chunks, dim}, std::move(rows));
}

}  // namespace

Tensor kl_diag_gauss(const DiagGaussian& g, const DiagGaussian& q) {
    if (g.mu.shape() != g.sigma.shape() || q.mu.shape() != q.sigma.shape() ||
        g.mu.shape() != q.mu.shape())
        throw ShapeError("kl_diag_gauss: shape mismatch, g " + shape_str(g.mu.shape()) +
                         " vs q " + shape_str(q.mu.shape()));
    check_sigma_positive(g, "g");
    check_sigma_positive(q, "q");

    // The g side is a constant: it comes from the target encoder.
    Tensor g_mu = g.mu.detach();
    Tensor g_sigma = g.sigma.detach();

    std::int64_t d = g.mu.cols();
    Tensor log_ratio = sum_last(log(div(q.sigma, g_sigma)));
    Tensor numer = add(square(g_sigma), square(sub(g_mu, q.mu)));
    Tensor quad = sum_last(div(numer, scale(square(q.sigma), 2.0)));
    return add_scalar(add(log_ratio, quad), -0.5 * static_cast<double>(d));
}

std::pair<Tensor, std::vector<Tensor>> infonce_loss(const SibeModel& model,
                                                    const std::vector<LatentStep>& steps) {
    if (steps.empty()) throw ValueError("infonce_loss: empty step list");
    std::vector<Tensor> per_sample;
    per_sample.reserve(steps.size());
    Tensor all;
    for (const auto& st : steps) {
        if (st.z.rows() < 1) throw ValueError("infonce_loss: need at least one chunk");
        Tensor projected = model.project_current(st.z, st.a);
        Tensor embedded = model.embed_next(st.z_next);
        Tensor exponents = model.score_exponents(projected, embedded);  // (B x B)
        Tensor losses = sub(logsumexp_last(exponents), take_diag(exponents));
        per_sample.push_back(losses);
        all = all.defined() ? concat_last(all, losses) : losses;
    }
    return {mean(all), std::move(per_sample)};
}

LossReport sibe_loss(const SibeModel& model, const ChunkBatch& batch, Rng& sample_rng) {
    if (batch.num_chunks < 1) throw ValueError("sibe_loss: batch must contain at least one chunk");
    if (batch.chunk_len < 1) throw ValueError("sibe_loss: chunk length must be positive");

    std::vector<LatentStep> latents;
    latents.reserve(static_cast<std::size_t>(batch.chunk_len));
    Tensor kl_all;
    for (std::int64_t t = 0; t < batch.chunk_len; ++t) {
        Tensor s_t = step_matrix(batch.obs, batch, t, batch.obs_dim);
        Tensor a_t = step_matrix(batch.actions, batch, t, batch.action_dim);
        Tensor s_next = step_matrix(batch.next_obs, batch, t, batch.obs_dim);

        Tensor c_t = model.det_encode(s_t, Branch::online);
        Tensor c_next = model.det_encode(s_next, Branch::target);
        DiagGaussian enc = model.stoch_encode(c_t, Branch::online);
        DiagGaussian enc_next = model.stoch_encode(c_next, Branch::target);

        // One reparameterized draw per state per gradient step, shared by
        // the KL conditioning, the InfoNCE term, and the reward.
        Tensor z_t = gaussian_sample(enc.mu, enc.sigma, sample_rng);
        Tensor z_next = gaussian_sample(enc_next.mu, enc_next.sigma, sample_rng);

        DiagGaussian pred = model.transition_predict(z_t, a_t);
        Tensor kl_t = kl_diag_gauss(enc_next, pred);
        kl_all = kl_all.defined() ? concat_last(kl_all, kl_t) : kl_t;

        latents.push_back({z_t, a_t, z_next});
    }

    auto [nce, per_step] = infonce_loss(model, latents);
    Tensor kl_mean = mean(kl_all);
    Tensor total = add(scale(kl_mean, model.coeffs().alpha), nce);

    LossReport report;
    report.total = total;
    report.total_value = total.item();
    report.kl_term = kl_mean.item();
    report.nce_term = nce.item();
    report.per_sample_nce.resize(static_cast<std::size_t>(batch.samples()));
    for (std::int64_t t = 0; t < batch.chunk_len; ++t) {
        auto vals = per_step[static_cast<std::size_t>(t)].value();
        for (std::int64_t i = 0; i < batch.num_chunks; ++i)
            report.per_sample_nce[batch.flat(i, t)] = vals[static_cast<std::size_t>(i)];
    }
    return report;
}

}  // namespace sibe
