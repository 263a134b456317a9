#pragma once

#include <cstdint>
#include <vector>

#include "sibe/chunk.hpp"
#include "sibe/model.hpp"
#include "sibe/rng.hpp"
#include "sibe/tensor.hpp"

namespace sibe {

// Analytic KL between diagonal Gaussians, summed over latent units:
// sum_i [ log(sq_i/sg_i) + (sg_i^2 + (mg_i - mq_i)^2) / (2 sq_i^2) - 1/2 ].
// g is treated as a constant (it comes from the target branch); gradients
// flow only into q. Returns a per-sample (B) vector for batched inputs,
// a {1} scalar for plain vectors.
Tensor kl_diag_gauss(const DiagGaussian& g, const DiagGaussian& q);

// Latent view of one relative chunk step: B rows each of the sampled
// current latent, the action, and the sampled next latent.
struct LatentStep {
    Tensor z;
    Tensor a;
    Tensor z_next;
};

// InfoNCE over minibatch negatives. For sample (i, t) the candidate set
// is the z_next of every chunk at the same relative step t (K = B,
// positive included). Returns the mean loss and one per-sample (B)
// vector of -log softmax terms per relative step.
std::pair<Tensor, std::vector<Tensor>> infonce_loss(const SibeModel& model,
                                                    const std::vector<LatentStep>& steps);

struct LossReport {
    Tensor total;  // alpha * kl_term + nce_term, ready for backward
    double total_value = 0.0;
    double kl_term = 0.0;
    double nce_term = 0.0;
    std::vector<double> per_sample_nce;  // [B][L] row-major, entries >= 0
};

// Full training objective on a chunk batch: encodes both branches,
// draws one latent sample per (state, gradient step), and combines the
// analytic KL with the InfoNCE term.
LossReport sibe_loss(const SibeModel& model, const ChunkBatch& batch, Rng& sample_rng);

}  // namespace sibe
