#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sibe/errors.hpp"

namespace sibe {

class Rng;

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;     // allocated on first accumulation
    bool requires_grad = false;   // leaf marker: optimizer-visible parameter
    bool needs_grad = false;      // requires_grad, or downstream of something that does
};

}  // namespace detail

// Dense float64 tensor, row-major, rank 1 or 2 (scalars are shape {1}).
// Handle semantics: copies share the same node. Values are written once
// at creation; only leaf parameters are mutated in place (by optimizers
// and EMA updates, between gradient tapes).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    std::int64_t ndim() const;
    // 2-D helpers; a 1-D tensor is treated as a single row.
    std::int64_t rows() const;
    std::int64_t cols() const;

    std::span<const double> value() const;
    std::span<double> value_mut();  // leaves only (optimizer / EMA writes)
    double item() const;            // scalar tensors

    bool requires_grad() const;
    bool needs_grad() const;
    void set_requires_grad(bool v);

    // Gradient of the last backward pass; empty span if never touched.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    // New leaf with copied values and no gradient tracking.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op_output(Shape, std::vector<double>, bool, const char*);
};

// Reverse-mode tape. Ops append their backward closures in execution
// order, which is topological by construction; backward() replays them
// exactly once in reverse.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Seeds d(loss)/d(loss) = 1 and propagates to every leaf with
    // requires_grad. Gradients accumulate into Tensor::grad().
    void backward(const Tensor& loss);

    std::size_t size() const { return ops_.size(); }
    bool empty() const { return ops_.empty(); }

    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

private:
    std::vector<std::function<void()>> ops_;
};

// Scoped activation of a tape. Ops executed with no active tape run
// forward-only and mark their outputs needs_grad = false.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

Tape* active_tape();

// ---- ops ----------------------------------------------------------------
// Elementwise binary ops accept identical shapes, or a (B x n) matrix with
// an (n) vector broadcast across rows (either operand order).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
// Pass-through gradient inside [lo, hi], zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);   // -> {1}
Tensor mean(const Tensor& a);  // -> {1}
Tensor sum_last(const Tensor& a);        // (B x n) -> (B); (n) -> {1}
Tensor logsumexp_last(const Tensor& a);  // shift-stable; same shapes as sum_last

Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& a, std::int64_t start, std::int64_t len);
Tensor take_diag(const Tensor& a);  // (n x n) -> (n)
Tensor reshape(const Tensor& a, Shape shape);

// Reparameterized draw z = mu + sigma * eps with eps ~ N(0, I) held
// constant, so gradients flow to mu and sigma.
Tensor gaussian_sample(const Tensor& mu, const Tensor& sigma, Rng& rng);
Tensor gaussian_sample_with_noise(const Tensor& mu, const Tensor& sigma, const Tensor& eps);

}  // namespace sibe
