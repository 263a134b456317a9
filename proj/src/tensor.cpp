#include "sibe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sibe/rng.hpp"

namespace sibe {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<detail::Node>;

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

void validate_shape(const Shape& s) {
    if (s.empty() || s.size() > 2)
        throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(s));
    for (auto d : s)
        if (d <= 0) throw ShapeError("shape entries must be positive: " + shape_str(s));
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + ": non-finite value in output");
}

void ensure_grad(detail::Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    // log(1 + e^x), overflow-safe.
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << ")";
    return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor make_op_output(Shape shape, std::vector<double> data, bool needs_grad, const char* op) {
    check_finite(data, op);
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->needs_grad = needs_grad && g_active_tape != nullptr;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    validate_shape(shape);
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)), v);
    return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    check_finite(data, "from_data");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    return Tensor(std::move(n));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ValueError("use of undefined tensor");
    return node_->shape;
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }
std::int64_t Tensor::ndim() const { return static_cast<std::int64_t>(shape().size()); }
std::int64_t Tensor::rows() const { return ndim() == 2 ? shape()[0] : 1; }
std::int64_t Tensor::cols() const { return ndim() == 2 ? shape()[1] : shape()[0]; }

std::span<const double> Tensor::value() const {
    if (!node_) throw ValueError("use of undefined tensor");
    return node_->value;
}

std::span<double> Tensor::value_mut() {
    if (!node_) throw ValueError("use of undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::needs_grad() const { return node_ && node_->needs_grad; }

void Tensor::set_requires_grad(bool v) {
    if (!node_) throw ValueError("use of undefined tensor");
    node_->requires_grad = v;
    node_->needs_grad = v;
}

std::span<const double> Tensor::grad() const {
    if (!node_) throw ValueError("use of undefined tensor");
    return node_->grad;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

void Tensor::zero_grad() {
    if (!node_) throw ValueError("use of undefined tensor");
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    if (!node_) throw ValueError("use of undefined tensor");
    auto n = std::make_shared<detail::Node>();
    n->shape = node_->shape;
    n->value = node_->value;
    return Tensor(std::move(n));
}

// ---- Tape -----------------------------------------------------------------

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (ops_.empty()) throw ValueError("backward on an empty tape");
    auto n = loss.node();
    ensure_grad(*n);
    n->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool record_needed(std::initializer_list<const Tensor*> ins) {
    if (!g_active_tape) return false;
    for (const Tensor* t : ins)
        if (t->needs_grad()) return true;
    return false;
}

void accumulate(const NodePtr& n, const std::vector<double>& g) {
    ensure_grad(*n);
    for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
}

// Unary elementwise op with local derivative computed from (x, y).
template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Bwd dydx) {
    const auto& x = a.node()->value;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    bool rec = record_needed({&a});
    Tensor out = make_op_output(a.shape(), std::move(y), rec, name);
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, dydx]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::size_t i = 0; i < an->value.size(); ++i)
                an->grad[i] += on->grad[i] * dydx(an->value[i], on->value[i]);
        });
    }
    return out;
}

enum class Broadcast { none, b_row, a_row };  // b_row: b is an (n) vector under (B x n) a

Broadcast binary_mode(const char* name, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (a.ndim() == 2 && b.ndim() == 1 && a.shape()[1] == b.shape()[0]) return Broadcast::b_row;
    if (b.ndim() == 2 && a.ndim() == 1 && b.shape()[1] == a.shape()[0]) return Broadcast::a_row;
    throw ShapeError(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
}

// Binary elementwise op. dfa/dfb map (xa, xb, y) to the local partials.
template <typename Fwd, typename Dfa, typename Dfb>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Dfa dfa, Dfb dfb) {
    Broadcast mode = binary_mode(name, a, b);
    const Tensor& big = (mode == Broadcast::a_row) ? b : a;
    const auto& xa = a.node()->value;
    const auto& xb = b.node()->value;
    std::int64_t rows = big.rows(), cols = big.cols();
    std::vector<double> y(static_cast<std::size_t>(rows * cols));
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
            std::size_t i = static_cast<std::size_t>(r * cols + c);
            double va = (mode == Broadcast::a_row) ? xa[static_cast<std::size_t>(c)] : xa[i];
            double vb = (mode == Broadcast::b_row) ? xb[static_cast<std::size_t>(c)] : xb[i];
            y[i] = fwd(va, vb);
        }
    }
    bool rec = record_needed({&a, &b});
    Tensor out = make_op_output(big.shape(), std::move(y), rec, name);
    if (rec) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        bool wa = a.needs_grad(), wb = b.needs_grad();
        g_active_tape->record([an, bn, on, mode, rows, cols, wa, wb, dfa, dfb]() {
            if (on->grad.empty()) return;
            if (wa) ensure_grad(*an);
            if (wb) ensure_grad(*bn);
            for (std::int64_t r = 0; r < rows; ++r) {
                for (std::int64_t c = 0; c < cols; ++c) {
                    std::size_t i = static_cast<std::size_t>(r * cols + c);
                    std::size_t ia = (mode == Broadcast::a_row) ? static_cast<std::size_t>(c) : i;
                    std::size_t ib = (mode == Broadcast::b_row) ? static_cast<std::size_t>(c) : i;
                    double va = an->value[ia], vb = bn->value[ib], g = on->grad[i];
                    if (wa) an->grad[ia] += g * dfa(va, vb, on->value[i]);
                    if (wb) bn->grad[ib] += g * dfb(va, vb, on->value[i]);
                }
            }
        });
    }
    return out;
}

}  // namespace

// ---- arithmetic -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary_op(
        "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
        [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
        [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& a, double s) {
    return unary_op(
        "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_op(
        "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        "relu", a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        "softplus", a, [](double x) { return softplus_scalar(x); },
        [](double x, double) { return sigmoid(x); });
}

Tensor square(const Tensor& a) {
    return unary_op(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ValueError("clamp: lo must not exceed hi");
    return unary_op(
        "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul requires 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    std::int64_t n = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], m = b.shape()[1];
    if (k != k2)
        throw ShapeError("matmul: inner dims differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const double* pa = a.node()->value.data();
    const double* pb = b.node()->value.data();
    std::vector<double> y(static_cast<std::size_t>(n * m), 0.0);
    // i-k-j order keeps the inner loop contiguous over b and y.
    for (std::int64_t i = 0; i < n; ++i) {
        double* yrow = y.data() + i * m;
        const double* arow = pa + i * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            const double* brow = pb + kk * m;
            for (std::int64_t j = 0; j < m; ++j) yrow[j] += av * brow[j];
        }
    }
    bool rec = record_needed({&a, &b});
    Tensor out = make_op_output({n, m}, std::move(y), rec, "matmul");
    if (rec) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        bool wa = a.needs_grad(), wb = b.needs_grad();
        g_active_tape->record([an, bn, on, n, k, m, wa, wb]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            if (wa) {  // dA = dC * B^T
                ensure_grad(*an);
                const double* pb = bn->value.data();
                for (std::int64_t i = 0; i < n; ++i) {
                    double* garow = an->grad.data() + i * k;
                    const double* grow = g + i * m;
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        const double* brow = pb + kk * m;
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                        garow[kk] += acc;
                    }
                }
            }
            if (wb) {  // dB = A^T * dC
                ensure_grad(*bn);
                const double* pa = an->value.data();
                for (std::int64_t i = 0; i < n; ++i) {
                    const double* arow = pa + i * k;
                    const double* grow = g + i * m;
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        double av = arow[kk];
                        double* gbrow = bn->grad.data() + kk * m;
                        for (std::int64_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw ShapeError("transpose requires a 2-D tensor");
    std::int64_t n = a.shape()[0], m = a.shape()[1];
    const auto& x = a.node()->value;
    std::vector<double> y(x.size());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j)
            y[static_cast<std::size_t>(j * n + i)] = x[static_cast<std::size_t>(i * m + j)];
    bool rec = record_needed({&a});
    Tensor out = make_op_output({m, n}, std::move(y), rec, "transpose");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, n, m]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < m; ++j)
                    an->grad[static_cast<std::size_t>(i * m + j)] +=
                        on->grad[static_cast<std::size_t>(j * n + i)];
        });
    }
    return out;
}

// ---- reductions -------------------------------------------------------------

namespace {

Tensor full_reduce(const char* name, const Tensor& a, double denom) {
    const auto& x = a.node()->value;
    double acc = 0.0;
    for (double v : x) acc += v;
    acc /= denom;
    bool rec = record_needed({&a});
    Tensor out = make_op_output({1}, {acc}, rec, name);
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, denom]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            double g = on->grad[0] / denom;
            for (auto& gi : an->grad) gi += g;
        });
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& a) { return full_reduce("sum", a, 1.0); }

Tensor mean(const Tensor& a) { return full_reduce("mean", a, static_cast<double>(a.numel())); }

Tensor sum_last(const Tensor& a) {
    std::int64_t rows = a.rows(), cols = a.cols();
    const auto& x = a.node()->value;
    std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
    for (std::int64_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) acc += x[static_cast<std::size_t>(r * cols + c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
    bool rec = record_needed({&a});
    Tensor out = make_op_output({rows}, std::move(y), rec, "sum_last");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, rows, cols]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::int64_t r = 0; r < rows; ++r) {
                double g = on->grad[static_cast<std::size_t>(r)];
                for (std::int64_t c = 0; c < cols; ++c)
                    an->grad[static_cast<std::size_t>(r * cols + c)] += g;
            }
        });
    }
    return out;
}

Tensor logsumexp_last(const Tensor& a) {
    std::int64_t rows = a.rows(), cols = a.cols();
    const auto& x = a.node()->value;
    std::vector<double> y(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.data() + r * cols;
        double m = row[0];
        for (std::int64_t c = 1; c < cols; ++c) m = std::max(m, row[c]);
        double acc = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) acc += std::exp(row[c] - m);
        y[static_cast<std::size_t>(r)] = m + std::log(acc);
    }
    bool rec = record_needed({&a});
    Tensor out = make_op_output({rows}, std::move(y), rec, "logsumexp_last");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, rows, cols]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::int64_t r = 0; r < rows; ++r) {
                double g = on->grad[static_cast<std::size_t>(r)];
                if (g == 0.0) continue;
                double lse = on->value[static_cast<std::size_t>(r)];
                for (std::int64_t c = 0; c < cols; ++c) {
                    std::size_t i = static_cast<std::size_t>(r * cols + c);
                    an->grad[i] += g * std::exp(an->value[i] - lse);
                }
            }
        });
    }
    return out;
}

// ---- structure --------------------------------------------------------------

Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.ndim() != b.ndim())
        throw ShapeError("concat_last: rank mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::int64_t rows = a.rows();
    if (a.ndim() == 2 && a.shape()[0] != b.shape()[0])
        throw ShapeError("concat_last: row mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::int64_t ca = a.cols(), cb = b.cols();
    const auto& xa = a.node()->value;
    const auto& xb = b.node()->value;
    std::vector<double> y(static_cast<std::size_t>(rows * (ca + cb)));
    for (std::int64_t r = 0; r < rows; ++r) {
        std::copy_n(xa.data() + r * ca, ca, y.data() + r * (ca + cb));
        std::copy_n(xb.data() + r * cb, cb, y.data() + r * (ca + cb) + ca);
    }
    Shape out_shape = (a.ndim() == 2) ? Shape{rows, ca + cb} : Shape{ca + cb};
    bool rec = record_needed({&a, &b});
    Tensor out = make_op_output(std::move(out_shape), std::move(y), rec, "concat_last");
    if (rec) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.node();
        bool wa = a.needs_grad(), wb = b.needs_grad();
        g_active_tape->record([an, bn, on, rows, ca, cb, wa, wb]() {
            if (on->grad.empty()) return;
            if (wa) ensure_grad(*an);
            if (wb) ensure_grad(*bn);
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* g = on->grad.data() + r * (ca + cb);
                if (wa)
                    for (std::int64_t c = 0; c < ca; ++c)
                        an->grad[static_cast<std::size_t>(r * ca + c)] += g[c];
                if (wb)
                    for (std::int64_t c = 0; c < cb; ++c)
                        bn->grad[static_cast<std::size_t>(r * cb + c)] += g[ca + c];
            }
        });
    }
    return out;
}

Tensor slice_last(const Tensor& a, std::int64_t start, std::int64_t len) {
    std::int64_t rows = a.rows(), cols = a.cols();
    if (start < 0 || len <= 0 || start + len > cols)
        throw ShapeError("slice_last: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(a.shape()));
    const auto& x = a.node()->value;
    std::vector<double> y(static_cast<std::size_t>(rows * len));
    for (std::int64_t r = 0; r < rows; ++r)
        std::copy_n(x.data() + r * cols + start, len, y.data() + r * len);
    Shape out_shape = (a.ndim() == 2) ? Shape{rows, len} : Shape{len};
    bool rec = record_needed({&a});
    Tensor out = make_op_output(std::move(out_shape), std::move(y), rec, "slice_last");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, rows, cols, start, len]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < len; ++c)
                    an->grad[static_cast<std::size_t>(r * cols + start + c)] +=
                        on->grad[static_cast<std::size_t>(r * len + c)];
        });
    }
    return out;
}

Tensor take_diag(const Tensor& a) {
    if (a.ndim() != 2 || a.shape()[0] != a.shape()[1])
        throw ShapeError("take_diag requires a square matrix, got " + shape_str(a.shape()));
    std::int64_t n = a.shape()[0];
    const auto& x = a.node()->value;
    std::vector<double> y(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i * n + i)];
    bool rec = record_needed({&a});
    Tensor out = make_op_output({n}, std::move(y), rec, "take_diag");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on, n]() {
            if (on->grad.empty()) return;
            ensure_grad(*an);
            for (std::int64_t i = 0; i < n; ++i)
                an->grad[static_cast<std::size_t>(i * n + i)] += on->grad[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    validate_shape(shape);
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
    bool rec = record_needed({&a});
    Tensor out = make_op_output(std::move(shape), a.node()->value, rec, "reshape");
    if (rec) {
        auto an = a.node();
        auto on = out.node();
        g_active_tape->record([an, on]() {
            if (on->grad.empty()) return;
            accumulate(an, on->grad);
        });
    }
    return out;
}

// ---- sampling ---------------------------------------------------------------

Tensor gaussian_sample_with_noise(const Tensor& mu, const Tensor& sigma, const Tensor& eps) {
    if (mu.shape() != sigma.shape() || mu.shape() != eps.shape())
        throw ShapeError("gaussian_sample: shapes differ, mu " + shape_str(mu.shape()) +
                         ", sigma " + shape_str(sigma.shape()) + ", eps " +
                         shape_str(eps.shape()));
    for (double s : sigma.value())
        if (!(s > 0.0)) throw ValueError("gaussian_sample: sigma must be strictly positive");
    return add(mu, mul(sigma, eps));
}

Tensor gaussian_sample(const Tensor& mu, const Tensor& sigma, Rng& rng) {
    Tensor eps = Tensor::from_data(mu.shape(), rng.normal_vector(static_cast<std::size_t>(mu.numel())));
    return gaussian_sample_with_noise(mu, sigma, eps);
}

}  // namespace sibe
