#include "vidsplice/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace vidsplice {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

thread_local std::vector<Tape*> g_tape_stack;

bool grad_wanted(const Tensor& t) { return t.defined() && t.requires_grad(); }

// Marks `out` as requiring grad and records `fn` when a tape is active and at
// least one input needs gradients. Without a tape ops are pure computation.
template <typename Fn>
void record_op(bool any_input_grad, Tensor& out, Fn&& fn) {
    Tape* tape = Tape::current();
    if (tape == nullptr || !any_input_grad) {
        return;
    }
    out.set_requires_grad(true);
    tape->record(std::forward<Fn>(fn));
}

std::vector<double>& ensure_grad(const std::shared_ptr<TensorData>& d) {
    if (d->grad.empty()) {
        d->grad.assign(d->values.size(), 0.0);
    }
    return d->grad;
}

// Output grad of a recorded op; null when the op is off every path to the loss.
const std::vector<double>* out_grad(const std::shared_ptr<TensorData>& d) {
    return d->grad.empty() ? nullptr : &d->grad;
}

void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dims() != b.dims()) {
        throw shape_error(std::string(op) + ": " + dims_to_string(a.dims()) + " vs " +
                          dims_to_string(b.dims()));
    }
}

int last_dim(const Tensor& t) { return t.dims().back(); }

}  // namespace

std::int64_t numel(const Dims& dims) {
    std::int64_t n = 1;
    for (int d : dims) {
        n *= d;
    }
    return n;
}

std::string dims_to_string(const Dims& dims) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        os << dims[i] << (i + 1 < dims.size() ? "," : "");
    }
    os << "]";
    return os.str();
}

// ---- Tensor ----

Tensor Tensor::zeros(Dims dims, bool requires_grad) {
    return full(std::move(dims), 0.0, requires_grad);
}

Tensor Tensor::full(Dims dims, double value, bool requires_grad) {
    if (dims.empty()) {
        throw shape_error("tensor needs at least one dimension");
    }
    for (int d : dims) {
        if (d <= 0) {
            throw shape_error("non-positive dimension in " + dims_to_string(dims));
        }
    }
    auto data = std::make_shared<TensorData>();
    data->dims = std::move(dims);
    data->values.assign(static_cast<std::size_t>(numel(data->dims)), value);
    data->requires_grad = requires_grad;
    return Tensor(std::move(data));
}

Tensor Tensor::from_values(Dims dims, std::vector<double> values, bool requires_grad) {
    Tensor t = zeros(dims, requires_grad);
    if (static_cast<std::int64_t>(values.size()) != t.size()) {
        throw shape_error("value count " + std::to_string(values.size()) + " does not fill " +
                          dims_to_string(dims));
    }
    t.values() = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::randn(Dims dims, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(std::move(dims), requires_grad);
    for (double& v : t.values()) {
        v = rng.gaussian() * stddev;
    }
    return t;
}

const Dims& Tensor::dims() const { return d_->dims; }
int Tensor::dim(int axis) const { return d_->dims.at(static_cast<std::size_t>(axis)); }
int Tensor::ndim() const { return static_cast<int>(d_->dims.size()); }
std::int64_t Tensor::size() const { return static_cast<std::int64_t>(d_->values.size()); }

bool Tensor::requires_grad() const { return d_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { d_->requires_grad = flag; }

std::vector<double>& Tensor::values() { return d_->values; }
const std::vector<double>& Tensor::values() const { return d_->values; }

bool Tensor::has_grad() const { return !d_->grad.empty(); }
std::vector<double>& Tensor::grad() { return ensure_grad(d_); }
void Tensor::zero_grad() {
    if (!d_->grad.empty()) {
        std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
    }
}

double Tensor::item() const {
    if (size() != 1) {
        throw contract_error("item() on non-scalar tensor " + dims_to_string(dims()));
    }
    return d_->values[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    return const_cast<Tensor*>(this)->at_mut(idx);
}

double& Tensor::at_mut(std::initializer_list<int> idx) {
    const Dims& dd = d_->dims;
    if (idx.size() != dd.size()) {
        throw shape_error("index rank mismatch");
    }
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (int i : idx) {
        if (i < 0 || i >= dd[k]) {
            throw shape_error("index out of bounds");
        }
        flat = flat * dd[k] + i;
        ++k;
    }
    return d_->values[static_cast<std::size_t>(flat)];
}

Tensor Tensor::clone() const {
    return Tensor::from_values(dims(), values(), requires_grad());
}

bool same_dims(const Tensor& a, const Tensor& b) { return a.dims() == b.dims(); }

bool all_finite(const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) {
        return false;
    }
    return std::memcmp(a.values().data(), b.values().data(),
                       a.values().size() * sizeof(double)) == 0;
}

// ---- Tape ----

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) {
        g_tape_stack.pop_back();
    }
}

Tape* Tape::current() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw contract_error("backward requires a scalar loss");
    }
    loss.impl()->grad.assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        (*it)();
    }
    ops_.clear();
}

// ---- primitives ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw shape_error("matmul expects 2-D operands");
    }
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw shape_error("matmul inner dims: " + dims_to_string(a.dims()) + " x " +
                          dims_to_string(b.dims()));
    }
    Tensor out = Tensor::zeros({m, n});
    {
        const double* pa = a.values().data();
        const double* pb = b.values().data();
        double* pc = out.values().data();
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                const double aik = pa[i * k + kk];
                const double* brow = pb + static_cast<std::ptrdiff_t>(kk) * n;
                double* crow = pc + static_cast<std::ptrdiff_t>(i) * n;
                for (int j = 0; j < n; ++j) {
                    crow[j] += aik * brow[j];
                }
            }
        }
    }
    auto da = a.impl();
    auto db = b.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a) || grad_wanted(b), out, [da, db, dc, m, k, n]() {
        const auto* g = out_grad(dc);
        if (g == nullptr) {
            return;
        }
        const double* pg = g->data();
        if (da->requires_grad) {
            auto& ga = ensure_grad(da);
            const double* pb = db->values.data();
            // dA += dC * B^T
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double gij = pg[i * n + j];
                    const double* brow = pb;  // b[kk, j]
                    for (int kk = 0; kk < k; ++kk) {
                        ga[i * k + kk] += gij * brow[kk * n + j];
                    }
                }
            }
        }
        if (db->requires_grad) {
            auto& gb = ensure_grad(db);
            const double* pa = da->values.data();
            // dB += A^T * dC
            for (int kk = 0; kk < k; ++kk) {
                for (int i = 0; i < m; ++i) {
                    const double aik = pa[i * k + kk];
                    const double* grow = pg + static_cast<std::ptrdiff_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        gb[kk * n + j] += aik * grow[j];
                    }
                }
            }
        }
    });
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_dims(a, b, "add");
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = va[i] + vb[i];
    }
    auto da = a.impl();
    auto db = b.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a) || grad_wanted(b), out, [da, db, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr) {
            return;
        }
        if (da->requires_grad) {
            auto& ga = ensure_grad(da);
            for (std::size_t i = 0; i < g->size(); ++i) {
                ga[i] += (*g)[i];
            }
        }
        if (db->requires_grad) {
            auto& gb = ensure_grad(db);
            for (std::size_t i = 0; i < g->size(); ++i) {
                gb[i] += (*g)[i];
            }
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_dims(a, b, "sub");
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = va[i] - vb[i];
    }
    auto da = a.impl();
    auto db = b.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a) || grad_wanted(b), out, [da, db, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr) {
            return;
        }
        if (da->requires_grad) {
            auto& ga = ensure_grad(da);
            for (std::size_t i = 0; i < g->size(); ++i) {
                ga[i] += (*g)[i];
            }
        }
        if (db->requires_grad) {
            auto& gb = ensure_grad(db);
            for (std::size_t i = 0; i < g->size(); ++i) {
                gb[i] -= (*g)[i];
            }
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_dims(a, b, "mul");
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    const auto& vb = b.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = va[i] * vb[i];
    }
    auto da = a.impl();
    auto db = b.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a) || grad_wanted(b), out, [da, db, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr) {
            return;
        }
        if (da->requires_grad) {
            auto& ga = ensure_grad(da);
            for (std::size_t i = 0; i < g->size(); ++i) {
                ga[i] += (*g)[i] * db->values[i];
            }
        }
        if (db->requires_grad) {
            auto& gb = ensure_grad(db);
            for (std::size_t i = 0; i < g->size(); ++i) {
                gb[i] += (*g)[i] * da->values[i];
            }
        }
    });
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = va[i] * s;
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc, s]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (std::size_t i = 0; i < g->size(); ++i) {
            ga[i] += (*g)[i] * s;
        }
    });
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = va[i] + s;
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (std::size_t i = 0; i < g->size(); ++i) {
            ga[i] += (*g)[i];
        }
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) {
        throw shape_error("transpose expects a 2-D tensor");
    }
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    const auto& va = a.values();
    auto& vo = out.values();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            vo[static_cast<std::size_t>(j) * m + i] = va[static_cast<std::size_t>(i) * n + j];
        }
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc, m, n]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < m; ++i) {
                ga[static_cast<std::size_t>(i) * n + j] += (*g)[static_cast<std::size_t>(j) * m + i];
            }
        }
    });
    return out;
}

Tensor reshape(const Tensor& a, Dims dims) {
    if (numel(dims) != a.size()) {
        throw shape_error("reshape " + dims_to_string(a.dims()) + " -> " + dims_to_string(dims) +
                          " changes element count");
    }
    Tensor out = Tensor::from_values(std::move(dims), a.values());
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (std::size_t i = 0; i < g->size(); ++i) {
            ga[i] += (*g)[i];
        }
    });
    return out;
}

namespace {

// Iteration helper for slice/concat: treats the tensor as
// [outer, axis_len, inner] around `axis`.
struct AxisView {
    std::int64_t outer = 1;
    std::int64_t axis_len = 1;
    std::int64_t inner = 1;
};

AxisView axis_view(const Dims& dims, int axis) {
    AxisView v;
    for (int i = 0; i < static_cast<int>(dims.size()); ++i) {
        if (i < axis) {
            v.outer *= dims[i];
        } else if (i == axis) {
            v.axis_len = dims[i];
        } else {
            v.inner *= dims[i];
        }
    }
    return v;
}

}  // namespace

Tensor slice(const Tensor& a, int axis, int start, int len) {
    if (axis < 0 || axis >= a.ndim()) {
        throw shape_error("slice axis out of range");
    }
    if (start < 0 || len <= 0 || start + len > a.dim(axis)) {
        throw shape_error("slice bounds [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") exceed axis of size " +
                          std::to_string(a.dim(axis)));
    }
    Dims out_dims = a.dims();
    out_dims[static_cast<std::size_t>(axis)] = len;
    Tensor out = Tensor::zeros(out_dims);
    const AxisView v = axis_view(a.dims(), axis);
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t j = 0; j < len; ++j) {
            const double* src = va.data() + ((o * v.axis_len + start + j) * v.inner);
            double* dst = vo.data() + ((o * len + j) * v.inner);
            std::copy(src, src + v.inner, dst);
        }
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc, v, start, len]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (std::int64_t o = 0; o < v.outer; ++o) {
            for (std::int64_t j = 0; j < len; ++j) {
                const double* src = g->data() + ((o * len + j) * v.inner);
                double* dst = ga.data() + ((o * v.axis_len + start + j) * v.inner);
                for (std::int64_t i = 0; i < v.inner; ++i) {
                    dst[i] += src[i];
                }
            }
        }
    });
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) {
        throw shape_error("concat of zero tensors");
    }
    const Dims& base = parts[0].dims();
    if (axis < 0 || axis >= static_cast<int>(base.size())) {
        throw shape_error("concat axis out of range");
    }
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != static_cast<int>(base.size())) {
            throw shape_error("concat rank mismatch");
        }
        for (int i = 0; i < p.ndim(); ++i) {
            if (i != axis && p.dim(i) != base[static_cast<std::size_t>(i)]) {
                throw shape_error("concat dim mismatch at axis " + std::to_string(i));
            }
        }
        total += p.dim(axis);
    }
    Dims out_dims = base;
    out_dims[static_cast<std::size_t>(axis)] = total;
    Tensor out = Tensor::zeros(out_dims);
    const AxisView vo = axis_view(out_dims, axis);
    auto& dst = out.values();
    std::int64_t offset = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        any_grad = any_grad || grad_wanted(p);
        const AxisView vp = axis_view(p.dims(), axis);
        const auto& src = p.values();
        for (std::int64_t o = 0; o < vp.outer; ++o) {
            const double* s = src.data() + o * vp.axis_len * vp.inner;
            double* d = dst.data() + (o * vo.axis_len + offset) * vo.inner;
            std::copy(s, s + vp.axis_len * vp.inner, d);
        }
        offset += p.dim(axis);
    }
    std::vector<std::shared_ptr<TensorData>> impls;
    std::vector<std::int64_t> lens;
    impls.reserve(parts.size());
    for (const Tensor& p : parts) {
        impls.push_back(p.impl());
        lens.push_back(p.dim(axis));
    }
    auto dc = out.impl();
    record_op(any_grad, out, [impls, lens, dc, vo]() {
        const auto* g = out_grad(dc);
        if (g == nullptr) {
            return;
        }
        std::int64_t off = 0;
        for (std::size_t k = 0; k < impls.size(); ++k) {
            const std::int64_t len = lens[k];
            if (impls[k]->requires_grad) {
                auto& gp = ensure_grad(impls[k]);
                for (std::int64_t o = 0; o < vo.outer; ++o) {
                    const double* s = g->data() + (o * vo.axis_len + off) * vo.inner;
                    double* d = gp.data() + o * len * vo.inner;
                    for (std::int64_t i = 0; i < len * vo.inner; ++i) {
                        d[i] += s[i];
                    }
                }
            }
            off += len;
        }
    });
    return out;
}

Tensor softmax(const Tensor& a) {
    const int d = last_dim(a);
    const std::int64_t rows = a.size() / d;
    Tensor out = Tensor::zeros(a.dims());
    const auto& va = a.values();
    auto& vo = out.values();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* x = va.data() + r * d;
        double* y = vo.data() + r * d;
        double mx = x[0];
        for (int i = 1; i < d; ++i) {
            mx = std::max(mx, x[i]);
        }
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            y[i] = std::exp(x[i] - mx);
            s += y[i];
        }
        const double inv = 1.0 / s;
        for (int i = 0; i < d; ++i) {
            y[i] *= inv;
        }
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc, rows, d]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = dc->values.data() + r * d;
            const double* gy = g->data() + r * d;
            double dot = 0.0;
            for (int i = 0; i < d; ++i) {
                dot += gy[i] * y[i];
            }
            double* gx = ga.data() + r * d;
            for (int i = 0; i < d; ++i) {
                gx[i] += y[i] * (gy[i] - dot);
            }
        }
    });
    return out;
}

Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    const int d = last_dim(a);
    if (gamma.size() != d || beta.size() != d) {
        throw shape_error("layernorm affine params must have length " + std::to_string(d));
    }
    const std::int64_t rows = a.size() / d;
    Tensor out = Tensor::zeros(a.dims());
    // x_hat retained for backward
    auto xhat = std::make_shared<std::vector<double>>(a.values().size());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    {
        const auto& x = a.values();
        const auto& gm = gamma.values();
        const auto& bt = beta.values();
        auto& y = out.values();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* xr = x.data() + r * d;
            double mu = 0.0;
            for (int i = 0; i < d; ++i) {
                mu += xr[i];
            }
            mu /= d;
            double var = 0.0;
            for (int i = 0; i < d; ++i) {
                const double c = xr[i] - mu;
                var += c * c;
            }
            var /= d;
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<std::size_t>(r)] = is;
            double* xh = xhat->data() + r * d;
            double* yr = y.data() + r * d;
            for (int i = 0; i < d; ++i) {
                xh[i] = (xr[i] - mu) * is;
                yr[i] = gm[i] * xh[i] + bt[i];
            }
        }
    }
    auto da = a.impl();
    auto dg = gamma.impl();
    auto db = beta.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a) || grad_wanted(gamma) || grad_wanted(beta), out,
              [da, dg, db, dc, xhat, inv_std, rows, d]() {
                  const auto* g = out_grad(dc);
                  if (g == nullptr) {
                      return;
                  }
                  if (db->requires_grad) {
                      auto& gb = ensure_grad(db);
                      for (std::int64_t r = 0; r < rows; ++r) {
                          const double* gy = g->data() + r * d;
                          for (int i = 0; i < d; ++i) {
                              gb[i] += gy[i];
                          }
                      }
                  }
                  if (dg->requires_grad) {
                      auto& gg = ensure_grad(dg);
                      for (std::int64_t r = 0; r < rows; ++r) {
                          const double* gy = g->data() + r * d;
                          const double* xh = xhat->data() + r * d;
                          for (int i = 0; i < d; ++i) {
                              gg[i] += gy[i] * xh[i];
                          }
                      }
                  }
                  if (da->requires_grad) {
                      auto& ga = ensure_grad(da);
                      const auto& gm = dg->values;
                      for (std::int64_t r = 0; r < rows; ++r) {
                          const double* gy = g->data() + r * d;
                          const double* xh = xhat->data() + r * d;
                          const double is = (*inv_std)[static_cast<std::size_t>(r)];
                          double mean_dxhat = 0.0;
                          double mean_dxhat_xhat = 0.0;
                          for (int i = 0; i < d; ++i) {
                              const double dxh = gy[i] * gm[i];
                              mean_dxhat += dxh;
                              mean_dxhat_xhat += dxh * xh[i];
                          }
                          mean_dxhat /= d;
                          mean_dxhat_xhat /= d;
                          double* gx = ga.data() + r * d;
                          for (int i = 0; i < d; ++i) {
                              const double dxh = gy[i] * gm[i];
                              gx[i] += (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat) * is;
                          }
                      }
                  }
              });
    return out;
}

Tensor gelu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.dims());
    const auto& x = a.values();
    auto& y = out.values();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    }
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        const auto& x = da->values;
        for (std::size_t i = 0; i < g->size(); ++i) {
            const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
            ga[i] += (*g)[i] * (cdf + x[i] * pdf);
        }
    });
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    if (table.ndim() != 2) {
        throw shape_error("embedding table must be 2-D");
    }
    const int vocab = table.dim(0), d = table.dim(1);
    const int n = static_cast<int>(ids.size());
    if (n == 0) {
        throw shape_error("embedding lookup with no ids");
    }
    for (int id : ids) {
        if (id < 0 || id >= vocab) {
            throw shape_error("embedding id " + std::to_string(id) + " outside vocab of " +
                              std::to_string(vocab));
        }
    }
    Tensor out = Tensor::zeros({n, d});
    const auto& tv = table.values();
    auto& vo = out.values();
    for (int i = 0; i < n; ++i) {
        std::copy(tv.data() + static_cast<std::ptrdiff_t>(ids[static_cast<std::size_t>(i)]) * d,
                  tv.data() + static_cast<std::ptrdiff_t>(ids[static_cast<std::size_t>(i)] + 1) * d,
                  vo.data() + static_cast<std::ptrdiff_t>(i) * d);
    }
    auto dt = table.impl();
    auto dc = out.impl();
    record_op(grad_wanted(table), out, [dt, dc, ids, d]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !dt->requires_grad) {
            return;
        }
        auto& gt = ensure_grad(dt);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* src = g->data() + i * static_cast<std::size_t>(d);
            double* dst = gt.data() + static_cast<std::size_t>(ids[i]) * d;
            for (int j = 0; j < d; ++j) {
                dst[j] += src[j];
            }
        }
    });
    return out;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) {
        acc += v;
    }
    Tensor out = Tensor::scalar(acc);
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        const double gv = (*g)[0];
        for (double& v : ga) {
            v += gv;
        }
    });
    return out;
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) {
        acc += v;
    }
    const double inv_n = 1.0 / static_cast<double>(a.size());
    Tensor out = Tensor::scalar(acc * inv_n);
    auto da = a.impl();
    auto dc = out.impl();
    record_op(grad_wanted(a), out, [da, dc, inv_n]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !da->requires_grad) {
            return;
        }
        auto& ga = ensure_grad(da);
        const double gv = (*g)[0] * inv_n;
        for (double& v : ga) {
            v += gv;
        }
    });
    return out;
}

Tensor expand_rows(const Tensor& v, int n) {
    if (n <= 0) {
        throw shape_error("expand_rows needs positive row count");
    }
    int d = 0;
    if (v.ndim() == 1) {
        d = v.dim(0);
    } else if (v.ndim() == 2 && v.dim(0) == 1) {
        d = v.dim(1);
    } else {
        throw shape_error("expand_rows expects [d] or [1,d], got " + dims_to_string(v.dims()));
    }
    Tensor out = Tensor::zeros({n, d});
    const auto& src = v.values();
    auto& dst = out.values();
    for (int i = 0; i < n; ++i) {
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
    auto dv = v.impl();
    auto dc = out.impl();
    record_op(grad_wanted(v), out, [dv, dc, n, d]() {
        const auto* g = out_grad(dc);
        if (g == nullptr || !dv->requires_grad) {
            return;
        }
        auto& gv = ensure_grad(dv);
        for (int i = 0; i < n; ++i) {
            const double* row = g->data() + static_cast<std::ptrdiff_t>(i) * d;
            for (int j = 0; j < d; ++j) {
                gv[static_cast<std::size_t>(j)] += row[j];
            }
        }
    });
    return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor diff = sub(a, b);
    return mean(mul(diff, diff));
}

// ---- AdamW ----

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg) : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& p : params) {
        if (!p.tensor.defined()) {
            throw contract_error("optimizer given undefined parameter " + p.name);
        }
        Slot s;
        s.name = std::move(p.name);
        s.param = p.tensor;
        s.m.assign(static_cast<std::size_t>(s.param.size()), 0.0);
        s.v.assign(static_cast<std::size_t>(s.param.size()), 0.0);
        slots_.push_back(std::move(s));
    }
}

void AdamW::step() {
    ++step_count_;
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (Slot& s : slots_) {
        auto& theta = s.param.values();
        const bool has_grad = s.param.has_grad();
        const std::vector<double>* g = has_grad ? &s.param.impl()->grad : nullptr;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g != nullptr ? (*g)[i] : 0.0;
            if (!std::isfinite(gi)) {
                throw training_error("non-finite gradient in parameter " + s.name);
            }
            s.m[i] = b1 * s.m[i] + (1.0 - b1) * gi;
            s.v[i] = b2 * s.v[i] + (1.0 - b2) * gi * gi;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            theta[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * theta[i]);
        }
    }
}

void AdamW::zero_grad() {
    for (Slot& s : slots_) {
        s.param.zero_grad();
    }
}

}  // namespace vidsplice
