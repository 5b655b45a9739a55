#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "vidsplice/error.hpp"
#include "vidsplice/rng.hpp"

namespace vidsplice {

using Dims = std::vector<int>;

std::int64_t numel(const Dims& dims);
std::string dims_to_string(const Dims& dims);

struct TensorData {
    Dims dims;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
};

// Dense row-major f64 tensor. Copying a Tensor copies the handle, not the
// buffer; tensors are treated as immutable after creation except for
// optimizer updates between graph executions.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Dims dims, bool requires_grad = false);
    static Tensor full(Dims dims, double value, bool requires_grad = false);
    static Tensor from_values(Dims dims, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(Dims dims, Rng& rng, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const Dims& dims() const;
    int dim(int axis) const;
    int ndim() const;
    std::int64_t size() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    std::vector<double>& values();
    const std::vector<double>& values() const;

    bool has_grad() const;
    std::vector<double>& grad();  // allocates zeros on first use
    void zero_grad();

    double item() const;  // scalar tensors only
    double at(std::initializer_list<int> idx) const;
    double& at_mut(std::initializer_list<int> idx);

    Tensor clone() const;  // deep copy of values (grad not copied)

    std::shared_ptr<TensorData> impl() const { return d_; }

private:
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData> d_;
};

bool same_dims(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);

// Reverse-mode tape. Constructing a Tape makes it current for this thread;
// ops executed while a tape is current record their backward closures in
// order. backward() replays them in reverse (topological order equals
// recording order) and then clears the tape.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current();

    void record(std::function<void()> backward_fn);
    void backward(const Tensor& loss);
    std::size_t op_count() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

// ---- primitives (all differentiable) ----

Tensor matmul(const Tensor& a, const Tensor& b);          // [m,k] x [k,n]
Tensor add(const Tensor& a, const Tensor& b);              // same dims
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor transpose(const Tensor& a);                         // 2-D
Tensor reshape(const Tensor& a, Dims dims);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor softmax(const Tensor& a);                           // over last dim
Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-10);                      // over last dim
Tensor gelu(const Tensor& a);                              // exact erf form
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor sum(const Tensor& a);                               // -> [1]
Tensor mean(const Tensor& a);                              // -> [1]
Tensor expand_rows(const Tensor& v, int n);                // [d] or [1,d] -> [n,d]

// mean((a - b)^2), composed from primitives
Tensor mse(const Tensor& a, const Tensor& b);

// ---- optimizer ----

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay AdamW. Missing gradients are treated as zero.
class AdamW {
public:
    struct Slot {
        std::string name;
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamW(std::vector<NamedParam> params, AdamWConfig cfg);

    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_count_; }
    void set_step_count(std::int64_t n) { step_count_ = n; }  // checkpoint restore
    AdamWConfig& config() { return cfg_; }
    const AdamWConfig& config() const { return cfg_; }
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    std::vector<Slot> slots_;
    AdamWConfig cfg_;
    std::int64_t step_count_ = 0;
};

}  // namespace vidsplice
