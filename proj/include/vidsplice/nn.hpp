#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidsplice/lora.hpp"
#include "vidsplice/tensor.hpp"

namespace vidsplice {

// Linear layer, row-vector convention: forward(x[n,d_in]) = x W^T + b.
// Weights are stored [d_out, d_in]. Attention linears may carry a low-rank
// adapter; the base weight never sees adapter gradients.
struct Linear {
    Tensor w;  // [d_out, d_in]
    Tensor b;  // [d_out]
    std::optional<LoraAdapter> lora;

    static Linear create(int d_out, int d_in, Rng& rng);
    static Linear create_zero(int d_out, int d_in);

    int d_out() const { return w.dim(0); }
    int d_in() const { return w.dim(1); }

    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct LayerNormParams {
    Tensor gamma;  // [d]
    Tensor beta;   // [d]

    static LayerNormParams create(int d);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Pre-LN transformer block: x + attn(ln1(x)), then x + mlp(ln2(x)).
// Attention is composed from primitives; heads are column slices.
struct Block {
    LayerNormParams ln1, ln2;
    Linear wq, wk, wv, wo;
    Linear fc1, fc2;

    static Block create(int d_model, int mlp_ratio, Rng& rng);
    Block clone_params(bool requires_grad) const;
    Tensor forward(const Tensor& x, int n_heads) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// out[i] = in[map[i]]; backward scatters. `map` must be a bijection onto the
// input index range for the inverse to exist (tokenize/detokenize use it
// that way), but the op itself only requires valid indices.
Tensor permute_gather(const Tensor& in, const std::vector<std::int64_t>& map, Dims out_dims);

}  // namespace vidsplice
