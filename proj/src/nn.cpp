#include "vidsplice/nn.hpp"

#include <cmath>

namespace vidsplice {

Linear Linear::create(int d_out, int d_in, Rng& rng) {
    Linear l;
    l.w = Tensor::randn({d_out, d_in}, rng, 1.0 / std::sqrt(static_cast<double>(d_in)), true);
    l.b = Tensor::zeros({d_out}, true);
    return l;
}

Linear Linear::create_zero(int d_out, int d_in) {
    Linear l;
    l.w = Tensor::zeros({d_out, d_in}, true);
    l.b = Tensor::zeros({d_out}, true);
    return l;
}

Tensor Linear::forward(const Tensor& x) const {
    if (x.ndim() != 2 || x.dim(1) != d_in()) {
        throw shape_error("linear expects [n," + std::to_string(d_in()) + "], got " +
                          dims_to_string(x.dims()));
    }
    if (lora.has_value() && lora->enabled) {
        return lora_forward(x, w, b, *lora);
    }
    Tensor y = matmul(x, transpose(w));
    return add(y, expand_rows(b, x.dim(0)));
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

LayerNormParams LayerNormParams::create(int d) {
    LayerNormParams p;
    p.gamma = Tensor::full({d}, 1.0, true);
    p.beta = Tensor::zeros({d}, true);
    return p;
}

Tensor LayerNormParams::forward(const Tensor& x) const { return layernorm(x, gamma, beta); }

void LayerNormParams::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

Block Block::create(int d_model, int mlp_ratio, Rng& rng) {
    Block blk;
    blk.ln1 = LayerNormParams::create(d_model);
    blk.ln2 = LayerNormParams::create(d_model);
    blk.wq = Linear::create(d_model, d_model, rng);
    blk.wk = Linear::create(d_model, d_model, rng);
    blk.wv = Linear::create(d_model, d_model, rng);
    blk.wo = Linear::create(d_model, d_model, rng);
    blk.fc1 = Linear::create(d_model * mlp_ratio, d_model, rng);
    blk.fc2 = Linear::create(d_model, d_model * mlp_ratio, rng);
    return blk;
}

namespace {

Linear clone_linear(const Linear& src, bool requires_grad) {
    Linear l;
    l.w = Tensor::from_values(src.w.dims(), src.w.values(), requires_grad);
    l.b = Tensor::from_values(src.b.dims(), src.b.values(), requires_grad);
    return l;  // adapters are not cloned
}

}  // namespace

Block Block::clone_params(bool requires_grad) const {
    Block blk;
    blk.ln1.gamma = Tensor::from_values(ln1.gamma.dims(), ln1.gamma.values(), requires_grad);
    blk.ln1.beta = Tensor::from_values(ln1.beta.dims(), ln1.beta.values(), requires_grad);
    blk.ln2.gamma = Tensor::from_values(ln2.gamma.dims(), ln2.gamma.values(), requires_grad);
    blk.ln2.beta = Tensor::from_values(ln2.beta.dims(), ln2.beta.values(), requires_grad);
    blk.wq = clone_linear(wq, requires_grad);
    blk.wk = clone_linear(wk, requires_grad);
    blk.wv = clone_linear(wv, requires_grad);
    blk.wo = clone_linear(wo, requires_grad);
    blk.fc1 = clone_linear(fc1, requires_grad);
    blk.fc2 = clone_linear(fc2, requires_grad);
    return blk;
}

Tensor Block::forward(const Tensor& x, int n_heads) const {
    const int d = x.dim(1);
    if (d % n_heads != 0) {
        throw config_error("d_model not divisible by head count");
    }
    const int dh = d / n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor a = ln1.forward(x);
    Tensor q = wq.forward(a);
    Tensor k = wk.forward(a);
    Tensor v = wv.forward(a);
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        Tensor qh = slice(q, 1, h * dh, dh);
        Tensor kh = slice(k, 1, h * dh, dh);
        Tensor vh = slice(v, 1, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), att_scale);
        Tensor probs = softmax(scores);
        heads.push_back(matmul(probs, vh));
    }
    Tensor attn_out = wo.forward(n_heads == 1 ? heads[0] : concat(heads, 1));
    Tensor x1 = add(x, attn_out);

    Tensor m = ln2.forward(x1);
    Tensor mlp_out = fc2.forward(gelu(fc1.forward(m)));
    return add(x1, mlp_out);
}

void Block::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
    wq.collect(prefix + ".wq", out);
    wk.collect(prefix + ".wk", out);
    wv.collect(prefix + ".wv", out);
    wo.collect(prefix + ".wo", out);
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

Tensor permute_gather(const Tensor& in, const std::vector<std::int64_t>& map, Dims out_dims) {
    if (static_cast<std::int64_t>(map.size()) != numel(out_dims)) {
        throw shape_error("permute_gather map size does not match output dims");
    }
    Tensor out = Tensor::zeros(out_dims);
    const auto& src = in.values();
    auto& dst = out.values();
    for (std::size_t i = 0; i < map.size(); ++i) {
        dst[i] = src[static_cast<std::size_t>(map[i])];
    }
    auto din = in.impl();
    auto dout = out.impl();
    const bool want = in.requires_grad();
    if (Tape::current() != nullptr && want) {
        out.set_requires_grad(true);
        auto shared_map = std::make_shared<std::vector<std::int64_t>>(map);
        Tape::current()->record([din, dout, shared_map]() {
            if (dout->grad.empty() || !din->requires_grad) {
                return;
            }
            if (din->grad.empty()) {
                din->grad.assign(din->values.size(), 0.0);
            }
            for (std::size_t i = 0; i < shared_map->size(); ++i) {
                din->grad[static_cast<std::size_t>((*shared_map)[i])] += dout->grad[i];
            }
        });
    }
    return out;
}

}  // namespace vidsplice
