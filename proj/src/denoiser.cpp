#include "vidsplice/denoiser.hpp"

#include <cmath>

namespace vidsplice {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::int64_t> tokenize_map(const Dims& grid, int patch_t, int patch_s,
                                       Dims* out_dims) {
    const int t = grid[0], h = grid[1], w = grid[2], c = grid[3];
    if (t % patch_t != 0 || h % patch_s != 0 || w % patch_s != 0) {
        throw shape_error("grid " + dims_to_string(grid) + " not divisible by patch factors (" +
                          std::to_string(patch_t) + "," + std::to_string(patch_s) + ")");
    }
    const int gt = t / patch_t, gh = h / patch_s, gw = w / patch_s;
    const int token_dim = c * patch_t * patch_s * patch_s;
    const std::int64_t n = static_cast<std::int64_t>(gt) * gh * gw;
    *out_dims = {static_cast<int>(n), token_dim};
    std::vector<std::int64_t> map(static_cast<std::size_t>(n * token_dim));
    std::size_t o = 0;
    for (int bt = 0; bt < gt; ++bt) {
        for (int by = 0; by < gh; ++by) {
            for (int bx = 0; bx < gw; ++bx) {
                for (int dt = 0; dt < patch_t; ++dt) {
                    for (int dy = 0; dy < patch_s; ++dy) {
                        for (int dx = 0; dx < patch_s; ++dx) {
                            const std::int64_t base =
                                ((static_cast<std::int64_t>(bt * patch_t + dt) * h +
                                  (by * patch_s + dy)) * w +
                                 (bx * patch_s + dx)) * c;
                            for (int ch = 0; ch < c; ++ch) {
                                map[o++] = base + ch;
                            }
                        }
                    }
                }
            }
        }
    }
    return map;
}

std::vector<std::int64_t> invert_map(const std::vector<std::int64_t>& map) {
    std::vector<std::int64_t> inv(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        inv[static_cast<std::size_t>(map[i])] = static_cast<std::int64_t>(i);
    }
    return inv;
}

// One sinusoidal family over a d-dim chunk.
void fill_axis_pe(double* row, int offset, int chunk, int pos) {
    for (int j = 0; j < chunk; ++j) {
        const double freq = std::pow(10000.0, -2.0 * (j / 2) / static_cast<double>(chunk));
        const double angle = pos * freq;
        row[offset + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
}

}  // namespace

void DenoiserConfig::validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1) {
        throw config_error("denoiser dims must be positive");
    }
    if (d_model % n_heads != 0) {
        throw config_error("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                           std::to_string(n_heads));
    }
    if (patch_t < 1 || patch_s < 1 || in_channels < 1 || prompt_vocab < 1 || time_emb_dim < 2 ||
        mlp_ratio < 1) {
        throw config_error("denoiser config has non-positive field");
    }
    if (mode == DenoiserMode::image && patch_t != 1) {
        throw config_error("image mode requires patch_t == 1");
    }
}

DenoiserParams DenoiserParams::create(const DenoiserConfig& cfg, Rng& rng) {
    cfg.validate();
    DenoiserParams p;
    Rng r = rng.fork("denoiser_init");
    p.input_proj = Linear::create(cfg.d_model, cfg.input_token_dim(), r);
    p.blocks.reserve(static_cast<std::size_t>(cfg.n_layers));
    for (int i = 0; i < cfg.n_layers; ++i) {
        p.blocks.push_back(Block::create(cfg.d_model, cfg.mlp_ratio, r));
    }
    p.head_ln = LayerNormParams::create(cfg.d_model);
    p.head = Linear::create_zero(cfg.output_token_dim(), cfg.d_model);
    p.prompt_table = Tensor::randn({cfg.prompt_vocab, cfg.d_model}, r, 0.02, true);
    p.time_fc1 = Linear::create(cfg.d_model, cfg.time_emb_dim, r);
    p.time_fc2 = Linear::create(cfg.d_model, cfg.d_model, r);
    return p;
}

std::vector<NamedParam> DenoiserParams::parameters() const {
    std::vector<NamedParam> out;
    input_proj.collect("input_proj", out);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect("blocks." + std::to_string(i), out);
    }
    head_ln.collect("head_ln", out);
    head.collect("head", out);
    out.push_back({"prompt_table", prompt_table});
    time_fc1.collect("time_fc1", out);
    time_fc2.collect("time_fc2", out);
    return out;
}

void DenoiserParams::set_requires_grad(bool flag) {
    for (auto& p : parameters()) {
        p.tensor.set_requires_grad(flag);
    }
}

Tensor tokenize(const Tensor& grid, int patch_t, int patch_s) {
    if (grid.ndim() != 4) {
        throw shape_error("tokenize expects [T,H,W,C]");
    }
    Dims out_dims;
    const auto map = tokenize_map(grid.dims(), patch_t, patch_s, &out_dims);
    return permute_gather(grid, map, out_dims);
}

Tensor detokenize(const Tensor& tokens, const Dims& grid_dims, int patch_t, int patch_s) {
    if (tokens.ndim() != 2) {
        throw shape_error("detokenize expects [N,D]");
    }
    Dims token_dims;
    const auto map = tokenize_map(grid_dims, patch_t, patch_s, &token_dims);
    if (token_dims != tokens.dims()) {
        throw shape_error("detokenize: tokens " + dims_to_string(tokens.dims()) +
                          " do not match grid " + dims_to_string(grid_dims));
    }
    return permute_gather(tokens, invert_map(map), grid_dims);
}

std::int64_t token_count(const Dims& grid_dims, int patch_t, int patch_s) {
    return (static_cast<std::int64_t>(grid_dims[0]) / patch_t) * (grid_dims[1] / patch_s) *
           (grid_dims[2] / patch_s);
}

Tensor position_encoding(int grid_t, int grid_h, int grid_w, int d_model) {
    const std::int64_t n = static_cast<std::int64_t>(grid_t) * grid_h * grid_w;
    Tensor pe = Tensor::zeros({static_cast<int>(n), d_model});
    const int chunk_t = d_model / 3;
    const int chunk_h = d_model / 3;
    const int chunk_w = d_model - 2 * (d_model / 3);
    auto& v = pe.values();
    std::int64_t row = 0;
    for (int t = 0; t < grid_t; ++t) {
        for (int y = 0; y < grid_h; ++y) {
            for (int x = 0; x < grid_w; ++x, ++row) {
                double* p = v.data() + row * d_model;
                fill_axis_pe(p, 0, chunk_t, t);
                fill_axis_pe(p, chunk_t, chunk_h, y);
                fill_axis_pe(p, chunk_t + chunk_h, chunk_w, x);
            }
        }
    }
    return pe;
}

Tensor conditioning_vector(const DenoiserConfig& cfg, const DenoiserParams& params,
                           int prompt_id, double t) {
    if (!std::isfinite(t) || t < 0.0 || t > 1.0) {
        throw contract_error("timestep must be finite in [0,1], got " + std::to_string(t));
    }
    Tensor feats = Tensor::zeros({1, cfg.time_emb_dim});
    auto& fv = feats.values();
    const int half = cfg.time_emb_dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        fv[static_cast<std::size_t>(2 * i)] = std::sin(2.0 * kPi * t * freq * 100.0);
        if (2 * i + 1 < cfg.time_emb_dim) {
            fv[static_cast<std::size_t>(2 * i + 1)] = std::cos(2.0 * kPi * t * freq * 100.0);
        }
    }
    Tensor temb = params.time_fc2.forward(gelu(params.time_fc1.forward(feats)));
    Tensor pemb = embedding(params.prompt_table, {prompt_id});
    return add(temb, pemb);
}

Tensor dit_forward(const DenoiserInput& inp, const DenoiserConfig& cfg,
                   const DenoiserParams& params, const std::vector<Tensor>* injections) {
    cfg.validate();
    if (!same_dims(inp.noised, inp.cond)) {
        throw shape_error("noised and conditioning latents differ: " +
                          dims_to_string(inp.noised.dims()) + " vs " +
                          dims_to_string(inp.cond.dims()));
    }
    if (inp.mask.ndim() != 4 || inp.mask.dim(3) != 1 || inp.mask.dim(0) != inp.noised.dim(0) ||
        inp.mask.dim(1) != inp.noised.dim(1) || inp.mask.dim(2) != inp.noised.dim(2)) {
        throw shape_error("latent mask " + dims_to_string(inp.mask.dims()) +
                          " does not pair with latent " + dims_to_string(inp.noised.dims()));
    }
    if (inp.noised.dim(3) != cfg.in_channels) {
        throw shape_error("latent channels " + std::to_string(inp.noised.dim(3)) +
                          " do not match configured " + std::to_string(cfg.in_channels));
    }
    if (cfg.mode == DenoiserMode::image && inp.noised.dim(0) != 1) {
        throw shape_error("image mode expects a single latent frame");
    }
    if (injections != nullptr && static_cast<int>(injections->size()) > cfg.n_layers) {
        throw contract_error("injection layer index " + std::to_string(injections->size() - 1) +
                             " >= n_layers " + std::to_string(cfg.n_layers));
    }

    Tensor raw = concat({inp.noised, inp.cond, inp.mask}, 3);
    Tensor tokens = tokenize(raw, cfg.patch_t, cfg.patch_s);
    const int n = tokens.dim(0);

    Tensor x = params.input_proj.forward(tokens);
    x = add(x, position_encoding(inp.noised.dim(0) / cfg.patch_t, inp.noised.dim(1) / cfg.patch_s,
                                 inp.noised.dim(2) / cfg.patch_s, cfg.d_model));
    Tensor cvec = conditioning_vector(cfg, params, inp.prompt_id, inp.t);
    Tensor cexp = expand_rows(cvec, n);
    for (int i = 0; i < cfg.n_layers; ++i) {
        x = add(x, cexp);
        x = params.blocks[static_cast<std::size_t>(i)].forward(x, cfg.n_heads);
        if (injections != nullptr && i < static_cast<int>(injections->size())) {
            const Tensor& inj = (*injections)[static_cast<std::size_t>(i)];
            if (inj.dims() != x.dims()) {
                throw shape_error("injection " + std::to_string(i) + " dims " +
                                  dims_to_string(inj.dims()) + " do not match token grid " +
                                  dims_to_string(x.dims()));
            }
            x = add(x, inj);
        }
    }
    Tensor h = params.head.forward(params.head_ln.forward(x));
    Dims out_grid = {inp.noised.dim(0), inp.noised.dim(1), inp.noised.dim(2), cfg.in_channels};
    return detokenize(h, out_grid, cfg.patch_t, cfg.patch_s);
}

int attach_adapters(DenoiserParams& params, const DenoiserConfig& cfg, int rank, Rng& rng) {
    if (has_adapters(params)) {
        throw contract_error("adapters already attached");
    }
    Rng r = rng.fork("lora_init");
    int added = 0;
    for (auto& blk : params.blocks) {
        for (Linear* lin : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) {
            lin->lora = LoraAdapter::create(lin->d_out(), lin->d_in(), rank, r);
            added += rank * (lin->d_in() + lin->d_out());
        }
    }
    (void)cfg;
    return added;
}

void detach_adapters(DenoiserParams& params) {
    for (auto& blk : params.blocks) {
        for (Linear* lin : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) {
            lin->lora.reset();
        }
    }
}

void set_adapters_enabled(DenoiserParams& params, bool enabled) {
    for (auto& blk : params.blocks) {
        for (Linear* lin : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) {
            if (lin->lora.has_value()) {
                lin->lora->enabled = enabled;
            }
        }
    }
}

bool has_adapters(const DenoiserParams& params) {
    for (const auto& blk : params.blocks) {
        if (blk.wq.lora.has_value()) {
            return true;
        }
    }
    return false;
}

std::vector<NamedParam> adapter_parameters(const DenoiserParams& params) {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        const Block& blk = params.blocks[i];
        const char* names[4] = {"wq", "wk", "wv", "wo"};
        const Linear* lins[4] = {&blk.wq, &blk.wk, &blk.wv, &blk.wo};
        for (int j = 0; j < 4; ++j) {
            if (lins[j]->lora.has_value()) {
                const std::string prefix = "blocks." + std::to_string(i) + "." + names[j] + ".lora";
                out.push_back({prefix + ".b_up", lins[j]->lora->b_up});
                out.push_back({prefix + ".a_down", lins[j]->lora->a_down});
            }
        }
    }
    return out;
}

}  // namespace vidsplice
