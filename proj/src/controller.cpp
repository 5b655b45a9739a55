#include "vidsplice/controller.hpp"

namespace vidsplice {

ControllerParams ControllerParams::init_from_denoiser(const DenoiserParams& denoiser,
                                                      const DenoiserConfig& cfg, int layers) {
    if (layers < 0 || layers > cfg.n_layers) {
        throw config_error("controller layers " + std::to_string(layers) +
                           " exceed denoiser depth " + std::to_string(cfg.n_layers));
    }
    ControllerParams c;
    c.context_embed = Linear::create_zero(cfg.d_model, cfg.input_token_dim());
    c.i2v_embed.w = Tensor::from_values(denoiser.input_proj.w.dims(),
                                        denoiser.input_proj.w.values(), false);
    c.i2v_embed.b = Tensor::from_values(denoiser.input_proj.b.dims(),
                                        denoiser.input_proj.b.values(), false);
    c.blocks.reserve(static_cast<std::size_t>(layers));
    c.out_proj.reserve(static_cast<std::size_t>(layers));
    for (int i = 0; i < layers; ++i) {
        c.blocks.push_back(denoiser.blocks[static_cast<std::size_t>(i)].clone_params(true));
        c.out_proj.push_back(Linear::create_zero(cfg.d_model, cfg.d_model));
    }
    return c;
}

std::vector<NamedParam> ControllerParams::parameters() const {
    std::vector<NamedParam> out;
    context_embed.collect("context_embed", out);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect("blocks." + std::to_string(i), out);
        out_proj[i].collect("out_proj." + std::to_string(i), out);
    }
    return out;
}

std::vector<Tensor> controller_forward(const Tensor& context_latent, const Tensor& context_mask,
                                       const Tensor& i2v_latent, const Tensor& i2v_mask,
                                       const Tensor& noise, const DenoiserConfig& cfg,
                                       const ControllerParams& params) {
    if (params.layer_count() == 0) {
        return {};
    }
    if (!same_dims(context_latent, i2v_latent) || !same_dims(context_latent, noise)) {
        throw shape_error("controller streams must share the latent grid: " +
                          dims_to_string(context_latent.dims()) + " vs " +
                          dims_to_string(i2v_latent.dims()) + " vs " +
                          dims_to_string(noise.dims()));
    }
    Tensor raw_context = tokenize(concat({context_latent, noise, context_mask}, 3),
                                  cfg.patch_t, cfg.patch_s);
    Tensor raw_i2v = tokenize(concat({i2v_latent, noise, i2v_mask}, 3), cfg.patch_t, cfg.patch_s);
    Tensor x = add(params.context_embed.forward(raw_context), params.i2v_embed.forward(raw_i2v));
    x = add(x, position_encoding(context_latent.dim(0) / cfg.patch_t,
                                 context_latent.dim(1) / cfg.patch_s,
                                 context_latent.dim(2) / cfg.patch_s, cfg.d_model));
    std::vector<Tensor> injections;
    injections.reserve(params.blocks.size());
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        x = params.blocks[i].forward(x, cfg.n_heads);
        injections.push_back(params.out_proj[i].forward(x));
    }
    return injections;
}

}  // namespace vidsplice
