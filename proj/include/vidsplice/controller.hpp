#pragma once

#include <vector>

#include "vidsplice/denoiser.hpp"

namespace vidsplice {

// Trainable copy of the denoiser's first L blocks. Consumes the context
// stream next to the conditioning stream and emits one additive injection
// feature per covered layer. The context embedding and every output
// projection start at exactly zero, so a fresh controller contributes
// nothing to the host forward pass.
struct ControllerParams {
    Linear context_embed;            // zero-init input embedding
    Linear i2v_embed;                // frozen copy of the denoiser input projection
    std::vector<Block> blocks;       // L trainable copies
    std::vector<Linear> out_proj;    // zero-init, one per block

    int layer_count() const { return static_cast<int>(blocks.size()); }

    static ControllerParams init_from_denoiser(const DenoiserParams& denoiser,
                                               const DenoiserConfig& cfg, int layers);
    std::vector<NamedParam> parameters() const;  // trainable set (excludes i2v_embed)
};

// Injection features for layers 0..L-1. All streams share the latent token
// grid; masks are latent resolution. Returns exactly zero tensors for a
// freshly initialized controller.
std::vector<Tensor> controller_forward(const Tensor& context_latent, const Tensor& context_mask,
                                       const Tensor& i2v_latent, const Tensor& i2v_mask,
                                       const Tensor& noise, const DenoiserConfig& cfg,
                                       const ControllerParams& params);

}  // namespace vidsplice
