#pragma once

#include <string>
#include <vector>

#include "vidsplice/nn.hpp"
#include "vidsplice/tensor.hpp"

namespace vidsplice {

enum class DenoiserMode : int { image = 0, video = 1 };

struct DenoiserConfig {
    int n_layers = 8;
    int d_model = 64;
    int n_heads = 4;
    int patch_t = 1;
    int patch_s = 2;
    int in_channels = 32;  // latent channels of one stream
    int prompt_vocab = 9;
    int time_emb_dim = 32;
    int mlp_ratio = 4;
    DenoiserMode mode = DenoiserMode::video;

    // raw token width of the concatenated [noised; cond; mask] input
    int input_token_dim() const { return (2 * in_channels + 1) * patch_t * patch_s * patch_s; }
    int output_token_dim() const { return in_channels * patch_t * patch_s * patch_s; }

    void validate() const;
};

// Velocity-prediction transformer over latent tokens. Image mode is the
// T' == 1 special case of the same code path.
struct DenoiserParams {
    Linear input_proj;  // raw tokens -> d_model; also the embedding the controller reuses
    std::vector<Block> blocks;
    LayerNormParams head_ln;
    Linear head;  // d_model -> output tokens, zero-init
    Tensor prompt_table;  // [vocab, d_model]
    Linear time_fc1, time_fc2;

    static DenoiserParams create(const DenoiserConfig& cfg, Rng& rng);
    std::vector<NamedParam> parameters() const;
    void set_requires_grad(bool flag);
};

struct DenoiserInput {
    Tensor noised;  // [T',H',W',C]
    Tensor cond;    // [T',H',W',C]
    Tensor mask;    // [T',H',W',1]
    int prompt_id = 0;
    double t = 0.0;
};

// ---- patch tokenization ----
Tensor tokenize(const Tensor& grid, int patch_t, int patch_s);  // [T',H',W',C] -> [N, D]
Tensor detokenize(const Tensor& tokens, const Dims& grid_dims, int patch_t, int patch_s);
std::int64_t token_count(const Dims& grid_dims, int patch_t, int patch_s);

// Factored 3-axis sinusoidal position table, [N, d_model], constant.
Tensor position_encoding(int grid_t, int grid_h, int grid_w, int d_model);

// Sinusoidal timestep features -> MLP, plus prompt embedding; returns [1, d].
Tensor conditioning_vector(const DenoiserConfig& cfg, const DenoiserParams& params,
                           int prompt_id, double t);

// Velocity prediction. `injections`, when given, holds per-layer [N, d_model]
// tensors added to the outputs of blocks 0..L-1; L must not exceed n_layers.
Tensor dit_forward(const DenoiserInput& inp, const DenoiserConfig& cfg,
                   const DenoiserParams& params,
                   const std::vector<Tensor>* injections = nullptr);

// ---- adapter attach points (attention-block linears) ----
int attach_adapters(DenoiserParams& params, const DenoiserConfig& cfg, int rank, Rng& rng);
void detach_adapters(DenoiserParams& params);
void set_adapters_enabled(DenoiserParams& params, bool enabled);
bool has_adapters(const DenoiserParams& params);
std::vector<NamedParam> adapter_parameters(const DenoiserParams& params);

}  // namespace vidsplice
