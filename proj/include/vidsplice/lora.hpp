#pragma once

#include <vector>

#include "vidsplice/rng.hpp"
#include "vidsplice/tensor.hpp"

namespace vidsplice {

// Low-rank adapter for a linear layer: h = W x + B (A x). B starts at zero
// so attaching is an exact no-op; only B and A train, W stays frozen.
struct LoraAdapter {
    Tensor b_up;    // [d_out, r], zero-init
    Tensor a_down;  // [r, d_in], small gaussian
    int rank = 0;
    bool enabled = true;

    static LoraAdapter create(int d_out, int d_in, int rank, Rng& rng);
};

// Enforced low-rank regime: rank <= min(d_in, d_out) / 4.
void check_lora_rank(int d_out, int d_in, int rank);

// h = x W^T + bias + (x A^T) B^T on row vectors; gradients reach only B, A.
Tensor lora_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                    const LoraAdapter& adapter);

}  // namespace vidsplice
