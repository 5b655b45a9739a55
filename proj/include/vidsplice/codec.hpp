#pragma once

#include "vidsplice/media.hpp"
#include "vidsplice/tensor.hpp"

namespace vidsplice {

// Spatiotemporal block rearrangement between pixel space [T,H,W,C] and
// latent space [T/k_t, H/k_s, W/k_s, C*k_t*k_s^2]. Pure data movement, so
// decode(encode(x)) is a bitwise identity.
//
// Channel packing order inside a latent cell: ((dt*k_s + dy)*k_s + dx)*C + c
// for frame offset dt, pixel offsets (dy, dx) and source channel c.
struct LatentGrid {
    Tensor data;  // [T',H',W',C']

    int t() const { return data.dim(0); }
    int h() const { return data.dim(1); }
    int w() const { return data.dim(2); }
    int c() const { return data.dim(3); }
};

void check_divisible(int t, int h, int w, int k_t, int k_s);

LatentGrid encode(const VideoClip& v, int k_t, int k_s);
VideoClip decode(const LatentGrid& l, int k_t, int k_s);

// Tensor-level versions used for latent-space tensors that are not valid
// clips (noise, velocities, spliced frames).
Tensor encode_tensor(const Tensor& pixels, int k_t, int k_s);
Tensor decode_tensor(const Tensor& latent, int k_t, int k_s);

// Latent cell is 1 iff any covered pixel-time is 1 (max-pool rule).
// Result dims [T',H',W',1].
Tensor encode_mask(const MaskSequence& m, int k_t, int k_s);

}  // namespace vidsplice
