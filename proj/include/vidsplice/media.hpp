#pragma once

#include <filesystem>
#include <string>

#include "vidsplice/tensor.hpp"

namespace vidsplice {

// Dense frame stack [T,H,W,C], C in {1,3}, values in [0,1].
struct VideoClip {
    Tensor frames;

    int t() const { return frames.dim(0); }
    int h() const { return frames.dim(1); }
    int w() const { return frames.dim(2); }
    int c() const { return frames.dim(3); }

    static VideoClip wrap(Tensor frames);  // validates invariants
};

// Per-frame binary mask [T,H,W,1]; 1 marks pixels that may be modified,
// 0 marks fixed content.
struct MaskSequence {
    Tensor masks;

    int t() const { return masks.dim(0); }
    int h() const { return masks.dim(1); }
    int w() const { return masks.dim(2); }

    static MaskSequence wrap(Tensor masks);  // validates binary values
    static MaskSequence zeros(int t, int h, int w);
    static MaskSequence ones(int t, int h, int w);
};

void check_paired(const VideoClip& v, const MaskSequence& m, const char* where);

// out[t] = v[t] * (1 - m[t]), mask broadcast over channels.
VideoClip make_masked_video(const VideoClip& v, const MaskSequence& m);

// out = m * generated + (1 - m) * original.
VideoClip composite(const VideoClip& generated, const VideoClip& original, const MaskSequence& m);

// Single-frame convenience wrappers (T == 1 clips).
VideoClip single_frame(const VideoClip& v, int t);
MaskSequence single_mask(const MaskSequence& m, int t);

// ---- raw tensor file ----
//
// Layout, little-endian:
//   magic "VSPL" | version u32 | dtype u8 (0=f32, 1=f64) | ndim u8 |
//   dims u32 x ndim | payload row-major
enum class RawDtype : std::uint8_t { f32 = 0, f64 = 1 };

constexpr std::uint32_t kRawFormatVersion = 1;

void write_raw(const std::filesystem::path& path, const Tensor& t, RawDtype dtype = RawDtype::f64);
Tensor read_raw(const std::filesystem::path& path);

// ---- frame export ----
//
// Writes binary PGM (C=1) or PPM (C=3), 8-bit, one file per frame named
// frame_<index zero-padded to 5>.pgm/.ppm. Values quantized round-half-up.
std::vector<std::filesystem::path> export_frames(const VideoClip& v,
                                                 const std::filesystem::path& dir);

std::uint8_t quantize_u8(double v);

}  // namespace vidsplice
