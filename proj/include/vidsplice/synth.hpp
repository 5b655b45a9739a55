#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidsplice/media.hpp"
#include "vidsplice/rng.hpp"

namespace vidsplice {

enum class ShapeKind : int { square = 0, disc = 1, triangle = 2 };
enum class BackgroundKind : int { gradient = 0, stripes = 1 };

constexpr int kShapeKinds = 3;
constexpr int kShapeColors = 3;

inline int prompt_vocab_size() { return kShapeKinds * kShapeColors; }

// One procedurally generated moving-shape scene. Positions, velocities and
// pans are integer pixels so centroid arithmetic is exact.
struct SceneSpec {
    ShapeKind kind = ShapeKind::square;
    int color = 0;           // palette index
    int size = 4;            // half-extent in px; shape spans 2*size+1
    int start_y = 0, start_x = 0;
    int vel_y = 0, vel_x = 0;    // px/frame, shape motion
    int pan_y = 0, pan_x = 0;    // px/frame, background (camera) motion
    BackgroundKind background = BackgroundKind::gradient;
    std::uint64_t seed = 0;

    int prompt_id() const { return static_cast<int>(kind) * kShapeColors + color; }
};

struct SceneOpts {
    int min_size = 3, max_size = 5;
    int min_speed = 0, max_speed = 2;  // per-axis max of |vel| components
    int max_pan = 1;
};

struct GeneratedVideo {
    VideoClip video;
    MaskSequence mask;
    int prompt_id = 0;
};

// Deterministic given the spec. Mask covers the shape's bounding box dilated
// by 2 px per frame. Throws config_error if the shape leaves the frame.
GeneratedVideo gen_video(const SceneSpec& spec, int t, int h, int w, int c);

// True where the shape is drawn at frame `t` (no dilation); oracle helper.
Tensor shape_coverage(const SceneSpec& spec, int t, int h, int w);

// Union of random rectangles with masked-area fraction inside
// [ratio_lo, ratio_hi]. T == 1 mask.
MaskSequence gen_random_mask(int h, int w, double ratio_lo, double ratio_hi, std::uint64_t seed);

// Two views of one scene instance separated by an integer viewpoint offset.
struct PairSpec {
    SceneSpec scene;
    int off_y = 0, off_x = 0;
};

struct GeneratedPair {
    VideoClip ref;            // fully visible view, T == 1
    VideoClip target;         // offset view, T == 1
    MaskSequence target_mask; // covers the shape in the target view
    int prompt_id = 0;
};

GeneratedPair gen_pair(const PairSpec& spec, int h, int w, int c);

SceneSpec random_scene(Rng& rng, int t, int h, int w, const SceneOpts& opts);
PairSpec random_pair(Rng& rng, int h, int w, const SceneOpts& opts);

// ---- dataset on disk ----
//
// Directory layout: manifest.jsonl plus clip_%05d.vspl / mask_%05d.vspl.
// Manifest records carry the full spec so samples can be re-rendered.
struct ClipRecord {
    SceneSpec spec;
    int prompt_id = 0;
    std::filesystem::path video_path;
    std::filesystem::path mask_path;
};

void write_video_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                         int t, int h, int w, int c, const SceneOpts& opts);
std::vector<ClipRecord> read_video_dataset(const std::filesystem::path& dir);

}  // namespace vidsplice
