#include "vidsplice/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace vidsplice {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gray palettes keep shapes >= 0.7 and backgrounds <= 0.55 so threshold
// oracles can find shape pixels.
const double kGrayPalette[kShapeColors] = {0.70, 0.85, 1.00};
const double kRgbPalette[kShapeColors][3] = {
    {0.90, 0.72, 0.70}, {0.72, 0.90, 0.70}, {0.70, 0.74, 0.95}};

bool shape_hit(ShapeKind kind, int r, int dy, int dx) {
    switch (kind) {
        case ShapeKind::square:
            return std::abs(dy) <= r && std::abs(dx) <= r;
        case ShapeKind::disc:
            return dy * dy + dx * dx <= r * r;
        case ShapeKind::triangle:
            // upward isoceles, width grows linearly from apex
            return dy >= -r && dy <= r && 2 * std::abs(dx) <= (dy + r);
    }
    return false;
}

double background_value(const SceneSpec& spec, int t, int y, int x, int view_y, int view_x) {
    const int sy = y - view_y + spec.pan_y * t;
    const int sx = x - view_x + spec.pan_x * t;
    if (spec.background == BackgroundKind::gradient) {
        const double gy = std::sin(2.0 * kPi * static_cast<double>(sy) / 17.0);
        const double gx = std::sin(2.0 * kPi * static_cast<double>(sx) / 23.0);
        return 0.28 + 0.12 * gx + 0.10 * gy;  // range [0.06, 0.50]
    }
    const int band = ((sx % 8) + 8) % 8;
    return band < 4 ? 0.12 : 0.42;
}

void center_at(const SceneSpec& spec, int t, int view_y, int view_x, int* cy, int* cx) {
    *cy = spec.start_y + spec.vel_y * t + view_y;
    *cx = spec.start_x + spec.vel_x * t + view_x;
}

void check_inside(const SceneSpec& spec, int t_frames, int h, int w, int view_y, int view_x,
                  const char* what) {
    for (int t = 0; t < t_frames; ++t) {
        int cy = 0, cx = 0;
        center_at(spec, t, view_y, view_x, &cy, &cx);
        const int r = spec.size;
        if (cy - r < 0 || cy + r >= h || cx - r < 0 || cx + r >= w) {
            throw config_error(std::string(what) + ": shape exits frame at t=" + std::to_string(t));
        }
    }
}

void render_frame(const SceneSpec& spec, int t, int h, int w, int c, int view_y, int view_x,
                  double* out) {
    int cy = 0, cx = 0;
    center_at(spec, t, view_y, view_x, &cy, &cx);
    const int r = spec.size;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double* px = out + (static_cast<std::int64_t>(y) * w + x) * c;
            if (shape_hit(spec.kind, r, y - cy, x - cx)) {
                if (c == 1) {
                    px[0] = kGrayPalette[spec.color];
                } else {
                    for (int ch = 0; ch < 3; ++ch) {
                        px[ch] = kRgbPalette[spec.color][ch];
                    }
                }
            } else {
                const double bg = background_value(spec, t, y, x, view_y, view_x);
                for (int ch = 0; ch < c; ++ch) {
                    px[ch] = bg;
                }
            }
        }
    }
}

void fill_mask_bbox(const SceneSpec& spec, int t, int h, int w, int view_y, int view_x,
                    double* mask_frame) {
    int cy = 0, cx = 0;
    center_at(spec, t, view_y, view_x, &cy, &cx);
    const int r = spec.size + 2;  // dilation
    const int y0 = std::max(0, cy - r), y1 = std::min(h - 1, cy + r);
    const int x0 = std::max(0, cx - r), x1 = std::min(w - 1, cx + r);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            mask_frame[static_cast<std::int64_t>(y) * w + x] = 1.0;
        }
    }
}

}  // namespace

GeneratedVideo gen_video(const SceneSpec& spec, int t, int h, int w, int c) {
    if (t < 1 || h < 1 || w < 1 || (c != 1 && c != 3)) {
        throw config_error("gen_video: bad dimensions");
    }
    check_inside(spec, t, h, w, 0, 0, "gen_video");
    Tensor frames = Tensor::zeros({t, h, w, c});
    Tensor masks = Tensor::zeros({t, h, w, 1});
    for (int ti = 0; ti < t; ++ti) {
        render_frame(spec, ti, h, w, c, 0, 0,
                     frames.values().data() + static_cast<std::int64_t>(ti) * h * w * c);
        fill_mask_bbox(spec, ti, h, w, 0, 0,
                       masks.values().data() + static_cast<std::int64_t>(ti) * h * w);
    }
    return GeneratedVideo{VideoClip{std::move(frames)}, MaskSequence{std::move(masks)},
                          spec.prompt_id()};
}

Tensor shape_coverage(const SceneSpec& spec, int t, int h, int w) {
    Tensor cov = Tensor::zeros({h, w});
    int cy = 0, cx = 0;
    center_at(spec, t, 0, 0, &cy, &cx);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (shape_hit(spec.kind, spec.size, y - cy, x - cx)) {
                cov.values()[static_cast<std::size_t>(y) * w + x] = 1.0;
            }
        }
    }
    return cov;
}

MaskSequence gen_random_mask(int h, int w, double ratio_lo, double ratio_hi, std::uint64_t seed) {
    if (ratio_lo < 0.0 || ratio_hi >= 1.0 || ratio_lo > ratio_hi) {
        throw config_error("gen_random_mask: need 0 <= ratio_lo <= ratio_hi < 1");
    }
    Rng rng = Rng(seed).fork("random_mask");
    const double total = static_cast<double>(h) * w;
    const int max_attempts = 200;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Tensor mask = Tensor::zeros({1, h, w, 1});
        auto& mv = mask.values();
        double frac = 0.0;
        bool overshoot = false;
        while (frac < ratio_lo) {
            const int rh = static_cast<int>(rng.uniform_int(std::max(1, h / 6), std::max(1, h / 2)));
            const int rw = static_cast<int>(rng.uniform_int(std::max(1, w / 6), std::max(1, w / 2)));
            const int y0 = static_cast<int>(rng.uniform_int(0, std::max(0, h - rh)));
            const int x0 = static_cast<int>(rng.uniform_int(0, std::max(0, w - rw)));
            for (int y = y0; y < std::min(h, y0 + rh); ++y) {
                for (int x = x0; x < std::min(w, x0 + rw); ++x) {
                    mv[static_cast<std::size_t>(y) * w + x] = 1.0;
                }
            }
            double count = 0.0;
            for (double v : mv) {
                count += v;
            }
            frac = count / total;
            if (frac > ratio_hi) {
                overshoot = true;
                break;
            }
        }
        if (!overshoot) {
            return MaskSequence{std::move(mask)};
        }
    }
    throw generation_error("gen_random_mask: could not hit ratio range [" +
                           std::to_string(ratio_lo) + ", " + std::to_string(ratio_hi) + "]");
}

GeneratedPair gen_pair(const PairSpec& spec, int h, int w, int c) {
    check_inside(spec.scene, 1, h, w, 0, 0, "gen_pair ref");
    check_inside(spec.scene, 1, h, w, spec.off_y, spec.off_x, "gen_pair target");
    Tensor ref = Tensor::zeros({1, h, w, c});
    Tensor target = Tensor::zeros({1, h, w, c});
    Tensor mask = Tensor::zeros({1, h, w, 1});
    render_frame(spec.scene, 0, h, w, c, 0, 0, ref.values().data());
    render_frame(spec.scene, 0, h, w, c, spec.off_y, spec.off_x, target.values().data());
    fill_mask_bbox(spec.scene, 0, h, w, spec.off_y, spec.off_x, mask.values().data());
    return GeneratedPair{VideoClip{std::move(ref)}, VideoClip{std::move(target)},
                         MaskSequence{std::move(mask)}, spec.scene.prompt_id()};
}

SceneSpec random_scene(Rng& rng, int t, int h, int w, const SceneOpts& opts) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        SceneSpec s;
        s.kind = static_cast<ShapeKind>(rng.uniform_int(0, kShapeKinds - 1));
        s.color = static_cast<int>(rng.uniform_int(0, kShapeColors - 1));
        s.size = static_cast<int>(rng.uniform_int(opts.min_size, opts.max_size));
        s.background = static_cast<BackgroundKind>(rng.uniform_int(0, 1));
        s.pan_y = static_cast<int>(rng.uniform_int(-opts.max_pan, opts.max_pan));
        s.pan_x = static_cast<int>(rng.uniform_int(-opts.max_pan, opts.max_pan));
        s.vel_y = static_cast<int>(rng.uniform_int(-opts.max_speed, opts.max_speed));
        s.vel_x = static_cast<int>(rng.uniform_int(-opts.max_speed, opts.max_speed));
        const int speed = std::max(std::abs(s.vel_y), std::abs(s.vel_x));
        if (speed < opts.min_speed || speed > opts.max_speed) {
            continue;
        }
        // start range keeping the whole trajectory inside the frame
        const int r = s.size;
        const int dy = s.vel_y * (t - 1), dx = s.vel_x * (t - 1);
        const int y_lo = r + std::max(0, -dy), y_hi = h - 1 - r - std::max(0, dy);
        const int x_lo = r + std::max(0, -dx), x_hi = w - 1 - r - std::max(0, dx);
        if (y_lo > y_hi || x_lo > x_hi) {
            continue;
        }
        s.start_y = static_cast<int>(rng.uniform_int(y_lo, y_hi));
        s.start_x = static_cast<int>(rng.uniform_int(x_lo, x_hi));
        s.seed = rng.next_u64();
        return s;
    }
    throw generation_error("random_scene: no feasible scene for given dims");
}

PairSpec random_pair(Rng& rng, int h, int w, const SceneOpts& opts) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        SceneOpts static_opts = opts;
        static_opts.min_speed = 0;
        static_opts.max_speed = 0;
        SceneSpec scene = random_scene(rng, 1, h, w, static_opts);
        PairSpec p;
        p.scene = scene;
        p.off_y = static_cast<int>(rng.uniform_int(-5, 5));
        p.off_x = static_cast<int>(rng.uniform_int(-5, 5));
        const int r = scene.size;
        const int cy = scene.start_y + p.off_y, cx = scene.start_x + p.off_x;
        if (cy - r < 0 || cy + r >= h || cx - r < 0 || cx + r >= w) {
            continue;
        }
        return p;
    }
    throw generation_error("random_pair: no feasible pair for given dims");
}

// ---- dataset on disk ----

namespace {

nlohmann::json spec_to_json(const SceneSpec& s) {
    return nlohmann::json{{"kind", static_cast<int>(s.kind)},
                          {"color", s.color},
                          {"size", s.size},
                          {"start_y", s.start_y},
                          {"start_x", s.start_x},
                          {"vel_y", s.vel_y},
                          {"vel_x", s.vel_x},
                          {"pan_y", s.pan_y},
                          {"pan_x", s.pan_x},
                          {"background", static_cast<int>(s.background)},
                          {"seed", s.seed}};
}

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.kind = static_cast<ShapeKind>(j.at("kind").get<int>());
    s.color = j.at("color").get<int>();
    s.size = j.at("size").get<int>();
    s.start_y = j.at("start_y").get<int>();
    s.start_x = j.at("start_x").get<int>();
    s.vel_y = j.at("vel_y").get<int>();
    s.vel_x = j.at("vel_x").get<int>();
    s.pan_y = j.at("pan_y").get<int>();
    s.pan_x = j.at("pan_x").get<int>();
    s.background = static_cast<BackgroundKind>(j.at("background").get<int>());
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

std::string indexed_name(const char* stem, int i, const char* ext) {
    std::ostringstream os;
    os << stem << "_" << std::setw(5) << std::setfill('0') << i << ext;
    return os.str();
}

}  // namespace

void write_video_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                         int t, int h, int w, int c, const SceneOpts& opts) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) {
        throw io_error("cannot write manifest in " + dir.string());
    }
    Rng root(seed);
    for (int i = 0; i < count; ++i) {
        Rng stream = root.fork(static_cast<std::uint64_t>(i));
        const SceneSpec spec = random_scene(stream, t, h, w, opts);
        const GeneratedVideo g = gen_video(spec, t, h, w, c);
        const auto video_name = indexed_name("clip", i, ".vspl");
        const auto mask_name = indexed_name("mask", i, ".vspl");
        write_raw(dir / video_name, g.video.frames, RawDtype::f32);
        write_raw(dir / mask_name, g.mask.masks, RawDtype::f32);
        nlohmann::json rec = {{"index", i},
                              {"prompt_id", g.prompt_id},
                              {"t", t},
                              {"h", h},
                              {"w", w},
                              {"c", c},
                              {"spec", spec_to_json(spec)},
                              {"video", video_name},
                              {"mask", mask_name}};
        manifest << rec.dump() << "\n";
    }
}

std::vector<ClipRecord> read_video_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.jsonl");
    if (!manifest) {
        throw io_error("cannot read manifest in " + dir.string());
    }
    std::vector<ClipRecord> records;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) {
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line);
        ClipRecord rec;
        rec.spec = spec_from_json(j.at("spec"));
        rec.prompt_id = j.at("prompt_id").get<int>();
        rec.video_path = dir / j.at("video").get<std::string>();
        rec.mask_path = dir / j.at("mask").get<std::string>();
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace vidsplice
