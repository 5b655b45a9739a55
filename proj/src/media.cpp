#include "vidsplice/media.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vidsplice {

namespace {

void check_video_dims(const Tensor& frames) {
    if (frames.ndim() != 4) {
        throw shape_error("video clip must be [T,H,W,C], got " + dims_to_string(frames.dims()));
    }
    const int c = frames.dim(3);
    if (c != 1 && c != 3) {
        throw shape_error("video clip channels must be 1 or 3, got " + std::to_string(c));
    }
    for (double v : frames.values()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw contract_error("video clip values must be finite and in [0,1]");
        }
    }
}

void check_mask_dims(const Tensor& masks) {
    if (masks.ndim() != 4 || masks.dim(3) != 1) {
        throw shape_error("mask sequence must be [T,H,W,1], got " + dims_to_string(masks.dims()));
    }
    for (double v : masks.values()) {
        if (v != 0.0 && v != 1.0) {
            throw contract_error("mask values must be exactly 0 or 1");
        }
    }
}

}  // namespace

VideoClip VideoClip::wrap(Tensor frames) {
    check_video_dims(frames);
    return VideoClip{std::move(frames)};
}

MaskSequence MaskSequence::wrap(Tensor masks) {
    check_mask_dims(masks);
    return MaskSequence{std::move(masks)};
}

MaskSequence MaskSequence::zeros(int t, int h, int w) {
    return MaskSequence{Tensor::zeros({t, h, w, 1})};
}

MaskSequence MaskSequence::ones(int t, int h, int w) {
    return MaskSequence{Tensor::full({t, h, w, 1}, 1.0)};
}

void check_paired(const VideoClip& v, const MaskSequence& m, const char* where) {
    if (v.t() != m.t() || v.h() != m.h() || v.w() != m.w()) {
        throw shape_error(std::string(where) + ": clip " + dims_to_string(v.frames.dims()) +
                          " does not pair with mask " + dims_to_string(m.masks.dims()));
    }
}

VideoClip make_masked_video(const VideoClip& v, const MaskSequence& m) {
    check_paired(v, m, "make_masked_video");
    const int c = v.c();
    Tensor out = Tensor::zeros(v.frames.dims());
    const auto& vf = v.frames.values();
    const auto& mv = m.masks.values();
    auto& ov = out.values();
    for (std::size_t p = 0; p < mv.size(); ++p) {
        const double keep = 1.0 - mv[p];
        for (int ch = 0; ch < c; ++ch) {
            ov[p * c + ch] = vf[p * c + ch] * keep;
        }
    }
    return VideoClip{std::move(out)};
}

VideoClip composite(const VideoClip& generated, const VideoClip& original, const MaskSequence& m) {
    if (!same_dims(generated.frames, original.frames)) {
        throw shape_error("composite: generated " + dims_to_string(generated.frames.dims()) +
                          " vs original " + dims_to_string(original.frames.dims()));
    }
    check_paired(original, m, "composite");
    const int c = original.c();
    Tensor out = Tensor::zeros(original.frames.dims());
    const auto& gv = generated.frames.values();
    const auto& ov = original.frames.values();
    const auto& mv = m.masks.values();
    auto& rv = out.values();
    for (std::size_t p = 0; p < mv.size(); ++p) {
        for (int ch = 0; ch < c; ++ch) {
            // exact select, so unmasked pixels keep original bits unchanged
            rv[p * c + ch] = mv[p] == 1.0 ? gv[p * c + ch] : ov[p * c + ch];
        }
    }
    return VideoClip{std::move(out)};
}

VideoClip single_frame(const VideoClip& v, int t) {
    if (t < 0 || t >= v.t()) {
        throw shape_error("frame index out of range");
    }
    return VideoClip{slice(v.frames, 0, t, 1)};
}

MaskSequence single_mask(const MaskSequence& m, int t) {
    if (t < 0 || t >= m.t()) {
        throw shape_error("mask index out of range");
    }
    return MaskSequence{slice(m.masks, 0, t, 1)};
}

// ---- raw tensor file ----

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) {
        throw format_error("truncated header");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_raw(const std::filesystem::path& path, const Tensor& t, RawDtype dtype) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw io_error("cannot open " + path.string() + " for writing");
    }
    os.write("VSPL", 4);
    put_u32(os, kRawFormatVersion);
    const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    os.put(static_cast<char>(dt));
    os.put(static_cast<char>(t.ndim()));
    for (int d : t.dims()) {
        put_u32(os, static_cast<std::uint32_t>(d));
    }
    if (dtype == RawDtype::f64) {
        os.write(reinterpret_cast<const char*>(t.values().data()),
                 static_cast<std::streamsize>(t.values().size() * sizeof(double)));
    } else {
        std::vector<float> tmp(t.values().size());
        for (std::size_t i = 0; i < tmp.size(); ++i) {
            tmp[i] = static_cast<float>(t.values()[i]);
        }
        os.write(reinterpret_cast<const char*>(tmp.data()),
                 static_cast<std::streamsize>(tmp.size() * sizeof(float)));
    }
    if (!os) {
        throw io_error("short write to " + path.string());
    }
}

Tensor read_raw(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw io_error("cannot open " + path.string());
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VSPL", 4) != 0) {
        throw format_error("bad magic in " + path.string());
    }
    const std::uint32_t version = get_u32(is);
    if (version != kRawFormatVersion) {
        throw format_error("unsupported format version " + std::to_string(version));
    }
    const int dt = is.get();
    const int ndim = is.get();
    if (!is || (dt != 0 && dt != 1) || ndim <= 0 || ndim > 8) {
        throw format_error("bad dtype/ndim in " + path.string());
    }
    Dims dims(static_cast<std::size_t>(ndim));
    for (int i = 0; i < ndim; ++i) {
        dims[static_cast<std::size_t>(i)] = static_cast<int>(get_u32(is));
        if (dims[static_cast<std::size_t>(i)] <= 0) {
            throw format_error("non-positive dim in " + path.string());
        }
    }
    const std::int64_t n = numel(dims);
    std::vector<double> values(static_cast<std::size_t>(n));
    if (dt == 1) {
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else {
        std::vector<float> tmp(static_cast<std::size_t>(n));
        is.read(reinterpret_cast<char*>(tmp.data()),
                static_cast<std::streamsize>(tmp.size() * sizeof(float)));
        for (std::size_t i = 0; i < tmp.size(); ++i) {
            values[i] = static_cast<double>(tmp[i]);
        }
    }
    if (!is || is.gcount() == 0) {
        throw format_error("truncated payload in " + path.string());
    }
    // must have consumed exactly the payload
    is.peek();
    if (!is.eof()) {
        throw format_error("trailing bytes in " + path.string());
    }
    return Tensor::from_values(std::move(dims), std::move(values));
}

// ---- frame export ----

std::uint8_t quantize_u8(double v) {
    const double scaled = v * 255.0 + 0.5;  // round half up
    const double clamped = std::max(0.0, std::min(255.0, std::floor(scaled)));
    return static_cast<std::uint8_t>(clamped);
}

std::vector<std::filesystem::path> export_frames(const VideoClip& v,
                                                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const int t = v.t(), h = v.h(), w = v.w(), c = v.c();
    const char* ext = c == 1 ? ".pgm" : ".ppm";
    const char* head = c == 1 ? "P5" : "P6";
    std::vector<std::filesystem::path> paths;
    paths.reserve(static_cast<std::size_t>(t));
    const auto& fv = v.frames.values();
    for (int ti = 0; ti < t; ++ti) {
        std::ostringstream name;
        name << "frame_" << std::setw(5) << std::setfill('0') << ti << ext;
        const auto path = dir / name.str();
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw io_error("cannot open " + path.string());
        }
        os << head << "\n" << w << " " << h << "\n255\n";
        std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * c);
        for (int y = 0; y < h; ++y) {
            const double* src = fv.data() + ((static_cast<std::int64_t>(ti) * h + y) * w) * c;
            for (int i = 0; i < w * c; ++i) {
                row[static_cast<std::size_t>(i)] = quantize_u8(src[i]);
            }
            os.write(reinterpret_cast<const char*>(row.data()),
                     static_cast<std::streamsize>(row.size()));
        }
        if (!os) {
            throw io_error("short write to " + path.string());
        }
        paths.push_back(path);
    }
    return paths;
}

}  // namespace vidsplice
