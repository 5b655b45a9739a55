#include "vidsplice/codec.hpp"

namespace vidsplice {

namespace {

int ceil_to(int value, int multiple) {
    return ((value + multiple - 1) / multiple) * multiple;
}

}  // namespace

void check_divisible(int t, int h, int w, int k_t, int k_s) {
    if (k_t < 1 || k_s < 1) {
        throw config_error("codec factors must be >= 1");
    }
    if (t % k_t != 0 || h % k_s != 0 || w % k_s != 0) {
        throw shape_error("clip " + std::to_string(t) + "x" + std::to_string(h) + "x" +
                          std::to_string(w) + " not divisible by codec factors (k_t=" +
                          std::to_string(k_t) + ", k_s=" + std::to_string(k_s) +
                          "); pad to " + std::to_string(ceil_to(t, k_t)) + "x" +
                          std::to_string(ceil_to(h, k_s)) + "x" + std::to_string(ceil_to(w, k_s)));
    }
}

Tensor encode_tensor(const Tensor& pixels, int k_t, int k_s) {
    if (pixels.ndim() != 4) {
        throw shape_error("encode expects [T,H,W,C]");
    }
    const int t = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2), c = pixels.dim(3);
    check_divisible(t, h, w, k_t, k_s);
    const int tt = t / k_t, hh = h / k_s, ww = w / k_s;
    const int cc = c * k_t * k_s * k_s;
    Tensor out = Tensor::zeros({tt, hh, ww, cc});
    const auto& src = pixels.values();
    auto& dst = out.values();
    for (int ot = 0; ot < tt; ++ot) {
        for (int oy = 0; oy < hh; ++oy) {
            for (int ox = 0; ox < ww; ++ox) {
                double* cell = dst.data() + (((static_cast<std::int64_t>(ot) * hh + oy) * ww + ox) * cc);
                for (int dt = 0; dt < k_t; ++dt) {
                    for (int dy = 0; dy < k_s; ++dy) {
                        for (int dx = 0; dx < k_s; ++dx) {
                            const std::int64_t p =
                                ((static_cast<std::int64_t>(ot * k_t + dt) * h + (oy * k_s + dy)) * w +
                                 (ox * k_s + dx)) * c;
                            const int base = ((dt * k_s + dy) * k_s + dx) * c;
                            for (int ch = 0; ch < c; ++ch) {
                                cell[base + ch] = src[static_cast<std::size_t>(p + ch)];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor decode_tensor(const Tensor& latent, int k_t, int k_s) {
    if (latent.ndim() != 4) {
        throw shape_error("decode expects [T',H',W',C']");
    }
    const int tt = latent.dim(0), hh = latent.dim(1), ww = latent.dim(2), cc = latent.dim(3);
    if (cc % (k_t * k_s * k_s) != 0) {
        throw shape_error("latent channel count " + std::to_string(cc) +
                          " not divisible by block volume " + std::to_string(k_t * k_s * k_s));
    }
    const int c = cc / (k_t * k_s * k_s);
    const int t = tt * k_t, h = hh * k_s, w = ww * k_s;
    Tensor out = Tensor::zeros({t, h, w, c});
    const auto& src = latent.values();
    auto& dst = out.values();
    for (int ot = 0; ot < tt; ++ot) {
        for (int oy = 0; oy < hh; ++oy) {
            for (int ox = 0; ox < ww; ++ox) {
                const double* cell =
                    src.data() + (((static_cast<std::int64_t>(ot) * hh + oy) * ww + ox) * cc);
                for (int dt = 0; dt < k_t; ++dt) {
                    for (int dy = 0; dy < k_s; ++dy) {
                        for (int dx = 0; dx < k_s; ++dx) {
                            const std::int64_t p =
                                ((static_cast<std::int64_t>(ot * k_t + dt) * h + (oy * k_s + dy)) * w +
                                 (ox * k_s + dx)) * c;
                            const int base = ((dt * k_s + dy) * k_s + dx) * c;
                            for (int ch = 0; ch < c; ++ch) {
                                dst[static_cast<std::size_t>(p + ch)] = cell[base + ch];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

LatentGrid encode(const VideoClip& v, int k_t, int k_s) {
    return LatentGrid{encode_tensor(v.frames, k_t, k_s)};
}

VideoClip decode(const LatentGrid& l, int k_t, int k_s) {
    return VideoClip{decode_tensor(l.data, k_t, k_s)};
}

Tensor encode_mask(const MaskSequence& m, int k_t, int k_s) {
    const int t = m.t(), h = m.h(), w = m.w();
    check_divisible(t, h, w, k_t, k_s);
    const int tt = t / k_t, hh = h / k_s, ww = w / k_s;
    Tensor out = Tensor::zeros({tt, hh, ww, 1});
    const auto& src = m.masks.values();
    auto& dst = out.values();
    for (int ot = 0; ot < tt; ++ot) {
        for (int oy = 0; oy < hh; ++oy) {
            for (int ox = 0; ox < ww; ++ox) {
                double v = 0.0;
                for (int dt = 0; dt < k_t && v == 0.0; ++dt) {
                    for (int dy = 0; dy < k_s && v == 0.0; ++dy) {
                        for (int dx = 0; dx < k_s; ++dx) {
                            const std::int64_t p =
                                (static_cast<std::int64_t>(ot * k_t + dt) * h + (oy * k_s + dy)) * w +
                                (ox * k_s + dx);
                            if (src[static_cast<std::size_t>(p)] == 1.0) {
                                v = 1.0;
                                break;
                            }
                        }
                    }
                }
                dst[static_cast<std::size_t>((static_cast<std::int64_t>(ot) * hh + oy) * ww + ox)] = v;
            }
        }
    }
    return out;
}

}  // namespace vidsplice
