#include "vidsplice/lora.hpp"

#include <algorithm>

namespace vidsplice {

void check_lora_rank(int d_out, int d_in, int rank) {
    const int cap = std::min(d_in, d_out) / 4;
    if (rank < 1 || rank > cap) {
        throw config_error("lora rank " + std::to_string(rank) + " outside [1, " +
                           std::to_string(cap) + "] for a " + std::to_string(d_out) + "x" +
                           std::to_string(d_in) + " layer");
    }
}

LoraAdapter LoraAdapter::create(int d_out, int d_in, int rank, Rng& rng) {
    check_lora_rank(d_out, d_in, rank);
    LoraAdapter a;
    a.rank = rank;
    a.b_up = Tensor::zeros({d_out, rank}, true);
    a.a_down = Tensor::randn({rank, d_in}, rng, 0.02, true);
    return a;
}

Tensor lora_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                    const LoraAdapter& adapter) {
    if (x.ndim() != 2 || x.dim(1) != w.dim(1)) {
        throw shape_error("lora_forward expects [n," + std::to_string(w.dim(1)) + "], got " +
                          dims_to_string(x.dims()));
    }
    Tensor base = add(matmul(x, transpose(w)), expand_rows(bias, x.dim(0)));
    Tensor down = matmul(x, transpose(adapter.a_down));   // [n, r]
    Tensor up = matmul(down, transpose(adapter.b_up));    // [n, d_out]
    return add(base, up);
}

}  // namespace vidsplice
