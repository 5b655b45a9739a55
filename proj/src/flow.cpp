#include "vidsplice/flow.hpp"

#include <cmath>

namespace vidsplice {

FlowSample make_flow_sample_at(const Tensor& x0, Rng& rng, double t) {
    if (!std::isfinite(t) || t < 0.0 || t > 1.0) {
        throw contract_error("flow sample t must be in [0,1]");
    }
    FlowSample s;
    s.x0 = x0;
    s.noise = Tensor::randn(x0.dims(), rng);
    s.t = t;
    s.noised = Tensor::zeros(x0.dims());
    s.target = Tensor::zeros(x0.dims());
    const auto& xv = x0.values();
    const auto& ev = s.noise.values();
    auto& nv = s.noised.values();
    auto& tv = s.target.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        nv[i] = (1.0 - t) * xv[i] + t * ev[i];
        tv[i] = ev[i] - xv[i];
    }
    return s;
}

FlowSample make_flow_sample(const Tensor& x0, Rng& rng) {
    const double t = rng.uniform();
    return make_flow_sample_at(x0, rng, t);
}

namespace {

Tensor average_terms(std::vector<Tensor> terms) {
    Tensor acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) {
        acc = add(acc, terms[i]);
    }
    return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

void check_loss_finite(const Tensor& loss, const std::string& batch_label) {
    if (!std::isfinite(loss.item())) {
        throw training_error("non-finite loss" +
                             (batch_label.empty() ? std::string() : " in batch " + batch_label));
    }
}

}  // namespace

Tensor id_loss(const DenoiserConfig& cfg, const DenoiserParams& params,
               const std::vector<ImageSample>& batch, Rng& rng,
               const std::string& batch_label) {
    if (batch.empty()) {
        throw contract_error("id_loss on empty batch");
    }
    std::vector<Tensor> terms;
    terms.reserve(batch.size());
    for (const ImageSample& s : batch) {
        FlowSample fs = make_flow_sample(s.x0_latent, rng);
        DenoiserInput inp{fs.noised, s.cond_latent, s.latent_mask, s.prompt_id, fs.t};
        Tensor pred = dit_forward(inp, cfg, params);
        terms.push_back(mse(pred, fs.target));
    }
    Tensor loss = average_terms(std::move(terms));
    check_loss_finite(loss, batch_label);
    return loss;
}

Tensor video_loss(const DenoiserConfig& cfg, const DenoiserParams& params,
                  const ControllerParams* controller, const std::vector<VideoSample>& batch,
                  Rng& rng, const std::string& batch_label) {
    if (batch.empty()) {
        throw contract_error("video_loss on empty batch");
    }
    std::vector<Tensor> terms;
    terms.reserve(batch.size());
    for (const VideoSample& s : batch) {
        FlowSample fs = make_flow_sample(s.x0_latent, rng);
        std::vector<Tensor> injections;
        if (controller != nullptr && controller->layer_count() > 0) {
            injections = controller_forward(s.context_latent, s.context_latent_mask,
                                            s.cond_latent, s.i2v_latent_mask, fs.noise, cfg,
                                            *controller);
        }
        DenoiserInput inp{fs.noised, s.cond_latent, s.i2v_latent_mask, s.prompt_id, fs.t};
        Tensor pred = dit_forward(inp, cfg, params,
                                  injections.empty() ? nullptr : &injections);
        terms.push_back(mse(pred, fs.target));
    }
    Tensor loss = average_terms(std::move(terms));
    check_loss_finite(loss, batch_label);
    return loss;
}

Tensor euler_sample_from(const VelocityFn& velocity, const Tensor& init_noise, int steps) {
    if (steps < 1) {
        throw config_error("sampler steps must be >= 1, got " + std::to_string(steps));
    }
    const double dt = 1.0 / static_cast<double>(steps);
    Tensor x = init_noise.clone();
    for (int i = 0; i < steps; ++i) {
        const double t = 1.0 - static_cast<double>(i) * dt;
        Tensor v = velocity(x, t);
        if (!same_dims(v, x)) {
            throw shape_error("velocity output " + dims_to_string(v.dims()) +
                              " does not match state " + dims_to_string(x.dims()));
        }
        auto& xv = x.values();
        const auto& vv = v.values();
        for (std::size_t j = 0; j < xv.size(); ++j) {
            xv[j] -= dt * vv[j];
        }
        if (!all_finite(x)) {
            throw inference_error("non-finite sampler state at step " + std::to_string(i));
        }
    }
    return x;
}

Tensor euler_sample(const VelocityFn& velocity, const Dims& shape, int steps, Rng& rng) {
    Tensor eps = Tensor::randn(shape, rng);
    return euler_sample_from(velocity, eps, steps);
}

VelocityFn denoiser_velocity(const DenoiserConfig& cfg, const DenoiserParams& params,
                             Tensor cond_latent, Tensor latent_mask, int prompt_id,
                             std::shared_ptr<const std::vector<Tensor>> injections) {
    return [&cfg, &params, cond_latent, latent_mask, prompt_id,
            injections](const Tensor& x, double t) {
        DenoiserInput inp{x, cond_latent, latent_mask, prompt_id, t};
        return dit_forward(inp, cfg, params,
                           injections != nullptr && !injections->empty() ? injections.get()
                                                                         : nullptr);
    };
}

}  // namespace vidsplice
