#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vidsplice/controller.hpp"
#include "vidsplice/denoiser.hpp"

namespace vidsplice {

// One point on the linear noise path: noised = (1-t) x0 + t eps, regression
// target eps - x0 (constant along the path).
struct FlowSample {
    Tensor x0;
    Tensor noise;
    double t = 0.0;
    Tensor noised;
    Tensor target;
};

FlowSample make_flow_sample(const Tensor& x0, Rng& rng);                // t ~ U(0,1)
FlowSample make_flow_sample_at(const Tensor& x0, Rng& rng, double t);   // fixed t

struct ImageSample {
    Tensor x0_latent;
    Tensor cond_latent;
    Tensor latent_mask;
    int prompt_id = 0;
};

struct VideoSample {
    Tensor x0_latent;
    Tensor cond_latent;        // conditioning stream latent
    Tensor i2v_latent_mask;
    Tensor context_latent;     // context stream latent (zeros when unused)
    Tensor context_latent_mask;
    int prompt_id = 0;
};

// Mean squared velocity-regression error over the batch. Which parameters
// learn is governed by requires_grad flags; the adapter stage freezes the
// base weights so only B/A receive gradients.
Tensor id_loss(const DenoiserConfig& cfg, const DenoiserParams& params,
               const std::vector<ImageSample>& batch, Rng& rng,
               const std::string& batch_label = "");

// Same objective for the video stream; when `controller` is non-null its
// injection features enter the frozen transformer's first layers.
Tensor video_loss(const DenoiserConfig& cfg, const DenoiserParams& params,
                  const ControllerParams* controller, const std::vector<VideoSample>& batch,
                  Rng& rng, const std::string& batch_label = "");

using VelocityFn = std::function<Tensor(const Tensor& x, double t)>;

// Explicit Euler from x = eps at t = 1 down to t = 0 in S uniform steps.
Tensor euler_sample_from(const VelocityFn& velocity, const Tensor& init_noise, int steps);
Tensor euler_sample(const VelocityFn& velocity, const Dims& shape, int steps, Rng& rng);

// Velocity field of a trained denoiser under fixed conditioning.
VelocityFn denoiser_velocity(const DenoiserConfig& cfg, const DenoiserParams& params,
                             Tensor cond_latent, Tensor latent_mask, int prompt_id,
                             std::shared_ptr<const std::vector<Tensor>> injections = nullptr);

}  // namespace vidsplice
