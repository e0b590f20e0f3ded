#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "davegan/rng.hpp"
#include "davegan/tensor.hpp"

namespace davegan {

enum class Padding { Same, Valid };
enum class Activation { None, LeakyRelu, Sigmoid };

// Spatial geometry of a strided convolution. Same keeps out = ceil(in / s)
// with any odd padding pixel on the bottom/right edge; Valid pads nothing and
// throws if the kernel does not fit.
struct ConvGeom {
  int out_h, out_w;
  int pad_top, pad_left;
};
ConvGeom conv2d_geometry(int in_h, int in_w, int kernel, int stride, Padding pad);

// Output extents of the transposed op: Same -> in * s, Valid -> (in-1) * s + k.
std::pair<int, int> transp_conv2d_extents(int in_h, int in_w, int kernel, int stride,
                                          Padding pad);

// x: [B, C, H, W], w: [F, C, k, k], bias: [F] -> [B, F, OH, OW]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, Padding pad);

// Adjoint of conv2d as a forward op. Weight layout [C_in, F, k, k]: the op is
// exactly the input-gradient of a conv with those weights, so a conv and a
// transposed conv with shared geometry invert each other's shapes.
// x: [B, C, H, W], w: [C, F, k, k], bias: [F] -> [B, F, H', W']
Tensor transp_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                     Padding pad);

// Per-channel running statistics plus the normalization hyperparameters.
// gamma/beta live with the model; this state is checkpointed alongside them.
struct BatchNormState {
  std::vector<real_t> running_mean;  // starts at 0
  std::vector<real_t> running_var;   // starts at 1
  real_t momentum = 0.99;
  real_t eps = 1e-5;

  explicit BatchNormState(int channels)
      : running_mean(static_cast<std::size_t>(channels), 0),
        running_var(static_cast<std::size_t>(channels), 1) {}
};

// training=true: normalize by batch statistics (biased variance over B,H,W),
// update running stats as a side effect; batch must be >= 2.
// training=false: normalize by the frozen running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training);

Tensor leaky_relu(const Tensor& x, real_t slope = 0.2);

// Numerically stable logistic; outputs are pinned to [1e-15, 1 - 1e-15] so
// they stay strictly inside (0, 1) and safe to pass through log.
Tensor sigmoid(const Tensor& x);

struct AdamConfig {
  real_t alpha = 1e-4;
  real_t beta1 = 0.5;
  real_t beta2 = 0.999;
  real_t eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. step() consumes whatever
// is in each Variable's grad(); a non-finite gradient aborts with the
// offending parameter's name rather than poisoning the weights.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Variable*> params, AdamConfig cfg);
  void step();
  void zero_grad();
  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Variable*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<real_t>> m_, v_;
  std::int64_t t_ = 0;
};

// Weight init draws, N(0, stddev^2), one stream pass in index order.
std::vector<real_t> gaussian_init(Rng& rng, std::size_t n, real_t stddev = 0.02);

}  // namespace davegan
