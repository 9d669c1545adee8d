#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "volc/rng.hpp"
#include "volc/tensor.hpp"

// Layer kernels with hand-derived backward passes. Activations are laid out
// [N, C, H, W] (or [N, F] after pooling). All functions are instantiated for
// float and double; double exists for finite-difference checks.
namespace volc::nn {

enum class Mode { kTrain, kInfer };

// ---------------------------------------------------------------- conv2d

// Stride-1 cross-correlation with "same" zero padding.
template <typename T>
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  BasicTensor<T> weights;  // [out, in, kh, kw]
  BasicTensor<T> bias;     // [out]

  static ConvLayer make(std::size_t in, std::size_t out, std::size_t kh = 3, std::size_t kw = 3);
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> conv2d_forward(const ConvLayer<T>& layer, const BasicTensor<T>& input);

template <typename T>
ConvGrads<T> conv2d_backward(const ConvLayer<T>& layer, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out, bool want_input_grad = true);

// ------------------------------------------------------------- batchnorm

template <typename T>
struct BatchNormLayer {
  std::size_t channels = 0;
  T momentum = T(0.99);
  T epsilon = T(1e-3);
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;

  static BatchNormLayer make(std::size_t channels);
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // x-hat, same shape as the input
  AlignedVector<T> inv_std;     // per channel
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Train mode normalizes by batch statistics (biased variance) and folds them
// into the running estimates: running = momentum * running + (1 - momentum) *
// batch. `cache` may be null when no backward pass follows.
template <typename T>
BasicTensor<T> batchnorm_forward(BatchNormLayer<T>& layer, const BasicTensor<T>& input, Mode mode,
                                 BatchNormCache<T>* cache = nullptr);

template <typename T>
BasicTensor<T> batchnorm_infer(const BatchNormLayer<T>& layer, const BasicTensor<T>& input);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>& layer, const BatchNormCache<T>& cache,
                                     const BasicTensor<T>& grad_out);

// Fused batchnorm -> relu -> 2x2 max-pool for the conv blocks. Results match
// the separate ops; relu is applied after pooling (max commutes with it), so
// the full-size activation is never materialized. Train mode normalizes
// `input` in place and keeps it as x-hat.
template <typename T>
struct NormPoolCache {
  BasicTensor<T> normalized;
  AlignedVector<T> inv_std;
  std::vector<std::uint8_t> argmax;  // window slot 0..3, bit 2 set when the pooled value was > 0
};

template <typename T>
BasicTensor<T> norm_relu_pool_train(BatchNormLayer<T>& layer, BasicTensor<T>&& input,
                                    NormPoolCache<T>& cache);

template <typename T>
BasicTensor<T> norm_relu_pool_infer(const BatchNormLayer<T>& layer, const BasicTensor<T>& input);

// Gradient w.r.t. the batchnorm input is written over the cached x-hat.
template <typename T>
BatchNormGrads<T> norm_relu_pool_backward(const BatchNormLayer<T>& layer, NormPoolCache<T>&& cache,
                                          const BasicTensor<T>& grad_out);

// ---------------------------------------------------------- elementwise

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

// Same as above with the activity pattern (input > 0) precomputed.
template <typename T>
BasicTensor<T> relu_backward(std::span<const std::uint8_t> active, const BasicTensor<T>& grad_out);

template <typename T>
std::vector<std::uint8_t> relu_active_mask(const BasicTensor<T>& output);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

// ------------------------------------------------------------- pooling

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::uint8_t> argmax;  // winner inside each 2x2 window, row-major 0..3
};

// 2x2 window, stride 2. Odd spatial dims are a shape error.
template <typename T>
BasicTensor<T> max_pool(const BasicTensor<T>& input, MaxPoolCache* cache = nullptr);

template <typename T>
BasicTensor<T> max_pool_backward(const MaxPoolCache& cache, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out);

// --------------------------------------------------------------- dense

template <typename T>
struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  BasicTensor<T> weights;  // [out, in]
  BasicTensor<T> bias;     // [out]

  static DenseLayer make(std::size_t in, std::size_t out);
};

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> dense_forward(const DenseLayer<T>& layer, const BasicTensor<T>& input);

template <typename T>
DenseGrads<T> dense_backward(const DenseLayer<T>& layer, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out);

// ------------------------------------------------------------- dropout

struct DropoutLayer {
  double rate = 0.5;
};

struct DropoutMask {
  double scale = 1.0;              // 1 / (1 - rate)
  std::vector<std::uint8_t> keep;  // empty means identity (inference)
};

// Inverted dropout: kept activations are divided by (1 - rate) in train mode;
// inference is the identity and does not touch the stream.
template <typename T>
BasicTensor<T> dropout(const DropoutLayer& layer, const BasicTensor<T>& input, Mode mode,
                       RngStream& rng, DropoutMask* mask = nullptr);

template <typename T>
BasicTensor<T> dropout_backward(const DropoutMask& mask, const BasicTensor<T>& grad_out);

// ---------------------------------------------------------------- loss

template <typename T>
struct LossResult {
  T loss;
  BasicTensor<T> grad;
};

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]. The
// gradient is that of the clamped loss (zero where the clamp is active).
template <typename T>
LossResult<T> bce_loss(const BasicTensor<T>& predictions, const BasicTensor<T>& labels);

// ---------------------------------------------------------------- adam

template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<BasicTensor<T>> first_moment;
  std::vector<BasicTensor<T>> second_moment;
};

template <typename T>
struct ParamRef {
  BasicTensor<T>* value;
  const BasicTensor<T>* grad;
};

// One bias-corrected Adam update over every parameter; step_count advances
// by exactly one. Moments are created on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::span<const ParamRef<T>> params);

template <typename T>
void adam_step(AdamState<T>& state, BasicTensor<T>& params, const BasicTensor<T>& grads);

}  // namespace volc::nn
