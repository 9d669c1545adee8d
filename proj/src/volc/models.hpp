#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "volc/nn.hpp"
#include "volc/rng.hpp"
#include "volc/tensor.hpp"

namespace volc {

// Tag values are part of the model file format; never renumber.
enum class LayerKind : std::uint8_t {
  kConv2d = 1,
  kBatchNorm = 2,
  kRelu = 3,
  kMaxPool = 4,
  kGlobalAvgPool = 5,
  kDense = 6,
  kDropout = 7,
  kSigmoid = 8,
};

const char* layer_kind_name(LayerKind kind) noexcept;

// `units` is the filter count (conv) or width (dense); `kernel` applies to
// conv only; `rate` to dropout only.
struct LayerDesc {
  LayerKind kind;
  std::uint32_t units = 0;
  std::uint32_t kernel = 0;
  float rate = 0.0f;

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

struct ModelSpec {
  std::string name;
  std::array<std::uint32_t, 3> input{3, 512, 512};  // C, H, W
  std::vector<LayerDesc> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline constexpr std::uint32_t kDefaultInputSize = 512;

// Seven conv blocks [16..512] -> GAP -> dense [256,128,64,32,1] -> sigmoid.
ModelSpec build_big(std::uint32_t input_size = kDefaultInputSize);
// Big-model conv blocks 2-5 [32,64,128,256] -> GAP -> dense [64,1] -> sigmoid.
ModelSpec build_small(std::uint32_t input_size = kDefaultInputSize);
// "big" or "small"; anything else is kInvalidParameter.
ModelSpec build_named(const std::string& name, std::uint32_t input_size = kDefaultInputSize);

// Per-sample output shape after every layer (no batch axis). Throws kShape
// when a layer cannot accept its input, or when the model does not end in a
// single sigmoid scalar.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

// Spatial side length entering each max-pool plus the final one, e.g.
// 512,256,...,4 for the big model.
std::vector<std::size_t> spatial_trace(const ModelSpec& spec);

// Trainable parameters: conv out*in*kh*kw + out, batchnorm 2*channels,
// dense out*in + out.
std::uint64_t param_count(const ModelSpec& spec);
// Multiply-accumulates for one inference: conv H*W*out*in*kh*kw, dense out*in.
std::uint64_t flop_count(const ModelSpec& spec);

struct LayerCost {
  std::size_t index;
  LayerKind kind;
  Shape output;
  std::uint64_t params;
  std::uint64_t macs;
};
std::vector<LayerCost> layer_costs(const ModelSpec& spec);

// Flat ordered parameter list: conv (weights, bias), batchnorm (gamma, beta,
// running mean, running var), dense (weights, bias).
struct ModelWeights {
  std::vector<Tensor> tensors;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

// Shapes ModelWeights must have for `spec`, in order.
std::vector<Shape> weight_shapes(const ModelSpec& spec);

// Glorot-uniform kernels, zero biases, unit gamma, identity running stats.
ModelWeights init_weights(const ModelSpec& spec, RngStream& rng);

template <typename T>
class Network {
 public:
  Network(ModelSpec spec, const ModelWeights& weights);

  const ModelSpec& spec() const noexcept { return spec_; }

  // Inference mode (running statistics, no dropout); safe to call
  // concurrently on a shared instance. Input [N, C, H, W], output [N, 1].
  BasicTensor<T> infer(const BasicTensor<T>& batch) const;

  // Train-mode forward that records what backward() needs.
  BasicTensor<T> forward_train(const BasicTensor<T>& batch, RngStream& dropout_rng);

  // Backpropagates d loss / d output through the last forward_train and
  // stores parameter gradients. Consumes the recorded activations.
  void backward(const BasicTensor<T>& grad_output);

  // Trainable parameters paired with their gradients, stable order.
  std::vector<nn::ParamRef<T>> trainable();

  ModelWeights weights() const;

  // Running-statistics momentum of every batchnorm layer.
  void set_batchnorm_momentum(T momentum);

 private:
  struct Conv {
    nn::ConvLayer<T> layer;
    nn::ConvGrads<T> grads;
    BasicTensor<T> input;
  };
  // A batchnorm directly followed by relu and max-pool runs as one fused op;
  // the relu and pool entries are then marked `fused` and pass through.
  struct BatchNorm {
    nn::BatchNormLayer<T> layer;
    nn::BatchNormGrads<T> grads;
    nn::BatchNormCache<T> cache;
    nn::NormPoolCache<T> fused_cache;
    bool fused = false;
  };
  struct Relu {
    std::vector<std::uint8_t> active;
    bool fused = false;
  };
  struct MaxPool {
    nn::MaxPoolCache cache;
    bool fused = false;
  };
  struct GlobalAvgPool {
    Shape input_shape;
  };
  struct Dense {
    nn::DenseLayer<T> layer;
    nn::DenseGrads<T> grads;
    BasicTensor<T> input;
  };
  struct Dropout {
    nn::DropoutLayer layer;
    nn::DropoutMask mask;
  };
  struct Sigmoid {
    BasicTensor<T> output;
  };
  using Layer = std::variant<Conv, BatchNorm, Relu, MaxPool, GlobalAvgPool, Dense, Dropout, Sigmoid>;

  ModelSpec spec_;
  std::vector<Layer> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace volc
