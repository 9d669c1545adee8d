#include "volc/models.hpp"

#include <cmath>

namespace volc {
namespace {

constexpr std::uint32_t kKernel = 3;
constexpr float kDropoutRate = 0.5f;

void append_conv_block(ModelSpec& spec, std::uint32_t filters) {
  spec.layers.push_back({LayerKind::kConv2d, filters, kKernel, 0.0f});
  spec.layers.push_back({LayerKind::kBatchNorm});
  spec.layers.push_back({LayerKind::kRelu});
  spec.layers.push_back({LayerKind::kMaxPool});
}

void append_dense_block(ModelSpec& spec, std::uint32_t width, bool with_dropout) {
  spec.layers.push_back({LayerKind::kDense, width});
  spec.layers.push_back({LayerKind::kRelu});
  if (with_dropout) spec.layers.push_back({LayerKind::kDropout, 0, 0, kDropoutRate});
}

ModelSpec base_spec(std::string name, std::uint32_t input_size) {
  ModelSpec spec;
  spec.name = std::move(name);
  spec.input = {3, input_size, input_size};
  return spec;
}

std::string layer_label(std::size_t index, LayerKind kind) {
  return "layer " + std::to_string(index) + " (" + layer_kind_name(kind) + ")";
}

}  // namespace

const char* layer_kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

ModelSpec build_big(std::uint32_t input_size) {
  ModelSpec spec = base_spec("big", input_size);
  for (std::uint32_t filters : {16u, 32u, 64u, 128u, 256u, 512u, 512u}) append_conv_block(spec, filters);
  spec.layers.push_back({LayerKind::kGlobalAvgPool});
  for (std::uint32_t width : {256u, 128u, 64u, 32u}) append_dense_block(spec, width, true);
  spec.layers.push_back({LayerKind::kDense, 1});
  spec.layers.push_back({LayerKind::kSigmoid});
  infer_shapes(spec);
  return spec;
}

ModelSpec build_small(std::uint32_t input_size) {
  ModelSpec spec = base_spec("small", input_size);
  for (std::uint32_t filters : {32u, 64u, 128u, 256u}) append_conv_block(spec, filters);
  spec.layers.push_back({LayerKind::kGlobalAvgPool});
  append_dense_block(spec, 64, true);
  spec.layers.push_back({LayerKind::kDense, 1});
  spec.layers.push_back({LayerKind::kSigmoid});
  infer_shapes(spec);
  return spec;
}

ModelSpec build_named(const std::string& name, std::uint32_t input_size) {
  if (name == "big") return build_big(input_size);
  if (name == "small") return build_small(input_size);
  fail(ErrorCode::kInvalidParameter, "unknown model '" + name + "' (expected big or small)");
}

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.layers.empty()) fail(ErrorCode::kShape, "model has no layers");
  Shape current{spec.input[0], spec.input[1], spec.input[2]};
  checked_element_count(current);
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& layer = spec.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv2d:
        if (current.size() != 3) fail(ErrorCode::kShape, layer_label(i, layer.kind) + " needs a [C,H,W] input");
        if (layer.units == 0 || layer.kernel == 0) {
          fail(ErrorCode::kShape, layer_label(i, layer.kind) + " has zero filters or kernel");
        }
        current[0] = layer.units;
        break;
      case LayerKind::kMaxPool:
        if (current.size() != 3 || current[1] % 2 != 0 || current[2] % 2 != 0) {
          fail(ErrorCode::kShape, layer_label(i, layer.kind) + " needs even spatial dims, got " +
                                      shape_to_string(current));
        }
        current[1] /= 2;
        current[2] /= 2;
        break;
      case LayerKind::kGlobalAvgPool:
        if (current.size() != 3) fail(ErrorCode::kShape, layer_label(i, layer.kind) + " needs a [C,H,W] input");
        current = {current[0]};
        break;
      case LayerKind::kDense:
        if (current.size() != 1) {
          fail(ErrorCode::kShape, layer_label(i, layer.kind) + " needs a flat input, got " +
                                      shape_to_string(current));
        }
        if (layer.units == 0) fail(ErrorCode::kShape, layer_label(i, layer.kind) + " has zero width");
        current = {layer.units};
        break;
      case LayerKind::kDropout:
        if (!(layer.rate >= 0.0f && layer.rate < 1.0f)) {
          fail(ErrorCode::kShape, layer_label(i, layer.kind) + " rate outside [0, 1)");
        }
        break;
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
        break;
      default:
        fail(ErrorCode::kShape, "layer " + std::to_string(i) + " has an unknown kind");
    }
    shapes.push_back(current);
  }
  if (spec.layers.back().kind != LayerKind::kSigmoid || shapes.back() != Shape{1}) {
    fail(ErrorCode::kShape, "model must end in a single sigmoid output");
  }
  return shapes;
}

std::vector<std::size_t> spatial_trace(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<std::size_t> trace{spec.input[1]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::kMaxPool) trace.push_back(shapes[i][1]);
  }
  return trace;
}

std::vector<LayerCost> layer_costs(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<LayerCost> costs;
  Shape previous{spec.input[0], spec.input[1], spec.input[2]};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& layer = spec.layers[i];
    LayerCost cost{i, layer.kind, shapes[i], 0, 0};
    switch (layer.kind) {
      case LayerKind::kConv2d: {
        const std::uint64_t taps = std::uint64_t{previous[0]} * layer.kernel * layer.kernel;
        cost.params = taps * layer.units + layer.units;
        cost.macs = std::uint64_t{shapes[i][1]} * shapes[i][2] * layer.units * taps;
        break;
      }
      case LayerKind::kBatchNorm:
        cost.params = 2 * std::uint64_t{shapes[i][0]};
        break;
      case LayerKind::kDense:
        cost.params = std::uint64_t{previous[0]} * layer.units + layer.units;
        cost.macs = std::uint64_t{previous[0]} * layer.units;
        break;
      default:
        break;
    }
    costs.push_back(cost);
    previous = shapes[i];
  }
  return costs;
}

std::uint64_t param_count(const ModelSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& c : layer_costs(spec)) total += c.params;
  return total;
}

std::uint64_t flop_count(const ModelSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& c : layer_costs(spec)) total += c.macs;
  return total;
}

std::vector<Shape> weight_shapes(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<Shape> out;
  std::size_t channels = spec.input[0];
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv2d) {
      out.push_back({layer.units, channels, layer.kernel, layer.kernel});
      out.push_back({layer.units});
    } else if (layer.kind == LayerKind::kBatchNorm) {
      for (int k = 0; k < 4; ++k) out.push_back({shapes[i][0]});
    } else if (layer.kind == LayerKind::kDense) {
      out.push_back({layer.units, channels});
      out.push_back({layer.units});
    }
    channels = shapes[i][0];
  }
  return out;
}

ModelWeights init_weights(const ModelSpec& spec, RngStream& rng) {
  ModelWeights weights;
  for (Shape& shape : weight_shapes(spec)) {
    weights.tensors.emplace_back(std::move(shape));
  }
  std::size_t t = 0;
  for (const LayerDesc& layer : spec.layers) {
    if (layer.kind == LayerKind::kConv2d || layer.kind == LayerKind::kDense) {
      Tensor& kernel = weights.tensors[t];
      const std::size_t receptive = kernel.rank() == 4 ? kernel.dim(2) * kernel.dim(3) : 1;
      const double fan_in = static_cast<double>(kernel.dim(1) * receptive);
      const double fan_out = static_cast<double>(kernel.dim(0) * receptive);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (float& v : kernel.values()) v = static_cast<float>(rng.uniform(-limit, limit));
      t += 2;
    } else if (layer.kind == LayerKind::kBatchNorm) {
      weights.tensors[t].fill(1.0f);      // gamma
      weights.tensors[t + 3].fill(1.0f);  // running variance
      t += 4;
    }
  }
  return weights;
}

// ---------------------------------------------------------------- Network

template <typename T>
Network<T>::Network(ModelSpec spec, const ModelWeights& weights) : spec_(std::move(spec)) {
  const auto expected = weight_shapes(spec_);
  if (weights.tensors.size() != expected.size()) {
    fail(ErrorCode::kIntegrity, "model needs " + std::to_string(expected.size()) +
                                    " weight tensors, got " + std::to_string(weights.tensors.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    require_shape(weights.tensors[i].shape(), expected[i], "weight tensor " + std::to_string(i));
  }
  std::size_t t = 0;
  auto next = [&] { return weights.tensors[t++].template cast<T>(); };
  for (const LayerDesc& desc : spec_.layers) {
    switch (desc.kind) {
      case LayerKind::kConv2d: {
        Conv conv;
        conv.layer.weights = next();
        conv.layer.bias = next();
        conv.layer.out_channels = conv.layer.weights.dim(0);
        conv.layer.in_channels = conv.layer.weights.dim(1);
        conv.layer.kernel_h = conv.layer.weights.dim(2);
        conv.layer.kernel_w = conv.layer.weights.dim(3);
        conv.grads.weights = BasicTensor<T>::zeros(conv.layer.weights.shape());
        conv.grads.bias = BasicTensor<T>::zeros(conv.layer.bias.shape());
        layers_.emplace_back(std::move(conv));
        break;
      }
      case LayerKind::kBatchNorm: {
        BatchNorm bn;
        bn.layer.gamma = next();
        bn.layer.beta = next();
        bn.layer.running_mean = next();
        bn.layer.running_var = next();
        bn.layer.channels = bn.layer.gamma.size();
        bn.grads.gamma = BasicTensor<T>::zeros(bn.layer.gamma.shape());
        bn.grads.beta = BasicTensor<T>::zeros(bn.layer.beta.shape());
        layers_.emplace_back(std::move(bn));
        break;
      }
      case LayerKind::kDense: {
        Dense dense;
        dense.layer.weights = next();
        dense.layer.bias = next();
        dense.layer.out_features = dense.layer.weights.dim(0);
        dense.layer.in_features = dense.layer.weights.dim(1);
        dense.grads.weights = BasicTensor<T>::zeros(dense.layer.weights.shape());
        dense.grads.bias = BasicTensor<T>::zeros(dense.layer.bias.shape());
        layers_.emplace_back(std::move(dense));
        break;
      }
      case LayerKind::kRelu: layers_.emplace_back(Relu{}); break;
      case LayerKind::kMaxPool: layers_.emplace_back(MaxPool{}); break;
      case LayerKind::kGlobalAvgPool: layers_.emplace_back(GlobalAvgPool{}); break;
      case LayerKind::kDropout: layers_.emplace_back(Dropout{nn::DropoutLayer{desc.rate}, {}}); break;
      case LayerKind::kSigmoid: layers_.emplace_back(Sigmoid{}); break;
    }
  }
  for (std::size_t i = 0; i + 2 < layers_.size(); ++i) {
    auto* bn = std::get_if<BatchNorm>(&layers_[i]);
    auto* relu = std::get_if<Relu>(&layers_[i + 1]);
    auto* pool = std::get_if<MaxPool>(&layers_[i + 2]);
    if (bn && relu && pool) bn->fused = relu->fused = pool->fused = true;
  }
}

template <typename T>
BasicTensor<T> Network<T>::infer(const BasicTensor<T>& batch) const {
  const Shape expected{spec_.input[0], spec_.input[1], spec_.input[2]};
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expected) {
    fail(ErrorCode::kShape, "model '" + spec_.name + "' expects [N," + std::to_string(expected[0]) + "," +
                                std::to_string(expected[1]) + "," + std::to_string(expected[2]) +
                                "] input, got " + shape_to_string(batch.shape()));
  }
  BasicTensor<T> x = batch;
  for (const Layer& layer : layers_) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv>) {
            x = nn::conv2d_forward(l.layer, x);
          } else if constexpr (std::is_same_v<L, BatchNorm>) {
            x = l.fused ? nn::norm_relu_pool_infer(l.layer, x) : nn::batchnorm_infer(l.layer, x);
          } else if constexpr (std::is_same_v<L, Relu>) {
            if (!l.fused) {
              for (T& v : x.values()) v = v > T{0} ? v : T{0};
            }
          } else if constexpr (std::is_same_v<L, MaxPool>) {
            if (!l.fused) x = nn::max_pool(x);
          } else if constexpr (std::is_same_v<L, GlobalAvgPool>) {
            x = nn::global_avg_pool(x);
          } else if constexpr (std::is_same_v<L, Dense>) {
            x = nn::dense_forward(l.layer, x);
          } else if constexpr (std::is_same_v<L, Dropout>) {
            // identity at inference
          } else if constexpr (std::is_same_v<L, Sigmoid>) {
            x = nn::sigmoid(x);
          }
        },
        layer);
  }
  return x;
}

template <typename T>
BasicTensor<T> Network<T>::forward_train(const BasicTensor<T>& batch, RngStream& dropout_rng) {
  BasicTensor<T> x = batch;
  for (Layer& layer : layers_) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv>) {
            l.input = std::move(x);
            x = nn::conv2d_forward(l.layer, l.input);
          } else if constexpr (std::is_same_v<L, BatchNorm>) {
            if (l.fused) {
              x = nn::norm_relu_pool_train(l.layer, std::move(x), l.fused_cache);
            } else {
              x = nn::batchnorm_forward(l.layer, x, nn::Mode::kTrain, &l.cache);
            }
          } else if constexpr (std::is_same_v<L, Relu>) {
            if (l.fused) return;
            l.active.resize(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
              l.active[i] = x[i] > T{0};
              if (!l.active[i]) x[i] = T{0};
            }
          } else if constexpr (std::is_same_v<L, MaxPool>) {
            if (!l.fused) x = nn::max_pool(x, &l.cache);
          } else if constexpr (std::is_same_v<L, GlobalAvgPool>) {
            l.input_shape = x.shape();
            x = nn::global_avg_pool(x);
          } else if constexpr (std::is_same_v<L, Dense>) {
            l.input = x;
            x = nn::dense_forward(l.layer, l.input);
          } else if constexpr (std::is_same_v<L, Dropout>) {
            x = nn::dropout(l.layer, x, nn::Mode::kTrain, dropout_rng, &l.mask);
          } else if constexpr (std::is_same_v<L, Sigmoid>) {
            x = nn::sigmoid(x);
            l.output = x;
          }
        },
        layer);
  }
  return x;
}

template <typename T>
void Network<T>::backward(const BasicTensor<T>& grad_output) {
  BasicTensor<T> g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv>) {
            l.grads = nn::conv2d_backward(l.layer, l.input, g, i != 0);
            g = std::move(l.grads.input);
            l.input = {};
          } else if constexpr (std::is_same_v<L, BatchNorm>) {
            auto grads = l.fused ? nn::norm_relu_pool_backward(l.layer, std::move(l.fused_cache), g)
                                 : nn::batchnorm_backward(l.layer, l.cache, g);
            g = std::move(grads.input);
            l.grads.gamma = std::move(grads.gamma);
            l.grads.beta = std::move(grads.beta);
            l.cache = {};
          } else if constexpr (std::is_same_v<L, Relu>) {
            if (l.fused) return;
            if (l.active.size() != g.size()) fail(ErrorCode::kShape, "relu backward without forward");
            for (std::size_t k = 0; k < g.size(); ++k) {
              if (!l.active[k]) g[k] = T{0};
            }
            l.active = {};
          } else if constexpr (std::is_same_v<L, MaxPool>) {
            if (l.fused) return;
            g = nn::max_pool_backward(l.cache, g);
            l.cache = {};
          } else if constexpr (std::is_same_v<L, GlobalAvgPool>) {
            g = nn::global_avg_pool_backward(l.input_shape, g);
          } else if constexpr (std::is_same_v<L, Dense>) {
            l.grads = nn::dense_backward(l.layer, l.input, g);
            g = std::move(l.grads.input);
            l.input = {};
          } else if constexpr (std::is_same_v<L, Dropout>) {
            g = nn::dropout_backward(l.mask, g);
          } else if constexpr (std::is_same_v<L, Sigmoid>) {
            g = nn::sigmoid_backward(l.output, g);
          }
        },
        layers_[i]);
  }
}

template <typename T>
std::vector<nn::ParamRef<T>> Network<T>::trainable() {
  std::vector<nn::ParamRef<T>> refs;
  for (Layer& layer : layers_) {
    if (auto* conv = std::get_if<Conv>(&layer)) {
      refs.push_back({&conv->layer.weights, &conv->grads.weights});
      refs.push_back({&conv->layer.bias, &conv->grads.bias});
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      refs.push_back({&bn->layer.gamma, &bn->grads.gamma});
      refs.push_back({&bn->layer.beta, &bn->grads.beta});
    } else if (auto* dense = std::get_if<Dense>(&layer)) {
      refs.push_back({&dense->layer.weights, &dense->grads.weights});
      refs.push_back({&dense->layer.bias, &dense->grads.bias});
    }
  }
  return refs;
}

template <typename T>
void Network<T>::set_batchnorm_momentum(T momentum) {
  if (!(momentum > T(0) && momentum < T(1))) {
    fail(ErrorCode::kInvalidParameter, "batchnorm momentum must lie in (0, 1)");
  }
  for (auto& layer : layers_) {
    if (auto* bn = std::get_if<BatchNorm>(&layer)) bn->layer.momentum = momentum;
  }
}

template <typename T>
ModelWeights Network<T>::weights() const {
  ModelWeights out;
  auto put = [&](const BasicTensor<T>& t) { out.tensors.push_back(t.template cast<float>()); };
  for (const Layer& layer : layers_) {
    if (const auto* conv = std::get_if<Conv>(&layer)) {
      put(conv->layer.weights);
      put(conv->layer.bias);
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      put(bn->layer.gamma);
      put(bn->layer.beta);
      put(bn->layer.running_mean);
      put(bn->layer.running_var);
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      put(dense->layer.weights);
      put(dense->layer.bias);
    }
  }
  return out;
}

template class Network<float>;
template class Network<double>;

}  // namespace volc
