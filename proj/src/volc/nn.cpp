#include "volc/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>

#include "volc/parallel.hpp"

namespace volc::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    fail(ErrorCode::kShape, std::string(what) + ": expected rank " + std::to_string(rank) +
                                " input, got " + shape_to_string(shape));
  }
}

// Spatial extent of a [N, C, ...] activation (1 for [N, C]).
std::size_t plane_size(const Shape& shape) {
  std::size_t s = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) s *= shape[i];
  return s;
}

template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> plane_array(T* base, std::size_t n, std::size_t c,
                                                          std::size_t channels, std::size_t plane) {
  return {base + (n * channels + c) * plane, static_cast<Eigen::Index>(plane)};
}

template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> plane_array(const T* base, std::size_t n,
                                                                std::size_t c, std::size_t channels,
                                                                std::size_t plane) {
  return {base + (n * channels + c) * plane, static_cast<Eigen::Index>(plane)};
}

// Unfolds output rows [y0, y1) of one [C, H, W] sample into a
// [C*kh*kw, (y1-y0)*W] patch matrix.
template <typename T>
void im2col(const T* in, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, std::size_t y0, std::size_t y1, T* col) {
  const std::size_t span = (y1 - y0) * width;
  const auto pad_top = static_cast<std::ptrdiff_t>((kh - 1) / 2);
  const auto pad_left = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = in + c * height * width;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * span - static_cast<std::ptrdiff_t>(y0) * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - pad_top;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pad_left;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
        for (auto y = static_cast<std::ptrdiff_t>(y0); y < static_cast<std::ptrdiff_t>(y1); ++y) {
          T* row = dst + y * w;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h || x1 <= x0) {
            std::fill(row, row + w, T{0});
            continue;
          }
          std::fill(row, row + x0, T{0});
          std::memcpy(row + x0, plane + sy * w + x0 + dx, sizeof(T) * static_cast<std::size_t>(x1 - x0));
          std::fill(row + x1, row + w, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch-matrix gradients back onto the image.
template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, std::size_t y0, std::size_t y1, T* out) {
  const std::size_t span = (y1 - y0) * width;
  const auto pad_top = static_cast<std::ptrdiff_t>((kh - 1) / 2);
  const auto pad_left = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = out + c * height * width;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * span - static_cast<std::ptrdiff_t>(y0) * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i) - pad_top;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j) - pad_left;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
        for (auto y = static_cast<std::ptrdiff_t>(y0); y < static_cast<std::ptrdiff_t>(y1); ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + y * w;
          T* target = plane + sy * w + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) target[x] += row[x];
        }
      }
    }
  }
}

// Direct 3x3 kernels for layers with few input channels (the RGB input
// layer), where the im2col matrix is too thin for GEMM to pay off.
constexpr std::size_t kDirectMaxChannels = 4;
constexpr std::size_t kDirectForwardMaxChannels = 64;
constexpr std::size_t kLanes = 16;
constexpr std::size_t kOutBlock = 8;

template <typename T>
bool use_direct(const ConvLayer<T>& layer) {
  return layer.kernel_h == 3 && layer.kernel_w == 3 && layer.in_channels <= kDirectMaxChannels;
}

// The direct forward kernel also wins over GEMM for moderate channel counts.
template <typename T>
bool use_direct_forward(std::size_t in_channels, std::size_t kh, std::size_t kw) {
  return kh == 3 && kw == 3 && in_channels <= kDirectForwardMaxChannels;
}

// Input gradient of a 3x3 same conv is a same conv of grad_out with the
// kernel transposed over channels and rotated 180 degrees.
template <typename T>
ConvLayer<T> adjoint_layer(const ConvLayer<T>& layer) {
  ConvLayer<T> adj;
  adj.in_channels = layer.out_channels;
  adj.out_channels = layer.in_channels;
  adj.weights = BasicTensor<T>({layer.in_channels, layer.out_channels, 3, 3});
  adj.bias = BasicTensor<T>({layer.in_channels});
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const T* src = layer.weights.data() + (o * layer.in_channels + c) * 9;
      T* dst = adj.weights.data() + (c * layer.out_channels + o) * 9;
      for (std::size_t t = 0; t < 9; ++t) dst[t] = src[8 - t];
    }
  }
  return adj;
}

// [C][H+2][stride] copy with a one-pixel zero border and zero slack on the
// right so vector chunks may overrun the last column.
template <typename T>
struct PaddedPlanes {
  std::size_t height, width, stride;
  AlignedVector<T> data;

  PaddedPlanes(const T* in, std::size_t channels, std::size_t h, std::size_t w)
      : height(h), width(w), stride(w + 2 + kLanes), data(channels * (h + 2) * stride, T{0}) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        std::memcpy(row(c, y + 1) + 1, in + (c * h + y) * w, sizeof(T) * w);
      }
    }
  }

  const T* row(std::size_t c, std::size_t padded_y) const {
    return data.data() + (c * (height + 2) + padded_y) * stride;
  }
  T* row(std::size_t c, std::size_t padded_y) {
    return data.data() + (c * (height + 2) + padded_y) * stride;
  }
};

template <typename T>
using Lane = Eigen::Array<T, kLanes, 1>;

template <typename T>
Lane<T> load_lane(const T* p) {
  return Eigen::Map<const Lane<T>>(p);
}

template <typename T>
void direct_forward(const ConvLayer<T>& layer, const T* in, std::size_t height, std::size_t width,
                    T* out) {
  const std::size_t channels = layer.in_channels, out_ch = layer.out_channels;
  const PaddedPlanes<T> padded(in, channels, height, width);
  AlignedVector<T> block(channels * 9 * kOutBlock);
  for (std::size_t o0 = 0; o0 < out_ch; o0 += kOutBlock) {
    const std::size_t ob = std::min(kOutBlock, out_ch - o0);
    std::fill(block.begin(), block.end(), T{0});
    for (std::size_t b = 0; b < ob; ++b) {
      for (std::size_t ct = 0; ct < channels * 9; ++ct) {
        block[ct * kOutBlock + b] = layer.weights[(o0 + b) * channels * 9 + ct];
      }
    }
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x0 = 0; x0 < width; x0 += kLanes) {
        Lane<T> acc[kOutBlock];
        for (std::size_t b = 0; b < kOutBlock; ++b) {
          acc[b] = Lane<T>::Constant(b < ob ? layer.bias[o0 + b] : T{0});
        }
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t i = 0; i < 3; ++i) {
            const T* src_row = padded.row(c, y + i) + x0;
            for (std::size_t j = 0; j < 3; ++j) {
              const Lane<T> src = load_lane(src_row + j);
              const T* w = block.data() + (c * 9 + i * 3 + j) * kOutBlock;
              for (std::size_t b = 0; b < kOutBlock; ++b) acc[b] += w[b] * src;
            }
          }
        }
        const std::size_t n = std::min(kLanes, width - x0);
        for (std::size_t b = 0; b < ob; ++b) {
          std::memcpy(out + ((o0 + b) * height + y) * width + x0, acc[b].data(), sizeof(T) * n);
        }
      }
    }
  }
}

constexpr std::size_t kGradOutBlock = 2;
constexpr std::size_t kGradInBlock = 4;

// Weight, bias and (optionally) input gradients of one sample.
template <typename T>
void direct_backward(const ConvLayer<T>& layer, const T* in, const T* grad_out, std::size_t height,
                     std::size_t width, T* dw, T* db, T* dx) {
  const std::size_t channels = layer.in_channels, out_ch = layer.out_channels;
  const PaddedPlanes<T> padded(in, channels, height, width);
  // Grad planes with zeroed slack so vector tails contribute nothing; only
  // needed for the input gradient or ragged widths.
  const bool ragged = width % kLanes != 0;
  const PaddedPlanes<T> gy(grad_out, (dx || ragged) ? out_ch : 0, height, width);
  auto grad_row = [&](std::size_t o, std::size_t y) {
    return ragged ? gy.row(o, y + 1) + 1 : grad_out + (o * height + y) * width;
  };
  for (std::size_t o0 = 0; o0 < out_ch; o0 += kGradOutBlock) {
    const std::size_t ob = std::min(kGradOutBlock, out_ch - o0);
    for (std::size_t c = 0; c < channels; ++c) {
      Lane<T> acc[kGradOutBlock][9];
      for (auto& per_out : acc) {
        for (auto& a : per_out) a.setZero();
      }
      for (std::size_t y = 0; y < height; ++y) {
        const T* g_rows[kGradOutBlock];
        for (std::size_t b = 0; b < kGradOutBlock; ++b) g_rows[b] = grad_row(o0 + std::min(b, ob - 1), y);
        for (std::size_t x0 = 0; x0 < width; x0 += kLanes) {
          Lane<T> g[kGradOutBlock];
          for (std::size_t b = 0; b < kGradOutBlock; ++b) g[b] = load_lane(g_rows[b] + x0);
          for (std::size_t i = 0; i < 3; ++i) {
            const T* src_row = padded.row(c, y + i) + x0;
            for (std::size_t j = 0; j < 3; ++j) {
              const Lane<T> src = load_lane(src_row + j);
              for (std::size_t b = 0; b < kGradOutBlock; ++b) acc[b][i * 3 + j] += g[b] * src;
            }
          }
        }
      }
      for (std::size_t b = 0; b < ob; ++b) {
        for (std::size_t t = 0; t < 9; ++t) dw[((o0 + b) * channels + c) * 9 + t] = acc[b][t].sum();
      }
    }
  }
  for (std::size_t o = 0; o < out_ch; ++o) {
    db[o] = static_cast<T>(plane_array(grad_out, 0, o, out_ch, height * width).template cast<double>().sum());
  }
  if (!dx) return;
  const std::size_t chunks = (width + kLanes - 1) / kLanes;
  AlignedVector<T> rows(kGradInBlock * chunks * kLanes);
  for (std::size_t c0 = 0; c0 < channels; c0 += kGradInBlock) {
    const std::size_t cb = std::min(kGradInBlock, channels - c0);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x0 = 0; x0 < width; x0 += kLanes) {
        Lane<T> acc[kGradInBlock];
        for (auto& a : acc) a.setZero();
        for (std::size_t o = 0; o < out_ch; ++o) {
          T w[kGradInBlock][9];
          for (std::size_t b = 0; b < kGradInBlock; ++b) {
            const T* src = layer.weights.data() + (o * channels + c0 + std::min(b, cb - 1)) * 9;
            for (std::size_t t = 0; t < 9; ++t) w[b][t] = src[t];
          }
          for (std::size_t i = 0; i < 3; ++i) {
            const T* src_row = gy.row(o, y + 2 - i) + x0 + 2;
            for (std::size_t j = 0; j < 3; ++j) {
              const Lane<T> g = load_lane(src_row - j);
              for (std::size_t b = 0; b < kGradInBlock; ++b) acc[b] += w[b][i * 3 + j] * g;
            }
          }
        }
        for (std::size_t b = 0; b < kGradInBlock; ++b) {
          Eigen::Map<Lane<T>>(rows.data() + b * chunks * kLanes + x0) = acc[b];
        }
      }
      for (std::size_t b = 0; b < cb; ++b) {
        std::memcpy(dx + ((c0 + b) * height + y) * width, rows.data() + b * chunks * kLanes,
                    sizeof(T) * width);
      }
    }
  }
}

// Output rows per im2col chunk, sized so the patch matrix stays cache resident.
std::size_t chunk_rows(std::size_t k, std::size_t height, std::size_t width) {
  constexpr std::size_t kChunkElements = std::size_t{1} << 18;
  return std::clamp<std::size_t>(kChunkElements / std::max<std::size_t>(1, k * width), 1, height);
}

template <typename T>
AlignedVector<T>& scratch(std::size_t n) {
  thread_local AlignedVector<T> buffer;
  if (buffer.size() < n) buffer.resize(n);
  return buffer;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

template <typename T>
ConvLayer<T> ConvLayer<T>::make(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw) {
  ConvLayer layer;
  layer.in_channels = in;
  layer.out_channels = out;
  layer.kernel_h = kh;
  layer.kernel_w = kw;
  layer.weights = BasicTensor<T>::zeros({out, in, kh, kw});
  layer.bias = BasicTensor<T>::zeros({out});
  return layer;
}

template <typename T>
BasicTensor<T> conv2d_forward(const ConvLayer<T>& layer, const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "conv2d");
  if (input.dim(1) != layer.in_channels) {
    fail(ErrorCode::kShape, "conv2d: input has " + std::to_string(input.dim(1)) +
                                " channels, layer expects " + std::to_string(layer.in_channels));
  }
  const std::size_t batch = input.dim(0), height = input.dim(2), width = input.dim(3);
  const std::size_t hw = height * width;
  const std::size_t k = layer.in_channels * layer.kernel_h * layer.kernel_w;
  const std::size_t out_ch = layer.out_channels;
  BasicTensor<T> output({batch, out_ch, height, width});
  const ConstMatMap<T> weights(layer.weights.data(), static_cast<Eigen::Index>(out_ch),
                               static_cast<Eigen::Index>(k));
  if (use_direct_forward<T>(layer.in_channels, layer.kernel_h, layer.kernel_w)) {
    parallel_for(batch, [&](std::size_t n) {
      direct_forward(layer, input.data() + n * layer.in_channels * hw, height, width,
                     output.data() + n * out_ch * hw);
    });
    return output;
  }
  const std::size_t rows = chunk_rows(k, height, width);
  parallel_for(batch, [&](std::size_t n) {
    auto& col = scratch<T>(k * rows * width);
    const T* src = input.data() + n * layer.in_channels * hw;
    MatMap<T> out(output.data() + n * out_ch * hw, static_cast<Eigen::Index>(out_ch),
                  static_cast<Eigen::Index>(hw));
    for (std::size_t y0 = 0; y0 < height; y0 += rows) {
      const std::size_t y1 = std::min(height, y0 + rows);
      const auto cols = static_cast<Eigen::Index>((y1 - y0) * width);
      im2col(src, layer.in_channels, height, width, layer.kernel_h, layer.kernel_w, y0, y1, col.data());
      out.middleCols(static_cast<Eigen::Index>(y0 * width), cols).noalias() =
          weights * ConstMatMap<T>(col.data(), static_cast<Eigen::Index>(k), cols);
    }
    for (std::size_t o = 0; o < out_ch; ++o) out.row(static_cast<Eigen::Index>(o)).array() += layer.bias[o];
  });
  return output;
}

template <typename T>
ConvGrads<T> conv2d_backward(const ConvLayer<T>& layer, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out, bool want_input_grad) {
  require_rank(input.shape(), 4, "conv2d_backward");
  if (input.dim(1) != layer.in_channels) {
    fail(ErrorCode::kShape, "conv2d_backward: input channel mismatch");
  }
  const std::size_t batch = input.dim(0), height = input.dim(2), width = input.dim(3);
  require_shape(grad_out.shape(), {batch, layer.out_channels, height, width}, "conv2d_backward grad");
  const std::size_t hw = height * width;
  const std::size_t k = layer.in_channels * layer.kernel_h * layer.kernel_w;
  const std::size_t out_ch = layer.out_channels;
  const auto ek = static_cast<Eigen::Index>(k);
  const auto ehw = static_cast<Eigen::Index>(hw);
  const auto eout = static_cast<Eigen::Index>(out_ch);

  ConvGrads<T> grads;
  if (want_input_grad) grads.input = BasicTensor<T>::zeros(input.shape());
  std::vector<RowMat<T>> sample_dw(batch);
  std::vector<AlignedVector<T>> sample_db(batch);
  const ConstMatMap<T> weights(layer.weights.data(), eout, ek);

  const std::size_t rows = chunk_rows(k, height, width);
  const bool direct = use_direct(layer);
  const bool adjoint_direct = want_input_grad && !direct &&
                              use_direct_forward<T>(out_ch, layer.kernel_h, layer.kernel_w);
  ConvLayer<T> adjoint;
  if (adjoint_direct) adjoint = adjoint_layer(layer);
  parallel_for(batch, [&](std::size_t n) {
    sample_db[n].resize(out_ch);
    if (direct) {
      sample_dw[n].resize(eout, ek);
      direct_backward(layer, input.data() + n * layer.in_channels * hw,
                      grad_out.data() + n * out_ch * hw, height, width, sample_dw[n].data(),
                      sample_db[n].data(),
                      want_input_grad ? grads.input.data() + n * layer.in_channels * hw : nullptr);
      return;
    }
    auto& col = scratch<T>(k * rows * width);
    const T* src = input.data() + n * layer.in_channels * hw;
    const ConstMatMap<T> gy(grad_out.data() + n * out_ch * hw, eout, ehw);
    sample_dw[n].setZero(eout, ek);
    for (std::size_t y0 = 0; y0 < height; y0 += rows) {
      const std::size_t y1 = std::min(height, y0 + rows);
      const auto cols = static_cast<Eigen::Index>((y1 - y0) * width);
      const auto first = static_cast<Eigen::Index>(y0 * width);
      im2col(src, layer.in_channels, height, width, layer.kernel_h, layer.kernel_w, y0, y1, col.data());
      MatMap<T> patches(col.data(), ek, cols);
      sample_dw[n].noalias() += gy.middleCols(first, cols) * patches.transpose();
      if (want_input_grad && !adjoint_direct) {
        patches.noalias() = weights.transpose() * gy.middleCols(first, cols);
        col2im(col.data(), layer.in_channels, height, width, layer.kernel_h, layer.kernel_w, y0, y1,
               grads.input.data() + n * layer.in_channels * hw);
      }
    }
    for (std::size_t o = 0; o < out_ch; ++o) sample_db[n][o] = gy.row(static_cast<Eigen::Index>(o)).sum();
    if (adjoint_direct) {
      direct_forward(adjoint, grad_out.data() + n * out_ch * hw, height, width,
                     grads.input.data() + n * layer.in_channels * hw);
    }
  });

  grads.weights = BasicTensor<T>::zeros(layer.weights.shape());
  grads.bias = BasicTensor<T>::zeros({out_ch});
  MatMap<T> dw(grads.weights.data(), eout, ek);
  for (std::size_t n = 0; n < batch; ++n) {
    dw += sample_dw[n];
    for (std::size_t o = 0; o < out_ch; ++o) grads.bias[o] += sample_db[n][o];
  }
  return grads;
}

// ------------------------------------------------------------- batchnorm

template <typename T>
BatchNormLayer<T> BatchNormLayer<T>::make(std::size_t channels) {
  BatchNormLayer layer;
  layer.channels = channels;
  layer.gamma = BasicTensor<T>::ones({channels});
  layer.beta = BasicTensor<T>::zeros({channels});
  layer.running_mean = BasicTensor<T>::zeros({channels});
  layer.running_var = BasicTensor<T>::ones({channels});
  return layer;
}

namespace {

template <typename T>
void check_bn_input(const BatchNormLayer<T>& layer, const BasicTensor<T>& input) {
  if (input.rank() < 2 || input.dim(1) != layer.channels) {
    fail(ErrorCode::kShape, "batchnorm: input " + shape_to_string(input.shape()) +
                                " incompatible with " + std::to_string(layer.channels) + " channels");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> batchnorm_infer(const BatchNormLayer<T>& layer, const BasicTensor<T>& input) {
  check_bn_input(layer, input);
  const std::size_t batch = input.dim(0), channels = layer.channels;
  const std::size_t plane = plane_size(input.shape());
  BasicTensor<T> output(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T scale = layer.gamma[c] / std::sqrt(layer.running_var[c] + layer.epsilon);
    const T shift = layer.beta[c] - scale * layer.running_mean[c];
    for (std::size_t n = 0; n < batch; ++n) {
      const T* src = input.data() + (n * channels + c) * plane;
      T* dst = output.data() + (n * channels + c) * plane;
      for (std::size_t s = 0; s < plane; ++s) dst[s] = scale * src[s] + shift;
    }
  }
  return output;
}

template <typename T>
BasicTensor<T> batchnorm_forward(BatchNormLayer<T>& layer, const BasicTensor<T>& input, Mode mode,
                                 BatchNormCache<T>* cache) {
  if (mode == Mode::kInfer) return batchnorm_infer(layer, input);
  check_bn_input(layer, input);
  const std::size_t batch = input.dim(0), channels = layer.channels;
  if (batch < 2) fail(ErrorCode::kDegenerateBatch, "batchnorm: train mode needs a batch of at least 2");
  const std::size_t plane = plane_size(input.shape());
  const double count = static_cast<double>(batch * plane);

  BasicTensor<T> output(input.shape());
  BasicTensor<T> normalized = cache ? BasicTensor<T>(input.shape()) : BasicTensor<T>();
  AlignedVector<T> inv_std(channels);
  parallel_for(channels, [&](std::size_t c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < batch; ++n) sum += plane_array(input.data(), n, c, channels, plane).sum();
    const double mean = sum / count;
    const T m = static_cast<T>(mean);
    double sq = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      sq += (plane_array(input.data(), n, c, channels, plane) - m).square().sum();
    }
    const double var = sq / count;
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(layer.epsilon)));
    inv_std[c] = istd;
    const T g = layer.gamma[c], b = layer.beta[c];
    for (std::size_t n = 0; n < batch; ++n) {
      const auto x = plane_array(input.data(), n, c, channels, plane);
      auto y = plane_array(output.data(), n, c, channels, plane);
      if (cache) {
        auto xhat = plane_array(normalized.data(), n, c, channels, plane);
        xhat = (x - m) * istd;
        y = g * xhat + b;
      } else {
        y = g * ((x - m) * istd) + b;
      }
    }
    layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (T(1) - layer.momentum) * m;
    layer.running_var[c] =
        layer.momentum * layer.running_var[c] + (T(1) - layer.momentum) * static_cast<T>(var);
  });
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return output;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>& layer, const BatchNormCache<T>& cache,
                                     const BasicTensor<T>& grad_out) {
  const BasicTensor<T>& xhat = cache.normalized;
  require_shape(grad_out.shape(), xhat.shape(), "batchnorm_backward grad");
  check_bn_input(layer, xhat);
  const std::size_t batch = xhat.dim(0), channels = layer.channels;
  const std::size_t plane = plane_size(xhat.shape());
  const double count = static_cast<double>(batch * plane);

  BatchNormGrads<T> grads{BasicTensor<T>(xhat.shape()), BasicTensor<T>::zeros({channels}),
                          BasicTensor<T>::zeros({channels})};
  parallel_for(channels, [&](std::size_t c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const auto dy = plane_array(grad_out.data(), n, c, channels, plane);
      sum_dy += dy.sum();
      sum_dy_xhat += (dy * plane_array(xhat.data(), n, c, channels, plane)).sum();
    }
    grads.beta[c] = static_cast<T>(sum_dy);
    grads.gamma[c] = static_cast<T>(sum_dy_xhat);
    const T scale = static_cast<T>(layer.gamma[c] * cache.inv_std[c] / count);
    const T total_dy = static_cast<T>(sum_dy), total_dy_xhat = static_cast<T>(sum_dy_xhat);
    const T m = static_cast<T>(count);
    for (std::size_t n = 0; n < batch; ++n) {
      plane_array(grads.input.data(), n, c, channels, plane) =
          scale * (m * plane_array(grad_out.data(), n, c, channels, plane) - total_dy -
                   plane_array(xhat.data(), n, c, channels, plane) * total_dy_xhat);
    }
  });
  return grads;
}

// ------------------------------------------------- fused norm/relu/pool

namespace {

template <typename T>
void check_pool_dims(const Shape& shape, const char* what) {
  require_rank(shape, 4, what);
  if (shape[2] % 2 != 0 || shape[3] % 2 != 0) {
    fail(ErrorCode::kShape, std::string(what) + ": odd spatial dims " + shape_to_string(shape));
  }
}

// Pools one affine-transformed plane; returns nothing, writes relu(max) and
// the window code.
template <typename T>
void affine_pool_plane(const T* src, std::size_t height, std::size_t width, T scale, T shift,
                       T* dst, std::uint8_t* code) {
  const std::size_t oh = height / 2, ow = width / 2;
  for (std::size_t y = 0; y < oh; ++y) {
    const T* r0 = src + 2 * y * width;
    const T* r1 = r0 + width;
    for (std::size_t x = 0; x < ow; ++x) {
      const T a = scale * r0[2 * x] + shift, b = scale * r0[2 * x + 1] + shift;
      const T c = scale * r1[2 * x] + shift, d = scale * r1[2 * x + 1] + shift;
      const T top = b > a ? b : a;
      const std::uint8_t top_q = b > a ? 1 : 0;
      const T bottom = d > c ? d : c;
      const std::uint8_t bottom_q = d > c ? 3 : 2;
      const T best = bottom > top ? bottom : top;
      dst[y * ow + x] = best > T{0} ? best : T{0};
      if (code) code[y * ow + x] = static_cast<std::uint8_t>((bottom > top ? bottom_q : top_q) | (best > T{0} ? 4 : 0));
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> norm_relu_pool_train(BatchNormLayer<T>& layer, BasicTensor<T>&& input,
                                    NormPoolCache<T>& cache) {
  check_bn_input(layer, input);
  check_pool_dims<T>(input.shape(), "norm_relu_pool");
  const std::size_t batch = input.dim(0), channels = layer.channels;
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (batch < 2) fail(ErrorCode::kDegenerateBatch, "batchnorm: train mode needs a batch of at least 2");
  const std::size_t plane = height * width, pooled = plane / 4;
  const double count = static_cast<double>(batch * plane);

  BasicTensor<T> output({batch, channels, height / 2, width / 2});
  cache.inv_std.assign(channels, T{0});
  cache.argmax.assign(output.size(), 0);
  parallel_for(channels, [&](std::size_t c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < batch; ++n) sum += plane_array(input.data(), n, c, channels, plane).sum();
    const double mean = sum / count;
    const T m = static_cast<T>(mean);
    double sq = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      sq += (plane_array(input.data(), n, c, channels, plane) - m).square().sum();
    }
    const double var = sq / count;
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(layer.epsilon)));
    cache.inv_std[c] = istd;
    for (std::size_t n = 0; n < batch; ++n) {
      auto x = plane_array(input.data(), n, c, channels, plane);
      x = (x - m) * istd;
      const std::size_t p = n * channels + c;
      affine_pool_plane(input.data() + p * plane, height, width, layer.gamma[c], layer.beta[c],
                        output.data() + p * pooled, cache.argmax.data() + p * pooled);
    }
    layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (T(1) - layer.momentum) * m;
    layer.running_var[c] =
        layer.momentum * layer.running_var[c] + (T(1) - layer.momentum) * static_cast<T>(var);
  });
  cache.normalized = std::move(input);
  return output;
}

template <typename T>
BasicTensor<T> norm_relu_pool_infer(const BatchNormLayer<T>& layer, const BasicTensor<T>& input) {
  check_bn_input(layer, input);
  check_pool_dims<T>(input.shape(), "norm_relu_pool");
  const std::size_t batch = input.dim(0), channels = layer.channels;
  const std::size_t height = input.dim(2), width = input.dim(3);
  const std::size_t plane = height * width, pooled = plane / 4;
  BasicTensor<T> output({batch, channels, height / 2, width / 2});
  parallel_for(batch * channels, [&](std::size_t p) {
    const std::size_t c = p % channels;
    const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) +
                                                  static_cast<double>(layer.epsilon)));
    const T scale = layer.gamma[c] * istd;
    const T shift = layer.beta[c] - layer.running_mean[c] * scale;
    affine_pool_plane<T>(input.data() + p * plane, height, width, scale, shift,
                         output.data() + p * pooled, nullptr);
  });
  return output;
}

template <typename T>
BatchNormGrads<T> norm_relu_pool_backward(const BatchNormLayer<T>& layer, NormPoolCache<T>&& cache,
                                          const BasicTensor<T>& grad_out) {
  BasicTensor<T> xhat = std::move(cache.normalized);
  check_bn_input(layer, xhat);
  const std::size_t batch = xhat.dim(0), channels = layer.channels;
  const std::size_t height = xhat.dim(2), width = xhat.dim(3);
  require_shape(grad_out.shape(), {batch, channels, height / 2, width / 2}, "norm_relu_pool grad");
  const std::size_t plane = height * width, pooled = plane / 4;
  const std::size_t ow = width / 2;
  const double count = static_cast<double>(batch * plane);
  auto slot = [&](std::size_t p, std::size_t q) {
    const std::uint8_t code = cache.argmax[p * pooled + q];
    const std::size_t y = q / ow, x = q % ow;
    return p * plane + (2 * y + ((code >> 1) & 1)) * width + 2 * x + (code & 1);
  };

  BatchNormGrads<T> grads{BasicTensor<T>(), BasicTensor<T>::zeros({channels}),
                          BasicTensor<T>::zeros({channels})};
  parallel_for(channels, [&](std::size_t c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t p = n * channels + c;
      for (std::size_t q = 0; q < pooled; ++q) {
        if (!(cache.argmax[p * pooled + q] & 4)) continue;
        const double g = grad_out[p * pooled + q];
        sum_dy += g;
        sum_dy_xhat += g * xhat[slot(p, q)];
      }
    }
    grads.beta[c] = static_cast<T>(sum_dy);
    grads.gamma[c] = static_cast<T>(sum_dy_xhat);
    const T scale = static_cast<T>(layer.gamma[c] * cache.inv_std[c] / count);
    const T total_dy = static_cast<T>(sum_dy), total_dy_xhat = static_cast<T>(sum_dy_xhat);
    const T m = static_cast<T>(count);
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t p = n * channels + c;
      auto x = plane_array(xhat.data(), n, c, channels, plane);
      x = scale * (-total_dy - x * total_dy_xhat);
      for (std::size_t q = 0; q < pooled; ++q) {
        if (cache.argmax[p * pooled + q] & 4) xhat[slot(p, q)] += scale * m * grad_out[p * pooled + q];
      }
    }
  });
  grads.input = std::move(xhat);
  cache = {};
  return grads;
}

// ---------------------------------------------------------- elementwise

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  require_shape(grad_out.shape(), input.shape(), "relu_backward grad");
  BasicTensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return grad;
}

template <typename T>
BasicTensor<T> relu_backward(std::span<const std::uint8_t> active, const BasicTensor<T>& grad_out) {
  if (active.size() != grad_out.size()) fail(ErrorCode::kShape, "relu_backward: mask size mismatch");
  BasicTensor<T> grad(grad_out.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = active[i] ? grad_out[i] : T{0};
  return grad;
}

template <typename T>
std::vector<std::uint8_t> relu_active_mask(const BasicTensor<T>& output) {
  std::vector<std::uint8_t> mask(output.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = output[i] > T{0};
  return mask;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.values()) {
    v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
  require_shape(grad_out.shape(), output.shape(), "sigmoid_backward grad");
  BasicTensor<T> grad(output.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad_out[i] * output[i] * (T{1} - output[i]);
  return grad;
}

// ------------------------------------------------------------- pooling

template <typename T>
BasicTensor<T> max_pool(const BasicTensor<T>& input, MaxPoolCache* cache) {
  require_rank(input.shape(), 4, "max_pool");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height % 2 != 0 || width % 2 != 0) {
    fail(ErrorCode::kShape, "max_pool: odd spatial dims " + shape_to_string(input.shape()));
  }
  const std::size_t oh = height / 2, ow = width / 2;
  BasicTensor<T> output({batch, channels, oh, ow});
  std::vector<std::uint8_t> argmax(cache ? output.size() : 0);
  parallel_for(batch * channels, [&](std::size_t p) {
    const T* src = input.data() + p * height * width;
    T* dst = output.data() + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const T* r0 = src + 2 * y * width;
      const T* r1 = r0 + width;
      for (std::size_t x = 0; x < ow; ++x) {
        const T a = r0[2 * x], b = r0[2 * x + 1], c = r1[2 * x], d = r1[2 * x + 1];
        const T top = b > a ? b : a;
        const std::uint8_t top_q = b > a ? 1 : 0;
        const T bottom = d > c ? d : c;
        const std::uint8_t bottom_q = d > c ? 3 : 2;
        dst[y * ow + x] = bottom > top ? bottom : top;
        if (cache) argmax[p * oh * ow + y * ow + x] = bottom > top ? bottom_q : top_q;
      }
    }
  });
  if (cache) {
    cache->input_shape = input.shape();
    cache->argmax = std::move(argmax);
  }
  return output;
}

template <typename T>
BasicTensor<T> max_pool_backward(const MaxPoolCache& cache, const BasicTensor<T>& grad_out) {
  const Shape& in = cache.input_shape;
  require_rank(in, 4, "max_pool_backward");
  const std::size_t oh = in[2] / 2, ow = in[3] / 2, width = in[3];
  require_shape(grad_out.shape(), {in[0], in[1], oh, ow}, "max_pool_backward grad");
  BasicTensor<T> grad = BasicTensor<T>::zeros(in);
  const std::size_t planes = in[0] * in[1];
  for (std::size_t p = 0; p < planes; ++p) {
    T* dst = grad.data() + p * in[2] * width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t o = p * oh * ow + y * ow + x;
        const std::uint8_t q = cache.argmax[o];
        dst[(2 * y + q / 2) * width + 2 * x + q % 2] = grad_out[o];
      }
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "global_avg_pool");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  BasicTensor<T> output({batch, channels});
  for (std::size_t p = 0; p < batch * channels; ++p) {
    double sum = 0.0;
    const T* src = input.data() + p * plane;
    for (std::size_t s = 0; s < plane; ++s) sum += src[s];
    output[p] = static_cast<T>(sum / static_cast<double>(plane));
  }
  return output;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out) {
  require_rank(input_shape, 4, "global_avg_pool_backward");
  require_shape(grad_out.shape(), {input_shape[0], input_shape[1]}, "global_avg_pool_backward grad");
  const std::size_t plane = input_shape[2] * input_shape[3];
  BasicTensor<T> grad(input_shape);
  const T inv = T{1} / static_cast<T>(plane);
  for (std::size_t p = 0; p < grad_out.size(); ++p) {
    std::fill_n(grad.data() + p * plane, plane, grad_out[p] * inv);
  }
  return grad;
}

// --------------------------------------------------------------- dense

template <typename T>
DenseLayer<T> DenseLayer<T>::make(std::size_t in, std::size_t out) {
  DenseLayer layer;
  layer.in_features = in;
  layer.out_features = out;
  layer.weights = BasicTensor<T>::zeros({out, in});
  layer.bias = BasicTensor<T>::zeros({out});
  return layer;
}

template <typename T>
BasicTensor<T> dense_forward(const DenseLayer<T>& layer, const BasicTensor<T>& input) {
  if (input.rank() != 2 || input.dim(1) != layer.in_features) {
    fail(ErrorCode::kShape, "dense: input " + shape_to_string(input.shape()) + " does not have " +
                                std::to_string(layer.in_features) + " features");
  }
  const auto batch = static_cast<Eigen::Index>(input.dim(0));
  const auto in = static_cast<Eigen::Index>(layer.in_features);
  const auto out = static_cast<Eigen::Index>(layer.out_features);
  BasicTensor<T> output({input.dim(0), layer.out_features});
  MatMap<T> y(output.data(), batch, out);
  y.noalias() = ConstMatMap<T>(input.data(), batch, in) *
                ConstMatMap<T>(layer.weights.data(), out, in).transpose();
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (Eigen::Index o = 0; o < out; ++o) y(n, o) += layer.bias[static_cast<std::size_t>(o)];
  }
  return output;
}

template <typename T>
DenseGrads<T> dense_backward(const DenseLayer<T>& layer, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out) {
  if (input.rank() != 2 || input.dim(1) != layer.in_features) {
    fail(ErrorCode::kShape, "dense_backward: input feature mismatch");
  }
  require_shape(grad_out.shape(), {input.dim(0), layer.out_features}, "dense_backward grad");
  const auto batch = static_cast<Eigen::Index>(input.dim(0));
  const auto in = static_cast<Eigen::Index>(layer.in_features);
  const auto out = static_cast<Eigen::Index>(layer.out_features);
  const ConstMatMap<T> x(input.data(), batch, in);
  const ConstMatMap<T> gy(grad_out.data(), batch, out);
  DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(layer.weights.shape()),
                      BasicTensor<T>::zeros({layer.out_features})};
  MatMap<T>(grads.weights.data(), out, in).noalias() = gy.transpose() * x;
  MatMap<T>(grads.input.data(), batch, in).noalias() =
      gy * ConstMatMap<T>(layer.weights.data(), out, in);
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (Eigen::Index o = 0; o < out; ++o) grads.bias[static_cast<std::size_t>(o)] += gy(n, o);
  }
  return grads;
}

// ------------------------------------------------------------- dropout

template <typename T>
BasicTensor<T> dropout(const DropoutLayer& layer, const BasicTensor<T>& input, Mode mode,
                       RngStream& rng, DropoutMask* mask) {
  if (!(layer.rate >= 0.0 && layer.rate < 1.0)) {
    fail(ErrorCode::kInvalidParameter, "dropout rate must be in [0, 1)");
  }
  if (mode == Mode::kInfer) {
    if (mask) *mask = DropoutMask{};
    return input;
  }
  const double scale = 1.0 / (1.0 - layer.rate);
  BasicTensor<T> output(input.shape());
  std::vector<std::uint8_t> keep(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    keep[i] = rng.uniform() >= layer.rate;
    output[i] = keep[i] ? static_cast<T>(input[i] * scale) : T{0};
  }
  if (mask) {
    mask->scale = scale;
    mask->keep = std::move(keep);
  }
  return output;
}

template <typename T>
BasicTensor<T> dropout_backward(const DropoutMask& mask, const BasicTensor<T>& grad_out) {
  if (mask.keep.empty()) return grad_out;
  if (mask.keep.size() != grad_out.size()) fail(ErrorCode::kShape, "dropout_backward: mask size mismatch");
  BasicTensor<T> grad(grad_out.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = mask.keep[i] ? static_cast<T>(grad_out[i] * mask.scale) : T{0};
  }
  return grad;
}

// ---------------------------------------------------------------- loss

template <typename T>
LossResult<T> bce_loss(const BasicTensor<T>& predictions, const BasicTensor<T>& labels) {
  require_shape(labels.shape(), predictions.shape(), "bce_loss labels");
  const double n = static_cast<double>(predictions.size());
  double total = 0.0;
  LossResult<T> result{T{0}, BasicTensor<T>(predictions.shape())};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double raw = predictions[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const double y = labels[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    const bool clamped = raw < kBceClamp || raw > 1.0 - kBceClamp;
    result.grad[i] = clamped ? T{0} : static_cast<T>((-y / p + (1.0 - y) / (1.0 - p)) / n);
  }
  result.loss = static_cast<T>(total / n);
  return result;
}

// ---------------------------------------------------------------- adam

template <typename T>
void adam_step(AdamState<T>& state, std::span<const ParamRef<T>> params) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(BasicTensor<T>::zeros(p.value->shape()));
      state.second_moment.push_back(BasicTensor<T>::zeros(p.value->shape()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    fail(ErrorCode::kShape, "adam_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(params[i].grad->shape(), params[i].value->shape(), "adam_step grad");
    require_shape(state.first_moment[i].shape(), params[i].value->shape(), "adam_step moment");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicTensor<T>& value = *params[i].value;
    const BasicTensor<T>& grad = *params[i].grad;
    BasicTensor<T>& m = state.first_moment[i];
    BasicTensor<T>& v = state.second_moment[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= static_cast<T>(state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

template <typename T>
void adam_step(AdamState<T>& state, BasicTensor<T>& params, const BasicTensor<T>& grads) {
  const ParamRef<T> ref{&params, &grads};
  adam_step(state, std::span<const ParamRef<T>>(&ref, 1));
}

#define VOLC_NN_INSTANTIATE(T)                                                                    \
  template struct ConvLayer<T>;                                                                   \
  template BasicTensor<T> conv2d_forward(const ConvLayer<T>&, const BasicTensor<T>&);             \
  template ConvGrads<T> conv2d_backward(const ConvLayer<T>&, const BasicTensor<T>&,               \
                                        const BasicTensor<T>&, bool);                             \
  template struct BatchNormLayer<T>;                                                              \
  template BasicTensor<T> batchnorm_forward(BatchNormLayer<T>&, const BasicTensor<T>&, Mode,      \
                                            BatchNormCache<T>*);                                  \
  template BasicTensor<T> batchnorm_infer(const BatchNormLayer<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> norm_relu_pool_train(BatchNormLayer<T>&, BasicTensor<T>&&,              \
                                               NormPoolCache<T>&);                               \
  template BasicTensor<T> norm_relu_pool_infer(const BatchNormLayer<T>&, const BasicTensor<T>&);  \
  template BatchNormGrads<T> norm_relu_pool_backward(const BatchNormLayer<T>&, NormPoolCache<T>&&, \
                                                     const BasicTensor<T>&);                      \
  template BatchNormGrads<T> batchnorm_backward(const BatchNormLayer<T>&,                         \
                                                const BatchNormCache<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                            \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> relu_backward(std::span<const std::uint8_t>, const BasicTensor<T>&);    \
  template std::vector<std::uint8_t> relu_active_mask(const BasicTensor<T>&);                     \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                         \
  template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> max_pool(const BasicTensor<T>&, MaxPoolCache*);                         \
  template BasicTensor<T> max_pool_backward(const MaxPoolCache&, const BasicTensor<T>&);          \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                 \
  template BasicTensor<T> global_avg_pool_backward(const Shape&, const BasicTensor<T>&);          \
  template struct DenseLayer<T>;                                                                  \
  template BasicTensor<T> dense_forward(const DenseLayer<T>&, const BasicTensor<T>&);             \
  template DenseGrads<T> dense_backward(const DenseLayer<T>&, const BasicTensor<T>&,              \
                                        const BasicTensor<T>&);                                   \
  template BasicTensor<T> dropout(const DropoutLayer&, const BasicTensor<T>&, Mode, RngStream&,   \
                                  DropoutMask*);                                                  \
  template BasicTensor<T> dropout_backward(const DropoutMask&, const BasicTensor<T>&);            \
  template LossResult<T> bce_loss(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template void adam_step(AdamState<T>&, std::span<const ParamRef<T>>);                           \
  template void adam_step(AdamState<T>&, BasicTensor<T>&, const BasicTensor<T>&);

VOLC_NN_INSTANTIATE(float)
VOLC_NN_INSTANTIATE(double)

#undef VOLC_NN_INSTANTIATE

}  // namespace volc::nn
