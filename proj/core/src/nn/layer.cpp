#include "groupemo/nn/layer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace groupemo::nn {

namespace {

constexpr std::array<std::string_view, 7> kKindNames{"conv",    "relu",    "maxpool", "flatten",
                                                     "dense",   "dropout", "softmax"};

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    Shape expected(rank, 0);
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) + " batch",
                     expected, t.shape());
  }
}

Shape sample_of(const Shape& batch) { return Shape(batch.begin() + 1, batch.end()); }

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  std::size_t h, w, c, kh, kw, stride, pad, oh, ow;
  std::size_t patch() const { return kh * kw * c; }
};

ConvGeometry conv_geometry(const LayerSpec& layer, const Shape& batch_shape) {
  ConvGeometry g{};
  g.h = batch_shape[1];
  g.w = batch_shape[2];
  g.c = batch_shape[3];
  g.kh = layer.kernel_h;
  g.kw = layer.kernel_w;
  g.stride = layer.stride;
  g.pad = layer.padding;
  g.oh = window_out_extent(g.h, g.kh, g.stride, g.pad);
  g.ow = window_out_extent(g.w, g.kw, g.stride, g.pad);
  return g;
}

// One sample (h x w x c) into patch-major columns: cols[p][r] holds patch
// element p (ky, kx, channel) for output position r. Zero padding.
template <typename T>
void im2col_t(const T* in, const ConvGeometry& g, T* cols) {
  const std::size_t rows = g.oh * g.ow;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      for (std::size_t ch = 0; ch < g.c; ++ch) {
        T* dst = cols + ((ky * g.kw + kx) * g.c + ch) * rows;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          T* drow = dst + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(drow, drow + g.ow, T(0));
            continue;
          }
          const T* srow = in + static_cast<std::size_t>(iy) * g.w * g.c + ch;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T(0)
                                                                         : srow[static_cast<std::size_t>(ix) * g.c];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_t_add(const T* cols, const ConvGeometry& g, T* in_grad) {
  const std::size_t rows = g.oh * g.ow;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* src = cols + ((ky * g.kw + kx) * g.c + ch) * rows;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* drow = in_grad + static_cast<std::size_t>(iy) * g.w * g.c + ch;
          const T* srow = src + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            drow[static_cast<std::size_t>(ix) * g.c] += srow[ox];
          }
        }
      }
    }
  }
}

// Spatial positions per tile in the conv loops.
constexpr std::size_t kBlock = 256;

// Dot product with eight fixed partial sums, so the compiler can vectorize
// while the summation order stays the same on every run.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  T total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

template <typename T>
void check_params(const LayerSpec& layer, const LayerParams<T>& params, const Shape& batch_shape) {
  const Shape sample = sample_of(batch_shape);
  const Shape w = weight_shape(layer, sample);
  if (params.weight.shape() != w) throw ShapeError("weight tensor does not match layer", w, params.weight.shape());
  const Shape b = bias_shape(layer);
  if (params.bias.shape() != b) throw ShapeError("bias tensor does not match layer", b, params.bias.shape());
}

template <typename T>
Tensor<T> conv_forward(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& in) {
  require_rank(in, 4, "conv");
  check_params(layer, params, in.shape());
  const ConvGeometry g = conv_geometry(layer, in.shape());
  const std::size_t n = in.dim(0);
  const std::size_t cout = layer.units;
  const std::size_t rows = g.oh * g.ow;
  const std::size_t k = g.patch();
  Tensor<T> out({n, g.oh, g.ow, cout});
  std::vector<T> cols(k * rows);
  std::vector<T> out_t(cout * rows);
  const T* w = params.weight.data();
  for (std::size_t s = 0; s < n; ++s) {
    im2col_t(in.data() + s * g.h * g.w * g.c, g, cols.data());
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
      const std::size_t len = std::min(kBlock, rows - r0);
      for (std::size_t j = 0; j < cout; ++j) {
        T* orow = out_t.data() + j * rows + r0;
        std::fill(orow, orow + len, params.bias[j]);
        for (std::size_t p = 0; p < k; ++p) {
          const T wv = w[p * cout + j];
          const T* crow = cols.data() + p * rows + r0;
          for (std::size_t r = 0; r < len; ++r) orow[r] += wv * crow[r];
        }
      }
    }
    T* dst = out.data() + s * rows * cout;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cout; ++j) dst[r * cout + j] = out_t[j * rows + r];
  }
  return out;
}

template <typename T>
LayerGradient<T> conv_backward(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& in,
                               const Tensor<T>& grad_out) {
  const ConvGeometry g = conv_geometry(layer, in.shape());
  const std::size_t n = in.dim(0);
  const std::size_t cout = layer.units;
  const std::size_t rows = g.oh * g.ow;
  const std::size_t k = g.patch();
  const Shape expected{n, g.oh, g.ow, cout};
  if (grad_out.shape() != expected) throw ShapeError("conv grad_out", expected, grad_out.shape());

  LayerGradient<T> result{Tensor<T>(in.shape()), {Tensor<T>(params.weight.shape()), Tensor<T>(params.bias.shape())}};
  std::vector<T> cols(k * rows);
  std::vector<T> dcols(k * rows);
  std::vector<T> go_t(cout * rows);
  T* dw = result.grad_params.weight.data();
  T* db = result.grad_params.bias.data();
  const T* w = params.weight.data();
  for (std::size_t s = 0; s < n; ++s) {
    const T* go = grad_out.data() + s * rows * cout;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cout; ++j) go_t[j * rows + r] = go[r * cout + j];
    im2col_t(in.data() + s * g.h * g.w * g.c, g, cols.data());
    for (std::size_t j = 0; j < cout; ++j) {
      const T* grow = go_t.data() + j * rows;
      T bsum = 0;
      for (std::size_t r = 0; r < rows; ++r) bsum += grow[r];
      db[j] += bsum;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T* crow = cols.data() + p * rows;
      T* dcrow = dcols.data() + p * rows;
      std::fill(dcrow, dcrow + rows, T(0));
      for (std::size_t j = 0; j < cout; ++j) {
        const T* grow = go_t.data() + j * rows;
        dw[p * cout + j] += dot(crow, grow, rows);
        const T wv = w[p * cout + j];
        for (std::size_t r = 0; r < rows; ++r) dcrow[r] += wv * grow[r];
      }
    }
    col2im_t_add(dcols.data(), g, result.grad_in.data() + s * g.h * g.w * g.c);
  }
  return result;
}

template <typename T>
Tensor<T> dense_forward(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& in) {
  require_rank(in, 2, "dense");
  check_params(layer, params, in.shape());
  const std::size_t n = in.dim(0), f = in.dim(1), o = layer.units;
  Tensor<T> out({n, o});
  for (std::size_t s = 0; s < n; ++s) std::copy(params.bias.data(), params.bias.data() + o, out.data() + s * o);
  gemm_acc(in.data(), params.weight.data(), out.data(), n, f, o);
  return out;
}

template <typename T>
LayerGradient<T> dense_backward(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& in,
                                const Tensor<T>& grad_out) {
  const std::size_t n = in.dim(0), f = in.dim(1), o = layer.units;
  const Shape expected{n, o};
  if (grad_out.shape() != expected) throw ShapeError("dense grad_out", expected, grad_out.shape());
  LayerGradient<T> result{Tensor<T>(in.shape()), {Tensor<T>(params.weight.shape()), Tensor<T>(params.bias.shape())}};
  T* dw = result.grad_params.weight.data();
  T* db = result.grad_params.bias.data();
  const T* w = params.weight.data();
  for (std::size_t s = 0; s < n; ++s) {
    const T* go = grad_out.data() + s * o;
    const T* x = in.data() + s * f;
    T* dx = result.grad_in.data() + s * f;
    for (std::size_t j = 0; j < o; ++j) db[j] += go[j];
    for (std::size_t p = 0; p < f; ++p) {
      T* dwrow = dw + p * o;
      const T* wrow = w + p * o;
      T acc = 0;
      for (std::size_t j = 0; j < o; ++j) {
        dwrow[j] += x[p] * go[j];
        acc += go[j] * wrow[j];
      }
      dx[p] = acc;
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool_forward(const LayerSpec& layer, const Tensor<T>& in, std::vector<std::uint32_t>* argmax) {
  require_rank(in, 4, "maxpool");
  const std::size_t n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
  const std::size_t oh = window_out_extent(h, layer.kernel_h, layer.stride, 0);
  const std::size_t ow = window_out_extent(w, layer.kernel_w, layer.stride, 0);
  Tensor<T> out({n, oh, ow, c});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_at = 0;
          for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
              const std::size_t at = ((s * h + oy * layer.stride + ky) * w + ox * layer.stride + kx) * c + ch;
              if (in[at] > best || (ky == 0 && kx == 0)) {
                best = in[at];
                best_at = at;
              }
            }
          }
          out[o] = best;
          if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best_at);
        }
      }
    }
  }
  return out;
}

template <typename T>
void softmax_rows(Tensor<T>& t) {
  const std::size_t n = t.dim(0), k = t.dim(1);
  for (std::size_t s = 0; s < n; ++s) {
    T* row = t.data() + s * k;
    const T mx = *std::max_element(row, row + k);
    T total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < k; ++j) row[j] /= total;
  }
}

template <typename T>
Tensor<T> forward_impl(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& in, bool training,
                       Rng* rng, ForwardCache<T>* cache) {
  if (in.rank() < 2) throw ShapeError("layer input needs a batch axis", {0, 0}, in.shape());
  if (cache) {
    cache->kind = layer.kind;
    cache->input_shape = in.shape();
  }
  switch (layer.kind) {
    case LayerKind::conv: {
      Tensor<T> out = conv_forward(layer, params, in);
      if (cache) cache->saved = in;
      return out;
    }
    case LayerKind::dense: {
      Tensor<T> out = dense_forward(layer, params, in);
      if (cache) cache->saved = in;
      return out;
    }
    case LayerKind::relu: {
      Tensor<T> out = in;
      for (auto& v : out.values()) v = v > T(0) ? v : T(0);
      if (cache) cache->saved = in;
      return out;
    }
    case LayerKind::maxpool:
      return maxpool_forward(layer, in, cache ? &cache->argmax : nullptr);
    case LayerKind::flatten:
      return in.reshaped({in.dim(0), in.size() / in.dim(0)});
    case LayerKind::dropout: {
      if (!training || layer.rate == 0.0) {
        if (cache) cache->identity = true;
        return in;
      }
      if (!rng) throw Error("dropout in training mode needs a random generator");
      const T keep_scale = T(1) / T(1.0 - layer.rate);
      Tensor<T> mask(in.shape());
      Tensor<T> out = in;
      for (std::size_t i = 0; i < in.size(); ++i) {
        mask[i] = rng->bernoulli(layer.rate) ? T(0) : keep_scale;
        out[i] *= mask[i];
      }
      if (cache) {
        cache->identity = false;
        cache->saved = std::move(mask);
      }
      return out;
    }
    case LayerKind::softmax: {
      require_rank(in, 2, "softmax");
      Tensor<T> out = in;
      softmax_rows(out);
      if (cache) cache->saved = out;
      return out;
    }
  }
  throw Error("unknown layer kind");
}

}  // namespace

std::string_view kind_name(LayerKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<LayerKind> parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  }
  return std::nullopt;
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t stride, std::size_t padding, std::size_t kernel) {
  LayerSpec s{LayerKind::conv};
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  s.units = out_channels;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t kernel, std::size_t stride) {
  LayerSpec s{LayerKind::maxpool};
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t out_neurons) {
  LayerSpec s{LayerKind::dense};
  s.units = out_neurons;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
  LayerSpec s{LayerKind::dropout};
  s.rate = rate;
  return s;
}

std::size_t window_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (kernel == 0 || stride == 0) throw InputError("window kernel and stride must be positive");
  if (in + 2 * pad < kernel) {
    throw ShapeError("window larger than padded input", {kernel}, {in + 2 * pad});
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

Shape output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv:
      if (in.size() != 3) throw ShapeError("conv expects height x width x channels", {0, 0, 0}, in);
      if (layer.units == 0) throw InputError("conv needs at least one output channel");
      return {window_out_extent(in[0], layer.kernel_h, layer.stride, layer.padding),
              window_out_extent(in[1], layer.kernel_w, layer.stride, layer.padding), layer.units};
    case LayerKind::maxpool:
      if (in.size() != 3) throw ShapeError("maxpool expects height x width x channels", {0, 0, 0}, in);
      return {window_out_extent(in[0], layer.kernel_h, layer.stride, 0),
              window_out_extent(in[1], layer.kernel_w, layer.stride, 0), in[2]};
    case LayerKind::flatten:
      return {shape_size(in)};
    case LayerKind::dense:
      if (in.size() != 1) throw ShapeError("dense expects a flat feature vector", {0}, in);
      if (layer.units == 0) throw InputError("dense needs at least one output neuron");
      return {layer.units};
    case LayerKind::softmax:
      if (in.size() != 1) throw ShapeError("softmax expects a flat vector", {0}, in);
      return in;
    case LayerKind::relu:
    case LayerKind::dropout:
      return in;
  }
  throw Error("unknown layer kind");
}

Shape weight_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv:
      return {layer.kernel_h, layer.kernel_w, in.at(2), layer.units};
    case LayerKind::dense:
      return {in.at(0), layer.units};
    default:
      return {};
  }
}

Shape bias_shape(const LayerSpec& layer) {
  if (layer.has_params()) return {layer.units};
  return {};
}

template <typename T>
LayerOutput<T> layer_forward(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& input,
                             bool training, Rng* rng) {
  LayerOutput<T> result;
  result.output = forward_impl(layer, params, input, training, rng, &result.cache);
  return result;
}

template <typename T>
Tensor<T> layer_apply(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& input) {
  return forward_impl<T>(layer, params, input, false, nullptr, nullptr);
}

template <typename T>
LayerGradient<T> layer_backward(const LayerSpec& layer, const LayerParams<T>& params, const ForwardCache<T>& cache,
                                const Tensor<T>& grad_out) {
  if (cache.kind != layer.kind) {
    throw Error("backward: cache from a " + std::string(kind_name(cache.kind)) + " layer passed to a " +
                std::string(kind_name(layer.kind)) + " layer");
  }
  switch (layer.kind) {
    case LayerKind::conv:
      return conv_backward(layer, params, cache.saved, grad_out);
    case LayerKind::dense:
      return dense_backward(layer, params, cache.saved, grad_out);
    default:
      break;
  }

  LayerGradient<T> result;
  switch (layer.kind) {
    case LayerKind::relu: {
      if (grad_out.shape() != cache.saved.shape()) throw ShapeError("relu grad_out", cache.saved.shape(), grad_out.shape());
      result.grad_in = grad_out;
      for (std::size_t i = 0; i < grad_out.size(); ++i) {
        if (!(cache.saved[i] > T(0))) result.grad_in[i] = T(0);
      }
      break;
    }
    case LayerKind::maxpool: {
      result.grad_in = Tensor<T>(cache.input_shape);
      if (grad_out.size() != cache.argmax.size()) {
        throw ShapeError("maxpool grad_out", {cache.argmax.size()}, grad_out.shape());
      }
      for (std::size_t i = 0; i < grad_out.size(); ++i) result.grad_in[cache.argmax[i]] += grad_out[i];
      break;
    }
    case LayerKind::flatten:
      if (grad_out.size() != shape_size(cache.input_shape)) {
        throw ShapeError("flatten grad_out", cache.input_shape, grad_out.shape());
      }
      result.grad_in = grad_out.reshaped(cache.input_shape);
      break;
    case LayerKind::dropout:
      if (grad_out.shape() != cache.input_shape) throw ShapeError("dropout grad_out", cache.input_shape, grad_out.shape());
      result.grad_in = grad_out;
      if (!cache.identity) {
        for (std::size_t i = 0; i < grad_out.size(); ++i) result.grad_in[i] *= cache.saved[i];
      }
      break;
    case LayerKind::softmax: {
      const Tensor<T>& p = cache.saved;
      if (grad_out.shape() != p.shape()) throw ShapeError("softmax grad_out", p.shape(), grad_out.shape());
      const std::size_t n = p.dim(0), k = p.dim(1);
      result.grad_in = Tensor<T>(p.shape());
      for (std::size_t s = 0; s < n; ++s) {
        T dot = 0;
        for (std::size_t j = 0; j < k; ++j) dot += grad_out[s * k + j] * p[s * k + j];
        for (std::size_t j = 0; j < k; ++j) result.grad_in[s * k + j] = p[s * k + j] * (grad_out[s * k + j] - dot);
      }
      break;
    }
    default:
      break;
  }
  return result;
}

#define GROUPEMO_INSTANTIATE(T)                                                                            \
  template LayerOutput<T> layer_forward(const LayerSpec&, const LayerParams<T>&, const Tensor<T>&, bool, Rng*); \
  template Tensor<T> layer_apply(const LayerSpec&, const LayerParams<T>&, const Tensor<T>&);              \
  template LayerGradient<T> layer_backward(const LayerSpec&, const LayerParams<T>&, const ForwardCache<T>&,  \
                                           const Tensor<T>&);

GROUPEMO_INSTANTIATE(float)
GROUPEMO_INSTANTIATE(double)

#undef GROUPEMO_INSTANTIATE

}  // namespace groupemo::nn
