#ifndef GROUPEMO_NN_LAYER_HPP
#define GROUPEMO_NN_LAYER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "groupemo/rng.hpp"
#include "groupemo/tensor.hpp"

namespace groupemo::nn {

enum class LayerKind { conv, relu, maxpool, flatten, dense, dropout, softmax };

std::string_view kind_name(LayerKind kind);
std::optional<LayerKind> parse_kind(std::string_view name);

/// One layer of a feed-forward stack. Which fields matter depends on `kind`:
/// conv uses kernel/stride/padding/units (output channels), maxpool uses
/// kernel/stride, dense uses units (output neurons), dropout uses rate.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t units = 0;
  double rate = 0.0;

  static LayerSpec conv(std::size_t out_channels, std::size_t stride = 1, std::size_t padding = 1,
                        std::size_t kernel = 3);
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec maxpool(std::size_t kernel = 2, std::size_t stride = 2);
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec dense(std::size_t out_neurons);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  bool has_params() const { return kind == LayerKind::conv || kind == LayerKind::dense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// floor((in + 2*pad - kernel) / stride) + 1; throws when the window does not fit.
std::size_t window_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                              std::size_t pad);

/// Per-sample output extents (no batch axis). Throws ShapeError.
Shape output_shape(const LayerSpec& layer, const Shape& sample_in);

/// Extents of the trainable tensors. Conv weights are kh x kw x in_ch x out_ch,
/// dense weights are in x out. Empty shapes for parameterless layers.
Shape weight_shape(const LayerSpec& layer, const Shape& sample_in);
Shape bias_shape(const LayerSpec& layer);

template <typename T>
struct LayerParams {
  Tensor<T> weight;
  Tensor<T> bias;

  bool empty() const { return weight.empty() && bias.empty(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// What a forward pass must remember for the matching backward pass.
template <typename T>
struct ForwardCache {
  LayerKind kind = LayerKind::relu;
  Shape input_shape;
  Tensor<T> saved;                     // input (conv, dense, relu), output (softmax), mask (dropout)
  std::vector<std::uint32_t> argmax;   // maxpool winners, flat input offsets
  bool identity = false;               // dropout outside training
};

template <typename T>
struct LayerOutput {
  Tensor<T> output;
  ForwardCache<T> cache;
};

template <typename T>
struct LayerGradient {
  Tensor<T> grad_in;
  LayerParams<T> grad_params;
};

/// Forward pass over a batch (leading axis = samples). Dropout draws its mask
/// from `rng` and needs one whenever `training` is set.
template <typename T>
LayerOutput<T> layer_forward(const LayerSpec& layer, const LayerParams<T>& params,
                             const Tensor<T>& input, bool training, Rng* rng);

/// Inference-only forward pass; keeps no cache.
template <typename T>
Tensor<T> layer_apply(const LayerSpec& layer, const LayerParams<T>& params, const Tensor<T>& input);

template <typename T>
LayerGradient<T> layer_backward(const LayerSpec& layer, const LayerParams<T>& params,
                                const ForwardCache<T>& cache, const Tensor<T>& grad_out);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_LAYER_HPP
