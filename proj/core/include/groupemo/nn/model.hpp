#ifndef GROUPEMO_NN_MODEL_HPP
#define GROUPEMO_NN_MODEL_HPP

#include <cstddef>
#include <vector>

#include "groupemo/nn/layer.hpp"

namespace groupemo::nn {

/// Ordered layer stack plus the per-sample input extents it consumes.
struct ModelSpec {
  Shape input_shape{64, 64, 3};
  std::size_t num_classes = 3;
  std::vector<LayerSpec> layers;

  /// Output extents after every layer. Throws ShapeError naming the layer.
  std::vector<Shape> infer_shapes() const;
  /// infer_shapes() plus the classifier-head contract: the stack ends in a
  /// softmax over num_classes.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ArchitectureOptions {
  std::size_t fc1 = 1024;
  std::size_t fc2 = 512;
  double dropout = 0.5;
};

/// 7 conv (32/32/64/64/128/128/128, 3x3, stride 1, same padding) with three
/// 2x2 max-pools, then fc1 -> dropout -> fc2 -> dropout -> 3 -> softmax.
ModelSpec reference_architecture(const ArchitectureOptions& options = {});

/// Same topology family at desk scale: 3 conv (8/16/16), 3 pools, fc1 -> fc2 -> 3.
ModelSpec compact_architecture(const ArchitectureOptions& options = {64, 32, 0.5});

template <typename T>
struct ParamStore {
  std::vector<LayerParams<T>> layers;  // one entry per layer, empty for parameterless ones

  std::size_t parameter_count() const;
  friend bool operator==(const ParamStore&, const ParamStore&) = default;
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases. Layer i draws
/// from rng.fork(i).
template <typename T>
ParamStore<T> init_params(const ModelSpec& spec, const Rng& rng);

template <typename T>
ParamStore<T> zeros_like(const ParamStore<T>& params);

/// Throws ShapeError (with layer index) unless every tensor matches `spec`.
template <typename T>
void check_param_shapes(const ModelSpec& spec, const ParamStore<T>& params);

/// A validated spec bound to its parameters. `predict` is const and keeps no
/// state, so a loaded network can serve many threads at once.
template <typename T>
class Network {
 public:
  Network(ModelSpec spec, ParamStore<T> params);

  const ModelSpec& spec() const { return spec_; }
  const ParamStore<T>& params() const { return params_; }
  ParamStore<T>& mutable_params() { return params_; }

  /// Inference over a batch (samples x input_shape); returns samples x classes.
  Tensor<T> predict(const Tensor<T>& batch) const;

  /// Training-mode forward pass recording one cache per layer.
  Tensor<T> forward_train(const Tensor<T>& batch, Rng& rng, std::vector<ForwardCache<T>>& caches) const;

  /// Backpropagates `grad`, the gradient at the input of layer `end`, down
  /// through layers end-1 .. 0. Returns parameter gradients for every layer.
  ParamStore<T> backward(const std::vector<ForwardCache<T>>& caches, Tensor<T> grad, std::size_t end) const;

 private:
  void check_input(const Tensor<T>& batch) const;

  ModelSpec spec_;
  ParamStore<T> params_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_MODEL_HPP
