#include "groupemo/nn/model.hpp"

#include <cmath>

namespace groupemo::nn {

std::vector<Shape> ModelSpec::infer_shapes() const {
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape current = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      current = output_shape(layers[i], current);
    } catch (const ShapeError& e) {
      throw e.at_layer(i);
    }
    shapes.push_back(current);
  }
  return shapes;
}

void ModelSpec::validate() const {
  if (layers.empty()) throw InputError("model has no layers");
  const auto shapes = infer_shapes();
  if (layers.back().kind != LayerKind::softmax) throw InputError("model must end with a softmax layer");
  if (shapes.back() != Shape{num_classes}) {
    throw ShapeError("softmax head does not match the class count", {num_classes}, shapes.back(),
                     layers.size() - 1);
  }
}

ModelSpec reference_architecture(const ArchitectureOptions& options) {
  ModelSpec spec;
  auto& l = spec.layers;
  auto conv = [&](std::size_t ch) {
    l.push_back(LayerSpec::conv(ch));
    l.push_back(LayerSpec::relu());
  };
  conv(32);
  conv(32);
  l.push_back(LayerSpec::maxpool());
  conv(64);
  conv(64);
  l.push_back(LayerSpec::maxpool());
  conv(128);
  conv(128);
  conv(128);
  l.push_back(LayerSpec::maxpool());
  l.push_back(LayerSpec::flatten());
  l.push_back(LayerSpec::dense(options.fc1));
  l.push_back(LayerSpec::relu());
  l.push_back(LayerSpec::dropout(options.dropout));
  l.push_back(LayerSpec::dense(options.fc2));
  l.push_back(LayerSpec::relu());
  l.push_back(LayerSpec::dropout(options.dropout));
  l.push_back(LayerSpec::dense(spec.num_classes));
  l.push_back(LayerSpec::softmax());
  return spec;
}

ModelSpec compact_architecture(const ArchitectureOptions& options) {
  ModelSpec spec;
  auto& l = spec.layers;
  for (std::size_t ch : {8u, 16u, 16u}) {
    l.push_back(LayerSpec::conv(ch));
    l.push_back(LayerSpec::relu());
    l.push_back(LayerSpec::maxpool());
  }
  l.push_back(LayerSpec::flatten());
  l.push_back(LayerSpec::dense(options.fc1));
  l.push_back(LayerSpec::relu());
  l.push_back(LayerSpec::dropout(options.dropout));
  l.push_back(LayerSpec::dense(options.fc2));
  l.push_back(LayerSpec::relu());
  l.push_back(LayerSpec::dropout(options.dropout));
  l.push_back(LayerSpec::dense(spec.num_classes));
  l.push_back(LayerSpec::softmax());
  return spec;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : layers) n += p.weight.size() + p.bias.size();
  return n;
}

template <typename T>
ParamStore<T> init_params(const ModelSpec& spec, const Rng& rng) {
  spec.infer_shapes();
  ParamStore<T> store;
  store.layers.resize(spec.layers.size());
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.has_params()) {
      const Shape ws = weight_shape(layer, current);
      const std::size_t fan_in = shape_size(ws) / layer.units;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng stream = rng.fork(i);
      Tensor<T> w(ws);
      for (auto& v : w.values()) v = static_cast<T>(stream.uniform(-limit, limit));
      store.layers[i].weight = std::move(w);
      store.layers[i].bias = Tensor<T>(bias_shape(layer));
    }
    current = output_shape(layer, current);
  }
  return store;
}

template <typename T>
ParamStore<T> zeros_like(const ParamStore<T>& params) {
  ParamStore<T> out;
  out.layers.reserve(params.layers.size());
  for (const auto& p : params.layers) {
    out.layers.push_back({Tensor<T>::zeros_like(p.weight), Tensor<T>::zeros_like(p.bias)});
  }
  return out;
}

template <typename T>
void check_param_shapes(const ModelSpec& spec, const ParamStore<T>& params) {
  if (params.layers.size() != spec.layers.size()) {
    throw ShapeError("parameter store has the wrong number of layers", {spec.layers.size()},
                     {params.layers.size()});
  }
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const Shape ws = layer.has_params() ? weight_shape(layer, current) : Shape{};
    const Shape bs = bias_shape(layer);
    const auto& p = params.layers[i];
    const bool weight_ok = layer.has_params() ? p.weight.shape() == ws : p.weight.empty();
    const bool bias_ok = layer.has_params() ? p.bias.shape() == bs : p.bias.empty();
    if (!weight_ok) throw ShapeError("weight extents disagree with the layer", ws, p.weight.shape(), i);
    if (!bias_ok) throw ShapeError("bias extents disagree with the layer", bs, p.bias.shape(), i);
    current = output_shape(layer, current);
  }
}

template <typename T>
Network<T>::Network(ModelSpec spec, ParamStore<T> params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.infer_shapes();
  check_param_shapes(spec_, params_);
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& batch) const {
  Shape expected{batch.rank() ? batch.dim(0) : 0};
  expected.insert(expected.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  if (batch.shape() != expected) throw ShapeError("network input", expected, batch.shape(), 0);
}

template <typename T>
Tensor<T> Network<T>::predict(const Tensor<T>& batch) const {
  check_input(batch);
  Tensor<T> x = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    try {
      x = layer_apply(spec_.layers[i], params_.layers[i], x);
    } catch (const ShapeError& e) {
      throw e.at_layer(i);
    }
  }
  return x;
}

template <typename T>
Tensor<T> Network<T>::forward_train(const Tensor<T>& batch, Rng& rng, std::vector<ForwardCache<T>>& caches) const {
  check_input(batch);
  caches.clear();
  caches.reserve(spec_.layers.size());
  Tensor<T> x = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    try {
      auto out = layer_forward(spec_.layers[i], params_.layers[i], x, true, &rng);
      x = std::move(out.output);
      caches.push_back(std::move(out.cache));
    } catch (const ShapeError& e) {
      throw e.at_layer(i);
    }
  }
  return x;
}

template <typename T>
ParamStore<T> Network<T>::backward(const std::vector<ForwardCache<T>>& caches, Tensor<T> grad, std::size_t end) const {
  if (end > spec_.layers.size() || caches.size() < end) throw Error("backward: missing forward caches");
  ParamStore<T> grads;
  grads.layers.resize(spec_.layers.size());
  for (std::size_t i = end; i-- > 0;) {
    try {
      auto g = layer_backward(spec_.layers[i], params_.layers[i], caches[i], grad);
      grad = std::move(g.grad_in);
      grads.layers[i] = std::move(g.grad_params);
    } catch (const ShapeError& e) {
      throw e.at_layer(i);
    }
  }
  return grads;
}

template struct ParamStore<float>;
template struct ParamStore<double>;
template ParamStore<float> init_params(const ModelSpec&, const Rng&);
template ParamStore<double> init_params(const ModelSpec&, const Rng&);
template ParamStore<float> zeros_like(const ParamStore<float>&);
template ParamStore<double> zeros_like(const ParamStore<double>&);
template void check_param_shapes(const ModelSpec&, const ParamStore<float>&);
template void check_param_shapes(const ModelSpec&, const ParamStore<double>&);
template class Network<float>;
template class Network<double>;

}  // namespace groupemo::nn
