#include "groupemo/nn/adam.hpp"

#include <cmath>

namespace groupemo::nn {

template <typename T>
AdamState<T> AdamState<T>::for_params(const ParamStore<T>& params, double alpha) {
  AdamState state;
  state.alpha = alpha;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

namespace {

template <typename T>
void update_tensor(const AdamState<T>& s, double c1, double c2, Tensor<T>& theta, Tensor<T>& m, Tensor<T>& v,
                   const Tensor<T>& g) {
  if (g.shape() != theta.shape()) throw ShapeError("gradient does not match parameter", theta.shape(), g.shape());
  const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const T gi = g[i];
    m[i] = b1 * m[i] + (T(1) - b1) * gi;
    v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
    // At t = 1 the moments are (1 - b) g and (1 - b) g^2, so the corrected
    // values are g and g^2; dividing would only add rounding.
    const double m_hat = s.t == 1 ? static_cast<double>(gi) : static_cast<double>(m[i]) / c1;
    const double v_hat = s.t == 1 ? static_cast<double>(gi) * static_cast<double>(gi) : static_cast<double>(v[i]) / c2;
    theta[i] = static_cast<T>(static_cast<double>(theta[i]) - s.alpha * m_hat / (std::sqrt(v_hat) + s.epsilon));
  }
}

}  // namespace

template <typename T>
void adam_step(AdamState<T>& state, ParamStore<T>& params, const ParamStore<T>& grads) {
  if (grads.layers.size() != params.layers.size()) {
    throw ShapeError("gradient store has the wrong number of layers", {params.layers.size()}, {grads.layers.size()});
  }
  if (state.m.layers.size() != params.layers.size()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    if (p.empty()) continue;
    update_tensor(state, c1, c2, p.weight, state.m.layers[i].weight, state.v.layers[i].weight, grads.layers[i].weight);
    update_tensor(state, c1, c2, p.bias, state.m.layers[i].bias, state.v.layers[i].bias, grads.layers[i].bias);
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(AdamState<float>&, ParamStore<float>&, const ParamStore<float>&);
template void adam_step(AdamState<double>&, ParamStore<double>&, const ParamStore<double>&);

}  // namespace groupemo::nn
