#ifndef GROUPEMO_NN_ADAM_HPP
#define GROUPEMO_NN_ADAM_HPP

#include <cstdint>

#include "groupemo/nn/model.hpp"

namespace groupemo::nn {

/// Adam optimiser state. m and v mirror the parameter store layout.
template <typename T>
struct AdamState {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  ParamStore<T> m;
  ParamStore<T> v;

  static AdamState for_params(const ParamStore<T>& params, double alpha = 0.001);
};

/// One update:
///   t <- t + 1
///   m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
///   m_hat = m / (1 - b1^t)        v_hat = v / (1 - b2^t)
///   theta <- theta - alpha m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adam_step(AdamState<T>& state, ParamStore<T>& params, const ParamStore<T>& grads);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_ADAM_HPP
