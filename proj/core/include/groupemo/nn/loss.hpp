#ifndef GROUPEMO_NN_LOSS_HPP
#define GROUPEMO_NN_LOSS_HPP

#include <span>

#include "groupemo/tensor.hpp"

namespace groupemo::nn {

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad_logits;  // gradient of the mean loss w.r.t. the pre-softmax logits
};

/// Categorical cross-entropy on softmax outputs (batch x classes).
/// loss = mean(-log max(p[label], 1e-12)); grad_logits = (p - onehot) / batch.
/// Rows that do not sum to 1 within 1e-6 are rejected.
template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& probs, std::span<const int> labels);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_LOSS_HPP
