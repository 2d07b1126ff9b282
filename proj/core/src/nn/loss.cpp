#include "groupemo/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace groupemo::nn {

template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2) throw ShapeError("cross_entropy expects batch x classes", {labels.size(), 0}, probs.shape());
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (labels.size() != n) throw ShapeError("one label per row required", {n}, {labels.size()});
  if (n == 0) throw InputError("cross_entropy on an empty batch");

  LossResult<T> result{0.0, probs};
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const T* row = probs.data() + s * k;
    double row_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) row_sum += row[j];
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw InputError("probability row " + std::to_string(s) + " sums to " + std::to_string(row_sum));
    }
    const int label = labels[s];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw InputError("label " + std::to_string(label) + " out of range");
    }
    total -= std::log(std::max(static_cast<double>(row[label]), kProbabilityFloor));
    T* g = result.grad_logits.data() + s * k;
    g[label] -= T(1);
    for (std::size_t j = 0; j < k; ++j) g[j] /= static_cast<T>(n);
  }
  result.loss = total / static_cast<double>(n);
  return result;
}

template LossResult<float> cross_entropy(const Tensor<float>&, std::span<const int>);
template LossResult<double> cross_entropy(const Tensor<double>&, std::span<const int>);

}  // namespace groupemo::nn
