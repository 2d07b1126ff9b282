#ifndef GROUPEMO_TESTS_GRADCHECK_HPP
#define GROUPEMO_TESTS_GRADCHECK_HPP

#include "groupemo/nn/layer.hpp"
#include "groupemo/rng.hpp"

namespace groupemo::fixtures {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of scalar derivatives compared
};

/// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

/// Random input and parameters for `layer`, inputs kept away from ReLU kinks
/// and max-pool ties. Compares layer_backward against central differences of
/// L = sum(output * probe) for the input and every parameter.
GradCheckResult check_layer_gradients(const nn::LayerSpec& layer, const Shape& batch_in, Rng& rng, double h = 1e-5);

/// Same check for softmax followed by cross-entropy, through the combined
/// logits gradient the trainer uses.
GradCheckResult check_softmax_cross_entropy(std::size_t batch, std::size_t classes, Rng& rng, double h = 1e-5);

}  // namespace groupemo::fixtures

#endif  // GROUPEMO_TESTS_GRADCHECK_HPP
