#ifndef GROUPEMO_NN_AUGMENT_HPP
#define GROUPEMO_NN_AUGMENT_HPP

#include "groupemo/rng.hpp"
#include "groupemo/tensor.hpp"

namespace groupemo::nn {

struct AugmentConfig {
  bool enabled = true;
  double rotation_deg_max = 40.0;  // angle ~ U[-max, +max]
  double zoom_fraction = 0.1;      // scale ~ U[1 - f, 1 + f]
  bool horizontal_flip = true;     // flipped with probability 1/2

  void validate() const;
};

/// A concrete draw of the random transform.
struct AugmentDraw {
  double angle_deg = 0.0;
  double zoom = 1.0;
  bool flip = false;
};

AugmentDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng);

/// Rotates by `angle_deg` and zooms by `zoom` about the image centre with
/// bilinear sampling and zero fill, then mirrors columns when `flip` is set.
/// Input and output are height x width x channels.
template <typename T>
Tensor<T> apply_augmentation(const Tensor<T>& image, const AugmentDraw& draw);

template <typename T>
Tensor<T> augment(const Tensor<T>& image, const AugmentConfig& cfg, Rng& rng) {
  return apply_augmentation(image, draw_augmentation(cfg, rng));
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& image);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_AUGMENT_HPP
