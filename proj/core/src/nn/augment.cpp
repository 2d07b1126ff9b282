#include "groupemo/nn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace groupemo::nn {

void AugmentConfig::validate() const {
  if (!(rotation_deg_max >= 0.0 && rotation_deg_max <= 180.0)) {
    throw InputError("rotation_deg_max must lie in [0, 180]");
  }
  if (!(zoom_fraction >= 0.0 && zoom_fraction < 1.0)) throw InputError("zoom_fraction must lie in [0, 1)");
}

AugmentDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng) {
  AugmentDraw d;
  if (!cfg.enabled) return d;
  // Always consume the same number of draws so streams stay aligned across configs.
  const double a = rng.uniform(), z = rng.uniform(), f = rng.uniform();
  d.angle_deg = cfg.rotation_deg_max * (2.0 * a - 1.0);
  d.zoom = 1.0 + cfg.zoom_fraction * (2.0 * z - 1.0);
  d.flip = cfg.horizontal_flip && f < 0.5;
  return d;
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& image) {
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor<T> out(image.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) out.at(y, w - 1 - x, ch) = image.at(y, x, ch);
  return out;
}

template <typename T>
Tensor<T> apply_augmentation(const Tensor<T>& image, const AugmentDraw& draw) {
  if (image.rank() != 3) throw ShapeError("augment expects height x width x channels", {0, 0, 0}, image.shape());
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor<T> out(image.shape());
  const double theta = draw.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = static_cast<double>(w) / 2.0, cy = static_cast<double>(h) / 2.0;
  const bool trivial = draw.angle_deg == 0.0 && draw.zoom == 1.0;

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (trivial) {
        for (std::size_t ch = 0; ch < c; ++ch) out.at(y, x, ch) = image.at(y, x, ch);
        continue;
      }
      // Inverse map: output pixel centre -> source position.
      const double dx = (static_cast<double>(x) + 0.5 - cx) / draw.zoom;
      const double dy = (static_cast<double>(y) + 0.5 - cy) / draw.zoom;
      const double sx = cs * dx + sn * dy + cx - 0.5;
      const double sy = -sn * dx + cs * dy + cy - 0.5;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int j = 0; j < 2; ++j) {
          const long yy = y0 + j;
          if (yy < 0 || yy >= static_cast<long>(h)) continue;
          const double wy = j ? ay : 1.0 - ay;
          for (int i = 0; i < 2; ++i) {
            const long xx = x0 + i;
            if (xx < 0 || xx >= static_cast<long>(w)) continue;
            const double wx = i ? ax : 1.0 - ax;
            acc += wy * wx * static_cast<double>(image.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), ch));
          }
        }
        // Weights sum to 1 only up to rounding; inputs live in [0, 1].
        out.at(y, x, ch) = static_cast<T>(std::min(acc, 1.0));
      }
    }
  }
  return draw.flip ? flip_horizontal(out) : out;
}

template Tensor<float> apply_augmentation(const Tensor<float>&, const AugmentDraw&);
template Tensor<double> apply_augmentation(const Tensor<double>&, const AugmentDraw&);
template Tensor<float> flip_horizontal(const Tensor<float>&);
template Tensor<double> flip_horizontal(const Tensor<double>&);

}  // namespace groupemo::nn
