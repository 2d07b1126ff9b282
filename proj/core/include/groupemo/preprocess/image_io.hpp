#ifndef GROUPEMO_PREPROCESS_IMAGE_IO_HPP
#define GROUPEMO_PREPROCESS_IMAGE_IO_HPP

#include <filesystem>

#include "groupemo/tensor.hpp"

namespace groupemo::preprocess {

/// 8-bit RGB image as height x width x 3 floats in [0, 255].
using Image = Tensor<float>;

/// Decodes PNG or JPEG (detected from the leading bytes). Grey images are
/// expanded to RGB and alpha is dropped. Other formats raise FormatError,
/// unreadable files raise InputError.
Image load_image(const std::filesystem::path& path);

/// Values are rounded and clamped to [0, 255].
void save_png(const Image& image, const std::filesystem::path& path);
void save_jpeg(const Image& image, const std::filesystem::path& path, int quality = 95);

}  // namespace groupemo::preprocess

#endif  // GROUPEMO_PREPROCESS_IMAGE_IO_HPP
