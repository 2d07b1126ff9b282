#ifndef GROUPEMO_PREPROCESS_FACES_HPP
#define GROUPEMO_PREPROCESS_FACES_HPP

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupemo/nn/trainer.hpp"
#include "groupemo/preprocess/image_io.hpp"
#include "groupemo/preprocess/manifest.hpp"

namespace groupemo::preprocess {

inline constexpr std::size_t kFaceSize = 64;

/// Intersection of `box` with the image frame, or nullopt when it is empty.
std::optional<FaceBox> clamp_box(const FaceBox& box, std::size_t width, std::size_t height);

/// Pixel-exact sub-rectangles, one per box (after clamping to the frame).
/// A box that does not overlap the image raises InvalidBoxError with its index.
std::vector<Image> crop_faces(const Image& image, std::span<const FaceBox> boxes);

/// Longest side scaled to 64 with bilinear interpolation; the result is
/// centred on a zero 64x64 canvas so the aspect ratio is kept.
Image scale_to_64(const Image& crop);

/// Divides every value by 255.
Tensor<float> normalize(const Image& image);

/// crop -> scale -> normalize for a single, already clamped box.
Tensor<float> prepare_face(const Image& image, const FaceBox& box);

struct FaceOrigin {
  std::size_t record = 0;
  std::size_t box = 0;
};

struct SkippedRecord {
  std::size_t record = 0;
  std::string reason;
};

struct RejectedBox {
  std::size_t record = 0;
  std::size_t box = 0;
  std::string reason;
};

/// Normalized 64x64 face tensors cut from one group image.
struct RecordFaces {
  std::vector<Tensor<float>> faces;
  std::vector<std::size_t> box_index;  // which manifest box each face came from
  std::vector<RejectedBox> rejected;
};

RecordFaces extract_faces(const Image& image, const ImageRecord& record, std::size_t record_index = 0);

/// Face crops with labels inherited from their group image.
struct IsolatedFaces {
  nn::LabeledImages<float> faces;
  std::vector<FaceOrigin> provenance;  // parallel to faces
  std::vector<SkippedRecord> skipped;  // unreadable images and records without faces
  std::vector<RejectedBox> rejected;

  std::array<std::size_t, 3> class_counts() const;
};

using ImageLoader = std::function<Image(const std::filesystem::path&)>;

/// Every record must carry a label. Unreadable images and face-less records
/// are skipped and reported; zero faces overall raises InputError.
IsolatedFaces build_isolated_dataset(const Manifest& manifest, const ImageLoader& loader = load_image);

}  // namespace groupemo::preprocess

#endif  // GROUPEMO_PREPROCESS_FACES_HPP
