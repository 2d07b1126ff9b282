#include "groupemo/preprocess/faces.hpp"

#include <algorithm>
#include <cmath>

namespace groupemo::preprocess {

namespace {

void require_rgb(const Image& image) {
  if (image.rank() != 3 || image.dim(2) != 3 || image.dim(0) == 0 || image.dim(1) == 0) {
    throw ShapeError("expected a non-empty RGB image", {0, 0, 3}, image.shape());
  }
}

Image crop(const Image& image, const FaceBox& b) {
  const auto x0 = static_cast<std::size_t>(b.x), y0 = static_cast<std::size_t>(b.y);
  const auto w = static_cast<std::size_t>(b.w), h = static_cast<std::size_t>(b.h);
  Image out({h, w, 3});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y0 + y, x0 + x, c);
  return out;
}

// Half-pixel-centre source coordinate, clamped to the valid range.
double source_coord(std::size_t dst, std::size_t src_len, std::size_t dst_len) {
  const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_len) / static_cast<double>(dst_len) - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(src_len - 1));
}

}  // namespace

std::optional<FaceBox> clamp_box(const FaceBox& box, std::size_t width, std::size_t height) {
  const long x0 = std::max(box.x, 0L), y0 = std::max(box.y, 0L);
  const long x1 = std::min(box.x + box.w, static_cast<long>(width));
  const long y1 = std::min(box.y + box.h, static_cast<long>(height));
  if (box.w < 1 || box.h < 1 || x1 <= x0 || y1 <= y0) return std::nullopt;
  return FaceBox{x0, y0, x1 - x0, y1 - y0};
}

std::vector<Image> crop_faces(const Image& image, std::span<const FaceBox> boxes) {
  require_rgb(image);
  std::vector<Image> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto clamped = clamp_box(boxes[i], image.dim(1), image.dim(0));
    if (!clamped) {
      const auto& b = boxes[i];
      throw InvalidBoxError(i, "face box " + std::to_string(i) + " (" + std::to_string(b.x) + "," + std::to_string(b.y) +
                                   "," + std::to_string(b.w) + "," + std::to_string(b.h) +
                                   ") has no area inside the image");
    }
    out.push_back(crop(image, *clamped));
  }
  return out;
}

Image scale_to_64(const Image& src) {
  require_rgb(src);
  const std::size_t h = src.dim(0), w = src.dim(1);
  std::size_t nh = kFaceSize, nw = kFaceSize;
  if (h >= w) {
    nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) * kFaceSize / h)));
  } else {
    nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(h) * kFaceSize / w)));
  }
  const std::size_t oy = (kFaceSize - nh) / 2, ox = (kFaceSize - nw) / 2;

  Image out({kFaceSize, kFaceSize, 3});
  for (std::size_t y = 0; y < nh; ++y) {
    const double sy = source_coord(y, h, nh);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ay = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < nw; ++x) {
      const double sx = source_coord(x, w, nw);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double ax = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        // Lerp form keeps constant regions exactly constant.
        const double p00 = src.at(y0, x0, c), p01 = src.at(y0, x1, c);
        const double p10 = src.at(y1, x0, c), p11 = src.at(y1, x1, c);
        const double top = p00 + ax * (p01 - p00);
        const double bottom = p10 + ax * (p11 - p10);
        out.at(oy + y, ox + x, c) = static_cast<float>(top + ay * (bottom - top));
      }
    }
  }
  return out;
}

Tensor<float> normalize(const Image& image) {
  Tensor<float> out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] / 255.0f;
  return out;
}

Tensor<float> prepare_face(const Image& image, const FaceBox& box) {
  const std::array<FaceBox, 1> one{box};
  return normalize(scale_to_64(crop_faces(image, one).front()));
}

RecordFaces extract_faces(const Image& image, const ImageRecord& record, std::size_t record_index) {
  require_rgb(image);
  RecordFaces out;
  for (std::size_t b = 0; b < record.faces.size(); ++b) {
    const auto clamped = clamp_box(record.faces[b], image.dim(1), image.dim(0));
    if (!clamped) {
      out.rejected.push_back({record_index, b, "box has no area inside the image"});
      continue;
    }
    out.faces.push_back(prepare_face(image, *clamped));
    out.box_index.push_back(b);
  }
  return out;
}

std::array<std::size_t, 3> IsolatedFaces::class_counts() const {
  std::array<std::size_t, 3> counts{};
  for (int label : faces.labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

IsolatedFaces build_isolated_dataset(const Manifest& manifest, const ImageLoader& loader) {
  for (std::size_t r = 0; r < manifest.records.size(); ++r) {
    if (!manifest.records[r].label) {
      throw InputError("record " + std::to_string(r) + " (" + manifest.records[r].image + ") has no label");
    }
  }
  IsolatedFaces out;
  for (std::size_t r = 0; r < manifest.records.size(); ++r) {
    const ImageRecord& rec = manifest.records[r];
    if (rec.faces.empty()) {
      out.skipped.push_back({r, "no face boxes"});
      continue;
    }
    Image image;
    try {
      image = loader(manifest.resolve(rec));
    } catch (const InputError& e) {
      out.skipped.push_back({r, e.what()});
      continue;
    }
    RecordFaces faces = extract_faces(image, rec, r);
    for (std::size_t i = 0; i < faces.faces.size(); ++i) {
      out.faces.push_back(std::move(faces.faces[i]), *rec.label);
      out.provenance.push_back({r, faces.box_index[i]});
    }
    out.rejected.insert(out.rejected.end(), faces.rejected.begin(), faces.rejected.end());
    if (faces.faces.empty()) out.skipped.push_back({r, "every face box was rejected"});
  }
  if (out.faces.empty()) throw InputError("manifest produced no face crops");
  return out;
}

}  // namespace groupemo::preprocess
