#ifndef GROUPEMO_PREPROCESS_MANIFEST_HPP
#define GROUPEMO_PREPROCESS_MANIFEST_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace groupemo::preprocess {

/// Face rectangle in pixels; (x, y) is the top-left corner.
struct FaceBox {
  long x = 0;
  long y = 0;
  long w = 0;
  long h = 0;

  long area() const { return w * h; }
  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

struct ImageRecord {
  std::string image;             // as written in the manifest
  std::optional<int> label;      // class index, absent in prediction mode
  std::vector<FaceBox> faces;
  std::vector<std::string> descriptors;  // trimmed, lowercase, non-empty

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// JSON Lines dataset description, one record per line:
///   {"image": "a.png", "label": "positive", "faces": [[x,y,w,h], ...],
///    "descriptors": ["party", ...]}
/// Only "image" is required. Relative image paths resolve against base_dir.
struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ImageRecord> records;

  std::filesystem::path resolve(const ImageRecord& record) const;
};

Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

std::string format_record(const ImageRecord& record);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Trims ASCII whitespace and lowercases.
std::string normalize_descriptor(std::string_view raw);

}  // namespace groupemo::preprocess

#endif  // GROUPEMO_PREPROCESS_MANIFEST_HPP
