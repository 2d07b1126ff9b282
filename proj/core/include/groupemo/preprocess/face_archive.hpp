#ifndef GROUPEMO_PREPROCESS_FACE_ARCHIVE_HPP
#define GROUPEMO_PREPROCESS_FACE_ARCHIVE_HPP

#include <filesystem>

#include "groupemo/preprocess/faces.hpp"

namespace groupemo::preprocess {

// On-disk isolated-faces set, one directory:
//   faces.bin         "GMF1", u32 count, u32 height, u32 width, u32 channels,
//                     then per face: u32 label, float32 values (little-endian)
//   provenance.jsonl  {"face", "record", "box", "image", "label"} per face
//   summary.json      face and per-class counts, skipped records, rejected boxes

struct FaceArchive {
  nn::LabeledImages<float> faces;
  std::vector<FaceOrigin> provenance;
};

void write_face_archive(const IsolatedFaces& faces, const Manifest& manifest, const std::filesystem::path& dir);
FaceArchive read_face_archive(const std::filesystem::path& dir);

}  // namespace groupemo::preprocess

#endif  // GROUPEMO_PREPROCESS_FACE_ARCHIVE_HPP
