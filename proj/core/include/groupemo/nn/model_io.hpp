#ifndef GROUPEMO_NN_MODEL_IO_HPP
#define GROUPEMO_NN_MODEL_IO_HPP

#include <filesystem>
#include <string>

#include "groupemo/nn/model.hpp"

namespace groupemo::nn {

// A saved model is a directory holding two files:
//
//   model.txt    text descriptor, first line "groupemo-model 1", then the
//                input extents, the class count and one line per layer.
//   weights.bin  "GMW1", u32 tensor count, then per tensor: u32 name length,
//                name bytes, u32 rank, u32 extents, float32 values. All
//                integers and floats little-endian, values row-major.
//
// Load errors: FormatError (unparseable), VersionError (unknown descriptor
// version or blob magic), ShapeError (blob disagrees with the descriptor,
// including truncation).

inline constexpr int kDescriptorVersion = 1;
inline constexpr const char* kDescriptorFile = "model.txt";
inline constexpr const char* kWeightsFile = "weights.bin";

struct LoadedModel {
  ModelSpec spec;
  ParamStore<float> params;
};

std::string format_descriptor(const ModelSpec& spec);
ModelSpec parse_descriptor(const std::string& text);

std::string encode_weights(const ModelSpec& spec, const ParamStore<float>& params);
ParamStore<float> decode_weights(const ModelSpec& spec, const std::string& blob);

void save_model(const ModelSpec& spec, const ParamStore<float>& params, const std::filesystem::path& dir);
LoadedModel load_model(const std::filesystem::path& dir);

}  // namespace groupemo::nn

#endif  // GROUPEMO_NN_MODEL_IO_HPP
