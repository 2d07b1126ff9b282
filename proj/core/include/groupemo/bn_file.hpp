#ifndef GROUPEMO_BN_FILE_HPP
#define GROUPEMO_BN_FILE_HPP

#include <filesystem>
#include <string>

#include "groupemo/top_down.hpp"

namespace groupemo::top_down {

// Parameter file of a fitted network, UTF-8 JSON:
//   {"version": 1,
//    "classes": ["positive", "neutral", "negative"],
//    "prior": [p0, p1, p2],
//    "alpha": a,
//    "cpt": {"descriptor": [P(true|positive), P(true|neutral), P(true|negative)], ...},
//    "cnn_cpt": [[...], [...], [...]]}          optional, row k = predicted class
// Numbers are written in shortest round-trip form, so load(save(m)) == m.

inline constexpr int kBnFileVersion = 1;

std::string bn_to_json(const ScenePosteriorModel& model);
/// FormatError on malformed JSON or missing fields, VersionError on an
/// unknown version, InputError when the parameters fail validation.
ScenePosteriorModel bn_from_json(const std::string& text);

void save_bn(const ScenePosteriorModel& model, const std::filesystem::path& path);
ScenePosteriorModel load_bn(const std::filesystem::path& path);

}  // namespace groupemo::top_down

#endif  // GROUPEMO_BN_FILE_HPP
