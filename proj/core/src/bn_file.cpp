#include "groupemo/bn_file.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "groupemo/error.hpp"

namespace groupemo::top_down {

namespace {

using nlohmann::json;

ClassProbs read_triple(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != kNumClasses) throw FormatError(what + ": expected an array of 3 numbers");
  ClassProbs out{};
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (!j[i].is_number()) throw FormatError(what + ": expected an array of 3 numbers");
    out[i] = j[i].get<double>();
  }
  return out;
}

const json& field(const json& root, const char* key) {
  const auto it = root.find(key);
  if (it == root.end()) throw FormatError(std::string("BN file: missing \"") + key + "\"");
  return *it;
}

}  // namespace

std::string bn_to_json(const ScenePosteriorModel& model) {
  model.validate();
  json root;
  root["version"] = kBnFileVersion;
  root["classes"] = json::array();
  for (std::size_t y = 0; y < kNumClasses; ++y) root["classes"].push_back(class_name(static_cast<int>(y)));
  root["prior"] = model.prior;
  root["alpha"] = model.alpha;
  json cpt = json::object();
  for (std::size_t i = 0; i < model.vocabulary.size(); ++i) cpt[model.vocabulary[i]] = model.p_true[i];
  root["cpt"] = std::move(cpt);
  if (model.cnn_cpt) root["cnn_cpt"] = model.cnn_cpt->table;
  return root.dump(2) + "\n";
}

ScenePosteriorModel bn_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("BN file: ") + e.what());
  }
  if (!root.is_object()) throw FormatError("BN file: top level must be an object");

  const json& version = field(root, "version");
  if (!version.is_number_integer()) throw FormatError("BN file: \"version\" must be an integer");
  if (version.get<long long>() != kBnFileVersion) {
    throw VersionError("BN file: unsupported version " + version.dump());
  }

  const json& classes = field(root, "classes");
  if (!classes.is_array() || classes.size() != kNumClasses) throw FormatError("BN file: \"classes\" must list 3 names");
  for (std::size_t y = 0; y < kNumClasses; ++y) {
    if (!classes[y].is_string() || classes[y].get<std::string>() != class_name(static_cast<int>(y))) {
      throw FormatError("BN file: classes must be [\"positive\", \"neutral\", \"negative\"] in that order");
    }
  }

  ScenePosteriorModel model;
  model.prior = read_triple(field(root, "prior"), "BN file: \"prior\"");
  const json& alpha = field(root, "alpha");
  if (!alpha.is_number()) throw FormatError("BN file: \"alpha\" must be a number");
  model.alpha = alpha.get<double>();

  const json& cpt = field(root, "cpt");
  if (!cpt.is_object()) throw FormatError("BN file: \"cpt\" must be an object");
  for (const auto& [word, row] : cpt.items()) {
    model.vocabulary.push_back(word);
    model.p_true.push_back(read_triple(row, "BN file: cpt \"" + word + "\""));
  }

  if (const auto it = root.find("cnn_cpt"); it != root.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != kNumClasses) throw FormatError("BN file: \"cnn_cpt\" must be a 3x3 matrix");
    fusion::CnnEvidenceCpt c;
    for (std::size_t k = 0; k < kNumClasses; ++k) c.table[k] = read_triple((*it)[k], "BN file: \"cnn_cpt\" row");
    model.cnn_cpt = c;
  }
  model.validate();
  return model;
}

void save_bn(const ScenePosteriorModel& model, const std::filesystem::path& path) {
  const std::string text = bn_to_json(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

ScenePosteriorModel load_bn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open BN file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return bn_from_json(buf.str());
}

}  // namespace groupemo::top_down
