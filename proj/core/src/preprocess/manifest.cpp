#include "groupemo/preprocess/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "groupemo/emotion.hpp"
#include "groupemo/error.hpp"
#include "json.hpp"

namespace groupemo::preprocess {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& why) {
  throw FormatError("manifest line " + std::to_string(line_no) + ": " + why);
}

ImageRecord parse_record(const json& j, std::size_t line_no) {
  if (!j.is_object()) bad_line(line_no, "record must be a JSON object");
  ImageRecord r;
  const auto img = j.find("image");
  if (img == j.end() || !img->is_string() || img->get<std::string>().empty()) {
    bad_line(line_no, "\"image\" must be a non-empty string");
  }
  r.image = img->get<std::string>();

  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) bad_line(line_no, "\"label\" must be a string");
    const auto cls = parse_class(normalize_descriptor(it->get<std::string>()));
    if (!cls) bad_line(line_no, "unknown label '" + it->get<std::string>() + "'");
    r.label = *cls;
  }

  if (auto it = j.find("faces"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) bad_line(line_no, "\"faces\" must be an array of [x,y,w,h]");
    for (const auto& box : *it) {
      if (!box.is_array() || box.size() != 4) bad_line(line_no, "each face must be [x,y,w,h]");
      for (const auto& v : box) {
        if (!v.is_number()) bad_line(line_no, "face coordinates must be numbers");
      }
      auto coord = [](const json& v) { return static_cast<long>(std::floor(v.get<double>())); };
      r.faces.push_back({coord(box[0]), coord(box[1]), coord(box[2]), coord(box[3])});
    }
  }

  if (auto it = j.find("descriptors"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) bad_line(line_no, "\"descriptors\" must be an array of strings");
    for (const auto& d : *it) {
      if (!d.is_string()) bad_line(line_no, "descriptors must be strings");
      std::string norm = normalize_descriptor(d.get<std::string>());
      if (!norm.empty()) r.descriptors.push_back(std::move(norm));
    }
  }
  return r;
}

}  // namespace

std::string normalize_descriptor(std::string_view raw) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = raw.size();
  while (b < e && is_space(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

fs::path Manifest::resolve(const ImageRecord& record) const {
  const fs::path p(record.image);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    const bool blank = std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
    if (!blank) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        bad_line(line_no, std::string("invalid JSON: ") + e.what());
      }
      m.records.push_back(parse_record(j, line_no));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_record(const ImageRecord& record) {
  json j;
  j["image"] = record.image;
  if (record.label) j["label"] = std::string(class_name(*record.label));
  json faces = json::array();
  for (const auto& f : record.faces) faces.push_back({f.x, f.y, f.w, f.h});
  j["faces"] = faces;
  j["descriptors"] = record.descriptors;
  return j.dump();
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write manifest " + path.string());
  for (const auto& r : manifest.records) out << format_record(r) << '\n';
}

}  // namespace groupemo::preprocess
