#include "groupemo/preprocess/face_archive.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace groupemo::preprocess {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[] = "GMF1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& s, std::size_t& pos) {
  if (s.size() - pos < 4) throw FormatError("faces.bin is truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_face_archive(const IsolatedFaces& faces, const Manifest& manifest, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create archive directory " + dir.string());

  std::string blob(kMagic);
  const auto& images = faces.faces.images;
  put_u32(blob, static_cast<std::uint32_t>(images.size()));
  put_u32(blob, static_cast<std::uint32_t>(kFaceSize));
  put_u32(blob, static_cast<std::uint32_t>(kFaceSize));
  put_u32(blob, 3);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != Shape{kFaceSize, kFaceSize, 3}) {
      throw ShapeError("archive faces must be 64x64x3", {kFaceSize, kFaceSize, 3}, images[i].shape());
    }
    put_u32(blob, static_cast<std::uint32_t>(faces.faces.labels[i]));
    for (float v : images[i].values()) put_u32(blob, std::bit_cast<std::uint32_t>(v));
  }
  write_text(dir / "faces.bin", blob);

  std::string prov;
  for (std::size_t i = 0; i < faces.provenance.size(); ++i) {
    const auto& o = faces.provenance[i];
    json j;
    j["face"] = i;
    j["record"] = o.record;
    j["box"] = o.box;
    j["image"] = manifest.records.at(o.record).image;
    j["label"] = std::string(class_name(faces.faces.labels[i]));
    prov += j.dump() + "\n";
  }
  write_text(dir / "provenance.jsonl", prov);

  json summary;
  summary["faces"] = images.size();
  const auto counts = faces.class_counts();
  summary["class_counts"] = {{"positive", counts[0]}, {"neutral", counts[1]}, {"negative", counts[2]}};
  json skipped = json::array();
  for (const auto& s : faces.skipped) skipped.push_back({{"record", s.record}, {"reason", s.reason}});
  summary["skipped"] = skipped;
  json rejected = json::array();
  for (const auto& r : faces.rejected) rejected.push_back({{"record", r.record}, {"box", r.box}, {"reason", r.reason}});
  summary["rejected"] = rejected;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
}

FaceArchive read_face_archive(const fs::path& dir) {
  const fs::path bin = dir / "faces.bin";
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw InputError("cannot open face archive " + bin.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string blob = ss.str();
  if (blob.size() < 4 || blob.compare(0, 4, kMagic) != 0) throw FormatError("faces.bin: bad magic");

  std::size_t pos = 4;
  const std::uint32_t count = get_u32(blob, pos);
  Shape shape{get_u32(blob, pos), get_u32(blob, pos), get_u32(blob, pos)};
  const std::size_t n = shape_size(shape);
  if (blob.size() - pos != static_cast<std::size_t>(count) * (4 + 4 * n)) {
    throw FormatError("faces.bin size does not match its header");
  }
  FaceArchive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t label = get_u32(blob, pos);
    if (label >= kNumClasses) throw FormatError("faces.bin: label out of range");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(get_u32(blob, pos));
    archive.faces.push_back(Tensor<float>(shape, std::move(values)), static_cast<int>(label));
  }

  std::ifstream pin(dir / "provenance.jsonl");
  if (pin) {
    for (std::string line; std::getline(pin, line);) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw FormatError("provenance.jsonl: invalid JSON");
      archive.provenance.push_back({j.at("record").get<std::size_t>(), j.at("box").get<std::size_t>()});
    }
  }
  return archive;
}

}  // namespace groupemo::preprocess
