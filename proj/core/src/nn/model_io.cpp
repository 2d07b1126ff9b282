#include "groupemo/nn/model_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>
#include <vector>

namespace groupemo::nn {

namespace fs = std::filesystem;

namespace {

constexpr char kMagicPrefix[] = "GMW";
constexpr char kMagicVersion = '1';

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::size_t parse_size(const std::string& s, int line_no) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw FormatError("model.txt line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, int line_no) {
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw FormatError("model.txt line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

// "3x3" -> (3, 3)
std::pair<std::size_t, std::size_t> parse_kernel(const std::string& s, int line_no) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw FormatError("model.txt line " + std::to_string(line_no) + ": kernel must be HxW");
  return {parse_size(s.substr(0, x), line_no), parse_size(s.substr(x + 1), line_no)};
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class BlobReader {
 public:
  explicit BlobReader(const std::string& blob) : blob_(blob) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = blob_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (blob_.size() - pos_ < n) {
      throw ShapeError(std::string("weights blob truncated while reading ") + what, {n}, {blob_.size() - pos_});
    }
  }

  std::size_t remaining() const { return blob_.size() - pos_; }

 private:
  const std::string& blob_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

struct NamedShape {
  std::string name;
  Shape shape;
  const Tensor<float>* tensor = nullptr;
};

std::vector<NamedShape> expected_tensors(const ModelSpec& spec) {
  std::vector<NamedShape> out;
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    if (layer.has_params()) {
      out.push_back({"layer" + std::to_string(i) + ".weight", weight_shape(layer, current)});
      out.push_back({"layer" + std::to_string(i) + ".bias", bias_shape(layer)});
    }
    current = output_shape(layer, current);
  }
  return out;
}

}  // namespace

std::string format_descriptor(const ModelSpec& spec) {
  std::ostringstream out;
  out << "groupemo-model " << kDescriptorVersion << '\n';
  out << "input " << spec.input_shape.at(0) << ' ' << spec.input_shape.at(1) << ' ' << spec.input_shape.at(2) << '\n';
  out << "classes " << spec.num_classes << '\n';
  for (const auto& l : spec.layers) {
    out << kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::conv:
        out << " kernel=" << l.kernel_h << 'x' << l.kernel_w << " out=" << l.units << " stride=" << l.stride
            << " pad=" << l.padding;
        break;
      case LayerKind::maxpool:
        out << " kernel=" << l.kernel_h << 'x' << l.kernel_w << " stride=" << l.stride;
        break;
      case LayerKind::dense:
        out << " out=" << l.units;
        break;
      case LayerKind::dropout:
        out << " rate=" << format_double(l.rate);
        break;
      default:
        break;
    }
    out << '\n';
  }
  return out.str();
}

ModelSpec parse_descriptor(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  ModelSpec spec;
  spec.layers.clear();
  bool have_header = false, have_input = false, have_classes = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(t);

    if (!have_header) {
      if (head != "groupemo-model" || tokens.size() != 1) {
        throw FormatError("model.txt: missing 'groupemo-model <version>' header");
      }
      const std::size_t version = parse_size(tokens[0], line_no);
      if (version != static_cast<std::size_t>(kDescriptorVersion)) {
        throw VersionError("model.txt: unsupported descriptor version " + tokens[0]);
      }
      have_header = true;
      continue;
    }
    if (head == "input") {
      if (tokens.size() != 3) throw FormatError("model.txt line " + std::to_string(line_no) + ": input needs 3 extents");
      spec.input_shape = {parse_size(tokens[0], line_no), parse_size(tokens[1], line_no), parse_size(tokens[2], line_no)};
      have_input = true;
      continue;
    }
    if (head == "classes") {
      if (tokens.size() != 1) throw FormatError("model.txt line " + std::to_string(line_no) + ": classes needs a count");
      spec.num_classes = parse_size(tokens[0], line_no);
      have_classes = true;
      continue;
    }
    const auto kind = parse_kind(head);
    if (!kind) throw FormatError("model.txt line " + std::to_string(line_no) + ": unknown layer '" + head + "'");
    LayerSpec layer{*kind};
    for (const auto& tok : tokens) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError("model.txt line " + std::to_string(line_no) + ": expected key=value");
      const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (key == "kernel") {
        std::tie(layer.kernel_h, layer.kernel_w) = parse_kernel(value, line_no);
      } else if (key == "out") {
        layer.units = parse_size(value, line_no);
      } else if (key == "stride") {
        layer.stride = parse_size(value, line_no);
      } else if (key == "pad") {
        layer.padding = parse_size(value, line_no);
      } else if (key == "rate") {
        layer.rate = parse_double(value, line_no);
        if (!(layer.rate >= 0.0 && layer.rate < 1.0)) {
          throw FormatError("model.txt line " + std::to_string(line_no) + ": dropout rate outside [0, 1)");
        }
      } else {
        throw FormatError("model.txt line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    }
    spec.layers.push_back(layer);
  }
  if (!have_header) throw FormatError("model.txt: empty descriptor");
  if (!have_input || !have_classes) throw FormatError("model.txt: missing input or classes line");
  try {
    spec.validate();
  } catch (const ShapeError&) {
    throw;
  } catch (const InputError& e) {
    throw FormatError(std::string("model.txt: ") + e.what());
  }
  return spec;
}

std::string encode_weights(const ModelSpec& spec, const ParamStore<float>& params) {
  check_param_shapes(spec, params);
  auto tensors = expected_tensors(spec);
  std::size_t t = 0;
  for (const auto& p : params.layers) {
    if (p.empty()) continue;
    tensors[t++].tensor = &p.weight;
    tensors[t++].tensor = &p.bias;
  }
  std::string out(kMagicPrefix);
  out.push_back(kMagicVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    put_u32(out, static_cast<std::uint32_t>(nt.shape.size()));
    for (auto d : nt.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : nt.tensor->values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParamStore<float> decode_weights(const ModelSpec& spec, const std::string& blob) {
  if (blob.size() < 4 || blob.compare(0, 3, kMagicPrefix) != 0) throw FormatError("weights.bin: bad magic");
  if (blob[3] != kMagicVersion) throw VersionError(std::string("weights.bin: unsupported blob version GMW") + blob[3]);

  BlobReader reader(blob);
  reader.bytes(4, "magic");
  const auto expected = expected_tensors(spec);
  const std::uint32_t count = reader.u32("tensor count");
  if (count != expected.size()) {
    throw ShapeError("weights.bin tensor count disagrees with the descriptor", {expected.size()}, {count});
  }

  ParamStore<float> params;
  params.layers.resize(spec.layers.size());
  std::size_t e = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_params()) continue;
    for (Tensor<float>* slot : {&params.layers[i].weight, &params.layers[i].bias}) {
      const NamedShape& want = expected[e++];
      const std::uint32_t name_len = reader.u32("name length");
      const std::string name = reader.bytes(name_len, "tensor name");
      if (name != want.name) throw ShapeError("weights.bin has '" + name + "' where '" + want.name + "' belongs", {}, {});
      const std::uint32_t rank = reader.u32("rank");
      Shape shape;
      for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(reader.u32("extent"));
      if (shape != want.shape) throw ShapeError("weights.bin extents for " + name, want.shape, shape, i);
      const std::size_t n = shape_size(shape);
      reader.need(4 * n, "tensor values");
      std::vector<float> values(n);
      for (auto& v : values) v = std::bit_cast<float>(reader.u32("value"));
      *slot = Tensor<float>(shape, std::move(values));
    }
  }
  if (reader.remaining() != 0) {
    throw ShapeError("weights.bin has trailing bytes after the last tensor", {0}, {reader.remaining()});
  }
  return params;
}

void save_model(const ModelSpec& spec, const ParamStore<float>& params, const fs::path& dir) {
  spec.validate();
  const std::string blob = encode_weights(spec, params);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create model directory " + dir.string() + ": " + ec.message());
  write_file(dir / kDescriptorFile, format_descriptor(spec));
  write_file(dir / kWeightsFile, blob);
}

LoadedModel load_model(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("model directory not found: " + dir.string());
  LoadedModel m;
  m.spec = parse_descriptor(read_file(dir / kDescriptorFile));
  m.params = decode_weights(m.spec, read_file(dir / kWeightsFile));
  return m;
}

}  // namespace groupemo::nn
