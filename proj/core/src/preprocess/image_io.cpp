#include "groupemo/preprocess/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace groupemo::preprocess {

namespace fs = std::filesystem;

namespace {

enum class Format { png, jpeg, unknown };

Format sniff(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  if (in.gcount() >= 8 && std::memcmp(head, "\x89PNG\r\n\x1a\n", 8) == 0) return Format::png;
  if (in.gcount() >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) return Format::jpeg;
  return Format::unknown;
}

std::vector<unsigned char> to_bytes(const Image& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError("expected an RGB image", {0, 0, 3}, image.shape());
  }
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(image[i]), 0L, 255L));
  }
  return bytes;
}

Image from_bytes(const unsigned char* data, std::size_t h, std::size_t w) {
  Image image({h, w, 3});
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<float>(data[i]);
  return image;
}

Image load_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return from_bytes(buf.data(), img.height, img.width);
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// No C++ objects with non-trivial destructors may be created between setjmp
// and a possible longjmp in the two functions below.
bool decode_jpeg(std::FILE* file, std::vector<unsigned char>& out, std::size_t& h, std::size_t& w, std::string& error) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    error = jerr.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = cinfo.output_height;
  w = cinfo.output_width;
  out.resize(h * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

bool encode_jpeg(std::FILE* file, const unsigned char* data, std::size_t h, std::size_t w, int quality,
                 std::string& error) {
  jpeg_compress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    error = jerr.message;
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<unsigned char*>(data) + static_cast<std::size_t>(cinfo.next_scanline) * w * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

Image load_jpeg(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw InputError("cannot open image " + path.string());
  std::vector<unsigned char> buf;
  std::size_t h = 0, w = 0;
  std::string error;
  if (!decode_jpeg(file.get(), buf, h, w, error)) {
    throw FormatError("cannot decode JPEG " + path.string() + ": " + error);
  }
  return from_bytes(buf.data(), h, w);
}

}  // namespace

Image load_image(const fs::path& path) {
  switch (sniff(path)) {
    case Format::png:
      return load_png(path);
    case Format::jpeg:
      return load_jpeg(path);
    case Format::unknown:
      break;
  }
  throw FormatError("unsupported image format (PNG and JPEG only): " + path.string());
}

void save_png(const Image& image, const fs::path& path) {
  const auto bytes = to_bytes(image);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.dim(1));
  img.height = static_cast<png_uint_32>(image.dim(0));
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw InputError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

void save_jpeg(const Image& image, const fs::path& path, int quality) {
  const auto bytes = to_bytes(image);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw InputError("cannot write " + path.string());
  std::string error;
  if (!encode_jpeg(file.get(), bytes.data(), image.dim(0), image.dim(1), quality, error)) {
    throw InputError("cannot encode JPEG " + path.string() + ": " + error);
  }
}

}  // namespace groupemo::preprocess
