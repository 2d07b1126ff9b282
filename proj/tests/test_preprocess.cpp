#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "groupemo/preprocess/face_archive.hpp"
#include "groupemo/preprocess/faces.hpp"
#include "groupemo/preprocess/image_io.hpp"
#include "groupemo/preprocess/manifest.hpp"
#include "synthetic.hpp"

using namespace groupemo;
using namespace groupemo::preprocess;
namespace fs = std::filesystem;

namespace {

Image ramp_image(std::size_t h, std::size_t w) {
  Image img({h, w, 3});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>((y * 7 + x * 3 + c * 50) % 256);
  return img;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("groupemo_preprocess_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Manifest, ParsesRecords) {
  const auto m = parse_manifest(
      "{\"image\": \"a.png\", \"label\": \"Positive\", \"faces\": [[1,2,3,4]], \"descriptors\": [\" Party \", \"\"]}\n"
      "\n"
      "{\"image\": \"b.jpg\"}\n",
      "/data");
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].label, 0);
  EXPECT_EQ(m.records[0].faces, (std::vector<FaceBox>{{1, 2, 3, 4}}));
  EXPECT_EQ(m.records[0].descriptors, (std::vector<std::string>{"party"}));
  EXPECT_FALSE(m.records[1].label.has_value());
  EXPECT_TRUE(m.records[1].faces.empty());
  EXPECT_EQ(m.resolve(m.records[1]), fs::path("/data/b.jpg"));
}

TEST(Manifest, RejectsMalformedLinesWithLineNumber) {
  try {
    parse_manifest("{\"image\": \"a.png\"}\n{\"image\": \"b.png\", \"label\": \"happy\"}\n", ".");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_manifest("{\"label\": \"neutral\"}", "."), FormatError);
  EXPECT_THROW(parse_manifest("{\"image\": \"a\", \"faces\": [[1,2,3]]}", "."), FormatError);
  EXPECT_THROW(parse_manifest("not json", "."), FormatError);
}

TEST(Manifest, WriteReadRoundTrip) {
  Manifest m;
  m.records.push_back({"x.png", 2, {{0, 0, 5, 5}, {3, 4, 2, 1}}, {"rain", "funeral"}});
  m.records.push_back({"y.png", std::nullopt, {}, {}});
  const fs::path dir = scratch_dir("manifest");
  write_manifest(m, dir / "m.jsonl");
  const Manifest back = read_manifest(dir / "m.jsonl");
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.base_dir, dir);
}

TEST(Descriptors, AreTrimmedAndLowercased) {
  EXPECT_EQ(normalize_descriptor("  Birthday Party\t"), "birthday party");
  EXPECT_EQ(normalize_descriptor("   "), "");
}

TEST(CropFaces, FullFrameBoxReturnsTheImage) {
  const Image img = ramp_image(9, 7);
  const FaceBox box{0, 0, 7, 9};
  const auto crops = crop_faces(img, std::span(&box, 1));
  ASSERT_EQ(crops.size(), 1u);
  EXPECT_EQ(crops[0], img);
}

TEST(CropFaces, EmptyBoxListGivesNoCrops) { EXPECT_TRUE(crop_faces(ramp_image(4, 4), {}).empty()); }

TEST(CropFaces, SubRectangleMatchesDirectIndexing) {
  const Image img = ramp_image(10, 10);
  const FaceBox box{2, 3, 4, 5};
  const auto crops = crop_faces(img, std::span(&box, 1));
  ASSERT_EQ(crops[0].shape(), (Shape{5, 4, 3}));
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(crops[0].at(y, x, c), img.at(3 + y, 2 + x, c));
}

TEST(CropFaces, BoxesAreClampedToTheFrame) {
  const Image img = ramp_image(10, 10);
  const FaceBox box{-3, 8, 5, 6};
  const auto crops = crop_faces(img, std::span(&box, 1));
  ASSERT_EQ(crops[0].shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(crops[0].at(0, 0, 1), img.at(8, 0, 1));
  EXPECT_EQ(clamp_box({-3, 8, 5, 6}, 10, 10), (FaceBox{0, 8, 2, 2}));
}

TEST(CropFaces, OutsideBoxIsRejectedWithItsIndex) {
  const Image img = ramp_image(10, 10);
  const std::vector<FaceBox> boxes{{0, 0, 2, 2}, {1, 1, 2, 2}, {20, 20, 3, 3}};
  try {
    crop_faces(img, boxes);
    FAIL() << "expected InvalidBoxError";
  } catch (const InvalidBoxError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  EXPECT_FALSE(clamp_box({10, 0, 3, 3}, 10, 10).has_value());
  EXPECT_FALSE(clamp_box({0, 0, 0, 3}, 10, 10).has_value());
}

TEST(Scale, SixtyFourSquareIsUnchanged) {
  const Image img = ramp_image(64, 64);
  EXPECT_EQ(scale_to_64(img), img);
}

TEST(Scale, ConstantImageStaysConstant) {
  const Image out = scale_to_64(Image({128, 128, 3}, 77.0f));
  ASSERT_EQ(out.shape(), (Shape{64, 64, 3}));
  for (float v : out.values()) EXPECT_FLOAT_EQ(v, 77.0f);
}

TEST(Scale, TallImageIsCentredWithSixteenColumnMargins) {
  const Image out = scale_to_64(Image({128, 64, 3}, 200.0f));
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const bool inside = x >= 16 && x < 48;
      for (std::size_t c = 0; c < 3; ++c) ASSERT_FLOAT_EQ(out.at(y, x, c), inside ? 200.0f : 0.0f) << y << "," << x;
    }
}

TEST(Scale, WideImageIsCentredVertically) {
  const Image out = scale_to_64(Image({32, 128, 3}, 9.0f));
  EXPECT_EQ(out.at(23, 30, 0), 0.0f);
  EXPECT_FLOAT_EQ(out.at(24, 30, 0), 9.0f);
  EXPECT_FLOAT_EQ(out.at(39, 30, 0), 9.0f);
  EXPECT_EQ(out.at(40, 30, 0), 0.0f);
}

TEST(Scale, PreservesValueBounds) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t h = 1 + rng.below(150), w = 1 + rng.below(150);
    Image img({h, w, 3});
    float lo = 255, hi = 0;
    for (auto& v : img.values()) {
      v = static_cast<float>(rng.below(256));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const Image out = scale_to_64(img);
    ASSERT_EQ(out.shape(), (Shape{64, 64, 3}));
    for (float v : out.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, hi);
    }
    const Tensor<float> n = normalize(out);
    for (float v : n.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Normalize, DividesBy255) {
  const Tensor<float> n = normalize(Image({1, 1, 3}, std::vector<float>{255, 0, 128}));
  EXPECT_EQ(n[0], 1.0f);
  EXPECT_EQ(n[1], 0.0f);
  EXPECT_NEAR(n[2], 0.50196, 1e-5);
}

TEST(PrepareFace, IsDeterministic) {
  const Image img = ramp_image(50, 40);
  EXPECT_EQ(prepare_face(img, {3, 4, 30, 20}), prepare_face(img, {3, 4, 30, 20}));
}

TEST(ImageIo, PngRoundTripIsExact) {
  const Image img = ramp_image(13, 17);
  const fs::path dir = scratch_dir("png");
  save_png(img, dir / "a.png");
  EXPECT_EQ(load_image(dir / "a.png"), img);
}

TEST(ImageIo, JpegDecodesToTheRightShape) {
  const Image img(Shape{16, 24, 3}, 120.0f);
  const fs::path dir = scratch_dir("jpeg");
  save_jpeg(img, dir / "a.jpg");
  const Image back = load_image(dir / "a.jpg");
  ASSERT_EQ(back.shape(), img.shape());
  for (float v : back.values()) EXPECT_NEAR(v, 120.0f, 2.0f);
}

TEST(ImageIo, UnknownFormatAndMissingFile) {
  const fs::path dir = scratch_dir("bad");
  std::ofstream(dir / "x.gif") << "GIF89a........";
  EXPECT_THROW(load_image(dir / "x.gif"), FormatError);
  EXPECT_THROW(load_image(dir / "missing.png"), InputError);
}

TEST(IsolatedDataset, FacesInheritTheImageLabel) {
  Manifest m;
  m.records.push_back({"a", 0, {{0, 0, 4, 4}, {2, 2, 4, 4}, {5, 5, 3, 3}}, {}});
  const auto out = build_isolated_dataset(m, [](const fs::path&) { return ramp_image(10, 10); });
  EXPECT_EQ(out.faces.labels, (std::vector<int>{0, 0, 0}));
  for (const auto& f : out.faces.images) EXPECT_EQ(f.shape(), (Shape{64, 64, 3}));
}

TEST(IsolatedDataset, HandCountedMixedManifest) {
  // 5 records, 12 boxes: one record has none, one box falls outside its image,
  // one image cannot be read.
  Manifest m;
  m.records.push_back({"p1", 0, {{0, 0, 5, 5}, {5, 5, 5, 5}, {1, 1, 3, 3}}, {}});
  m.records.push_back({"n1", 1, {{0, 0, 5, 5}, {40, 40, 2, 2}}, {}});
  m.records.push_back({"g1", 2, {{0, 0, 5, 5}, {2, 2, 5, 5}, {4, 4, 4, 4}, {6, 0, 4, 4}}, {}});
  m.records.push_back({"empty", 1, {}, {}});
  m.records.push_back({"broken", 0, {{0, 0, 3, 3}, {1, 1, 3, 3}, {2, 2, 3, 3}}, {}});
  const ImageLoader loader = [](const fs::path& p) -> Image {
    if (p.filename() == "broken") throw InputError("cannot decode broken");
    return ramp_image(10, 10);
  };
  const auto out = build_isolated_dataset(m, loader);
  EXPECT_EQ(out.faces.size(), 8u);
  EXPECT_EQ(out.class_counts(), (std::array<std::size_t, 3>{3, 1, 4}));
  ASSERT_EQ(out.rejected.size(), 1u);
  EXPECT_EQ(out.rejected[0].record, 1u);
  EXPECT_EQ(out.rejected[0].box, 1u);
  ASSERT_EQ(out.skipped.size(), 2u);
  EXPECT_EQ(out.skipped[0].record, 3u);
  EXPECT_EQ(out.skipped[1].record, 4u);

  // Provenance is total and per-record counts are boxes minus rejects.
  ASSERT_EQ(out.provenance.size(), out.faces.size());
  std::map<std::size_t, std::size_t> per_record;
  for (std::size_t i = 0; i < out.provenance.size(); ++i) {
    const auto& o = out.provenance[i];
    ++per_record[o.record];
    EXPECT_EQ(out.faces.labels[i], *m.records[o.record].label);
    EXPECT_LT(o.box, m.records[o.record].faces.size());
  }
  EXPECT_EQ(per_record[0], 3u);
  EXPECT_EQ(per_record[1], 1u);
  EXPECT_EQ(per_record[2], 4u);
}

TEST(IsolatedDataset, Errors) {
  Manifest unlabeled;
  unlabeled.records.push_back({"a", std::nullopt, {{0, 0, 2, 2}}, {}});
  const ImageLoader loader = [](const fs::path&) { return ramp_image(10, 10); };
  EXPECT_THROW(build_isolated_dataset(unlabeled, loader), InputError);
  Manifest faceless;
  faceless.records.push_back({"a", 1, {}, {}});
  EXPECT_THROW(build_isolated_dataset(faceless, loader), InputError);
}

TEST(FaceArchive, RoundTrip) {
  fixtures::CorpusOptions opts;
  opts.n_images = 12;
  const auto corpus = fixtures::make_group_corpus(opts, 5);
  const auto faces = build_isolated_dataset(corpus.manifest, corpus.loader());
  const fs::path dir = scratch_dir("archive");
  write_face_archive(faces, corpus.manifest, dir);
  const FaceArchive back = read_face_archive(dir);
  EXPECT_EQ(back.faces.labels, faces.faces.labels);
  EXPECT_EQ(back.faces.images, faces.faces.images);
  ASSERT_EQ(back.provenance.size(), faces.provenance.size());
  for (std::size_t i = 0; i < faces.provenance.size(); ++i) {
    EXPECT_EQ(back.provenance[i].record, faces.provenance[i].record);
    EXPECT_EQ(back.provenance[i].box, faces.provenance[i].box);
  }
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}
