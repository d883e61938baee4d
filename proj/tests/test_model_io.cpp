#include <doctest.h>

#include <cstring>
#include <random>

#include "oracles.hpp"
#include "vicap/errors.hpp"
#include "vicap/model_io.hpp"

using namespace vicap;

namespace {

WeightStore random_store(std::mt19937& rng) {
  WeightStore s(rng() % 2 ? kFerModelKind : kCaptionModelKind);
  const int n = static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) {
    Shape shape;
    const std::size_t rank = rng() % 4;
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(rng() % 5);
    s.add("t" + std::to_string(rng() % 1000) + "_" + std::to_string(i), oracle::random_tensor(rng, shape, -1e6f, 1e6f));
  }
  s.set_metadata("note", "x" + std::to_string(rng()));
  return s;
}

std::vector<std::uint8_t> le16(std::uint16_t v) { return {std::uint8_t(v), std::uint8_t(v >> 8)}; }
std::vector<std::uint8_t> le32(std::uint32_t v) {
  return {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
}

FormatErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError");
  return FormatErrorKind::io;
}

}  // namespace

TEST_CASE("CAPW layout matches the documented byte format") {
  WeightStore s(kFerModelKind);
  s.add("b", Tensor::vector({1.5f}));
  s.add("a", Tensor({1, 2}, {2.0f, -1.0f}));
  const auto bytes = serialize_weights(s);
  std::vector<std::uint8_t> want{'C', 'A', 'P', 'W'};
  auto put = [&](const std::vector<std::uint8_t>& v) { want.insert(want.end(), v.begin(), v.end()); };
  auto put_f = [&](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put(le32(u));
  };
  put(le16(1));
  put(le32(2));
  put(le16(1)); want.push_back('a'); want.push_back(2); put(le32(1)); put(le32(2)); put_f(2.0f); put_f(-1.0f);
  put(le16(1)); want.push_back('b'); want.push_back(1); put(le32(1)); put_f(1.5f);
  put(le32(1));
  put(le16(10)); for (char c : std::string("model_kind")) want.push_back(std::uint8_t(c));
  put(le32(7)); for (char c : std::string("fer_cnn")) want.push_back(std::uint8_t(c));
  CHECK(bytes == want);
}

TEST_CASE("CAPW round-trips random stores byte for byte") {
  std::mt19937 rng(17);
  for (int i = 0; i < 50; ++i) {
    const WeightStore s = random_store(rng);
    const auto bytes = serialize_weights(s);
    const WeightStore back = parse_weights(bytes);
    CHECK(back == s);
    CHECK(serialize_weights(back) == bytes);
  }
}

TEST_CASE("CAPW corruption yields the designated errors") {
  WeightStore s(kCaptionModelKind);
  s.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  auto bytes = serialize_weights(s);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { parse_weights(bad); }) == FormatErrorKind::bad_magic);

  bad = bytes;
  bad[4] = 2;
  CHECK(kind_of([&] { parse_weights(bad); }) == FormatErrorKind::unsupported_version);

  for (std::size_t cut : {std::size_t(3), std::size_t(9), std::size_t(20), bytes.size() - 1}) {
    std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK(kind_of([&] { parse_weights(prefix); }) == FormatErrorKind::truncated);
  }

  bad = bytes;
  bad.push_back(0);
  CHECK(kind_of([&] { parse_weights(bad); }) == FormatErrorKind::parse);

  WeightStore no_kind;
  no_kind.add("w", Tensor::vector({1}));
  CHECK(kind_of([&] { parse_weights(serialize_weights(no_kind)); }) == FormatErrorKind::missing_metadata);
}

TEST_CASE("CAPW duplicate names are rejected") {
  WeightStore s(kFerModelKind);
  s.add("w", Tensor::vector({1}));
  CHECK(kind_of([&] { s.add("w", Tensor::vector({2})); }) == FormatErrorKind::duplicate_name);

  WeightStore t(kFerModelKind);
  t.add("a", Tensor::vector({1}));
  t.add("b", Tensor::vector({1}));
  auto bytes = serialize_weights(t);
  // rename the second entry "b" -> "a"
  for (std::size_t i = 10; i < bytes.size(); ++i) {
    if (bytes[i] == 'b' && bytes[i - 1] == 0 && bytes[i - 2] == 1) {
      bytes[i] = 'a';
      break;
    }
  }
  CHECK(kind_of([&] { parse_weights(bytes); }) == FormatErrorKind::duplicate_name);
}

TEST_CASE("WeightStore lookups name the tensor") {
  WeightStore s(kFerModelKind);
  s.add("conv1.kernel", Tensor({2, 1, 3, 3}));
  try {
    s.get("conv1.bias");
    FAIL("expected WeightStoreError");
  } catch (const WeightStoreError& e) {
    CHECK(e.tensor() == "conv1.bias");
  }
  CHECK_THROWS_AS(s.get("conv1.kernel", {2, 1, 5, 5}), WeightStoreError);
  CHECK_NOTHROW(s.get("conv1.kernel", {2, 1, 3, 3}));
}

TEST_CASE("CAPF round-trips random tables") {
  std::mt19937 rng(23);
  for (int i = 0; i < 50; ++i) {
    FeatureTable t;
    const int rows = static_cast<int>(rng() % 3);
    for (int r = 0; r < rows; ++r) t.add("img" + std::to_string(rng() % 100) + "_" + std::to_string(r), oracle::random_feature(rng));
    const auto bytes = serialize_features(t);
    const FeatureTable back = parse_features(bytes);
    CHECK(back == t);
    CHECK(serialize_features(back) == bytes);
  }
}

TEST_CASE("CAPF errors") {
  FeatureTable t;
  CHECK(kind_of([&] { t.add("short", Tensor({10})); }) == FormatErrorKind::wrong_length);
  std::mt19937 rng(1);
  t.add("a", oracle::random_feature(rng));
  CHECK_THROWS_AS(t.at("b"), LookupError);
  auto bytes = serialize_features(t);
  auto bad = bytes;
  bad[3] = 'W';
  CHECK(kind_of([&] { parse_features(bad); }) == FormatErrorKind::bad_magic);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 4);
  CHECK(kind_of([&] { parse_features(cut); }) == FormatErrorKind::truncated);

  // a row whose dim field says 4095
  bad = bytes;
  bad[4 + 2 + 4 + 2 + 1] = 0xFF;
  bad[4 + 2 + 4 + 2 + 1 + 1] = 0x0F;
  try {
    parse_features(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatErrorKind::wrong_length);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
}

TEST_CASE("shipped fixtures load") {
  const FeatureTable f = load_features(oracle::fixture("features.capf"));
  CHECK(f.size() == 20);
  CHECK(load_weights(oracle::data("models/caption_model.capw")).model_kind() == kCaptionModelKind);
  CHECK(load_weights(oracle::data("models/fer_model.capw")).model_kind() == kFerModelKind);
  CHECK(kind_of([] { load_weights("/nonexistent/file.capw"); }) == FormatErrorKind::io);
}

TEST_CASE("color tables") {
  const auto colors = parse_colors("red\t#FF0000\nteal blue\t#01889f\n");
  REQUIRE(colors.size() == 2);
  CHECK(colors[1].rgb == Rgb{0x01, 0x88, 0x9f});
  CHECK(kind_of([] { parse_colors("red #FF0000\n"); }) == FormatErrorKind::parse);
  CHECK(kind_of([] { parse_colors("red\t#FF00G0\n"); }) == FormatErrorKind::parse);
  CHECK(load_colors(oracle::data("xkcd_colors.tsv")).size() == 949);
  CHECK(load_colors(oracle::data("basic_colors.tsv")).size() == 12);
}

TEST_CASE("exported models carry the metadata and tensor names the runtime reads") {
  const WeightStore caption = load_weights(oracle::data("models/caption_model.capw"));
  CHECK(caption.metadata("model_kind") == std::string(kCaptionModelKind));
  CHECK(caption.metadata("vocab_size") == std::string("4028"));
  CHECK(caption.get("lstm.kernel").shape() == Shape{256, 1024});
  CHECK(caption.get("lstm.recurrent_kernel").shape() == Shape{256, 1024});
  CHECK(caption.get("image_dense.kernel").shape() == Shape{kFeatureDim, 256});
  CHECK(caption.get("merge_dense.kernel").shape() == Shape{512, 256});
  CHECK(caption.get("output_dense.kernel").shape() == Shape{256, 4028});

  const WeightStore fer = load_weights(oracle::data("models/fer_model.capw"));
  CHECK(fer.metadata("model_kind") == std::string("fer_cnn"));
  CHECK(fer.get("fc1.kernel").shape() == Shape{6400, 128});
}

TEST_CASE("fixture feature vectors are nonzero and distinct") {
  const FeatureTable f = load_features(oracle::fixture("features.capf"));
  std::vector<const Tensor*> rows;
  for (const auto& [id, v] : f.rows()) {
    double norm = 0;
    for (float x : v.values()) norm += double(x) * x;
    CHECK(norm > 0);
    rows.push_back(&v);
  }
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i]->values() != rows[0]->values());
}
