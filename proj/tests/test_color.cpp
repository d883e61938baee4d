#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vicap/color.hpp"
#include "vicap/errors.hpp"

using namespace vicap;

namespace {

const std::vector<NamedColor>& xkcd() {
  static const auto table = load_colors(oracle::data("xkcd_colors.tsv"));
  return table;
}
const std::vector<NamedColor>& basic() {
  static const auto table = load_colors(oracle::data("basic_colors.tsv"));
  return table;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] * (1 + 1e-12) + 1e-9) return false;
  }
  return true;
}

// Nearest entry by a plain scan; first one wins ties.
std::size_t nearest(Rgb c, const std::vector<NamedColor>& table) {
  std::size_t best = 0;
  long best_d = -1;
  for (std::size_t i = 0; i < table.size(); ++i) {
    long d = 0;
    for (int k = 0; k < 3; ++k) d += (long(c[k]) - table[i].rgb[k]) * (long(c[k]) - table[i].rgb[k]);
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("exclude_background") {
  const PixelSet white = exclude_background(RgbImage(20, 20, {255, 255, 255}));
  CHECK(white.fallback);
  CHECK(white.pixels.size() == 400);

  RgbImage img(40, 40, {255, 255, 255});
  img.fill_rect(10, 10, 20, 20, {255, 0, 0});
  const PixelSet red = exclude_background(img);
  CHECK_FALSE(red.fallback);
  CHECK(red.pixels.size() == 400);
  for (const Rgb& p : red.pixels) CHECK(p == Rgb{255, 0, 0});

  CHECK_THROWS_AS(exclude_background(RgbImage(3, 10)), ContractError);
}

TEST_CASE("kmeans on point masses") {
  std::vector<Rgb> px(100, Rgb{255, 0, 0});
  px.insert(px.end(), 50, Rgb{0, 0, 255});
  const KMeansResult r = kmeans(px, {2, 42, 30, 1e-4});
  REQUIRE(r.clusters.size() == 2);
  std::size_t red = r.clusters[0].centroid[0] > 128 ? 0 : 1;
  CHECK(r.clusters[red].count == 100);
  CHECK(r.clusters[1 - red].count == 50);
  CHECK(r.clusters[red].centroid == Centroid{255, 0, 0});
  CHECK(r.clusters[1 - red].centroid == Centroid{0, 0, 255});
  CHECK(r.objective.back() == 0.0);

  const KMeansResult same = kmeans(std::vector<Rgb>(30, Rgb{10, 20, 30}));
  REQUIRE(same.clusters.size() == 1);
  CHECK(same.clusters[0].count == 30);
  CHECK(same.clusters[0].centroid == Centroid{10, 20, 30});
  CHECK_THROWS_AS(kmeans({}), ContractError);
}

TEST_CASE("kmeans partitions, is deterministic and never raises the objective") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Rgb> px;
    const std::size_t n = 1 + rng() % 300;
    for (std::size_t i = 0; i < n; ++i) px.push_back({std::uint8_t(rng()), std::uint8_t(rng() % 64), std::uint8_t(rng())});
    KMeansOptions opt;
    opt.k = 1 + rng() % 5;
    opt.seed = static_cast<std::uint32_t>(rng());
    const KMeansResult a = kmeans(px, opt);
    std::size_t total = 0;
    for (const auto& c : a.clusters) total += c.count;
    CHECK(total == n);
    CHECK(non_increasing(a.objective));
    const KMeansResult b = kmeans(px, opt);
    CHECK(a.objective == b.objective);
    REQUIRE(a.clusters.size() == b.clusters.size());
    for (std::size_t i = 0; i < a.clusters.size(); ++i) CHECK(a.clusters[i].centroid == b.clusters[i].centroid);
  }
}

TEST_CASE("name_color") {
  CHECK(name_color({0, 0, 0}, xkcd(), basic()).xkcd_name == "black");
  CHECK(name_color({0, 0, 0}, xkcd(), basic()).vietnamese_basic == "đen");
  CHECK(name_color({255, 255, 255}, xkcd(), basic()).xkcd_name == "white");
  CHECK(name_color({255, 255, 255}, xkcd(), basic()).vietnamese_basic == "trắng");
  CHECK(name_color({150, 90, 40}, xkcd(), basic()).vietnamese_basic == "nâu");
  const NamedColor& entry = xkcd()[123];
  const ColorName exact = name_color(entry.rgb, xkcd(), basic());
  CHECK(exact.distance == 0.0);
  CHECK(exact.xkcd_rgb == entry.rgb);

  std::mt19937 rng(12);
  for (int i = 0; i < 200; ++i) {
    const Rgb c{std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
    const ColorName got = name_color(c, xkcd(), basic());
    const std::size_t want = nearest(c, xkcd());
    CHECK(got.index == want);
    CHECK(got.vietnamese_basic == basic()[nearest(xkcd()[want].rgb, basic())].name);
  }
  // ties go to the first entry
  const std::vector<NamedColor> tie{{"a", {0, 0, 0}}, {"b", {2, 0, 0}}};
  CHECK(name_color({1, 0, 0}, tie, basic()).xkcd_name == "a");
}

TEST_CASE("dominant_color fixtures") {
  RgbImage square(64, 64, {255, 255, 255});
  square.fill_rect(16, 16, 32, 32, {255, 0, 0});
  const ColorResult red = dominant_color(square, xkcd(), basic());
  CHECK(red.vietnamese_basic == "đỏ");
  CHECK(red.cluster_share >= 0.9);
  CHECK(non_increasing(red.clustering.objective));

  RgbImage split(100, 100, {255, 255, 255});
  split.fill_rect(20, 20, 36, 60, {0, 200, 0});
  split.fill_rect(56, 20, 24, 60, {255, 255, 0});
  const ColorResult green = dominant_color(split, xkcd(), basic());
  CHECK(green.vietnamese_basic == "xanh lá");
  CHECK(green.cluster_share == doctest::Approx(0.6));
  CHECK(non_increasing(green.clustering.objective));

  const ColorResult brown = dominant_color(RgbImage(30, 30, {150, 90, 40}), xkcd(), basic());
  CHECK(brown.background_fallback);
  CHECK(brown.rgb == Rgb{150, 90, 40});
  CHECK(brown.vietnamese_basic == "nâu");
}
