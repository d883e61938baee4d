#pragma once

// Dominant color of an object crop: drop pixels that look like the corner
// background, cluster the rest with k-means, name the largest cluster.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vicap/image.hpp"
#include "vicap/model_io.hpp"

namespace vicap {

struct PixelSet {
  std::vector<Rgb> pixels;  // row-major order of the source image
  bool fallback = false;    // true when the whole image was kept
};

struct BackgroundOptions {
  double corner_frac = 0.05;
  double threshold = 30.0;
  // Keep the full image when more than this fraction would be removed.
  double max_removed = 0.9;
};

// Averages each corner patch (corner_frac of each side, at least 1 px) and
// removes pixels within `threshold` (Euclidean RGB) of any corner mean.
// ContractError for images smaller than 4x4.
PixelSet exclude_background(const RgbImage& image, const BackgroundOptions& options = {});

using Centroid = std::array<double, 3>;

struct KMeansOptions {
  std::size_t k = 3;
  std::uint32_t seed = 42;
  std::size_t max_iter = 30;
  double tol = 1e-4;
};

struct Cluster {
  Centroid centroid{};
  std::size_t count = 0;
};

struct KMeansResult {
  std::vector<Cluster> clusters;   // non-empty clusters, in centroid index order
  std::vector<double> objective;   // sum of squared distances after every assignment step
  std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding (std::mt19937 with the given seed).
// Ties in assignment go to the lowest centroid index; a cluster that empties
// is moved to the point farthest from its own centroid.
KMeansResult kmeans(const std::vector<Rgb>& pixels, const KMeansOptions& options = {});

struct ColorName {
  std::size_t index = 0;  // position in the dictionary
  std::string xkcd_name;
  Rgb xkcd_rgb{};
  double distance = 0.0;
  std::string vietnamese_basic;
};

// Nearest dictionary entry (ties to the earlier entry), then the basic term
// whose anchor is nearest to that entry's color.
ColorName name_color(Rgb rgb, const std::vector<NamedColor>& dictionary, const std::vector<NamedColor>& basic_colors);

struct ColorResult {
  Rgb rgb{};  // rounded centroid of the dominant cluster
  std::string xkcd_name;
  std::string vietnamese_basic;
  double cluster_share = 0.0;
  bool background_fallback = false;
  KMeansResult clustering;
};

struct ColorOptions {
  BackgroundOptions background;
  KMeansOptions kmeans;
};

ColorResult dominant_color(const RgbImage& image, const std::vector<NamedColor>& dictionary,
                           const std::vector<NamedColor>& basic_colors, const ColorOptions& options = {});

}  // namespace vicap
