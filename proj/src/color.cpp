#include "vicap/color.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "vicap/errors.hpp"

namespace vicap {

namespace {

double squared_distance(const Centroid& a, const Centroid& b) {
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return total;
}

Centroid to_centroid(Rgb c) { return {double(c[0]), double(c[1]), double(c[2])}; }

Centroid patch_mean(const RgbImage& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  Centroid sum{};
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (std::size_t x = x0; x < x0 + w; ++x) {
      const Rgb c = image.at(x, y);
      for (int i = 0; i < 3; ++i) sum[i] += c[i];
    }
  }
  const double n = static_cast<double>(w * h);
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

// Uniform double in [0, 1) from one 32-bit draw; independent of the standard
// library's distribution implementations.
double unit(std::mt19937& rng) { return static_cast<double>(rng()) / 4294967296.0; }

}  // namespace

PixelSet exclude_background(const RgbImage& image, const BackgroundOptions& options) {
  if (image.width < 4 || image.height < 4) {
    throw ContractError(fmt::format("exclude_background: image {}x{} is smaller than 4x4", image.width, image.height));
  }
  const std::size_t pw = std::max<std::size_t>(1, static_cast<std::size_t>(image.width * options.corner_frac));
  const std::size_t ph = std::max<std::size_t>(1, static_cast<std::size_t>(image.height * options.corner_frac));
  const std::array<Centroid, 4> corners{
      patch_mean(image, 0, 0, pw, ph),
      patch_mean(image, image.width - pw, 0, pw, ph),
      patch_mean(image, 0, image.height - ph, pw, ph),
      patch_mean(image, image.width - pw, image.height - ph, pw, ph),
  };
  const double limit = options.threshold * options.threshold;

  PixelSet kept;
  PixelSet all;
  all.fallback = true;
  all.pixels.reserve(image.width * image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const Rgb c = image.at(x, y);
      all.pixels.push_back(c);
      const Centroid p = to_centroid(c);
      const bool background = std::any_of(corners.begin(), corners.end(),
                                          [&](const Centroid& corner) { return squared_distance(p, corner) <= limit; });
      if (!background) kept.pixels.push_back(c);
    }
  }
  const double removed = static_cast<double>(all.pixels.size() - kept.pixels.size());
  if (removed > options.max_removed * static_cast<double>(all.pixels.size())) return all;
  return kept;
}

KMeansResult kmeans(const std::vector<Rgb>& pixels, const KMeansOptions& options) {
  if (pixels.empty()) throw ContractError("kmeans: no pixels");
  if (options.k == 0) throw ContractError("kmeans: k must be positive");
  const std::size_t n = pixels.size();
  std::vector<Centroid> points(n);
  std::transform(pixels.begin(), pixels.end(), points.begin(), to_centroid);

  // k-means++ seeding.
  std::mt19937 rng(options.seed);
  std::vector<Centroid> centroids;
  centroids.push_back(points[rng() % n]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < options.k) {
    double total = 0.0;
    for (double d : nearest) total += d;
    if (total <= 0.0) {
      centroids.push_back(centroids.back());
      continue;
    }
    const double target = unit(rng) * total;
    double running = 0.0;
    std::size_t chosen = n;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      last_positive = i;
      running += nearest[i];
      if (running > target) {
        chosen = i;
        break;
      }
    }
    if (chosen == n) chosen = last_positive;
    centroids.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points[i], points[chosen]));
  }

  const std::size_t k = centroids.size();
  std::vector<std::size_t> assignment(n);
  std::vector<double> dist(n);
  KMeansResult result;

  auto assign = [&] {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assignment[i] = best;
      dist[i] = best_d;
      objective += best_d;
    }
    result.objective.push_back(objective);
  };

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    assign();
    ++result.iterations;
    std::vector<Centroid> sums(k, Centroid{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) sums[assignment[i]][d] += points[i][d];
      ++counts[assignment[i]];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      Centroid updated;
      if (counts[c] > 0) {
        for (int d = 0; d < 3; ++d) updated[d] = sums[c][d] / static_cast<double>(counts[c]);
      } else {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        updated = points[far];
        dist[far] = 0.0;
      }
      movement = std::max(movement, std::sqrt(squared_distance(updated, centroids[c])));
      centroids[c] = updated;
    }
    if (movement < options.tol) break;
  }
  assign();

  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : assignment) ++counts[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) result.clusters.push_back({centroids[c], counts[c]});
  }
  return result;
}

ColorName name_color(Rgb rgb, const std::vector<NamedColor>& dictionary, const std::vector<NamedColor>& basic_colors) {
  if (dictionary.empty()) throw ContractError("name_color: empty color dictionary");
  if (basic_colors.empty()) throw ContractError("name_color: empty basic color table");
  auto nearest = [](const Centroid& p, const std::vector<NamedColor>& table) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double d = squared_distance(p, to_centroid(table[i].rgb));
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return std::pair{best, best_d};
  };
  const auto [index, d2] = nearest(to_centroid(rgb), dictionary);
  const NamedColor& match = dictionary[index];
  const auto basic = nearest(to_centroid(match.rgb), basic_colors).first;
  return {index, match.name, match.rgb, std::sqrt(d2), basic_colors[basic].name};
}

ColorResult dominant_color(const RgbImage& image, const std::vector<NamedColor>& dictionary,
                           const std::vector<NamedColor>& basic_colors, const ColorOptions& options) {
  PixelSet foreground = exclude_background(image, options.background);
  ColorResult result;
  result.background_fallback = foreground.fallback;
  result.clustering = kmeans(foreground.pixels, options.kmeans);

  const Cluster* top = &result.clustering.clusters.front();
  for (const Cluster& c : result.clustering.clusters) {
    if (c.count > top->count) top = &c;
  }
  for (int d = 0; d < 3; ++d) {
    result.rgb[d] = static_cast<std::uint8_t>(std::clamp(std::lround(top->centroid[d]), 0L, 255L));
  }
  result.cluster_share = static_cast<double>(top->count) / static_cast<double>(foreground.pixels.size());

  const ColorName name = name_color(result.rgb, dictionary, basic_colors);
  result.xkcd_name = name.xkcd_name;
  result.vietnamese_basic = name.vietnamese_basic;
  return result;
}

}  // namespace vicap
