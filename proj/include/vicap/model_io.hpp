#pragma once

// On-disk containers.
//
// Weight file (CAPW), all integers little-endian:
//   "CAPW" | u16 version (=1) | u32 entry count
//   per entry, in ascending byte order of name:
//     u16 name length | name (UTF-8, <= 128 bytes) | u8 rank | u32 dims[rank] | f32 payload[prod(dims)]
//   u32 metadata count
//   per metadata item, in ascending key order:
//     u16 key length | key | u32 value length | value
//
// Feature file (CAPF):
//   "CAPF" | u16 version (=1) | u32 row count
//   per row, in ascending id order:
//     u16 id length | id | u32 dim (=4096) | f32 values[dim]
//
// The writers are canonical: load followed by save reproduces the input bytes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vicap/tensor.hpp"

namespace vicap {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kMaxNameBytes = 128;
inline constexpr std::size_t kFeatureDim = 4096;

inline constexpr const char* kModelKindKey = "model_kind";
inline constexpr const char* kFerModelKind = "fer_cnn";
inline constexpr const char* kCaptionModelKind = "caption_merge";

class WeightStore {
 public:
  WeightStore() = default;
  explicit WeightStore(std::string model_kind);

  // Throws FormatError(duplicate_name) if the name is taken.
  void add(const std::string& name, Tensor tensor);
  void set_metadata(const std::string& key, std::string value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  // Throws WeightStoreError naming the tensor when absent.
  const Tensor& get(const std::string& name) const;
  // Like get(), and also checks the shape.
  const Tensor& get(const std::string& name, const Shape& expected) const;

  std::optional<std::string> metadata(const std::string& key) const;
  std::string model_kind() const;

  const std::map<std::string, Tensor>& entries() const noexcept { return entries_; }
  const std::map<std::string, std::string>& all_metadata() const noexcept { return metadata_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, Tensor> entries_;
  std::map<std::string, std::string> metadata_;
};

std::vector<std::uint8_t> serialize_weights(const WeightStore& store);
WeightStore parse_weights(std::span<const std::uint8_t> bytes);
WeightStore load_weights(const std::filesystem::path& path);
void save_weights(const WeightStore& store, const std::filesystem::path& path);

class FeatureTable {
 public:
  // Throws FormatError(wrong_length) naming the id unless the vector has kFeatureDim values.
  void add(const std::string& image_id, Tensor features);
  bool contains(const std::string& image_id) const { return rows_.count(image_id) != 0; }
  // Throws LookupError for unknown ids.
  const Tensor& at(const std::string& image_id) const;
  std::size_t size() const noexcept { return rows_.size(); }
  const std::map<std::string, Tensor>& rows() const noexcept { return rows_; }

  friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

 private:
  std::map<std::string, Tensor> rows_;
};

std::vector<std::uint8_t> serialize_features(const FeatureTable& table);
FeatureTable parse_features(std::span<const std::uint8_t> bytes);
FeatureTable load_features(const std::filesystem::path& path);
void save_features(const FeatureTable& table, const std::filesystem::path& path);

using Rgb = std::array<std::uint8_t, 3>;

struct NamedColor {
  std::string name;
  Rgb rgb{};

  friend bool operator==(const NamedColor&, const NamedColor&) = default;
};

// "name<TAB>#RRGGBB" per line, hex digits case-insensitive, file order kept.
std::vector<NamedColor> parse_colors(const std::string& text);
std::vector<NamedColor> load_colors(const std::filesystem::path& path);

// Text helpers shared by the other loaders.
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Splits on '\n', strips a trailing '\r', drops the empty piece after a final newline.
std::vector<std::string> split_lines(const std::string& text);

}  // namespace vicap
