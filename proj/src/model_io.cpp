#include "vicap/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <fmt/format.h>

#include "vicap/errors.hpp"

namespace vicap {

const char* to_string(FormatErrorKind kind) noexcept {
  switch (kind) {
    case FormatErrorKind::io: return "io";
    case FormatErrorKind::bad_magic: return "bad_magic";
    case FormatErrorKind::unsupported_version: return "unsupported_version";
    case FormatErrorKind::truncated: return "truncated";
    case FormatErrorKind::duplicate_name: return "duplicate_name";
    case FormatErrorKind::wrong_length: return "wrong_length";
    case FormatErrorKind::missing_metadata: return "missing_metadata";
    case FormatErrorKind::parse: return "parse";
  }
  return "unknown";
}

namespace {

constexpr char kWeightMagic[4] = {'C', 'A', 'P', 'W'};
constexpr char kFeatureMagic[4] = {'C', 'A', 'P', 'F'};

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void name16(const std::string& s) {
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatErrorKind::truncated,
                        fmt::format("truncated file: {} needs {} bytes at offset {}, {} left", what, n,
                                    pos_, bytes_.size() - pos_));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<float> floats(std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / 4) {
      throw FormatError(FormatErrorKind::truncated,
                        fmt::format("truncated file: {} needs {} floats at offset {}, {} bytes left", what, n,
                                    pos_, bytes_.size() - pos_));
    }
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(u32(what));
    return v;
  }
  void magic(const char (&expected)[4], const char* format) {
    if (bytes_.size() < 4 && (bytes_.empty() || std::memcmp(bytes_.data(), expected, bytes_.size()) == 0)) {
      throw FormatError(FormatErrorKind::truncated, fmt::format("truncated {} file: {} bytes", format, bytes_.size()));
    }
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), expected, 4) != 0) {
      throw FormatError(FormatErrorKind::bad_magic, fmt::format("not a {} file: bad magic bytes", format));
    }
    pos_ = 4;
  }
  void version(const char* format) {
    const std::uint16_t v = u16("version");
    if (v != kContainerVersion) {
      throw FormatError(FormatErrorKind::unsupported_version,
                        fmt::format("unsupported {} version {} (expected {})", format, v, kContainerVersion));
    }
  }
  void expect_end(const char* format) const {
    if (pos_ != bytes_.size()) {
      throw FormatError(FormatErrorKind::parse,
                        fmt::format("{} file has {} trailing bytes", format, bytes_.size() - pos_));
    }
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_name(const std::string& name, const char* what) {
  if (name.empty() || name.size() > kMaxNameBytes) {
    throw FormatError(FormatErrorKind::parse,
                      fmt::format("{} '{}' must be 1..{} bytes", what, name, kMaxNameBytes));
  }
}

void check_model_kind(const WeightStore& store) {
  const auto kind = store.metadata(kModelKindKey);
  if (!kind) throw FormatError(FormatErrorKind::missing_metadata, "weight store has no model_kind metadata");
  if (*kind != kFerModelKind && *kind != kCaptionModelKind) {
    throw FormatError(FormatErrorKind::missing_metadata, fmt::format("unknown model_kind '{}'", *kind));
  }
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::io, fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorKind::io, fmt::format("failed writing {}", path.string()));
}

}  // namespace

WeightStore::WeightStore(std::string model_kind) { metadata_[kModelKindKey] = std::move(model_kind); }

void WeightStore::add(const std::string& name, Tensor tensor) {
  check_name(name, "tensor name");
  if (!entries_.emplace(name, std::move(tensor)).second) {
    throw FormatError(FormatErrorKind::duplicate_name, fmt::format("duplicate tensor name '{}'", name));
  }
}

void WeightStore::set_metadata(const std::string& key, std::string value) {
  check_name(key, "metadata key");
  metadata_[key] = std::move(value);
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw WeightStoreError(name, fmt::format("missing tensor '{}'", name));
  return it->second;
}

const Tensor& WeightStore::get(const std::string& name, const Shape& expected) const {
  const Tensor& t = get(name);
  if (t.shape() != expected) {
    throw WeightStoreError(name, fmt::format("tensor '{}' has shape {}, expected {}", name,
                                             shape_to_string(t.shape()), shape_to_string(expected)));
  }
  return t;
}

std::optional<std::string> WeightStore::metadata(const std::string& key) const {
  auto it = metadata_.find(key);
  if (it == metadata_.end()) return std::nullopt;
  return it->second;
}

std::string WeightStore::model_kind() const { return metadata(kModelKindKey).value_or(""); }

std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  check_model_kind(store);
  ByteWriter w;
  w.raw(kWeightMagic, 4);
  w.u16(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [name, tensor] : store.entries()) {
    w.name16(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : tensor.data()) w.f32(v);
  }
  w.u32(static_cast<std::uint32_t>(store.all_metadata().size()));
  for (const auto& [key, value] : store.all_metadata()) {
    w.name16(key);
    w.u32(static_cast<std::uint32_t>(value.size()));
    w.raw(value.data(), value.size());
  }
  return w.take();
}

WeightStore parse_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic(kWeightMagic, "CAPW");
  r.version("CAPW");
  WeightStore store;
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.str(r.u16("name length"), "tensor name");
    const std::uint8_t rank = r.u8("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32("dimension");
    std::size_t count_values = 1;
    for (std::size_t d : shape) {
      if (d != 0 && count_values > std::numeric_limits<std::uint32_t>::max() / d) {
        throw FormatError(FormatErrorKind::truncated,
                          fmt::format("tensor '{}' shape {} exceeds the file size", name, shape_to_string(shape)));
      }
      count_values *= d;
    }
    std::vector<float> payload = r.floats(count_values, "tensor payload");
    store.add(name, Tensor(std::move(shape), std::move(payload)));
  }
  const std::uint32_t meta = r.u32("metadata count");
  for (std::uint32_t m = 0; m < meta; ++m) {
    std::string key = r.str(r.u16("key length"), "metadata key");
    if (store.metadata(key)) {
      throw FormatError(FormatErrorKind::duplicate_name, fmt::format("duplicate metadata key '{}'", key));
    }
    std::string value = r.str(r.u32("value length"), "metadata value");
    store.set_metadata(key, std::move(value));
  }
  r.expect_end("CAPW");
  check_model_kind(store);
  return store;
}

WeightStore load_weights(const std::filesystem::path& path) { return parse_weights(read_binary_file(path)); }

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  write_file(path, serialize_weights(store));
}

void FeatureTable::add(const std::string& image_id, Tensor features) {
  check_name(image_id, "image id");
  if (features.rank() != 1 || features.size() != kFeatureDim) {
    throw FormatError(FormatErrorKind::wrong_length,
                      fmt::format("feature vector for image '{}' has shape {}, expected [{}]", image_id,
                                  shape_to_string(features.shape()), kFeatureDim));
  }
  if (!rows_.emplace(image_id, std::move(features)).second) {
    throw FormatError(FormatErrorKind::duplicate_name, fmt::format("duplicate image id '{}'", image_id));
  }
}

const Tensor& FeatureTable::at(const std::string& image_id) const {
  auto it = rows_.find(image_id);
  if (it == rows_.end()) throw LookupError(fmt::format("no features for image id '{}'", image_id));
  return it->second;
}

std::vector<std::uint8_t> serialize_features(const FeatureTable& table) {
  ByteWriter w;
  w.raw(kFeatureMagic, 4);
  w.u16(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& [id, row] : table.rows()) {
    w.name16(id);
    w.u32(static_cast<std::uint32_t>(row.size()));
    for (float v : row.data()) w.f32(v);
  }
  return w.take();
}

FeatureTable parse_features(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic(kFeatureMagic, "CAPF");
  r.version("CAPF");
  FeatureTable table;
  const std::uint32_t count = r.u32("row count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string id = r.str(r.u16("id length"), "image id");
    const std::uint32_t dim = r.u32("dimension");
    if (dim != kFeatureDim) {
      throw FormatError(FormatErrorKind::wrong_length,
                        fmt::format("feature vector for image '{}' has {} values, expected {}", id, dim,
                                    kFeatureDim));
    }
    table.add(id, Tensor::vector(r.floats(dim, "feature payload")));
  }
  r.expect_end("CAPF");
  return table;
}

FeatureTable load_features(const std::filesystem::path& path) { return parse_features(read_binary_file(path)); }

void save_features(const FeatureTable& table, const std::filesystem::path& path) {
  write_file(path, serialize_features(table));
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::vector<NamedColor> parse_colors(const std::string& text) {
  std::vector<NamedColor> colors;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t lineno = i + 1;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(FormatErrorKind::parse, fmt::format("line {}: expected 'name<TAB>#RRGGBB'", lineno));
    }
    const std::string hex = line.substr(tab + 1);
    if (hex.size() != 7 || hex[0] != '#') {
      throw FormatError(FormatErrorKind::parse, fmt::format("line {}: malformed color '{}'", lineno, hex));
    }
    NamedColor color{line.substr(0, tab), {}};
    for (int c = 0; c < 3; ++c) {
      const int hi = hex_value(hex[1 + 2 * c]);
      const int lo = hex_value(hex[2 + 2 * c]);
      if (hi < 0 || lo < 0) {
        throw FormatError(FormatErrorKind::parse, fmt::format("line {}: malformed color '{}'", lineno, hex));
      }
      color.rgb[c] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    colors.push_back(std::move(color));
  }
  return colors;
}

std::vector<NamedColor> load_colors(const std::filesystem::path& path) { return parse_colors(read_text_file(path)); }

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

}  // namespace vicap
