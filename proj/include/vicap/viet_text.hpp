#pragma once

// Vietnamese caption preprocessing: normalization, dictionary word
// segmentation and vocabulary encoding.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace vicap {

// NFC, Unicode lowercase, drop everything but letters, digits and spaces,
// collapse whitespace runs, trim.
std::string normalize(std::string_view text);

// Splits on single spaces (input is expected to be normalized).
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ");

// Multi-syllable words used for segmentation. Entries are stored normalized
// with single spaces between syllables.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& entries);

  void add(std::string_view entry);
  bool contains(std::string_view normalized_entry) const { return entries_.count(std::string(normalized_entry)) != 0; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t longest() const noexcept { return longest_; }

 private:
  std::unordered_set<std::string> entries_;
  std::size_t longest_ = 1;
};

// One entry per line; blank lines ignored.
Lexicon load_lexicon(const std::filesystem::path& path);

// Greedy left-to-right longest match against the lexicon. Matched entries come
// back joined with '_', other syllables pass through unchanged.
std::vector<std::string> segment(std::string_view normalized, const Lexicon& lexicon);

// Token with underscores turned back into spaces.
std::string token_surface(std::string_view token);

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kStart = 1;
  static constexpr TokenId kEnd = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kStartToken = "<start>";
  static constexpr std::string_view kEndToken = "<end>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();
  // The first four tokens must be the reserved ones; throws FormatError otherwise
  // or on duplicates.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  // kUnk when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Lexicon of the multi-syllable entries (tokens containing '_').
  Lexicon lexicon() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// One token per line, line number is the index.
Vocabulary load_vocabulary(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultMaxLen = 34;

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::string> surface;

  std::size_t size() const noexcept { return ids.size(); }
  void push_back(TokenId id, std::string token) {
    ids.push_back(id);
    surface.push_back(std::move(token));
  }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// START + tokens + END, unknowns to UNK, padded with PAD to max_len. Over-long
// input keeps its first max_len - 2 tokens and the END marker.
TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                     std::size_t max_len = kDefaultMaxLen);
// Drops PAD/START/END and joins the rest with spaces, underscores as spaces.
std::string decode(const std::vector<TokenId>& ids, const Vocabulary& vocab);

// normalize + segment.
std::vector<std::string> tokenize(std::string_view raw, const Lexicon& lexicon);

// `image_id<TAB>caption` lines; images keep first-appearance order and their
// captions keep file order.
struct CaptionSet {
  std::string image_id;
  std::vector<std::string> captions;
};
std::vector<CaptionSet> parse_caption_dataset(const std::string& text);
std::vector<CaptionSet> load_caption_dataset(const std::filesystem::path& path);

}  // namespace vicap
