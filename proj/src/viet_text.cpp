#include "vicap/viet_text.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "vicap/errors.hpp"
#include "vicap/model_io.hpp"

namespace vicap {

namespace {

bool keep_code_point(UChar32 c) {
  if (u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || u_isdigit(c)) return true;
  // Combining marks left over after composition belong to the preceding letter.
  const auto category = u_charType(c);
  return category == U_NON_SPACING_MARK || category == U_COMBINING_SPACING_MARK;
}

}  // namespace

std::string normalize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

  icu::UnicodeString source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString composed = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  composed.toLower(icu::Locale::getRoot());
  composed = nfc->normalize(composed, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");

  icu::UnicodeString cleaned;
  bool pending_space = false;
  for (int32_t i = 0; i < composed.length();) {
    const UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !cleaned.isEmpty();
      continue;
    }
    if (!keep_code_point(c)) continue;
    if (pending_space) cleaned.append(static_cast<UChar>(u' '));
    pending_space = false;
    cleaned.append(c);
  }
  std::string out;
  cleaned.toUTF8String(out);
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) words.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

Lexicon::Lexicon(const std::vector<std::string>& entries) {
  for (const auto& e : entries) add(e);
}

void Lexicon::add(std::string_view entry) {
  std::string key = normalize(token_surface(entry));
  if (key.empty()) return;
  longest_ = std::max(longest_, split_words(key).size());
  entries_.insert(std::move(key));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  Lexicon lexicon;
  for (const auto& line : split_lines(read_text_file(path))) lexicon.add(line);
  return lexicon;
}

std::vector<std::string> segment(std::string_view normalized, const Lexicon& lexicon) {
  const std::vector<std::string> syllables = split_words(normalized);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < syllables.size()) {
    std::size_t matched = 1;
    for (std::size_t len = std::min(lexicon.longest(), syllables.size() - i); len >= 2; --len) {
      std::string candidate = syllables[i];
      for (std::size_t k = 1; k < len; ++k) candidate += ' ' + syllables[i + k];
      if (lexicon.contains(candidate)) {
        matched = len;
        break;
      }
    }
    std::string token = syllables[i];
    for (std::size_t k = 1; k < matched; ++k) token += '_' + syllables[i + k];
    tokens.push_back(std::move(token));
    i += matched;
  }
  return tokens;
}

std::string token_surface(std::string_view token) {
  std::string s(token);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

Vocabulary::Vocabulary()
    : Vocabulary({std::string(kPadToken), std::string(kStartToken), std::string(kEndToken),
                  std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const std::string_view reserved[] = {kPadToken, kStartToken, kEndToken, kUnkToken};
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= tokens_.size() || tokens_[i] != reserved[i]) {
      throw FormatError(FormatErrorKind::parse,
                        fmt::format("vocabulary index {} must be the reserved token {}", i, reserved[i]));
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw FormatError(FormatErrorKind::parse, fmt::format("vocabulary line {} is empty", i + 1));
    }
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw FormatError(FormatErrorKind::duplicate_name,
                        fmt::format("vocabulary line {} repeats token '{}'", i + 1, tokens_[i]));
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

Lexicon Vocabulary::lexicon() const {
  Lexicon lexicon;
  for (const auto& t : tokens_) {
    if (t.find('_') != std::string::npos) lexicon.add(t);
  }
  return lexicon;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  return Vocabulary(split_lines(read_text_file(path)));
}

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw ContractError("encode: max_len must be at least 2");
  TokenSequence seq;
  seq.push_back(Vocabulary::kStart, vocab.token(Vocabulary::kStart));
  const std::size_t body = std::min(tokens.size(), max_len - 2);
  for (std::size_t i = 0; i < body; ++i) {
    const TokenId id = vocab.id(tokens[i]);
    seq.push_back(id, vocab.token(id));
  }
  seq.push_back(Vocabulary::kEnd, vocab.token(Vocabulary::kEnd));
  while (seq.size() < max_len) seq.push_back(Vocabulary::kPad, vocab.token(Vocabulary::kPad));
  return seq;
}

std::string decode(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    if (id == Vocabulary::kPad || id == Vocabulary::kStart || id == Vocabulary::kEnd) continue;
    words.push_back(token_surface(vocab.token(id)));
  }
  return join_words(words);
}

std::vector<std::string> tokenize(std::string_view raw, const Lexicon& lexicon) {
  return segment(normalize(raw), lexicon);
}

std::vector<CaptionSet> parse_caption_dataset(const std::string& text) {
  std::vector<CaptionSet> sets;
  std::unordered_map<std::string, std::size_t> position;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(FormatErrorKind::parse, fmt::format("line {}: expected 'image_id<TAB>caption'", i + 1));
    }
    const std::string id = line.substr(0, tab);
    auto [it, inserted] = position.emplace(id, sets.size());
    if (inserted) sets.push_back({id, {}});
    sets[it->second].captions.push_back(line.substr(tab + 1));
  }
  return sets;
}

std::vector<CaptionSet> load_caption_dataset(const std::filesystem::path& path) {
  return parse_caption_dataset(read_text_file(path));
}

}  // namespace vicap
