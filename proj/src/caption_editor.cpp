#include "vicap/caption_editor.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vicap/errors.hpp"
#include "vicap/model_io.hpp"

namespace vicap {

namespace {

std::vector<std::string> normalized_entries(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& entry : raw) {
    std::string n = normalize(entry);
    if (!n.empty() && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::string> nonempty_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  for (auto& line : split_lines(read_text_file(path))) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

constexpr std::string_view kAnd = "và";

}  // namespace

PersonNounList::PersonNounList(const std::vector<std::string>& entries) : entries_(normalized_entries(entries)) {}

PersonNounList PersonNounList::defaults() {
  return PersonNounList({"đứa trẻ", "người đàn ông", "cậu bé", "thanh niên", "trẻ em", "cô bé", "người phụ nữ",
                         "chàng trai", "ông già", "bà già", "em bé", "bé gái"});
}

bool PersonNounList::contains(std::string_view phrase) const {
  return std::find(entries_.begin(), entries_.end(), phrase) != entries_.end();
}

PersonNounList load_person_nouns(const std::filesystem::path& path) { return PersonNounList(nonempty_lines(path)); }

ColorLexicon::ColorLexicon(const std::vector<std::string>& terms) : terms_(normalized_entries(terms)) {}

bool ColorLexicon::contains(std::string_view term) const {
  return std::find(terms_.begin(), terms_.end(), term) != terms_.end();
}

ColorLexicon load_color_lexicon(const std::filesystem::path& path) { return ColorLexicon(nonempty_lines(path)); }

std::vector<SpannedToken> spanned_tokens(std::string_view caption, const Lexicon& lexicon) {
  // Byte offsets of each syllable; the caption is normalized, so syllables are
  // separated by exactly one space.
  std::vector<std::pair<std::size_t, std::size_t>> syllables;
  std::size_t pos = 0;
  while (pos < caption.size()) {
    std::size_t end = caption.find(' ', pos);
    if (end == std::string_view::npos) end = caption.size();
    if (end > pos) syllables.emplace_back(pos, end);
    pos = end + 1;
  }
  std::vector<SpannedToken> tokens;
  std::size_t s = 0;
  for (const std::string& token : segment(caption, lexicon)) {
    const std::size_t count = static_cast<std::size_t>(std::count(token.begin(), token.end(), '_')) + 1;
    if (s + count > syllables.size()) throw ContractError("caption is not normalized");
    const std::size_t begin = syllables[s].first;
    const std::size_t end = syllables[s + count - 1].second;
    tokens.push_back({std::string(caption.substr(begin, end - begin)), begin, end});
    s += count;
  }
  return tokens;
}

const char* to_string(EditKind kind) noexcept {
  switch (kind) {
    case EditKind::color_replaced: return "color_replaced";
    case EditKind::emotion_inserted: return "emotion_inserted";
  }
  return "unknown";
}

std::string apply_edits(const std::string& original, const std::vector<Edit>& edits) {
  std::string text = original;
  for (const Edit& e : edits) {
    if (e.begin > e.end || e.end > text.size() || text.compare(e.begin, e.end - e.begin, e.old_text) != 0) {
      throw ContractError(fmt::format("edit [{}, {}) '{}' does not match the text", e.begin, e.end, e.old_text));
    }
    text.replace(e.begin, e.end - e.begin, e.new_text);
  }
  return text;
}

Lexicon EditorLexicons::segmentation_lexicon() const {
  Lexicon lexicon = words;
  for (const auto& p : person_nouns.entries()) lexicon.add(p);
  for (const auto& c : colors.terms()) lexicon.add(c);
  return lexicon;
}

std::optional<PersonMatch> find_person_noun(std::string_view caption, const EditorLexicons& lexicons) {
  const auto tokens = spanned_tokens(caption, lexicons.segmentation_lexicon());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t j = tokens.size(); j > i; --j) {
      const std::size_t begin = tokens[i].begin;
      const std::size_t end = tokens[j - 1].end;
      const std::string_view phrase = caption.substr(begin, end - begin);
      if (lexicons.person_nouns.contains(phrase)) return PersonMatch{std::string(phrase), begin, end};
    }
  }
  return std::nullopt;
}

AnnotatedCaption insert_emotion(const AnnotatedCaption& caption, const PersonMatch& match, const EmotionLabel& emotion,
                                bool insert_neutral) {
  const std::string& text = caption.text;
  const bool valid = match.begin < match.end && match.end <= text.size() &&
                     text.compare(match.begin, match.end - match.begin, match.phrase) == 0 &&
                     (match.begin == 0 || text[match.begin - 1] == ' ') &&
                     (match.end == text.size() || text[match.end] == ' ');
  if (!valid) {
    throw ContractError(fmt::format("person match '{}' at [{}, {}) is not a phrase of '{}'", match.phrase,
                                    match.begin, match.end, text));
  }
  const bool already = std::any_of(caption.edits.begin(), caption.edits.end(),
                                   [](const Edit& e) { return e.kind == EditKind::emotion_inserted; });
  if (already) throw ContractError("caption already carries an emotion");

  AnnotatedCaption out = caption;
  if (emotion.english == "neutral" && !insert_neutral) return out;
  Edit edit{EditKind::emotion_inserted, match.end, match.end, "",
            fmt::format(" {} {}", kEmotionTemplate, emotion.vietnamese)};
  out.text.insert(edit.begin, edit.new_text);
  out.edits.push_back(std::move(edit));
  return out;
}

std::vector<ColorWord> detect_color_words(std::string_view caption, const EditorLexicons& lexicons) {
  std::vector<ColorWord> words;
  for (const auto& token : spanned_tokens(caption, lexicons.segmentation_lexicon())) {
    if (lexicons.colors.contains(token.surface)) words.push_back({token.surface, token.begin, token.end});
  }
  return words;
}

std::optional<ColorPhrase> find_color_phrase(std::string_view caption, const EditorLexicons& lexicons) {
  const auto tokens = spanned_tokens(caption, lexicons.segmentation_lexicon());
  auto is_color = [&](std::size_t i) { return i < tokens.size() && lexicons.colors.contains(tokens[i].surface); };
  std::size_t first = 0;
  while (first < tokens.size() && !is_color(first)) ++first;
  if (first == tokens.size()) return std::nullopt;

  std::size_t last = first;
  while (true) {
    if (is_color(last + 1)) {
      last += 1;
    } else if (last + 2 < tokens.size() && tokens[last + 1].surface == kAnd && is_color(last + 2)) {
      last += 2;
    } else {
      break;
    }
  }
  ColorPhrase phrase;
  phrase.begin = tokens[first].begin;
  phrase.end = tokens[last].end;
  phrase.phrase = std::string(caption.substr(phrase.begin, phrase.end - phrase.begin));
  if (first > 0) phrase.object_noun = tokens[first - 1].surface;
  return phrase;
}

AnnotatedCaption replace_color(const AnnotatedCaption& caption, const std::string& recognized,
                               const EditorLexicons& lexicons) {
  AnnotatedCaption out = caption;
  const auto phrase = find_color_phrase(caption.text, lexicons);
  if (!phrase || phrase->phrase == recognized) return out;
  Edit edit{EditKind::color_replaced, phrase->begin, phrase->end, phrase->phrase, recognized};
  out.text.replace(edit.begin, edit.end - edit.begin, edit.new_text);
  out.edits.push_back(std::move(edit));
  return out;
}

}  // namespace vicap
