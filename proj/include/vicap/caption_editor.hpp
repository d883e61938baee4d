#pragma once

// Post-editing of generated captions: swap the color words of the first
// colored object for the recognized color, and add the recognized facial
// expression after a person noun. Every change is recorded so the result can
// be replayed from the original text.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vicap/fer.hpp"
#include "vicap/viet_text.hpp"

namespace vicap {

// Normalized noun phrases that refer to a person.
class PersonNounList {
 public:
  explicit PersonNounList(const std::vector<std::string>& entries);
  // đứa trẻ, người đàn ông, cậu bé, thanh niên, trẻ em, cô bé, người phụ nữ,
  // chàng trai, ông già, bà già, em bé, bé gái
  static PersonNounList defaults();

  const std::vector<std::string>& entries() const noexcept { return entries_; }
  bool contains(std::string_view phrase) const;

 private:
  std::vector<std::string> entries_;
};

PersonNounList load_person_nouns(const std::filesystem::path& path);

// Normalized Vietnamese color words (single or multi-syllable).
class ColorLexicon {
 public:
  explicit ColorLexicon(const std::vector<std::string>& terms);

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  bool contains(std::string_view term) const;

 private:
  std::vector<std::string> terms_;
};

ColorLexicon load_color_lexicon(const std::filesystem::path& path);

// A token of a normalized caption with its byte span.
struct SpannedToken {
  std::string surface;  // syllables joined by spaces
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Segments a normalized caption and keeps the byte span of each token.
std::vector<SpannedToken> spanned_tokens(std::string_view caption, const Lexicon& lexicon);

enum class EditKind { color_replaced, emotion_inserted };
const char* to_string(EditKind kind) noexcept;

// Replace bytes [begin, end) of the text as it was before this edit.
struct Edit {
  EditKind kind;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string old_text;
  std::string new_text;

  friend bool operator==(const Edit&, const Edit&) = default;
};

struct AnnotatedCaption {
  std::string original;
  std::string text;
  std::vector<Edit> edits;

  static AnnotatedCaption unedited(std::string caption) { return {caption, caption, {}}; }
};

// Replays edits over the original text; ContractError if an edit's old text
// does not match.
std::string apply_edits(const std::string& original, const std::vector<Edit>& edits);

// Everything the editor matches against.
struct EditorLexicons {
  PersonNounList person_nouns = PersonNounList::defaults();
  ColorLexicon colors{std::vector<std::string>{}};
  // Word lexicon used to find token boundaries; person nouns and color terms
  // are added to it internally.
  Lexicon words;

  Lexicon segmentation_lexicon() const;
};

struct PersonMatch {
  std::string phrase;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Leftmost person noun on token boundaries; the longest one when several start
// at the same token.
std::optional<PersonMatch> find_person_noun(std::string_view caption, const EditorLexicons& lexicons);

inline constexpr std::string_view kEmotionTemplate = "với vẻ mặt";

// Inserts " với vẻ mặt <emotion>" right after the matched phrase. Neutral
// inserts nothing unless insert_neutral is set. ContractError if the match does
// not describe the current text or an emotion was already inserted.
AnnotatedCaption insert_emotion(const AnnotatedCaption& caption, const PersonMatch& match, const EmotionLabel& emotion,
                                bool insert_neutral = false);

struct ColorWord {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<ColorWord> detect_color_words(std::string_view caption, const EditorLexicons& lexicons);

// The color phrase to correct: the first run of color words (joined directly
// or by "và"), and the token right before it, taken as the object noun.
struct ColorPhrase {
  std::string phrase;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string object_noun;  // empty when the phrase opens the caption
};

std::optional<ColorPhrase> find_color_phrase(std::string_view caption, const EditorLexicons& lexicons);

// Replaces the first color phrase by `recognized`. No edit when the caption has
// no color word or the phrase already is exactly that term.
AnnotatedCaption replace_color(const AnnotatedCaption& caption, const std::string& recognized,
                               const EditorLexicons& lexicons);

}  // namespace vicap
