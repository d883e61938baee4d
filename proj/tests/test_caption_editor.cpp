#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vicap/caption_editor.hpp"
#include "vicap/errors.hpp"

using namespace vicap;

namespace {

EditorLexicons shipped() {
  EditorLexicons lex;
  lex.person_nouns = load_person_nouns(oracle::data("person_nouns.txt"));
  lex.colors = load_color_lexicon(oracle::data("color_terms.txt"));
  lex.words = load_lexicon(oracle::data("lexicon.txt"));
  return lex;
}

AnnotatedCaption fix_color(const std::string& caption, const std::string& color, const EditorLexicons& lex) {
  return replace_color(AnnotatedCaption::unedited(caption), color, lex);
}

AnnotatedCaption add_emotion(const AnnotatedCaption& c, const char* emotion, const EditorLexicons& lex,
                             bool neutral = false) {
  const auto match = find_person_noun(c.text, lex);
  return match ? insert_emotion(c, *match, emotion_by_name(emotion), neutral) : c;
}

}  // namespace

TEST_CASE("person noun list") {
  const PersonNounList defaults = PersonNounList::defaults();
  CHECK(defaults.entries().size() == 12);
  CHECK(load_person_nouns(oracle::data("person_nouns.txt")).entries() == defaults.entries());
}

TEST_CASE("find_person_noun") {
  const EditorLexicons lex = shipped();
  const auto boy = find_person_noun("một cậu bé đang chơi trong hồ bơi", lex);
  REQUIRE(boy);
  CHECK(boy->phrase == "cậu bé");
  CHECK(boy->begin == std::string("một ").size());
  CHECK_FALSE(find_person_noun("một con chó đen và trắng đang chạy qua một cánh đồng", lex));
  // "bé" alone is not a person noun; "em bé" is matched on token boundaries
  CHECK_FALSE(find_person_noun("con mèo bé nhỏ", lex));
  CHECK(find_person_noun("một em bé ngủ", lex)->phrase == "em bé");
  // leftmost wins
  CHECK(find_person_noun("ông già và cô bé", lex)->phrase == "ông già");
}

TEST_CASE("editing regression rows") {
  const EditorLexicons lex = shipped();

  // row 1: no color words, neutral face; nothing changes
  const std::string row1 = "một người đàn ông đang đi xe đạp trên một con đường";
  for (const char* color : {"đỏ", "nâu", "xanh lá"}) {
    const AnnotatedCaption c = fix_color(row1, color, lex);
    CHECK(c.text == row1);
    CHECK(c.edits.empty());
  }
  CHECK(add_emotion(AnnotatedCaption::unedited(row1), "neutral", lex).text == row1);

  // row 2: brown dog
  const AnnotatedCaption row2 = fix_color("một con chó đen và trắng đang chạy qua một cánh đồng", "nâu", lex);
  CHECK(row2.text == "một con chó nâu đang chạy qua một cánh đồng");
  REQUIRE(row2.edits.size() == 1);
  CHECK(row2.edits[0].kind == EditKind::color_replaced);
  CHECK(row2.edits[0].old_text == "đen và trắng");
  CHECK(add_emotion(row2, "happy", lex).text == row2.text);

  // row 3: happy boy
  const AnnotatedCaption row3 =
      add_emotion(fix_color("một cậu bé đang chơi trong hồ bơi", "xanh dương", lex), "happy", lex);
  CHECK(row3.text == "một cậu bé với vẻ mặt vui vẻ đang chơi trong hồ bơi");
  REQUIRE(row3.edits.size() == 1);
  CHECK(row3.edits[0].kind == EditKind::emotion_inserted);
}

TEST_CASE("emotion insertion rules") {
  const EditorLexicons lex = shipped();
  const AnnotatedCaption base = AnnotatedCaption::unedited("một cô bé đang cười");
  CHECK(add_emotion(base, "neutral", lex).edits.empty());
  CHECK(add_emotion(base, "neutral", lex, true).text == "một cô bé với vẻ mặt trung lập đang cười");
  const AnnotatedCaption once = add_emotion(base, "sad", lex);
  CHECK(once.text == "một cô bé với vẻ mặt buồn bã đang cười");
  const auto match = find_person_noun(once.text, lex);
  CHECK_THROWS_AS(insert_emotion(once, *match, emotion_by_name("happy")), ContractError);
  CHECK_THROWS_AS(insert_emotion(base, PersonMatch{"cô bé", 0, 6}, emotion_by_name("happy")), ContractError);
}

TEST_CASE("color word detection") {
  const EditorLexicons lex = shipped();
  const auto words = detect_color_words("chó đen và trắng", lex);
  REQUIRE(words.size() == 2);
  CHECK(words[0].word == "đen");
  CHECK(words[1].word == "trắng");
  // "đồng" inside "cánh đồng" is not the color word "đồng"
  CHECK(detect_color_words("chạy qua một cánh đồng", lex).empty());
  CHECK(detect_color_words("chiếc chuông đồng", lex).size() == 1);
  // multi-syllable color terms
  const auto green = detect_color_words("một quả bóng xanh lá", lex);
  REQUIRE(green.size() == 1);
  CHECK(green[0].word == "xanh lá");
}

TEST_CASE("only the first color phrase is replaced") {
  const EditorLexicons lex = shipped();
  const auto phrase = find_color_phrase("con chó đen chạy cạnh con mèo trắng", lex);
  REQUIRE(phrase);
  CHECK(phrase->phrase == "đen");
  CHECK(phrase->object_noun == "chó");
  CHECK(fix_color("con chó đen chạy cạnh con mèo trắng", "nâu", lex).text == "con chó nâu chạy cạnh con mèo trắng");
  CHECK(fix_color("con chó nâu", "nâu", lex).edits.empty());
  CHECK(find_color_phrase("đỏ và vàng", lex)->object_noun.empty());
}

TEST_CASE("edit traces replay to the final caption") {
  const EditorLexicons lex = shipped();
  const char* captions[] = {"một con chó đen và trắng đang chạy qua một cánh đồng",
                            "một cậu bé mặc áo đỏ đang chơi", "một bé gái cầm một quả bóng bay hồng",
                            "một người phụ nữ và một con mèo xám", "không có gì"};
  const char* colors[] = {"nâu", "xanh dương", "đỏ"};
  const char* emotions[] = {"happy", "sad", "surprised", "neutral"};
  for (const char* caption : captions)
    for (const char* color : colors)
      for (const char* emotion : emotions) {
        const AnnotatedCaption c = add_emotion(fix_color(caption, color, lex), emotion, lex);
        CHECK(apply_edits(c.original, c.edits) == c.text);
        CHECK(c.original == caption);
      }
}

TEST_CASE("apply_edits rejects edits that do not match") {
  CHECK_THROWS_AS(apply_edits("abc", {Edit{EditKind::color_replaced, 0, 1, "x", "y"}}), ContractError);
  CHECK_THROWS_AS(apply_edits("abc", {Edit{EditKind::color_replaced, 2, 9, "c", "y"}}), ContractError);
}
