#include <gtest/gtest.h>

#include <algorithm>

#include "geoloc/tokenize.hpp"

using namespace geoloc;

namespace {

std::vector<std::string> texts(const std::vector<Token>& ts) {
  std::vector<std::string> out;
  for (const auto& t : ts) out.push_back(t.text);
  return out;
}

using V = std::vector<std::string>;

}  // namespace

TEST(Tokenize, CandidateSplit) {
  EXPECT_EQ(texts(split_candidates("Can't wait for 私の")), (V{"can", "t", "wait", "for", "私の"}));
  EXPECT_TRUE(split_candidates("").empty());
  EXPECT_TRUE(split_candidates("123 !!").empty());
  EXPECT_EQ(texts(split_candidates("abc123def")), (V{"abc", "def"}));
  EXPECT_EQ(texts(split_candidates("ÉCOLE")), (V{"école"}));
  // a script change alone splits a run
  EXPECT_EQ(texts(split_candidates("abcабв")), (V{"abc", "абв"}));
}

TEST(Tokenize, KatakanaProlongedMarkStaysInRun) {
  EXPECT_EQ(texts(split_candidates("ラーメン")), (V{"ラーメン"}));
}

TEST(Tokenize, InvalidUtf8Separates) {
  EXPECT_EQ(texts(split_candidates(std::string("ab\xff" "cd"))), (V{"ab", "cd"}));
}

TEST(Tokenize, ScriptFilter) {
  // Thai text is dropped, Latin kept
  EXPECT_EQ(texts(filter_scripts(split_candidates("hello สวัสดี world"))), (V{"hello", "world"}));
  EXPECT_EQ(texts(filter_scripts(split_candidates("ພາສາລາວ ខ្មែរ မြန်မာ ok"))), (V{"ok"}));
}

TEST(Tokenize, CjkSegmentation) {
  const auto cands = split_candidates("私の");
  ASSERT_EQ(cands.size(), 1u);
  EXPECT_TRUE(is_cjk_script(cands[0].script));
  EXPECT_EQ(segment_cjk(cands[0], per_character_segmenter), (V{"私", "の"}));
  const Segmenter whole = [](std::string_view s) { return V{std::string(s)}; };
  EXPECT_EQ(tokenize_text("東京タワー", whole), (V{"東京タワー"}));
}

TEST(Tokenize, PaperExample) {
  const V expected{"can", "t", "wait", "for", "私", "の", "can t", "t wait", "wait for", "for 私", "私 の"};
  EXPECT_EQ(tokenize_text("Can't wait for 私の"), expected);
}

TEST(Tokenize, NGramsOrderAndSize) {
  const V tokens{"a", "b", "c"};
  EXPECT_EQ(ngrams(tokens, 2), (V{"a", "b", "c", "a b", "b c"}));
  EXPECT_EQ(ngrams(tokens, 1), (V{"a", "b", "c"}));
  EXPECT_EQ(ngrams(tokens, 3).back(), "a b c");
  EXPECT_TRUE(ngrams(V{}, 2).empty());
  EXPECT_EQ(ngrams(V{"x"}, 2), (V{"x"}));
}

TEST(Tokenize, OptionFields) {
  EXPECT_EQ(normalize_option("Eastern Time (US & Canada)"), "easterntimeuscanada");
  EXPECT_EQ(normalize_option("en-GB"), "engb");
  EXPECT_EQ(normalize_option("  "), "");
}

TEST(Tokenize, MessageTagsFields) {
  RawRecord r;
  r.id = "1";
  r.text = "New York";
  r.user_location = "new york";
  r.user_lang = "en";
  r.user_timezone = "Eastern Time (US & Canada)";
  r.origin = GeoPoint{-74, 40.7};
  const std::vector<Field> fields{Field::tx, Field::lo, Field::ln, Field::tz};
  const Message m = tokenize_message(r, fields);
  EXPECT_TRUE(std::is_sorted(m.grams.begin(), m.grams.end()));
  EXPECT_EQ(m.grams.size(), 8u);
  EXPECT_TRUE(std::binary_search(m.grams.begin(), m.grams.end(), NGram{Field::tx, "new york"}));
  EXPECT_TRUE(std::binary_search(m.grams.begin(), m.grams.end(), NGram{Field::lo, "new york"}));
  EXPECT_TRUE(std::binary_search(m.grams.begin(), m.grams.end(), NGram{Field::tz, "easterntimeuscanada"}));
  EXPECT_TRUE(std::binary_search(m.grams.begin(), m.grams.end(), NGram{Field::ln, "en"}));
  EXPECT_NE((NGram{Field::tx, "york"}), (NGram{Field::lo, "york"}));
  ASSERT_TRUE(m.origin);

  // fields not requested contribute nothing; duplicates collapse
  r.text = "go go go";
  const std::vector<Field> tx_only{Field::tx};
  const Message t = tokenize_message(r, tx_only);
  EXPECT_EQ(t.grams.size(), 2u);  // "go", "go go"
}
