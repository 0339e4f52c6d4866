#include "geoloc/tokenize.hpp"

#include <algorithm>

#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

namespace geoloc {

namespace {

enum class CategoryClass { letter, mark, number, punctuation, symbol, separator, other };

CategoryClass category_class(UChar32 c) {
  switch (u_charType(c)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return CategoryClass::letter;
    case U_NON_SPACING_MARK:
    case U_ENCLOSING_MARK:
    case U_COMBINING_SPACING_MARK:
      return CategoryClass::mark;
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return CategoryClass::number;
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_CONNECTOR_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
      return CategoryClass::punctuation;
    case U_MATH_SYMBOL:
    case U_CURRENCY_SYMBOL:
    case U_MODIFIER_SYMBOL:
    case U_OTHER_SYMBOL:
      return CategoryClass::symbol;
    case U_SPACE_SEPARATOR:
    case U_LINE_SEPARATOR:
    case U_PARAGRAPH_SEPARATOR:
      return CategoryClass::separator;
    default:
      return CategoryClass::other;
  }
}

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

ScriptCode script_of(UChar32 c) {
  UErrorCode status = U_ZERO_ERROR;
  UScriptCode sc = uscript_getScript(c, &status);
  return U_SUCCESS(status) ? static_cast<ScriptCode>(sc) : USCRIPT_UNKNOWN;
}

// Han, Hiragana and Katakana mix within one Japanese word, so they share a run.
ScriptCode run_key(ScriptCode sc) {
  return sc == USCRIPT_HAN || sc == USCRIPT_HIRAGANA || sc == USCRIPT_KATAKANA ? USCRIPT_JAPANESE : sc;
}

// Common or Inherited code points whose script extensions include the run's
// script (e.g. the katakana prolonged sound mark) continue the run.
bool extends_run(UChar32 c, ScriptCode sc, ScriptCode key) {
  if (sc != USCRIPT_COMMON && sc != USCRIPT_INHERITED) return false;
  if (key == USCRIPT_JAPANESE)
    return uscript_hasScript(c, USCRIPT_HAN) || uscript_hasScript(c, USCRIPT_HIRAGANA) ||
           uscript_hasScript(c, USCRIPT_KATAKANA);
  return key >= 0 && uscript_hasScript(c, static_cast<UScriptCode>(key));
}

}  // namespace

std::vector<std::string> per_character_segmenter(std::string_view run) {
  std::vector<std::string> out;
  const auto* s = reinterpret_cast<const uint8_t*>(run.data());
  const auto len = static_cast<int32_t>(run.size());
  int32_t i = 0;
  while (i < len) {
    int32_t start = i;
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) continue;
    out.emplace_back(run.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  return out;
}

std::vector<Token> split_candidates(std::string_view text) {
  std::vector<Token> out;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto len = static_cast<int32_t>(text.size());

  std::string current;
  bool in_letter_run = false;
  bool have_run = false;
  CategoryClass run_class = CategoryClass::other;
  ScriptCode run_script = USCRIPT_INVALID_CODE;  // of the run's first code point
  ScriptCode run_group = USCRIPT_INVALID_CODE;

  auto flush = [&] {
    if (in_letter_run && !current.empty()) out.push_back({std::move(current), run_script});
    current.clear();
    have_run = false;
    in_letter_run = false;
  };

  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) {
      flush();
      continue;
    }
    CategoryClass cls = category_class(c);
    ScriptCode sc = script_of(c);
    const bool same_run =
        have_run && cls == run_class && (run_key(sc) == run_group || extends_run(c, sc, run_group));
    if (!same_run) {
      flush();
      have_run = true;
      run_class = cls;
      run_script = sc;
      run_group = run_key(sc);
      in_letter_run = cls == CategoryClass::letter;
    }
    if (in_letter_run) append_utf8(current, u_tolower(c));
  }
  flush();
  return out;
}

std::vector<Token> filter_scripts(std::vector<Token> tokens) {
  std::erase_if(tokens, [](const Token& t) {
    switch (t.script) {
      case USCRIPT_THAI:
      case USCRIPT_LAO:
      case USCRIPT_KHMER:
      case USCRIPT_MYANMAR:
      case USCRIPT_COMMON:
      case USCRIPT_INHERITED:
        return true;
      default:
        return false;
    }
  });
  return tokens;
}

bool is_cjk_script(ScriptCode script) {
  return script == USCRIPT_HAN || script == USCRIPT_HIRAGANA || script == USCRIPT_KATAKANA;
}

std::vector<std::string> segment_cjk(const Token& token, const Segmenter& segmenter) {
  auto parts = segmenter(token.text);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

std::vector<std::string> ngrams(std::span<const std::string> tokens, int n) {
  std::vector<std::string> out;
  for (int k = 1; k <= n; ++k) {
    if (tokens.size() < static_cast<std::size_t>(k)) break;
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (int m = 1; m < k; ++m) {
        g += ' ';
        g += tokens[i + m];
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::string normalize_option(std::string_view text) {
  std::string out;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) continue;
    if (u_isalnum(c)) append_utf8(out, u_tolower(c));
  }
  return out;
}

std::vector<std::string> tokenize_text(std::string_view s, const Segmenter& segmenter, int n) {
  std::vector<std::string> words;
  for (const Token& t : filter_scripts(split_candidates(s))) {
    if (is_cjk_script(t.script)) {
      for (auto& w : segment_cjk(t, segmenter)) words.push_back(std::move(w));
    } else {
      words.push_back(t.text);
    }
  }
  return ngrams(words, n);
}

Message tokenize_message(const RawRecord& r, std::span<const Field> fields, const Segmenter& segmenter) {
  Message m;
  m.id = r.id;
  m.origin = r.origin;
  for (Field f : fields) {
    const std::string& value = r.field(f);
    if (value.empty()) continue;
    if (f == Field::ln || f == Field::tz) {
      std::string g = normalize_option(value);
      if (!g.empty()) m.grams.push_back({f, std::move(g)});
    } else {
      for (auto& g : tokenize_text(value, segmenter)) m.grams.push_back({f, std::move(g)});
    }
  }
  std::sort(m.grams.begin(), m.grams.end());
  m.grams.erase(std::unique(m.grams.begin(), m.grams.end()), m.grams.end());
  return m;
}

}  // namespace geoloc
