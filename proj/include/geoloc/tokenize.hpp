#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoloc/corpus.hpp"
#include "geoloc/types.hpp"

namespace geoloc {

/// Unicode script of a token, as an ICU UScriptCode value.
using ScriptCode = int;

struct Token {
  std::string text;
  ScriptCode script = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Splits a CJK run into words. Must be safe to call concurrently.
using Segmenter = std::function<std::vector<std::string>(std::string_view)>;

/// One token per code point.
std::vector<std::string> per_character_segmenter(std::string_view run);

/// Maximal runs of code points sharing general category class and script.
/// Han, Hiragana and Katakana count as one script here, and Common or
/// Inherited code points whose script extensions cover the run's script do
/// not break it. Only letter runs survive, lower-cased. Invalid UTF-8
/// sequences act as separators.
std::vector<Token> split_candidates(std::string_view s);

/// Drops Thai, Lao, Khmer, Myanmar, Common and Inherited runs.
std::vector<Token> filter_scripts(std::vector<Token> tokens);

bool is_cjk_script(ScriptCode script);

std::vector<std::string> segment_cjk(const Token& token, const Segmenter& segmenter);

/// All k-grams for k = 1..n, unigrams first, space-joined, duplicates kept.
std::vector<std::string> ngrams(std::span<const std::string> tokens, int n = 2);

/// Lower-cases and strips everything that is not a letter or digit. Used for
/// the option-valued ln and tz fields.
std::string normalize_option(std::string_view s);

/// Full free-text pipeline: split, filter, segment, n-grams.
std::vector<std::string> tokenize_text(std::string_view s, const Segmenter& segmenter = per_character_segmenter,
                                       int n = 2);

/// Field-tagged n-gram set for the requested fields.
Message tokenize_message(const RawRecord& r, std::span<const Field> fields,
                         const Segmenter& segmenter = per_character_segmenter);

}  // namespace geoloc
