#pragma once

// UTF-8 helpers and the tweet normalizer.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace moralkb {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
void utf8_append(std::string& out, char32_t cp);

/// Number of code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

bool is_space(char32_t cp);
/// Letters, digits and underscore, plus non-ASCII code points outside the
/// punctuation and symbol blocks.
bool is_word_char(char32_t cp);

/// Strips user mentions (replaced by AT_USER), URLs, hashtag marks and
/// punctuation, then collapses whitespace.
std::string normalize_text(std::string_view raw);

/// Maximal runs of non-whitespace, in order.
std::vector<std::string> tokenize(std::string_view clean);

/// A token plus its code point span in the source string.
struct TokenSpan {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
};

std::vector<TokenSpan> tokenize_with_spans(std::string_view clean);

/// ASCII lowercase; non-ASCII bytes are left untouched.
std::string ascii_lower(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace moralkb
