#include "moralkb/text.hpp"

#include <algorithm>

namespace moralkb {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_ascii_alpha(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char32_t c) { return c >= '0' && c <= '9'; }
bool is_handle_char(char32_t c) { return is_ascii_alpha(c) || is_ascii_digit(c) || c == '_'; }
bool is_scheme_char(char32_t c) {
  return is_ascii_alpha(c) || is_ascii_digit(c) || c == '+' || c == '.' || c == '-';
}
char32_t lower(char32_t c) { return (c >= 'A' && c <= 'Z') ? c + 32 : c; }

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

bool is_symbol_or_punct_block(char32_t c) {
  if (in(c, 0x80, 0xBF)) return c != 0xAA && c != 0xB5 && c != 0xBA;
  if (c == 0xD7 || c == 0xF7) return true;
  return in(c, 0x2000, 0x2BFF) || in(c, 0x2E00, 0x2E7F) || in(c, 0x3000, 0x303F) ||
         in(c, 0xFE00, 0xFE1F) || in(c, 0xFE30, 0xFE6F) || in(c, 0xFF00, 0xFF0F) ||
         in(c, 0xFF1A, 0xFF20) || in(c, 0xFF3B, 0xFF40) || in(c, 0xFF5B, 0xFF65) ||
         in(c, 0xFFF0, 0xFFFF) || in(c, 0x1F000, 0x1FAFF) || in(c, 0xE0000, 0xE007F) ||
         in(c, 0xD800, 0xDFFF) || c > 0x10FFFF;
}

// Start of the URL inside `chunk`, or npos.
std::size_t find_url(const std::u32string& chunk) {
  std::size_t best = std::u32string::npos;
  for (std::size_t i = 0; i + 3 <= chunk.size(); ++i) {
    if (chunk[i] == ':' && chunk[i + 1] == '/' && chunk[i + 2] == '/') {
      std::size_t s = i;
      while (s > 0 && is_scheme_char(chunk[s - 1])) --s;
      while (s < i && !is_ascii_alpha(chunk[s])) ++s;
      if (s < i) {
        best = std::min(best, s);
        break;
      }
    }
  }
  for (std::size_t i = 0; i + 4 <= chunk.size() && i < best; ++i) {
    bool boundary = i == 0 || !is_handle_char(chunk[i - 1]);
    if (boundary && lower(chunk[i]) == 'w' && lower(chunk[i + 1]) == 'w' &&
        lower(chunk[i + 2]) == 'w' && chunk[i + 3] == '.') {
      best = i;
      break;
    }
  }
  return best;
}

}  // namespace

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (!ok || cp < kMin[len] || cp > 0x10FFFF || in(cp, 0xD800, 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) utf8_append(out, cp);
  return out;
}

std::size_t utf8_length(std::string_view s) { return utf8_decode(s).size(); }

bool is_space(char32_t c) {
  return c == ' ' || in(c, 0x09, 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         in(c, 0x2000, 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_word_char(char32_t c) {
  if (c < 0x80) return is_handle_char(c);
  return !is_space(c) && !is_symbol_or_punct_block(c);
}

std::string normalize_text(std::string_view raw) {
  const std::u32string text = utf8_decode(raw);
  std::u32string out;
  out.reserve(text.size());

  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::u32string chunk = text.substr(i, j - i);
    i = j;

    if (auto url = find_url(chunk); url != std::u32string::npos) chunk.resize(url);

    out.push_back(' ');
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      char32_t c = chunk[k];
      bool at_boundary = k == 0 || !is_handle_char(chunk[k - 1]);
      if (c == '@' && at_boundary && k + 1 < chunk.size() && is_handle_char(chunk[k + 1])) {
        while (k + 1 < chunk.size() && is_handle_char(chunk[k + 1])) ++k;
        out += U" AT_USER ";
      } else if (is_word_char(c)) {
        out.push_back(c);
      } else {
        out.push_back(' ');
      }
    }
  }

  // Collapse whitespace runs and trim.
  std::u32string collapsed;
  collapsed.reserve(out.size());
  for (char32_t c : out) {
    if (c == ' ') {
      if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
    } else {
      collapsed.push_back(c);
    }
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return utf8_encode(collapsed);
}

std::vector<TokenSpan> tokenize_with_spans(std::string_view clean) {
  const std::u32string text = utf8_decode(clean);
  std::vector<TokenSpan> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    tokens.push_back({utf8_encode(std::u32string_view(text).substr(i, j - i)), i, j});
    i = j;
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view clean) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_spans(clean)) out.push_back(std::move(t.text));
  return out;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace moralkb
