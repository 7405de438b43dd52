#include "credtext/tokenize.hpp"

namespace credtext {
namespace utf8 {

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (b0 < 0x80) {
      cp = b0;
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
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    bool ok = i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (!ok) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

bool is_space(char32_t cp) noexcept {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200B);
}

bool is_punct(char32_t cp) noexcept {
  if (cp < 0x80) {
    // apostrophe stays inside words ("borrower's")
    if (cp == '\'') return false;
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
           (cp >= 0x7B && cp <= 0x7E);
  }
  if (cp == 0x2019) return false;  // typographic apostrophe
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
         (cp >= 0x3014 && cp <= 0x301F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65) || cp == 0x00A1 || cp == 0x00BF || cp == 0x00AB ||
         cp == 0x00BB || cp == 0x00B7;
}

bool is_phrase_delimiter(char32_t cp) noexcept {
  switch (cp) {
    case ',': case '.': case ';': case '!': case '?':
    case 0xFF0C:  // ，
    case 0x3002:  // 。
    case 0xFF1B:  // ；
    case 0xFF01:  // ！
    case 0xFF1F:  // ？
    case 0x3001:  // 、
      return true;
    default:
      return false;
  }
}

}  // namespace utf8

namespace {

void append_lowered(std::string& out, std::string_view piece, bool lowercase) {
  if (!lowercase) {
    out.append(piece);
    return;
  }
  for (char c : piece) out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
}

}  // namespace

std::vector<std::string> Tokenizer::operator()(std::string_view text) const {
  std::vector<std::string> tokens;
  const auto cps = utf8::decode(text);
  if (mode == TokenMode::Char) {
    for (const auto& cp : cps) {
      if (utf8::is_space(cp.value) || utf8::is_punct(cp.value)) continue;
      std::string tok;
      append_lowered(tok, text.substr(cp.offset, cp.length), lowercase);
      tokens.push_back(std::move(tok));
    }
    return tokens;
  }
  std::string current;
  for (const auto& cp : cps) {
    if (utf8::is_space(cp.value) || utf8::is_punct(cp.value)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    append_lowered(current, text.substr(cp.offset, cp.length), lowercase);
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> tokenize(const Tokenizer& tokenizer, std::string_view text) {
  return tokenizer(text);
}

}  // namespace credtext
