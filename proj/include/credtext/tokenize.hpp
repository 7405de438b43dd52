#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace credtext {

enum class TokenMode { Word, Char };

/// Splits UTF-8 text into tokens. Word mode breaks on whitespace and
/// punctuation (ASCII and CJK); char mode emits one token per code point
/// that is neither whitespace nor punctuation. Lowercasing touches ASCII only.
struct Tokenizer {
  TokenMode mode = TokenMode::Word;
  bool lowercase = true;

  std::vector<std::string> operator()(std::string_view text) const;
};

std::vector<std::string> tokenize(const Tokenizer& tokenizer, std::string_view text);

namespace utf8 {

struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
};

/// Decodes UTF-8; invalid bytes decode to U+FFFD of length 1.
std::vector<CodePoint> decode(std::string_view text);

bool is_space(char32_t cp) noexcept;
bool is_punct(char32_t cp) noexcept;
/// The narrower set used to cut phrases: , . ; ! ? and their full-width forms plus 、
bool is_phrase_delimiter(char32_t cp) noexcept;

}  // namespace utf8
}  // namespace credtext
