#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace falconer::text {

/// Decodes UTF-8 into Unicode scalar values. Invalid sequences decode as U+FFFD.
std::vector<char32_t> decode(std::string_view utf8);
std::string encode(char32_t scalar);

bool is_whitespace(char32_t c);
bool is_punctuation(char32_t c);
bool is_alnum(char32_t c);

/// Full Unicode lowercasing (root locale).
std::string lowercase(std::string_view utf8);

/// Byte offset lookup for scalar offsets of one string. Offsets used across
/// the library index Unicode scalar values; this does the translation.
class ScalarIndex {
 public:
  explicit ScalarIndex(std::string_view utf8);

  std::size_t size() const noexcept { return byte_offsets_.size() - 1; }
  std::size_t byte_offset(std::size_t scalar_offset) const { return byte_offsets_.at(scalar_offset); }

  /// text[start..end) in scalar offsets. Throws std::out_of_range if end > size().
  std::string_view slice(std::string_view utf8, std::size_t start, std::size_t end) const;

 private:
  std::vector<std::size_t> byte_offsets_;
};

std::size_t scalar_length(std::string_view utf8);

}  // namespace falconer::text
