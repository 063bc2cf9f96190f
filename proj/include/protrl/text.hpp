#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace protrl::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

/// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string collapse_whitespace_lower(std::string_view s);

/// Number of whitespace-separated words; the scripted backend's token estimate.
std::int64_t word_count(std::string_view s);

/// 64-bit FNV-1a. Stable across platforms and process restarts.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// 16 lowercase hex digits of fnv1a64(bytes).
std::string digest_hex(std::string_view bytes);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Cuts `s` to at most `max_bytes` bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);

}  // namespace protrl::text
