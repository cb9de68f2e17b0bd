#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eaco {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Words for overlap scoring: lowercased maximal runs of alphanumerics.
std::vector<std::string> tokenize_words(std::string_view s);

long whitespace_token_count(std::string_view s);
long utf8_codepoint_count(std::string_view s);

// FNV-1a, optionally chained through `seed`. Stable across platforms, unlike
// std::hash, so fixtures and reruns hash identically everywhere.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// Shortest round-trip decimal form (std::to_chars).
std::string format_double(double v);

bool iequals(std::string_view a, std::string_view b);

// Case-insensitive find; npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

// RFC 4648 base64 with padding.
std::string base64_encode(std::string_view bytes);

}  // namespace eaco
