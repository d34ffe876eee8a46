#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace reflect {

// The single whitespace-splitting word count used everywhere word budgets or
// test-time compute are measured.
std::size_t word_count(std::string_view text);

std::string lowercase(std::string_view text);
std::string trim(std::string_view text);

// Lowercase, punctuation mapped to spaces, whitespace collapsed. Used for
// containment scoring and string-equality answer checks.
std::string normalize_text(std::string_view text);

// True when normalize_text(needle) occurs inside normalize_text(haystack).
bool contains_normalized(std::string_view haystack, std::string_view needle);

// Canonicalizes an answer string that is expected to be numeric: strips "$",
// commas, a trailing ".", and anything after the leading number token. Falls
// back to normalize_text when no number is found.
std::string normalize_answer(std::string_view text);

// Typographic quotes mapped to ASCII, lowercased reflection-cue form.
std::string normalize_for_cues(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Deterministic, platform-stable generator used for all seeded choices.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // uniform in [0, n); n >= 1
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

std::string format_double(double v);

}  // namespace reflect
