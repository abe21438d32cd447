#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace loopbreak {

struct PreferenceSeed {
  std::string instruction;
  std::string input;
  std::string chosen;
  std::string repetition_unit;
  /// Byte offset into `chosen`; nullopt appends at the end.
  std::optional<std::size_t> insertion_point;
  std::string separator = "\n";
};

struct PreferencePair {
  std::string instruction;
  std::string input;
  std::string chosen;
  std::string rejected;
  std::size_t degree = 0;  ///< not stored on disk; 0 after read_dataset

  bool operator==(const PreferencePair&) const = default;
};

inline const std::vector<std::size_t> kDefaultDegrees = {2, 4, 8, 16};

/// Non-overlapping left-to-right occurrences of `needle` in `haystack`.
std::size_t count_occurrences(const std::string& haystack, const std::string& needle);

/// `chosen` with n adjacent copies of the unit (separator-terminated) spliced
/// in at the insertion point. Throws InvalidArgument for n = 0, an empty
/// unit or chosen text, an offset past the end, or one that splits a UTF-8
/// code point.
std::string build_rejected(const PreferenceSeed& seed, std::size_t n);

std::vector<PreferencePair> generate_pairs(
    const PreferenceSeed& seed, const std::vector<std::size_t>& degrees = kDefaultDegrees);

/// One JSON object per line with the fields instruction, input, chosen,
/// rejected. Throws IoError when the file cannot be written.
void write_dataset(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path);

/// Throws IoError on an unreadable file and FormatError naming the line for
/// malformed records or missing fields. Blank lines are skipped.
std::vector<PreferencePair> read_dataset(const std::filesystem::path& path);

/// Empty when the pair is consistent with its seed.
std::vector<std::string> validate_pair(const PreferencePair& pair, const PreferenceSeed& seed);

/// Parses a JSON array of seed objects. `insertion_point` is an integer or
/// the string "end". Throws InvalidConfig.
std::vector<PreferenceSeed> parse_seeds(const std::string& json_text);

/// Small built-in seed set covering a rule list, a call list and a closing
/// keyword run.
std::vector<PreferenceSeed> builtin_seeds();

}  // namespace loopbreak
