#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace protofsm::segmenter {

// One split rule. Line-regex separators split before every line the pattern
// matches; the built-in kinds cover function heads, blank lines, line starts,
// word boundaries and single characters.
struct Separator {
  enum class Kind { kLineRegex, kFunction, kBlankLine, kNewline, kSpace, kChar };
  Kind kind = Kind::kChar;
  std::string pattern;  // as written in a table: a regex or "<function>", "<blank>", ...
  std::shared_ptr<const std::regex> regex;
};

// Ordered highest structural level first. The last entry is always kChar.
class SeparatorTable {
 public:
  // Throws ConfigError on a bad regex. Appends "<char>" when missing.
  SeparatorTable(std::string language, const std::vector<std::string>& patterns);

  const std::string& language() const noexcept { return language_; }
  const std::vector<Separator>& separators() const noexcept { return separators_; }

 private:
  std::string language_;
  std::vector<Separator> separators_;
};

// Tables for "c", "cpp", "python", "go" and "text". Unknown names get "text".
SeparatorTable builtin_separators(std::string_view language);

// Picks a built-in language key from a file extension.
std::string language_for_path(std::string_view path);

// JSON object: language -> ordered list of patterns. Entries override built-ins.
std::map<std::string, SeparatorTable> load_separator_tables(const std::filesystem::path& path);

// Sizes are in bytes of UTF-8 text; splits never land inside a code point.
struct SegmenterConfig {
  std::size_t max_chunk_size = 4000;
  std::size_t min_chunk_size = 400;
  std::size_t overlap = 200;
  std::string language = "c";
  // Only used to translate sizes to model-token estimates in reports.
  double chars_per_token = 4.0;

  // Throws ConfigError.
  void validate() const;
};

struct Chunk {
  std::string doc_path;
  std::size_t ordinal = 0;
  std::size_t byte_start = 0;  // core region [byte_start, byte_end)
  std::size_t byte_end = 0;
  std::string text;  // overlap prefix + core
  std::size_t overlap_len = 0;

  std::string_view core() const { return std::string_view(text).substr(overlap_len); }

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// Replaces invalid UTF-8 bytes with U+FFFD. Returns true if anything changed.
bool sanitize_utf8(std::string& text);

std::vector<Chunk> segment(std::string_view document, const SegmenterConfig& config, const SeparatorTable& table,
                           const std::string& doc_path = "");

// Uses the built-in table for config.language.
std::vector<Chunk> segment(std::string_view document, const SegmenterConfig& config,
                           const std::string& doc_path = "");

// Concatenates core regions. Throws IntegrityError on gaps or overlaps.
std::string reconstruct(const std::vector<Chunk>& chunks);

nlohmann::ordered_json manifest(const std::vector<Chunk>& chunks);

}  // namespace protofsm::segmenter
