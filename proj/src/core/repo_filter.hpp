#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace protofsm::filter {

enum class KeywordOrigin { kRfc, kExpert };

// kSubstring and kWholeToken are literal, case-insensitive. kRegex is an
// ECMAScript pattern, also case-insensitive, applied line by line.
enum class MatchMode { kSubstring, kWholeToken, kRegex };

struct Keyword {
  std::string pattern;
  KeywordOrigin origin = KeywordOrigin::kRfc;
  MatchMode mode = MatchMode::kSubstring;
};

class KeywordSet {
 public:
  // Throws ConfigError if `keywords` is empty or a regex does not compile.
  KeywordSet(std::string protocol, std::vector<Keyword> keywords);

  const std::string& protocol() const noexcept { return protocol_; }
  const std::vector<Keyword>& keywords() const noexcept { return keywords_; }

  // Number of occurrences of keyword `i` in `text`.
  std::size_t count_hits(std::size_t i, std::string_view text, std::string_view lowered) const;

 private:
  std::string protocol_;
  std::vector<Keyword> keywords_;
  std::vector<std::string> lowered_;
  std::vector<std::shared_ptr<const std::regex>> regexes_;
};

// Shipped sets for ikev2, tls, bgp, rtsp and l2tp. Throws UnknownProtocol.
KeywordSet builtin_keywords(std::string_view protocol);

// Text format: one pattern per line, '#' starts a comment line. A line may
// start with "@rfc " or "@expert " to tag its origin (default rfc), and the
// pattern may carry a "re:" (regex) or "word:" (whole token) prefix.
KeywordSet parse_keyword_file(std::string_view text, std::string protocol);
KeywordSet load_keyword_file(const std::filesystem::path& path, std::string protocol);

struct ScanConfig {
  std::vector<std::string> source_extensions{".c", ".h", ".cc", ".cpp", ".hpp", ".py", ".go", ".rs", ".java"};
  // A document counts as matched once its total hits reach this value.
  std::size_t min_hits = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct DocumentMatch {
  std::string path;  // repo-relative, '/' separated
  bool is_source = false;
  bool matched = false;
  std::vector<std::pair<std::string, std::size_t>> hits;
};

// Walks `repo_root` (skipping dot-directories) and matches every source file.
// Results are sorted by path.
std::vector<DocumentMatch> scan(const std::filesystem::path& repo_root, const KeywordSet& ks,
                                const ScanConfig& config = {});

struct DirectoryRate {
  std::string dir;  // "." for the repository root
  std::size_t matched_docs = 0;
  std::size_t total_docs = 0;
  double rate = 0.0;
};

struct ModuleSelection {
  std::string chosen_dir;
  double match_rate = 0.0;
  std::vector<DirectoryRate> table;  // sorted by dir
};

// Highest matched/total over every directory subtree holding at least
// `min_docs` source files. Ties: more matched docs, then shallower, then
// lexicographically smaller path. Throws NoModuleFound.
ModuleSelection select_module(const std::vector<DocumentMatch>& matches, std::size_t min_docs = 2);

nlohmann::ordered_json to_json(const ModuleSelection& selection);

// Source-file paths under `dir` ("." = everything).
std::vector<std::string> documents_in(const std::vector<DocumentMatch>& matches, const std::string& dir);

}  // namespace protofsm::filter
