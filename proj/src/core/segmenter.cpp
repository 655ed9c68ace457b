#include "segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "errors.hpp"
#include "file_io.hpp"
#include "fsm_model.hpp"
#include "log.hpp"

namespace protofsm::segmenter {
namespace {

using Kind = Separator::Kind;

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

bool at_codepoint_boundary(std::string_view doc, std::size_t pos) {
  return pos == 0 || pos >= doc.size() || !is_continuation(static_cast<unsigned char>(doc[pos]));
}

std::string_view trim_right(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view trim_left(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

struct Line {
  std::size_t start;
  std::string_view text;  // without the newline
};

std::vector<Line> split_lines(std::string_view doc) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < doc.size()) {
    std::size_t eol = doc.find('\n', pos);
    if (eol == std::string_view::npos) eol = doc.size();
    lines.push_back({pos, doc.substr(pos, eol - pos)});
    pos = eol + 1;
  }
  return lines;
}

bool starts_with_word(std::string_view line, std::string_view word) {
  if (line.substr(0, word.size()) != word) return false;
  return line.size() == word.size() || !(std::isalnum(static_cast<unsigned char>(line[word.size()])) || line[word.size()] == '_');
}

// "identifier(...)" at column 0 whose body brace opens on the same line or
// the next non-blank line.
bool looks_like_function_head(const std::vector<Line>& lines, std::size_t i) {
  std::string_view line = trim_right(lines[i].text);
  if (line.empty()) return false;
  const auto c0 = static_cast<unsigned char>(line[0]);
  if (!(std::isalpha(c0) || c0 == '_')) return false;
  for (std::string_view kw : {"if", "else", "for", "while", "switch", "return", "do", "case", "default", "goto"}) {
    if (starts_with_word(line, kw)) return false;
  }
  if (line.find('(') == std::string_view::npos) return false;
  if (line.back() == ';') return false;
  if (line.back() == '{') return true;
  for (std::size_t j = i + 1; j < lines.size(); ++j) {
    std::string_view next = trim_left(trim_right(lines[j].text));
    if (next.empty()) continue;
    return next.front() == '{' && lines[j].text.front() == '{';
  }
  return false;
}

// A bare "static int" line directly above a function head belongs to it.
bool looks_like_return_type_line(std::string_view line) {
  line = trim_right(line);
  if (line.empty()) return false;
  const auto c0 = static_cast<unsigned char>(line[0]);
  if (!(std::isalpha(c0) || c0 == '_')) return false;
  if (line.find_first_of(";{}()=#/") != std::string_view::npos) return false;
  return true;
}

std::vector<std::size_t> compute_points(std::string_view doc, const std::vector<Line>& lines, const Separator& sep) {
  std::vector<std::size_t> pts;
  switch (sep.kind) {
    case Kind::kLineRegex:
      for (const auto& l : lines) {
        if (l.start == 0) continue;
        if (std::regex_search(l.text.begin(), l.text.end(), *sep.regex)) pts.push_back(l.start);
      }
      break;
    case Kind::kFunction:
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!looks_like_function_head(lines, i)) continue;
        std::size_t at = lines[i].start;
        if (i > 0 && looks_like_return_type_line(lines[i - 1].text)) at = lines[i - 1].start;
        if (at > 0) pts.push_back(at);
      }
      break;
    case Kind::kBlankLine:
      // Start of the first non-blank line after one or more blank lines.
      for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim_right(lines[i].text).empty()) continue;
        if (trim_right(lines[i - 1].text).empty()) pts.push_back(lines[i].start);
      }
      break;
    case Kind::kNewline:
      for (const auto& l : lines) {
        if (l.start > 0) pts.push_back(l.start);
      }
      break;
    case Kind::kSpace:
      for (std::size_t p = 1; p < doc.size(); ++p) {
        if (doc[p - 1] == ' ' && doc[p] != ' ') pts.push_back(p);
      }
      break;
    case Kind::kChar:
      for (std::size_t p = 1; p < doc.size(); ++p) {
        if (at_codepoint_boundary(doc, p)) pts.push_back(p);
      }
      break;
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

struct Range {
  std::size_t begin;
  std::size_t end;
  std::size_t size() const { return end - begin; }
};

constexpr std::size_t kNoLevel = std::numeric_limits<std::size_t>::max();

class Splitter {
 public:
  Splitter(std::string_view doc, const SegmenterConfig& cfg, const SeparatorTable& table) : doc_(doc), cfg_(cfg) {
    const auto lines = split_lines(doc);
    for (const auto& sep : table.separators()) points_.push_back(compute_points(doc, lines, sep));
  }

  std::vector<Range> run() {
    std::vector<Range> pieces;
    split({0, doc_.size()}, 0, pieces);
    auto merged = merge_small(pieces);
    repair(merged);
    return merged;
  }

 private:
  // Phase 1: recursive descent through the separator levels.
  void split(Range r, std::size_t level, std::vector<Range>& out) const {
    if (r.size() <= cfg_.max_chunk_size) {
      out.push_back(r);
      return;
    }
    for (std::size_t l = level; l < points_.size(); ++l) {
      const auto& pts = points_[l];
      auto lo = std::upper_bound(pts.begin(), pts.end(), r.begin);
      auto hi = std::lower_bound(pts.begin(), pts.end(), r.end);
      if (lo == hi) continue;
      std::size_t start = r.begin;
      for (auto it = lo; it != hi; ++it) {
        split({start, *it}, l + 1, out);
        start = *it;
      }
      split({start, r.end}, l + 1, out);
      return;
    }
    // Only reachable for a single multi-byte code point larger than max.
    out.push_back(r);
  }

  // Phase 2: forward merge of undersized pieces, backward for the tail.
  std::vector<Range> merge_small(const std::vector<Range>& pieces) const {
    std::vector<Range> out;
    std::size_t i = 0;
    while (i < pieces.size()) {
      Range cur = pieces[i++];
      while (cur.size() < cfg_.min_chunk_size && i < pieces.size() &&
             cur.size() + pieces[i].size() <= cfg_.max_chunk_size) {
        cur.end = pieces[i++].end;
      }
      out.push_back(cur);
    }
    if (out.size() > 1 && out.back().size() < cfg_.min_chunk_size &&
        out[out.size() - 2].size() + out.back().size() <= cfg_.max_chunk_size) {
      out[out.size() - 2].end = out.back().end;
      out.pop_back();
    }
    return out;
  }

  std::size_t level_at(std::size_t pos) const {
    for (std::size_t l = 0; l < points_.size(); ++l) {
      if (std::binary_search(points_[l].begin(), points_[l].end(), pos)) return l;
    }
    return kNoLevel;
  }

  // A piece still below min sits between neighbours too large to absorb it.
  // Re-cut the pair at the most structural boundary that leaves both sides
  // within [min, max]. Needs max >= 2 * min to always succeed.
  void repair(std::vector<Range>& chunks) const {
    const std::size_t mn = cfg_.min_chunk_size;
    const std::size_t mx = cfg_.max_chunk_size;
    std::size_t i = 0;
    while (i < chunks.size() && chunks.size() > 1) {
      if (chunks[i].size() >= mn) {
        ++i;
        continue;
      }
      const bool forward = i + 1 < chunks.size();
      const std::size_t a = forward ? i : i - 1;
      const Range joined{chunks[a].begin, chunks[a + 1].end};
      const std::size_t len = joined.size();
      if (len <= mx) {
        chunks[a] = joined;
        chunks.erase(chunks.begin() + static_cast<std::ptrdiff_t>(a) + 1);
        i = a;
        continue;
      }
      const std::size_t lo = std::max(mn, len - std::min(len, mx));
      const std::size_t hi = std::min(mx, len - std::min(len, mn));
      const std::size_t old_cut = chunks[a].end - joined.begin;
      std::size_t best_pos = 0;
      std::size_t best_level = kNoLevel;
      std::size_t best_dist = kNoLevel;
      for (std::size_t off = lo; off <= hi; ++off) {
        const std::size_t lvl = level_at(joined.begin + off);
        if (lvl == kNoLevel) continue;
        const std::size_t dist = off > old_cut ? off - old_cut : old_cut - off;
        if (lvl < best_level || (lvl == best_level && dist < best_dist)) {
          best_level = lvl;
          best_dist = dist;
          best_pos = joined.begin + off;
        }
      }
      if (best_level == kNoLevel) {
        log::debug("segmenter: cannot satisfy min chunk size (max < 2 * min)");
        ++i;
        continue;
      }
      chunks[a] = {joined.begin, best_pos};
      chunks[a + 1] = {best_pos, joined.end};
      ++i;
    }
  }

  std::string_view doc_;
  const SegmenterConfig& cfg_;
  std::vector<std::vector<std::size_t>> points_;
};

Separator make_separator(const std::string& pattern) {
  Separator s;
  s.pattern = pattern;
  if (pattern == "<function>") {
    s.kind = Kind::kFunction;
  } else if (pattern == "<blank>") {
    s.kind = Kind::kBlankLine;
  } else if (pattern == "<newline>") {
    s.kind = Kind::kNewline;
  } else if (pattern == "<space>") {
    s.kind = Kind::kSpace;
  } else if (pattern == "<char>") {
    s.kind = Kind::kChar;
  } else {
    s.kind = Kind::kLineRegex;
    try {
      s.regex = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError("separator regex does not compile: " + pattern + " (" + e.what() + ")");
    }
  }
  return s;
}

}  // namespace

SeparatorTable::SeparatorTable(std::string language, const std::vector<std::string>& patterns)
    : language_(std::move(language)) {
  for (const auto& p : patterns) separators_.push_back(make_separator(p));
  if (separators_.empty() || separators_.back().kind != Kind::kChar) separators_.push_back(make_separator("<char>"));
}

SeparatorTable builtin_separators(std::string_view language) {
  if (language == "c") {
    return SeparatorTable("c", {R"(^(typedef\s+)?(struct|union|enum|class)\b)", R"(^typedef\b)", "<function>",
                                "<blank>", "<newline>", "<space>", "<char>"});
  }
  if (language == "cpp") {
    return SeparatorTable("cpp", {R"(^(template\s*<.*>\s*)?(class|struct|union|enum|namespace)\b)",
                                  R"(^(typedef|using)\b)", "<function>", "<blank>", "<newline>", "<space>", "<char>"});
  }
  if (language == "python") {
    return SeparatorTable("python", {R"(^class\s)", R"(^(async\s+)?def\s)", R"(^\s+(async\s+)?def\s)", "<blank>",
                                     "<newline>", "<space>", "<char>"});
  }
  if (language == "go") {
    return SeparatorTable("go", {R"(^type\s)", R"(^func\s)", R"(^(var|const)\s)", "<blank>", "<newline>", "<space>",
                                 "<char>"});
  }
  return SeparatorTable("text", {"<blank>", "<newline>", "<space>", "<char>"});
}

std::string language_for_path(std::string_view path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string_view::npos ? "" : std::string(path.substr(dot));
  if (ext == ".c" || ext == ".h") return "c";
  if (ext == ".cc" || ext == ".cpp" || ext == ".cxx" || ext == ".hpp" || ext == ".hh") return "cpp";
  if (ext == ".py") return "python";
  if (ext == ".go") return "go";
  return "text";
}

std::map<std::string, SeparatorTable> load_separator_tables(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = fsm::parse_json_text(read_file(path), path.string());
  } catch (const Error& e) {
    throw ConfigError(std::string("separator table file: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("separator table file must map language -> pattern list");
  std::map<std::string, SeparatorTable> out;
  for (const auto& [lang, arr] : doc.items()) {
    if (!arr.is_array()) throw ConfigError("separator list for '" + lang + "' must be an array");
    std::vector<std::string> patterns;
    for (const auto& p : arr) {
      if (!p.is_string()) throw ConfigError("separator patterns must be strings");
      patterns.push_back(p.get<std::string>());
    }
    out.emplace(lang, SeparatorTable(lang, patterns));
  }
  return out;
}

void SegmenterConfig::validate() const {
  if (max_chunk_size == 0) throw ConfigError("max_chunk_size must be > 0");
  if (min_chunk_size >= max_chunk_size) throw ConfigError("min_chunk_size must be < max_chunk_size");
  if (overlap >= max_chunk_size) throw ConfigError("overlap must be < max_chunk_size");
  if (!(chars_per_token > 0)) throw ConfigError("chars_per_token must be > 0");
}

bool sanitize_utf8(std::string& text) {
  std::string out;
  bool changed = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  while (i < n) {
    const unsigned char c = byte(i);
    std::size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if (c >= 0xC2 && c <= 0xDF) {
      len = 2;
    } else if (c >= 0xE0 && c <= 0xEF) {
      len = 3;
    } else if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
    }
    bool ok = len > 0 && i + len <= n;
    for (std::size_t k = 1; ok && k < len; ++k) ok = is_continuation(byte(i + k));
    if (ok && len == 3) {
      const unsigned char c1 = byte(i + 1);
      if ((c == 0xE0 && c1 < 0xA0) || (c == 0xED && c1 > 0x9F)) ok = false;
    }
    if (ok && len == 4) {
      const unsigned char c1 = byte(i + 1);
      if ((c == 0xF0 && c1 < 0x90) || (c == 0xF4 && c1 > 0x8F)) ok = false;
    }
    if (ok) {
      out.append(text, i, len);
      i += len;
    } else {
      out += "\xEF\xBF\xBD";
      changed = true;
      ++i;
    }
  }
  if (changed) text = std::move(out);
  return changed;
}

std::vector<Chunk> segment(std::string_view document, const SegmenterConfig& config, const SeparatorTable& table,
                           const std::string& doc_path) {
  config.validate();
  if (document.empty()) return {};
  std::string doc(document);
  if (sanitize_utf8(doc)) log::warn("invalid UTF-8 replaced in " + (doc_path.empty() ? std::string("document") : doc_path));

  const auto ranges = Splitter(doc, config, table).run();

  std::vector<Chunk> chunks;
  chunks.reserve(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    Chunk c;
    c.doc_path = doc_path;
    c.ordinal = i;
    c.byte_start = ranges[i].begin;
    c.byte_end = ranges[i].end;
    if (i > 0 && config.overlap > 0) {
      const Range& prev = ranges[i - 1];
      std::size_t ov = std::min(config.overlap, prev.size());
      while (ov > 0 && !at_codepoint_boundary(doc, prev.end - ov)) --ov;
      c.overlap_len = ov;
      c.text = doc.substr(prev.end - ov, ov);
    }
    c.text += doc.substr(c.byte_start, c.byte_end - c.byte_start);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::vector<Chunk> segment(std::string_view document, const SegmenterConfig& config, const std::string& doc_path) {
  return segment(document, config, builtin_separators(config.language), doc_path);
}

std::string reconstruct(const std::vector<Chunk>& chunks) {
  std::string out;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    if (c.doc_path != chunks.front().doc_path) throw IntegrityError("chunks come from different documents");
    if (c.byte_start != expected) {
      throw IntegrityError("chunk " + std::to_string(c.ordinal) + " starts at byte " + std::to_string(c.byte_start) +
                           ", expected " + std::to_string(expected));
    }
    if (c.byte_end < c.byte_start || c.overlap_len > c.text.size() ||
        c.text.size() - c.overlap_len != c.byte_end - c.byte_start) {
      throw IntegrityError("chunk " + std::to_string(c.ordinal) + " core length does not match its byte range");
    }
    out += c.core();
    expected = c.byte_end;
  }
  return out;
}

nlohmann::ordered_json manifest(const std::vector<Chunk>& chunks) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : chunks) {
    arr.push_back({{"path", c.doc_path},
                   {"ordinal", c.ordinal},
                   {"byte_start", c.byte_start},
                   {"byte_end", c.byte_end},
                   {"overlap_len", c.overlap_len}});
  }
  return arr;
}

}  // namespace protofsm::segmenter
