#include "repo_filter.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <thread>

#include "errors.hpp"
#include "file_io.hpp"
#include "log.hpp"

namespace protofsm::filter {
namespace fs = std::filesystem;

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ident_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_';
}

}  // namespace

KeywordSet::KeywordSet(std::string protocol, std::vector<Keyword> keywords)
    : protocol_(std::move(protocol)), keywords_(std::move(keywords)) {
  if (keywords_.empty()) throw ConfigError("keyword set for '" + protocol_ + "' is empty");
  for (const auto& k : keywords_) {
    if (k.pattern.empty()) throw ConfigError("empty keyword pattern");
    lowered_.push_back(to_lower(k.pattern));
    if (k.mode == MatchMode::kRegex) {
      try {
        regexes_.push_back(std::make_shared<const std::regex>(
            k.pattern, std::regex::ECMAScript | std::regex::icase | std::regex::optimize));
      } catch (const std::regex_error& e) {
        throw ConfigError("keyword regex does not compile: " + k.pattern + " (" + e.what() + ")");
      }
    } else {
      regexes_.push_back(nullptr);
    }
  }
}

std::size_t KeywordSet::count_hits(std::size_t i, std::string_view text, std::string_view lowered) const {
  const auto& k = keywords_[i];
  std::size_t hits = 0;
  if (k.mode == MatchMode::kRegex) {
    const auto& re = *regexes_[i];
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      auto first = text.begin() + static_cast<std::ptrdiff_t>(pos);
      auto last = text.begin() + static_cast<std::ptrdiff_t>(eol);
      for (std::regex_iterator<std::string_view::const_iterator> it(first, last, re), end; it != end; ++it) {
        if (it->length(0) > 0) ++hits;
      }
      pos = eol + 1;
    }
    return hits;
  }
  const std::string& needle = lowered_[i];
  for (std::size_t pos = lowered.find(needle); pos != std::string_view::npos; pos = lowered.find(needle, pos + 1)) {
    if (k.mode == MatchMode::kWholeToken) {
      const std::size_t end = pos + needle.size();
      if (pos > 0 && is_ident_char(lowered[pos - 1])) continue;
      if (end < lowered.size() && is_ident_char(lowered[end])) continue;
    }
    ++hits;
  }
  return hits;
}

namespace {

// Same syntax as keyword files.
const std::map<std::string, std::vector<const char*>>& builtin_table() {
  static const std::map<std::string, std::vector<const char*>> table = {
      {"ikev2",
       {"IKE_SA_INIT", "IKE_AUTH", "CREATE_CHILD_SA", "INFORMATIONAL", "IKE_SA", "CHILD_SA",
        "re:ike[_ ]?sa[_ ]?established", "re:rekey(ing|ed)?", "NOTIFY", "DELETE", "re:exchange[_ ]?type",
        "@expert word:SA", "@expert re:sa[_ ]?state", "@expert word:state", "@expert word:message"}},
      {"tls",
       {"re:client[_ ]?hello", "re:server[_ ]?hello", "HELLO_RETRY_REQUEST", "ENCRYPTED_EXTENSIONS",
        "CERTIFICATE_VERIFY", "re:certificate[_ ]?request", "FINISHED", "NEW_SESSION_TICKET", "KEY_UPDATE",
        "CHANGE_CIPHER_SPEC", "SERVER_KEY_EXCHANGE", "CLIENT_KEY_EXCHANGE", "SERVER_HELLO_DONE",
        "@expert handshake", "@expert re:state[_ ]?machine", "@expert word:state", "@expert word:message"}},
      {"bgp",
       {"word:Idle", "word:Connect", "word:Active", "re:open[_ ]?sent", "re:open[_ ]?confirm", "word:Established",
        "word:OPEN", "word:UPDATE", "NOTIFICATION", "KEEPALIVE", "re:connect[_ ]?retry", "re:hold[_ ]?timer",
        "@expert word:fsm", "@expert word:peer", "@expert word:state"}},
      {"rtsp",
       {"DESCRIBE", "SETUP", "word:PLAY", "word:PAUSE", "TEARDOWN", "word:OPTIONS", "ANNOUNCE", "word:RECORD",
        "GET_PARAMETER", "SET_PARAMETER", "REDIRECT", "word:Init", "word:Ready", "word:Playing", "word:Recording",
        "@expert word:session", "@expert word:state"}},
      {"l2tp",
       {"SCCRQ", "SCCRP", "SCCCN", "StopCCN", "word:HELLO", "OCRQ", "OCRP", "OCCN", "ICRQ", "ICRP", "ICCN",
        "word:CDN", "word:WEN", "word:SLI", "re:wait[-_ ]?ctl[-_ ]?(reply|conn)", "@expert word:tunnel",
        "@expert word:session", "@expert word:state"}},
  };
  return table;
}

Keyword parse_keyword_line(std::string_view line) {
  Keyword k;
  auto take_prefix = [&](std::string_view prefix) {
    if (line.substr(0, prefix.size()) == prefix) {
      line.remove_prefix(prefix.size());
      return true;
    }
    return false;
  };
  if (take_prefix("@expert ")) {
    k.origin = KeywordOrigin::kExpert;
  } else if (take_prefix("@rfc ")) {
    k.origin = KeywordOrigin::kRfc;
  }
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
  if (take_prefix("re:")) {
    k.mode = MatchMode::kRegex;
  } else if (take_prefix("word:")) {
    k.mode = MatchMode::kWholeToken;
  }
  k.pattern = std::string(line);
  return k;
}

}  // namespace

KeywordSet builtin_keywords(std::string_view protocol) {
  const auto key = to_lower(protocol);
  const auto& table = builtin_table();
  auto it = table.find(key);
  if (it == table.end()) throw UnknownProtocol("no built-in keyword set for '" + std::string(protocol) + "'");
  std::vector<Keyword> ks;
  for (const char* line : it->second) ks.push_back(parse_keyword_line(line));
  return KeywordSet(key, std::move(ks));
}

KeywordSet parse_keyword_file(std::string_view text, std::string protocol) {
  std::vector<Keyword> ks;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    ks.push_back(parse_keyword_line(line));
  }
  return KeywordSet(std::move(protocol), std::move(ks));
}

KeywordSet load_keyword_file(const fs::path& path, std::string protocol) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("keyword file: ") + e.what());
  }
  return parse_keyword_file(text, std::move(protocol));
}

std::vector<DocumentMatch> scan(const fs::path& repo_root, const KeywordSet& ks, const ScanConfig& config) {
  std::error_code ec;
  if (!fs::is_directory(repo_root, ec)) throw IoError("repository root is not a readable directory: " + repo_root.string());

  std::vector<std::pair<fs::path, std::string>> files;  // absolute, relative
  fs::recursive_directory_iterator it(repo_root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw IoError("cannot read repository root " + repo_root.string() + ": " + ec.message());
  for (fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
    if (ec) throw IoError("error walking " + repo_root.string() + ": " + ec.message());
    const auto& entry = *it;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory(ec)) {
      if (!name.empty() && name[0] == '.') it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file(ec)) continue;
    files.emplace_back(entry.path(), entry.path().lexically_relative(repo_root).generic_string());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.second < b.second; });

  std::vector<DocumentMatch> out(files.size());
  auto process = [&](std::size_t i) {
    DocumentMatch& m = out[i];
    m.path = files[i].second;
    const std::string ext = files[i].first.extension().string();
    const auto& exts = config.source_extensions;
    m.is_source = std::find(exts.begin(), exts.end(), ext) != exts.end();
    if (!m.is_source) return;
    std::string text;
    try {
      text = read_file(files[i].first);
    } catch (const IoError& e) {
      log::warn(std::string("skipping unreadable file: ") + e.what());
      m.is_source = false;
      return;
    }
    if (text.substr(0, 8192).find('\0') != std::string::npos) {
      log::warn("skipping binary file " + m.path);
      m.is_source = false;
      return;
    }
    const std::string lowered = to_lower(text);
    std::size_t total = 0;
    for (std::size_t k = 0; k < ks.keywords().size(); ++k) {
      const std::size_t n = ks.count_hits(k, text, lowered);
      if (n > 0) {
        m.hits.emplace_back(ks.keywords()[k].pattern, n);
        total += n;
      }
    }
    m.matched = total > 0 && total >= config.min_hits;
  };

  unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, files.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < files.size(); i = next++) process(i);
    });
  }
  for (auto& t : pool) t.join();

  const bool any_source = std::any_of(out.begin(), out.end(), [](const DocumentMatch& m) { return m.is_source; });
  if (!any_source) throw EmptyRepo("no source files under " + repo_root.string());
  return out;
}

namespace {

std::size_t depth_of(const std::string& dir) {
  if (dir == ".") return 0;
  return static_cast<std::size_t>(std::count(dir.begin(), dir.end(), '/')) + 1;
}

std::vector<std::string> ancestors(const std::string& path) {
  std::vector<std::string> dirs{"."};
  for (std::size_t pos = path.find('/'); pos != std::string::npos; pos = path.find('/', pos + 1)) {
    dirs.push_back(path.substr(0, pos));
  }
  return dirs;
}

// True if a ranks strictly ahead of b.
bool better(const DirectoryRate& a, const DirectoryRate& b) {
  // Exact comparison of matched/total ratios.
  const auto lhs = a.matched_docs * b.total_docs;
  const auto rhs = b.matched_docs * a.total_docs;
  if (lhs != rhs) return lhs > rhs;
  if (a.matched_docs != b.matched_docs) return a.matched_docs > b.matched_docs;
  const auto da = depth_of(a.dir);
  const auto db = depth_of(b.dir);
  if (da != db) return da < db;
  return a.dir < b.dir;
}

}  // namespace

ModuleSelection select_module(const std::vector<DocumentMatch>& matches, std::size_t min_docs) {
  std::map<std::string, DirectoryRate> dirs;
  bool any_matched = false;
  for (const auto& m : matches) {
    if (!m.is_source) continue;
    any_matched = any_matched || m.matched;
    for (const auto& d : ancestors(m.path)) {
      auto& row = dirs[d];
      row.dir = d;
      ++row.total_docs;
      if (m.matched) ++row.matched_docs;
    }
  }
  if (!any_matched) throw NoModuleFound("no source document matched the keyword set");

  ModuleSelection sel;
  const DirectoryRate* best = nullptr;
  for (auto& [_, row] : dirs) {
    row.rate = static_cast<double>(row.matched_docs) / static_cast<double>(row.total_docs);
    sel.table.push_back(row);
  }
  for (const auto& row : sel.table) {
    if (row.total_docs < min_docs || row.matched_docs == 0) continue;
    if (best == nullptr || better(row, *best)) best = &row;
  }
  if (best == nullptr) {
    throw NoModuleFound("no directory holds at least " + std::to_string(min_docs) + " source files with a match");
  }
  sel.chosen_dir = best->dir;
  sel.match_rate = best->rate;
  return sel;
}

nlohmann::ordered_json to_json(const ModuleSelection& selection) {
  nlohmann::ordered_json j;
  j["chosen_dir"] = selection.chosen_dir;
  j["match_rate"] = selection.match_rate;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : selection.table) {
    rows.push_back({{"dir", r.dir}, {"matched_docs", r.matched_docs}, {"total_docs", r.total_docs}, {"rate", r.rate}});
  }
  j["table"] = std::move(rows);
  return j;
}

std::vector<std::string> documents_in(const std::vector<DocumentMatch>& matches, const std::string& dir) {
  std::vector<std::string> out;
  const std::string prefix = dir == "." ? "" : dir + "/";
  for (const auto& m : matches) {
    if (m.is_source && m.path.compare(0, prefix.size(), prefix) == 0) out.push_back(m.path);
  }
  return out;
}

}  // namespace protofsm::filter
