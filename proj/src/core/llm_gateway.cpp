#include "llm_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "digest.hpp"
#include "errors.hpp"
#include "file_io.hpp"

namespace protofsm::llm {
namespace {

std::string excerpt(const std::string& s, std::size_t n = 120) {
  std::string out = s.substr(0, n);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return s.size() > n ? out + "..." : out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void ChatConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must be within [0, 2]");
  if (retry.attempts < 1) throw ConfigError("retry attempts must be >= 1");
  if (retry.base_delay_s < 0) throw ConfigError("retry base delay must be >= 0");
  if (max_output_tokens == 0) throw ConfigError("max_output_tokens must be > 0");
  if (context_window_tokens == 0) throw ConfigError("context window must be > 0");
  if (model.empty()) throw ConfigError("chat model is empty");
  if (timeout_s <= 0) throw ConfigError("request timeout must be > 0");
  if (parallelism == 0) throw ConfigError("chat parallelism must be > 0");
}

nlohmann::ordered_json to_json(const ChatConfig& cfg) {
  return {{"model", cfg.model},
          {"temperature", cfg.temperature},
          {"max_output_tokens", cfg.max_output_tokens},
          {"context_window_tokens", cfg.context_window_tokens},
          {"endpoint", cfg.endpoint},
          {"credential_env", cfg.credential_env},
          {"timeout_s", cfg.timeout_s},
          {"retry", {{"attempts", cfg.retry.attempts}, {"base_delay_s", cfg.retry.base_delay_s}}},
          {"parallelism", cfg.parallelism}};
}

const char* to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Transcript::Transcript(std::vector<Turn> turns) : turns_(std::move(turns)) {
  if (turns_.empty()) throw ConfigError("transcript is empty");
  if (turns_.front().role == Role::kAssistant) throw ConfigError("transcript must start with a system or user turn");
}

std::string Transcript::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < turns_.size(); ++i) {
    if (i) out += "\n\n";
    out += turns_[i].content;
  }
  return out;
}

std::string prompt_digest(const Transcript& t) { return sha256_hex(t.prompt_text()); }

FixtureBook::FixtureBook(std::vector<FixtureEntry> entries) : entries_(std::move(entries)), cursor_(entries_.size(), 0) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].responses.empty()) throw ConfigError("fixture entry " + std::to_string(i) + " has no responses");
    if (entries_[i].key.empty()) throw ConfigError("fixture entry " + std::to_string(i) + " has an empty key");
  }
}

FixtureBook FixtureBook::from_json(const nlohmann::json& doc) {
  std::vector<FixtureEntry> entries;
  try {
    for (const auto& e : doc.at("entries")) {
      FixtureEntry fe;
      const auto kind = e.at("key_kind").get<std::string>();
      if (kind == "digest") fe.key_kind = FixtureEntry::KeyKind::kDigest;
      else if (kind == "pattern") fe.key_kind = FixtureEntry::KeyKind::kPattern;
      else throw ConfigError("fixture key_kind must be digest or pattern, got " + kind);
      fe.key = e.at("key").get<std::string>();
      const auto responses = e.at("responses").get<std::vector<std::string>>();
      const long repeat = e.value("repeat", 1L);
      if (repeat < 1) throw ConfigError("fixture repeat must be >= 1");
      for (long r = 0; r < repeat; ++r) fe.responses.insert(fe.responses.end(), responses.begin(), responses.end());
      entries.push_back(std::move(fe));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad fixture book: ") + e.what());
  }
  return FixtureBook(std::move(entries));
}

FixtureBook FixtureBook::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

std::string FixtureBook::next(const Transcript& t) {
  const std::string prompt = t.prompt_text();
  const std::string digest = sha256_hex(prompt);
  std::lock_guard lk(mu_);
  bool matched_any = false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const bool hit = e.key_kind == FixtureEntry::KeyKind::kDigest ? e.key == digest
                                                                  : prompt.find(e.key) != std::string::npos;
    if (!hit) continue;
    matched_any = true;
    if (cursor_[i] < e.responses.size()) return e.responses[cursor_[i]++];
  }
  throw FixtureMiss(std::string(matched_any ? "fixture responses exhausted" : "no fixture matches") +
                    " for prompt digest " + digest + " (\"" + excerpt(prompt) + "\")");
}

std::size_t FixtureBook::consumed() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (auto c : cursor_) n += c;
  return n;
}

void FixtureBook::rewind() {
  std::lock_guard lk(mu_);
  std::fill(cursor_.begin(), cursor_.end(), 0);
}

Completion RemoteBackend::complete(const Transcript& t, const ChatConfig& cfg) {
  const std::string key = http::require_credential(cfg.credential_env);

  nlohmann::json messages = nlohmann::json::array();
  for (const auto& turn : t.turns()) messages.push_back({{"role", to_string(turn.role)}, {"content", turn.content}});

  http::PostRequest req;
  req.endpoint = cfg.endpoint;
  req.path = "/chat/completions";
  req.body = {{"model", cfg.model},
              {"temperature", cfg.temperature},
              {"messages", std::move(messages)},
              {"max_tokens", cfg.max_output_tokens}};
  req.headers = {{"Authorization", "Bearer " + key}};
  req.timeout_s = cfg.timeout_s;

  slots_.acquire();
  http::PostResult res;
  try {
    res = http::post_json(req, cfg.retry);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();

  Completion c;
  c.attempts = res.attempts;
  try {
    const auto& content = res.body.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw BackendError("chat response content is not text", res.attempts);
    c.text = content.get<std::string>();
    if (res.body.contains("usage")) {
      const auto& u = res.body["usage"];
      if (u.contains("prompt_tokens")) c.prompt_tokens = u["prompt_tokens"].get<std::size_t>();
      if (u.contains("completion_tokens")) c.completion_tokens = u["completion_tokens"].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what(), res.attempts);
  }
  return c;
}

Completion FixtureBackend::complete(const Transcript& t, const ChatConfig&) {
  if (!book_) throw ConfigError("fixture backend has no fixture book");
  Completion c;
  c.text = book_->next(t);
  c.attempts = 0;
  return c;
}

SessionLog::SessionLog(const std::filesystem::path& path, bool log_content) : log_content_(log_content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw IoError("cannot open session log " + path.string());
}

void SessionLog::record(const std::string& backend, const ChatConfig& cfg, const Transcript& t,
                        const Completion* result, const std::string& error, double latency_ms) {
  const std::string prompt = t.prompt_text();
  nlohmann::ordered_json line = {
      {"time", utc_now()},
      {"backend", backend},
      {"model", cfg.model},
      {"temperature", cfg.temperature},
      {"prompt_digest", sha256_hex(prompt)},
      {"prompt_chars", prompt.size()},
  };
  if (result) {
    line["response_chars"] = result->text.size();
    line["prompt_tokens"] = result->prompt_tokens ? *result->prompt_tokens : (prompt.size() + 3) / 4;
    line["completion_tokens"] = result->completion_tokens ? *result->completion_tokens : (result->text.size() + 3) / 4;
    line["token_counts"] = result->prompt_tokens ? "reported" : "estimated";
    line["attempts"] = result->attempts;
  }
  line["latency_ms"] = latency_ms;
  line["status"] = error.empty() ? "ok" : "error";
  if (!error.empty()) line["error"] = error;
  if (log_content_) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& turn : t.turns()) turns.push_back({{"role", to_string(turn.role)}, {"content", turn.content}});
    line["messages"] = std::move(turns);
    if (result) line["response"] = result->text;
  }
  std::lock_guard lk(mu_);
  out_ << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  out_.flush();
}

Gateway::Gateway(ChatConfig cfg, std::shared_ptr<ChatBackend> backend, std::shared_ptr<SessionLog> log)
    : cfg_(std::move(cfg)), backend_(std::move(backend)), log_(std::move(log)) {
  cfg_.validate();
  if (!backend_) throw ConfigError("no chat backend configured");
}

std::string Gateway::complete(const Transcript& t) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    Completion c = backend_->complete(t, cfg_);
    if (log_) log_->record(backend_->name(), cfg_, t, &c, "", elapsed());
    return std::move(c.text);
  } catch (const std::exception& e) {
    if (log_) log_->record(backend_->name(), cfg_, t, nullptr, e.what(), elapsed());
    throw;
  }
}

}  // namespace protofsm::llm
