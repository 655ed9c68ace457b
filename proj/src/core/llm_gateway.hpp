#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "http_client.hpp"

namespace protofsm::llm {

struct ChatConfig {
  std::string model = "gpt-4";
  double temperature = 0.2;
  std::size_t max_output_tokens = 1024;
  std::size_t context_window_tokens = 8192;
  std::string endpoint = "https://api.openai.com/v1";
  std::string credential_env = "OPENAI_API_KEY";
  double timeout_s = 120.0;
  http::RetryPolicy retry;
  unsigned parallelism = 4;  // in-flight remote requests

  void validate() const;  // throws ConfigError
};

// Never includes the credential value, only the variable name.
nlohmann::ordered_json to_json(const ChatConfig& cfg);

enum class Role { kSystem, kUser, kAssistant };
const char* to_string(Role r);

struct Turn {
  Role role = Role::kUser;
  std::string content;
};

class Transcript {
 public:
  // Throws ConfigError if empty or the first turn is from the assistant.
  explicit Transcript(std::vector<Turn> turns);

  const std::vector<Turn>& turns() const noexcept { return turns_; }

  // Contents joined by blank lines. This is what fixture keys are matched on.
  std::string prompt_text() const;

 private:
  std::vector<Turn> turns_;
};

// SHA-256 hex of prompt_text().
std::string prompt_digest(const Transcript& t);

struct FixtureEntry {
  enum class KeyKind { kDigest, kPattern };
  KeyKind key_kind = KeyKind::kDigest;
  std::string key;
  std::vector<std::string> responses;
};

// Canned responses, consumed in order per entry. Safe for concurrent use.
class FixtureBook {
 public:
  FixtureBook() = default;
  explicit FixtureBook(std::vector<FixtureEntry> entries);
  // Not safe against concurrent use of `other`.
  FixtureBook(FixtureBook&& other) noexcept
      : entries_(std::move(other.entries_)), cursor_(std::move(other.cursor_)) {}

  // {"entries":[{"key_kind","key","responses":[...],"repeat":n}]}; "repeat"
  // (default 1) lists the responses that many times. Throws ConfigError.
  static FixtureBook from_json(const nlohmann::json& doc);
  static FixtureBook load(const std::filesystem::path& path);

  // The first declared entry matching the prompt that still has responses
  // left is consumed. Throws FixtureMiss when nothing matches or every
  // matching entry is exhausted.
  std::string next(const Transcript& t);

  std::size_t size() const noexcept { return entries_.size(); }
  // Responses handed out so far, summed over entries.
  std::size_t consumed() const;
  void rewind();

 private:
  std::vector<FixtureEntry> entries_;
  std::vector<std::size_t> cursor_;
  mutable std::mutex mu_;
};

struct Completion {
  std::string text;
  int attempts = 1;
  std::optional<std::size_t> prompt_tokens;      // as reported by the backend
  std::optional<std::size_t> completion_tokens;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const Transcript& t, const ChatConfig& cfg) = 0;
  virtual std::string name() const = 0;
  // Upper bound on useful concurrent calls.
  virtual unsigned max_parallelism(const ChatConfig& cfg) const = 0;
};

class RemoteBackend : public ChatBackend {
 public:
  explicit RemoteBackend(unsigned parallelism = 4)
      : slots_(static_cast<std::ptrdiff_t>(std::clamp(parallelism, 1u, 64u))) {}
  Completion complete(const Transcript& t, const ChatConfig& cfg) override;
  std::string name() const override { return "remote"; }
  unsigned max_parallelism(const ChatConfig& cfg) const override { return cfg.parallelism; }

 private:
  std::counting_semaphore<64> slots_;
};

class FixtureBackend : public ChatBackend {
 public:
  explicit FixtureBackend(std::shared_ptr<FixtureBook> book) : book_(std::move(book)) {}
  Completion complete(const Transcript& t, const ChatConfig& cfg) override;
  std::string name() const override { return "fixture"; }
  // Sequential, so the order fixtures are consumed in is reproducible.
  unsigned max_parallelism(const ChatConfig&) const override { return 1; }

 private:
  std::shared_ptr<FixtureBook> book_;
};

// Append-only JSONL audit log: one line per call with prompt digest, token
// counts, latency and outcome. Prompt/response content only when asked for.
class SessionLog {
 public:
  SessionLog(const std::filesystem::path& path, bool log_content);

  void record(const std::string& backend, const ChatConfig& cfg, const Transcript& t, const Completion* result,
              const std::string& error, double latency_ms);

 private:
  std::ofstream out_;
  bool log_content_;
  std::mutex mu_;
};

// Validates the config, calls the backend and logs the exchange. Errors
// propagate after being logged.
class Gateway {
 public:
  Gateway(ChatConfig cfg, std::shared_ptr<ChatBackend> backend, std::shared_ptr<SessionLog> log = nullptr);

  std::string complete(const Transcript& t);

  const ChatConfig& config() const noexcept { return cfg_; }
  ChatBackend& backend() noexcept { return *backend_; }
  unsigned parallelism() const { return std::max(1u, backend_->max_parallelism(cfg_)); }

 private:
  ChatConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<SessionLog> log_;
};

}  // namespace protofsm::llm
