#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

#include "digest.hpp"
#include "errors.hpp"
#include "file_io.hpp"
#include "http_client.hpp"
#include "log.hpp"

namespace protofsm::pipeline {
namespace fs = std::filesystem;
namespace {

// Pulls typed fields out of one JSON object and complains about leftovers.
class Section {
 public:
  Section(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key " + where_ + "." + k);
    }
  }

  const nlohmann::json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const auto* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(where_ + "." + key + " has the wrong type");
      }
    }
  }

  void read_path(const std::string& key, fs::path& out, const fs::path& base) {
    std::string s;
    if (!get(key)) return;
    read(key, s);
    out = resolve(s, base);
  }

  void read_path(const std::string& key, std::optional<fs::path>& out, const fs::path& base) {
    if (!get(key)) return;
    fs::path p;
    read_path(key, p, base);
    out = p;
  }

  const nlohmann::json* sub(const std::string& key) { return get(key); }
  const std::string& where() const { return where_; }

  static fs::path resolve(const std::string& s, const fs::path& base) {
    if (s.empty()) throw ConfigError("empty path in config");
    fs::path p(s);
    return (p.is_relative() ? base / p : p).lexically_normal();
  }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_retry(Section& s, http::RetryPolicy& r) {
  s.read("retry_attempts", r.attempts);
  s.read("retry_base_delay_s", r.base_delay_s);
}

std::string iso_utc(fs::file_time_type t) {
  const auto sys = std::chrono::file_clock::to_sys(t);
  const std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::time_point_cast<std::chrono::system_clock::duration>(sys));
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json segmenter_json(const segmenter::SegmenterConfig& s) {
  return {{"max_chunk_size", s.max_chunk_size},
          {"min_chunk_size", s.min_chunk_size},
          {"overlap", s.overlap},
          {"language", s.language},
          {"chars_per_token", s.chars_per_token}};
}

filter::KeywordSet keywords_for(const RunConfig& cfg) {
  if (cfg.keyword_file) return filter::load_keyword_file(*cfg.keyword_file, cfg.protocol);
  return filter::builtin_keywords(cfg.protocol);
}

void check_credentials(const RunConfig& cfg, bool chat) {
  if (chat && cfg.chat_backend == ChatBackendKind::kRemote) http::require_credential(cfg.chat.credential_env);
  if (cfg.embedding.kind == embedding::EmbeddingBackendSpec::Kind::kRemote) {
    http::require_credential(cfg.embedding.credential_env);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (repo.empty()) throw ConfigError("repo is not set");
  if (protocol.empty()) throw ConfigError("protocol is not set");
  if (min_module_docs == 0) throw ConfigError("scan.min_module_docs must be at least 1");
  if (retrieval_k == 0) throw ConfigError("retrieval.k must be at least 1");
  segmenter.validate();
  embedding.validate();
  chat.validate();
  consensus.validate();
  if (chat_backend == ChatBackendKind::kFixture && !fixtures) throw ConfigError("fixture backend needs chat.fixtures");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  std::error_code ec;
  if (fs::exists(output_dir, ec) && !fs::is_directory(output_dir, ec)) {
    throw ConfigError("output_dir " + output_dir.string() + " exists and is not a directory");
  }
}

RunConfig config_from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  const fs::path base = base_dir.empty() ? fs::current_path() : fs::absolute(base_dir);
  cfg.output_dir = base / "out";
  {
    Section top(doc, "config");
    top.read_path("repo", cfg.repo, base);
    top.read("protocol", cfg.protocol);
    top.read_path("keywords", cfg.keyword_file, base);
    top.read("background", cfg.background);
    top.read_path("output_dir", cfg.output_dir, base);
    top.read_path("index", cfg.index_path, base);

    if (const auto* j = top.sub("implementation")) {
      Section s(*j, "implementation");
      s.read("repo", cfg.implementation.repo);
      s.read("commit", cfg.implementation.commit);
    }
    if (const auto* j = top.sub("scan")) {
      Section s(*j, "scan");
      s.read("extensions", cfg.scan.source_extensions);
      s.read("min_hits", cfg.scan.min_hits);
      s.read("threads", cfg.scan.threads);
      s.read("min_module_docs", cfg.min_module_docs);
    }
    if (const auto* j = top.sub("segmenter")) {
      Section s(*j, "segmenter");
      s.read("max_chunk_size", cfg.segmenter.max_chunk_size);
      s.read("min_chunk_size", cfg.segmenter.min_chunk_size);
      s.read("overlap", cfg.segmenter.overlap);
      s.read("language", cfg.segmenter.language);
      s.read("chars_per_token", cfg.segmenter.chars_per_token);
      s.read_path("separators", cfg.separators, base);
    }
    if (const auto* j = top.sub("embedding")) {
      Section s(*j, "embedding");
      std::string kind = "local-hash";
      s.read("kind", kind);
      if (kind == "local-hash") cfg.embedding.kind = embedding::EmbeddingBackendSpec::Kind::kLocalHash;
      else if (kind == "remote") cfg.embedding.kind = embedding::EmbeddingBackendSpec::Kind::kRemote;
      else throw ConfigError("embedding.kind must be local-hash or remote, got " + kind);
      s.read("dim", cfg.embedding.dim);
      s.read("ngram", cfg.embedding.ngram);
      s.read("seed", cfg.embedding.seed);
      s.read("endpoint", cfg.embedding.endpoint);
      s.read("model", cfg.embedding.model);
      s.read("credential_env", cfg.embedding.credential_env);
      s.read("batch_size", cfg.embedding.batch_size);
      s.read("parallelism", cfg.embedding.parallelism);
      s.read("timeout_s", cfg.embedding.timeout_s);
      read_retry(s, cfg.embedding.retry);
    }
    if (const auto* j = top.sub("chat")) {
      Section s(*j, "chat");
      std::string backend = "remote";
      s.read("backend", backend);
      if (backend == "remote") cfg.chat_backend = ChatBackendKind::kRemote;
      else if (backend == "fixture") cfg.chat_backend = ChatBackendKind::kFixture;
      else throw ConfigError("chat.backend must be remote or fixture, got " + backend);
      s.read_path("fixtures", cfg.fixtures, base);
      s.read("model", cfg.chat.model);
      s.read("temperature", cfg.chat.temperature);
      s.read("max_output_tokens", cfg.chat.max_output_tokens);
      s.read("context_window_tokens", cfg.chat.context_window_tokens);
      s.read("endpoint", cfg.chat.endpoint);
      s.read("credential_env", cfg.chat.credential_env);
      s.read("timeout_s", cfg.chat.timeout_s);
      s.read("parallelism", cfg.chat.parallelism);
      s.read("log_content", cfg.log_content);
      read_retry(s, cfg.chat.retry);
    }
    if (const auto* j = top.sub("consensus")) {
      Section s(*j, "consensus");
      s.read("iterations", cfg.consensus.iterations);
      s.read("threshold", cfg.consensus.threshold);
    }
    if (const auto* j = top.sub("retrieval")) {
      Section s(*j, "retrieval");
      s.read("k", cfg.retrieval_k);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = fsm::parse_json_text(read_file(path), path.string());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty override key");
  if (!doc.is_object()) doc = nlohmann::json::object();
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key " + key);
    if (dot == std::string::npos) {
      auto parsed = nlohmann::json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    auto& next = (*node)[part];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError("override " + key + ": " + part + " is not a section");
    node = &next;
    start = dot + 1;
  }
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  using J = nlohmann::ordered_json;
  auto opt = [](const std::optional<fs::path>& p) { return p ? J(p->string()) : J(nullptr); };
  const bool remote_embed = cfg.embedding.kind == embedding::EmbeddingBackendSpec::Kind::kRemote;
  J emb = {{"kind", remote_embed ? "remote" : "local-hash"}, {"dim", cfg.embedding.dim}};
  if (remote_embed) {
    emb["endpoint"] = cfg.embedding.endpoint;
    emb["model"] = cfg.embedding.model;
    emb["credential_env"] = cfg.embedding.credential_env;
  } else {
    emb["ngram"] = cfg.embedding.ngram;
    emb["seed"] = cfg.embedding.seed;
  }
  J chat = llm::to_json(cfg.chat);
  chat["backend"] = cfg.chat_backend == ChatBackendKind::kFixture ? "fixture" : "remote";
  chat["fixtures"] = opt(cfg.fixtures);
  J seg = segmenter_json(cfg.segmenter);
  seg["separators"] = opt(cfg.separators);
  return {{"repo", cfg.repo.string()},
          {"protocol", cfg.protocol},
          {"keywords", opt(cfg.keyword_file)},
          {"implementation", {{"repo", cfg.implementation.repo}, {"commit", cfg.implementation.commit}}},
          {"segmenter", seg},
          {"embedding", emb},
          {"chat", chat},
          {"consensus", {{"iterations", cfg.consensus.iterations}, {"threshold", cfg.consensus.threshold}}},
          {"retrieval", {{"k", cfg.retrieval_k}}},
          {"output_dir", cfg.output_dir.string()},
          {"index", cfg.index_file().string()}};
}

IndexResult build_index(const RunConfig& cfg) {
  cfg.validate();
  check_credentials(cfg, false);
  std::error_code ec;
  if (!fs::is_directory(cfg.repo, ec)) throw IoError("repo " + cfg.repo.string() + " is not a readable directory");

  const auto ks = keywords_for(cfg);
  const auto matches = filter::scan(cfg.repo, ks, cfg.scan);
  IndexResult out;
  out.selection = filter::select_module(matches, cfg.min_module_docs);
  const auto docs = filter::documents_in(matches, out.selection.chosen_dir);
  log::info("selected module " + out.selection.chosen_dir + " (" + std::to_string(docs.size()) + " documents)");

  std::map<std::string, segmenter::SeparatorTable> overrides;
  std::string separators_text;
  if (cfg.separators) {
    overrides = segmenter::load_separator_tables(*cfg.separators);
    separators_text = read_file(*cfg.separators);
  }

  std::vector<segmenter::Chunk> chunks;
  std::string snapshot;
  fs::file_time_type newest{};
  for (const auto& rel : docs) {
    const auto abs = cfg.repo / rel;
    std::string text = read_file(abs);
    snapshot += rel + '\0' + sha256_hex(text) + '\n';
    newest = std::max(newest, fs::last_write_time(abs));
    if (segmenter::sanitize_utf8(text)) log::warn("invalid UTF-8 replaced in " + rel);
    const auto lang = segmenter::language_for_path(rel);
    auto seg_cfg = cfg.segmenter;
    seg_cfg.language = lang == "text" ? cfg.segmenter.language : lang;
    const auto it = overrides.find(seg_cfg.language);
    auto doc_chunks = it != overrides.end() ? segmenter::segment(text, seg_cfg, it->second, rel)
                                            : segmenter::segment(text, seg_cfg, rel);
    for (auto& c : doc_chunks) chunks.push_back(std::move(c));
  }

  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = embedding::embed(texts, cfg.embedding);

  embedding::IndexManifest manifest;
  manifest.created_at = docs.empty() ? "1970-01-01T00:00:00Z" : iso_utc(newest);
  manifest.repo_snapshot = sha256_hex(snapshot);
  manifest.segmenter_digest = sha256_hex(segmenter_json(cfg.segmenter).dump() + '\0' + separators_text);
  embedding::VectorIndex index(embedding::fingerprint(cfg.embedding), manifest);
  for (std::size_t i = 0; i < chunks.size(); ++i) index.add(std::move(chunks[i]), std::move(vectors[i]));

  out.index_path = cfg.index_file();
  if (out.index_path.has_parent_path()) fs::create_directories(out.index_path.parent_path());
  embedding::save(index, out.index_path);
  out.documents = docs.size();
  out.entries = index.size();

  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "module_selection.json", filter::to_json(out.selection).dump(2) + "\n");
  return out;
}

InferResult run_infer(const RunConfig& cfg, bool build_index_first) {
  cfg.validate();
  check_credentials(cfg, true);

  InferResult out;
  out.fsm_path = cfg.output_dir / "fsm.json";
  out.report_path = cfg.output_dir / "report.json";

  if (build_index_first) build_index(cfg);
  if (!fs::exists(cfg.index_file())) {
    throw ConfigError("index " + cfg.index_file().string() + " not found; run the index command or pass --build-index");
  }
  const auto index = embedding::load(cfg.index_file(), embedding::fingerprint(cfg.embedding));

  std::shared_ptr<llm::ChatBackend> backend;
  if (cfg.chat_backend == ChatBackendKind::kFixture) {
    backend = std::make_shared<llm::FixtureBackend>(std::make_shared<llm::FixtureBook>(llm::FixtureBook::load(*cfg.fixtures)));
  } else {
    backend = std::make_shared<llm::RemoteBackend>(cfg.chat.parallelism);
  }
  fs::create_directories(cfg.output_dir);
  auto session = std::make_shared<llm::SessionLog>(cfg.output_dir / "session.jsonl", cfg.log_content);
  llm::Gateway gateway(cfg.chat, backend, session);

  inference::InferenceConfig icfg;
  icfg.protocol = cfg.protocol;
  icfg.consensus = cfg.consensus;
  icfg.retrieval.k = cfg.retrieval_k;
  icfg.retrieval.window_tokens = cfg.chat.context_window_tokens;
  icfg.retrieval.output_tokens = cfg.chat.max_output_tokens;
  icfg.retrieval.chars_per_token = cfg.segmenter.chars_per_token;
  icfg.embedding = cfg.embedding;
  icfg.implementation = cfg.implementation;
  icfg.background = cfg.background;

  auto write_report = [&] { write_file(out.report_path, out.report.to_json().dump(2) + "\n"); };
  try {
    out.fsm = inference::infer_fsm(icfg, &index, gateway, out.report);
  } catch (...) {
    std::error_code ec;
    fs::remove(out.fsm_path, ec);  // never leave a previous run's result next to a failed report
    write_report();
    throw;
  }
  fsm::save_file(out.fsm, out.fsm_path.string());
  write_report();
  return out;
}

}  // namespace protofsm::pipeline
