#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "embed_store.hpp"
#include "fsm_model.hpp"
#include "inference.hpp"
#include "llm_gateway.hpp"
#include "repo_filter.hpp"
#include "segmenter.hpp"

namespace protofsm::pipeline {

enum class ChatBackendKind { kRemote, kFixture };

struct RunConfig {
  std::filesystem::path repo;
  std::string protocol;
  std::optional<std::filesystem::path> keyword_file;  // else built-in set for the protocol
  fsm::Implementation implementation;
  filter::ScanConfig scan;
  std::size_t min_module_docs = 2;
  segmenter::SegmenterConfig segmenter;
  std::optional<std::filesystem::path> separators;  // per-language overrides
  embedding::EmbeddingBackendSpec embedding;
  llm::ChatConfig chat;
  ChatBackendKind chat_backend = ChatBackendKind::kRemote;
  std::optional<std::filesystem::path> fixtures;
  inference::ConsensusConfig consensus;
  std::size_t retrieval_k = 8;
  std::string background;  // empty: built-in
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> index_path;  // default <output_dir>/index.fsmidx
  bool log_content = false;

  std::filesystem::path index_file() const { return index_path ? *index_path : output_dir / "index.fsmidx"; }

  // Nested validation plus cross-field checks. Throws ConfigError.
  void validate() const;
};

// Relative paths in the document resolve against `base_dir`. Unknown keys are
// rejected. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Applies one dotted-key override, e.g. ("consensus.iterations", "1"). The
// value is read as JSON when it parses, as a plain string otherwise.
// `doc` is the config document being edited.
void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value);

// Config document with paths made absolute; holds no credential values.
nlohmann::ordered_json to_json(const RunConfig& cfg);

struct IndexResult {
  filter::ModuleSelection selection;
  std::filesystem::path index_path;
  std::size_t documents = 0;
  std::size_t entries = 0;
};

// repo-filter -> segmenter -> embeddings -> index file. Rebuilding from
// unchanged inputs writes the same bytes.
IndexResult build_index(const RunConfig& cfg);

struct InferResult {
  std::filesystem::path fsm_path;
  std::filesystem::path report_path;
  fsm::FsmModel fsm;
  inference::RunReport report;
};

// Writes fsm.json and report.json to the output directory. On failure the
// partial report.json is still written before the error propagates.
InferResult run_infer(const RunConfig& cfg, bool build_index_first);

}  // namespace protofsm::pipeline
