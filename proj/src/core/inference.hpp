#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "embed_store.hpp"
#include "fsm_model.hpp"
#include "llm_gateway.hpp"

namespace protofsm::inference {

enum class Stage { kCodePaths, kStates, kMessages, kTransitions };

const char* to_string(Stage s);

struct PromptSpec {
  Stage stage = Stage::kCodePaths;
  std::string protocol;
  // code_paths, states, messages, current_state, desired_format. A missing
  // desired_format is filled with the stage's built-in block.
  std::map<std::string, std::string> slots;
  std::string background;   // empty: built-in protocol background
  std::string instruction;  // empty: built-in task instruction for the stage
};

// Built-in texts, shipped verbatim so fixtures keyed on prompts stay stable.
const std::string& default_background();
const std::string& default_instruction(Stage s);
const std::string& stage_template(Stage s);
const std::string& desired_format(Stage s);

// Slots a stage's template needs (besides "protocol").
std::vector<std::string> required_slots(Stage s);

// background + instruction + filled template + desired format block. Throws
// TemplateError naming the first missing slot.
std::string render(const PromptSpec& spec);

// Renders a list as one "- item" line per entry.
std::string bullet_list(const std::vector<std::string>& items);

struct ParsedOutput {
  std::vector<std::string> items;  // canonical, sorted, unique
  std::vector<fsm::Transition> transitions;  // transitions stage only
  // states stage only, when the response marks them.
  std::optional<std::vector<std::string>> initial_states;
  std::optional<std::vector<std::string>> final_states;
  std::vector<std::string> rejected;  // items dropped during canonicalization
};

// Finds the first fenced or bare JSON value in the text. Returns nullopt if
// there is none.
std::optional<nlohmann::json> extract_json(const std::string& response);

// Throws ParseFailure when no block is found or it has the wrong shape.
// `current_state` (transitions only) restricts the keys taken from the object;
// other keys are reported in `rejected`.
ParsedOutput parse_output(Stage stage, const std::string& response, const std::string& current_state = "");

// "./a//b\\c/" -> "a/b/c"
std::string normalize_path(const std::string& path);

struct ConsensusConfig {
  std::size_t iterations = 20;
  double threshold = 0.8;  // kept iff count / iterations > threshold

  void validate() const;  // throws ConfigError
};

struct ItemFrequency {
  std::string item;
  std::size_t count = 0;
  double frequency = 0.0;
  bool kept = false;
};

// One entry per iteration; nullopt marks an unparseable response (it still
// counts in the denominator). Items within an iteration are deduplicated.
// Output is sorted by item.
std::vector<ItemFrequency> consensus(const std::vector<std::optional<std::vector<std::string>>>& iterations,
                                     double threshold);

std::vector<std::string> kept(const std::vector<ItemFrequency>& table);

struct RetrievedChunk {
  std::string doc_path;
  std::size_t ordinal = 0;
  double score = 0.0;
  std::string text;
};

struct RetrievalConfig {
  std::size_t k = 8;
  std::size_t window_tokens = 8192;
  std::size_t output_tokens = 1024;
  double chars_per_token = 4.0;
};

// Top-k chunks for the query, optionally restricted to `allowed_docs`, then
// truncated so prompt + context + output fit the window (lowest score dropped
// first). Throws BackendMismatch when `backend` is not what built the index.
std::vector<RetrievedChunk> retrieve_context(const std::string& query, const embedding::VectorIndex& index,
                                             const embedding::EmbeddingBackendSpec& backend,
                                             const RetrievalConfig& rc, std::size_t prompt_chars,
                                             const std::set<std::string>* allowed_docs = nullptr);

// The user message sent to the model: rendered prompt, then the code.
std::string compose_prompt(const std::string& rendered, const std::vector<RetrievedChunk>& context);

struct StageResult {
  Stage stage = Stage::kCodePaths;
  std::string current_state;  // transitions stage only
  std::string prompt_digest;
  std::size_t iterations = 0;
  std::vector<std::string> raw_responses;
  std::vector<std::size_t> parse_failures;  // iteration indices
  std::vector<ItemFrequency> items;
  std::vector<ItemFrequency> initial_marks;  // states stage only
  std::vector<ItemFrequency> final_marks;
  bool marks_present = false;  // some iteration supplied initial/final states
  std::vector<std::string> rejected;
  std::vector<RetrievedChunk> context;
  std::size_t prompt_chars = 0;
  std::size_t response_chars = 0;
  double duration_ms = 0.0;

  std::vector<std::string> kept_items() const { return kept(items); }
};

struct StageInputs {
  const embedding::VectorIndex* index = nullptr;  // optional
  const embedding::EmbeddingBackendSpec* backend = nullptr;
  RetrievalConfig retrieval;
  const std::set<std::string>* allowed_docs = nullptr;
};

// Renders, retrieves, completes cc.iterations times, parses and votes.
// Throws StageFailed if no iteration parses.
StageResult run_stage(const PromptSpec& spec, const StageInputs& inputs, llm::Gateway& gateway,
                      const ConsensusConfig& cc);

nlohmann::ordered_json to_json(const StageResult& r);

struct InferenceConfig {
  std::string protocol;
  ConsensusConfig consensus;
  RetrievalConfig retrieval;
  embedding::EmbeddingBackendSpec embedding;
  fsm::Implementation implementation;
  std::string background;  // empty: built-in
};

// Filled in as stages complete, so it holds partial results after a failure.
struct RunReport {
  std::string protocol;
  ConsensusConfig consensus;
  std::vector<StageResult> stages;
  std::string initial_states_source;  // "model", "heuristic: no incoming transition", "heuristic: first state"
  std::string final_states_source;    // "model" or "none"
  std::vector<std::string> dropped_transitions;
  std::string status = "running";  // running | ok | failed
  std::string error;

  nlohmann::ordered_json to_json() const;
};

// code_paths -> states -> messages -> one transitions stage per kept state.
// Errors propagate after `report` records them.
fsm::FsmModel infer_fsm(const InferenceConfig& cfg, const embedding::VectorIndex* index, llm::Gateway& gateway,
                        RunReport& report);

}  // namespace protofsm::inference
