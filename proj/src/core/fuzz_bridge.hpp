#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsm_model.hpp"

namespace protofsm::fuzz {

enum class Strategy { kTransitionCover };

struct SeedSequence {
  std::vector<fsm::MessageType> messages;
  std::vector<fsm::StateName> path;  // messages.size() + 1 states, path[0] initial
  std::set<fsm::Transition> covered;

  std::vector<fsm::Transition> walk() const;
};

struct SequenceSet {
  std::vector<SeedSequence> sequences;
  std::vector<fsm::Transition> unreachable;
};

// One shortest-prefix sequence per reachable transition, minus sequences that
// are prefixes of others. BFS visits initial states and outgoing transitions in
// sorted order, so output is deterministic. Throws InvalidFsm.
SequenceSet generate_sequences(const fsm::FsmModel& fsm, Strategy strategy = Strategy::kTransitionCover);

// Message -> raw payload bytes. "{{LEN8}}", "{{LEN16BE}}" and "{{LEN32BE}}"
// are replaced by the total length of the rendered payload (placeholder
// replaced), in 1, 2 or 4 bytes.
using PayloadTemplateMap = std::map<fsm::MessageType, std::string>;

// A JSON object {"MESSAGE": "relative/file.raw"} (paths relative to the JSON
// file), or a directory of <MESSAGE>.raw / .bin files.
PayloadTemplateMap load_templates(const std::filesystem::path& path);

std::string render_payload(const std::string& tmpl);

// Writes seq_<NNNN>_<digest8>.raw per sequence plus manifest.json. Throws
// TemplateMissing naming the first message without a template.
std::vector<std::filesystem::path> render_seeds(const std::vector<SeedSequence>& sequences,
                                                const PayloadTemplateMap& templates,
                                                const std::filesystem::path& out_dir);

nlohmann::ordered_json to_json(const SequenceSet& set);

}  // namespace protofsm::fuzz
