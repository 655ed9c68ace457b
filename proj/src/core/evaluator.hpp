#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsm_model.hpp"

namespace protofsm::eval {

struct GroundTruth {
  fsm::FsmModel fsm;
  // canonical name -> canonical name; applied to states and messages of both
  // sides before matching.
  std::map<std::string, std::string> aliases;

  // Strict FSM validity, alias targets exist, alias chains are acyclic.
  // Throws InvalidFsm.
  void validate() const;

  // Follows alias chains to the end.
  std::string resolve(const std::string& name) const;
};

// FSM document plus an optional top-level "aliases" object.
GroundTruth ground_truth_from_json(const nlohmann::json& doc);
GroundTruth load_ground_truth(const std::filesystem::path& path);

enum class Verdict { kCorrect, kPartiallyCorrect, kIncorrect, kNotFound };
const char* to_string(Verdict v);

enum WrongElement : unsigned { kSource = 1, kMessage = 2, kDestination = 4 };

struct TransitionJudgment {
  std::optional<fsm::Transition> inferred;
  std::optional<fsm::Transition> truth;
  Verdict verdict = Verdict::kIncorrect;
  unsigned wrong = 0;  // WrongElement bits; all three for an unmatched side
};

// Two passes: exact matches, then greedy pairs agreeing on exactly two of the
// three elements (inferred transitions in sorted order, each against the first
// free ground-truth transition in sorted order). Leftovers are incorrect
// (inferred) or not found (ground truth).
std::vector<TransitionJudgment> match_and_classify(const fsm::FsmModel& inferred, const GroundTruth& gt);

struct Metrics {
  double precision = 0.0;  // fractions in [0, 1]
  double recall = 0.0;
  bool precision_undefined = false;  // zero denominator
  bool recall_undefined = false;
};

Metrics metrics(std::size_t c, std::size_t pc, std::size_t ic, std::size_t nf);

// Fraction as a percentage with two decimals, e.g. 0.95 -> "95.00".
std::string percent(double fraction);

struct EvalReport {
  std::size_t inferred_states = 0;
  std::size_t inferred_transitions = 0;
  std::size_t c = 0, pc = 0, ic = 0, nf = 0;
  Metrics m;
  std::vector<TransitionJudgment> judgments;
};

EvalReport evaluate(const fsm::FsmModel& inferred, const GroundTruth& gt);

nlohmann::ordered_json to_json(const EvalReport& r);

// Columns S, T, C, PC, I, NF, P, R.
std::string format_table(const EvalReport& r, const std::string& label);

}  // namespace protofsm::eval
