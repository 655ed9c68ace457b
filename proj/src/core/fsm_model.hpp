#pragma once

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace protofsm::fsm {

// Uppercases, collapses every run of non-alphanumerics to one underscore and
// strips leading/trailing underscores. Throws NameError if nothing is left.
std::string canonicalize_name(std::string_view raw);

// A canonical identifier. The tag keeps state names and message types from
// being mixed up at compile time.
template <class Tag>
class Name {
 public:
  Name() = default;
  explicit Name(std::string_view raw) : value_(canonicalize_name(raw)) {}

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const Name&, const Name&) = default;
  friend bool operator==(const Name&, const Name&) = default;

 private:
  std::string value_;
};

struct StateTag {};
struct MessageTag {};
using StateName = Name<StateTag>;
using MessageType = Name<MessageTag>;

struct Transition {
  StateName current_state;
  MessageType receive_message;
  StateName next_state;

  friend auto operator<=>(const Transition&, const Transition&) = default;
  friend bool operator==(const Transition&, const Transition&) = default;
};

std::string to_string(const Transition& t);

struct Implementation {
  std::string repo;
  std::string commit;

  friend bool operator==(const Implementation&, const Implementation&) = default;
};

// The quintuple (alphabet, states, initial states, final states, transition
// relation) plus where it came from. Nondeterminism is allowed: several
// transitions may share (current_state, receive_message).
struct FsmModel {
  std::string protocol;
  Implementation implementation;
  std::set<MessageType> alphabet;
  std::set<StateName> states;
  std::set<StateName> initial_states;
  std::set<StateName> final_states;
  std::set<Transition> transitions;

  friend bool operator==(const FsmModel&, const FsmModel&) = default;
};

enum class ValidationLevel { kStrict, kLenient };
enum class Severity { kError, kWarning };

struct Violation {
  Severity severity = Severity::kError;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// Every invariant violation found. At the lenient level an empty final-state
// set is reported with warning severity instead of as an error.
std::vector<Violation> validate(const FsmModel& fsm, ValidationLevel level);

bool has_errors(const std::vector<Violation>& violations);

// Throws InvalidFsm listing the error-severity violations, if any.
void require_valid(const FsmModel& fsm, ValidationLevel level, std::string_view what = "fsm");

// Subset construction. Output states are named by their sorted members joined
// with '_'; only subsets reachable from the initial subset are emitted.
FsmModel determinize(const FsmModel& fsm);

struct FsmDiff {
  std::set<StateName> states_only_in_a;
  std::set<StateName> states_only_in_b;
  std::set<StateName> shared_states;
  std::set<Transition> transitions_only_in_a;
  std::set<Transition> transitions_only_in_b;
  std::set<Transition> shared_transitions;
};

FsmDiff diff(const FsmModel& a, const FsmModel& b);

nlohmann::ordered_json diff_to_json(const FsmDiff& d);

// Deterministic document form: sets in sorted order, transitions grouped by
// current state.
nlohmann::ordered_json to_json(const FsmModel& fsm);
std::string serialize(const FsmModel& fsm);

// `allowed_extra_keys` lets wrappers (ground-truth files) add top-level keys.
FsmModel from_json(const nlohmann::json& doc, const std::set<std::string>& allowed_extra_keys = {});
FsmModel parse(std::string_view document);

// Parses raw JSON text, turning syntax errors into ParseError with line:column.
nlohmann::json parse_json_text(std::string_view text, std::string_view origin = "document");

FsmModel load_file(const std::string& path);
void save_file(const FsmModel& fsm, const std::string& path);

// Transitions in grouped form: current_state -> [{receive_message, next_state}].
std::set<Transition> transitions_from_json(const nlohmann::json& obj);

}  // namespace protofsm::fsm
