#include "fsm_model.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <sstream>

#include "errors.hpp"
#include "file_io.hpp"

namespace protofsm::fsm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string canonicalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_sep = false;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::toupper(c)));
    } else {
      pending_sep = true;
    }
  }
  if (out.empty()) throw NameError("name is empty after canonicalization: \"" + std::string(raw) + "\"");
  return out;
}

std::string to_string(const Transition& t) {
  return t.current_state.str() + " --" + t.receive_message.str() + "--> " + t.next_state.str();
}

std::vector<Violation> validate(const FsmModel& fsm, ValidationLevel level) {
  std::vector<Violation> out;
  auto error = [&](std::string m) { out.push_back({Severity::kError, std::move(m)}); };

  if (fsm.alphabet.empty()) error("alphabet empty");
  if (fsm.states.empty()) error("states empty");
  if (fsm.initial_states.empty()) error("initial_states empty");
  if (fsm.final_states.empty()) {
    out.push_back({level == ValidationLevel::kStrict ? Severity::kError : Severity::kWarning,
                   "final_states empty"});
  }
  for (const auto& s : fsm.initial_states) {
    if (!fsm.states.contains(s)) error("unknown state " + s.str() + " in initial_states");
  }
  for (const auto& s : fsm.final_states) {
    if (!fsm.states.contains(s)) error("unknown state " + s.str() + " in final_states");
  }
  // Report each undeclared name once, in sorted order.
  std::set<std::string> unknown_states;
  std::set<std::string> unknown_messages;
  for (const auto& t : fsm.transitions) {
    if (!fsm.states.contains(t.current_state)) unknown_states.insert(t.current_state.str());
    if (!fsm.states.contains(t.next_state)) unknown_states.insert(t.next_state.str());
    if (!fsm.alphabet.contains(t.receive_message)) unknown_messages.insert(t.receive_message.str());
  }
  for (const auto& s : unknown_states) error("unknown state " + s);
  for (const auto& m : unknown_messages) error("unknown message " + m);
  return out;
}

bool has_errors(const std::vector<Violation>& violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::kError; });
}

void require_valid(const FsmModel& fsm, ValidationLevel level, std::string_view what) {
  auto violations = validate(fsm, level);
  if (!has_errors(violations)) return;
  std::string msg(what);
  msg += " fails validation:";
  for (const auto& v : violations) {
    if (v.severity == Severity::kError) msg += " [" + v.message + "]";
  }
  throw InvalidFsm(msg);
}

namespace {

using Subset = std::set<StateName>;

std::string join_subset(const Subset& subset) {
  std::string name;
  for (const auto& s : subset) {
    if (!name.empty()) name.push_back('_');
    name += s.str();
  }
  return name;
}

}  // namespace

FsmModel determinize(const FsmModel& fsm) {
  require_valid(fsm, ValidationLevel::kLenient, "determinize input");

  std::map<std::pair<StateName, MessageType>, Subset> delta;
  for (const auto& t : fsm.transitions) delta[{t.current_state, t.receive_message}].insert(t.next_state);

  FsmModel out;
  out.protocol = fsm.protocol;
  out.implementation = fsm.implementation;
  out.alphabet = fsm.alphabet;

  std::map<Subset, StateName> names;
  std::set<std::string> used_names;
  auto name_of = [&](const Subset& subset) -> StateName {
    if (auto it = names.find(subset); it != names.end()) return it->second;
    std::string base = join_subset(subset);
    std::string candidate = base;
    // Distinct subsets can join to the same text ({A_B} vs {A, B}).
    for (int n = 2; used_names.contains(candidate); ++n) candidate = base + "_" + std::to_string(n);
    used_names.insert(candidate);
    StateName name(candidate);
    names.emplace(subset, name);
    return name;
  };

  std::deque<Subset> work;
  std::set<Subset> seen;
  const Subset& start = fsm.initial_states;
  work.push_back(start);
  seen.insert(start);
  out.initial_states.insert(name_of(start));

  while (!work.empty()) {
    Subset current = std::move(work.front());
    work.pop_front();
    StateName current_name = name_of(current);
    out.states.insert(current_name);
    if (std::any_of(current.begin(), current.end(), [&](const StateName& s) { return fsm.final_states.contains(s); })) {
      out.final_states.insert(current_name);
    }
    for (const auto& m : fsm.alphabet) {
      Subset target;
      for (const auto& s : current) {
        if (auto it = delta.find({s, m}); it != delta.end()) target.insert(it->second.begin(), it->second.end());
      }
      if (target.empty()) continue;
      if (seen.insert(target).second) work.push_back(target);
      out.transitions.insert({current_name, m, name_of(target)});
    }
  }
  return out;
}

FsmDiff diff(const FsmModel& a, const FsmModel& b) {
  require_valid(a, ValidationLevel::kLenient, "diff input a");
  require_valid(b, ValidationLevel::kLenient, "diff input b");
  FsmDiff d;
  std::set_difference(a.states.begin(), a.states.end(), b.states.begin(), b.states.end(),
                      std::inserter(d.states_only_in_a, d.states_only_in_a.end()));
  std::set_difference(b.states.begin(), b.states.end(), a.states.begin(), a.states.end(),
                      std::inserter(d.states_only_in_b, d.states_only_in_b.end()));
  std::set_intersection(a.states.begin(), a.states.end(), b.states.begin(), b.states.end(),
                        std::inserter(d.shared_states, d.shared_states.end()));
  std::set_difference(a.transitions.begin(), a.transitions.end(), b.transitions.begin(), b.transitions.end(),
                      std::inserter(d.transitions_only_in_a, d.transitions_only_in_a.end()));
  std::set_difference(b.transitions.begin(), b.transitions.end(), a.transitions.begin(), a.transitions.end(),
                      std::inserter(d.transitions_only_in_b, d.transitions_only_in_b.end()));
  std::set_intersection(a.transitions.begin(), a.transitions.end(), b.transitions.begin(), b.transitions.end(),
                        std::inserter(d.shared_transitions, d.shared_transitions.end()));
  return d;
}

namespace {

template <class Set>
ordered_json names_array(const Set& names) {
  ordered_json arr = ordered_json::array();
  for (const auto& n : names) arr.push_back(n.str());
  return arr;
}

ordered_json transitions_array(const std::set<Transition>& ts) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : ts) {
    arr.push_back({{"current_state", t.current_state.str()},
                   {"receive_message", t.receive_message.str()},
                   {"next_state", t.next_state.str()}});
  }
  return arr;
}

}  // namespace

nlohmann::ordered_json diff_to_json(const FsmDiff& d) {
  ordered_json j;
  j["states_only_in_a"] = names_array(d.states_only_in_a);
  j["states_only_in_b"] = names_array(d.states_only_in_b);
  j["shared_states"] = names_array(d.shared_states);
  j["transitions_only_in_a"] = transitions_array(d.transitions_only_in_a);
  j["transitions_only_in_b"] = transitions_array(d.transitions_only_in_b);
  j["shared_transitions"] = transitions_array(d.shared_transitions);
  j["summary"] = {{"states_only_in_a", d.states_only_in_a.size()},
                  {"states_only_in_b", d.states_only_in_b.size()},
                  {"shared_states", d.shared_states.size()},
                  {"transitions_only_in_a", d.transitions_only_in_a.size()},
                  {"transitions_only_in_b", d.transitions_only_in_b.size()},
                  {"shared_transitions", d.shared_transitions.size()},
                  {"states_a", d.states_only_in_a.size() + d.shared_states.size()},
                  {"states_b", d.states_only_in_b.size() + d.shared_states.size()},
                  {"transitions_a", d.transitions_only_in_a.size() + d.shared_transitions.size()},
                  {"transitions_b", d.transitions_only_in_b.size() + d.shared_transitions.size()}};
  return j;
}

nlohmann::ordered_json to_json(const FsmModel& fsm) {
  ordered_json doc;
  doc["protocol"] = fsm.protocol;
  doc["implementation"] = {{"repo", fsm.implementation.repo}, {"commit", fsm.implementation.commit}};
  doc["alphabet"] = names_array(fsm.alphabet);
  doc["states"] = names_array(fsm.states);
  doc["initial_states"] = names_array(fsm.initial_states);
  doc["final_states"] = names_array(fsm.final_states);
  // std::set order on Transition is (current, message, next), which is exactly
  // the grouping and per-group order of the document.
  ordered_json grouped = ordered_json::object();
  for (const auto& t : fsm.transitions) {
    auto& arr = grouped[t.current_state.str()];
    if (arr.is_null()) arr = ordered_json::array();
    arr.push_back({{"receive_message", t.receive_message.str()}, {"next_state", t.next_state.str()}});
  }
  doc["transitions"] = std::move(grouped);
  return doc;
}

std::string serialize(const FsmModel& fsm) { return to_json(fsm).dump(2) + "\n"; }

namespace {

void check_keys(const json& obj, const std::vector<std::string>& required, const std::set<std::string>& optional,
                const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& k : required) {
    if (!obj.contains(k)) missing.push_back(k);
  }
  for (const auto& [k, _] : obj.items()) {
    if (std::find(required.begin(), required.end(), k) == required.end() && !optional.contains(k)) extra.push_back(k);
  }
  if (missing.empty() && extra.empty()) return;
  std::string msg = where;
  if (!missing.empty()) {
    msg += " missing keys:";
    for (const auto& k : missing) msg += " " + k;
  }
  if (!extra.empty()) {
    msg += (missing.empty() ? "" : ";");
    msg += " unexpected keys:";
    for (const auto& k : extra) msg += " " + k;
  }
  throw SchemaError(msg, missing, extra);
}

const std::string& as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + " must be a string");
  return v.get_ref<const std::string&>();
}

template <class N>
std::set<N> names_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw SchemaError(where + " must be an array of strings");
  std::set<N> out;
  for (const auto& v : arr) {
    try {
      out.emplace(as_string(v, where + " element"));
    } catch (const NameError& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::set<Transition> transitions_from_json(const json& obj) {
  if (!obj.is_object()) throw SchemaError("transitions must be an object keyed by current_state");
  std::set<Transition> out;
  for (const auto& [current, arr] : obj.items()) {
    const std::string where = "transitions[\"" + current + "\"]";
    if (!arr.is_array()) throw SchemaError(where + " must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string item_where = where + "[" + std::to_string(i) + "]";
      check_keys(arr[i], {"receive_message", "next_state"}, {}, item_where);
      try {
        Transition t{StateName(current), MessageType(as_string(arr[i]["receive_message"], item_where + ".receive_message")),
                     StateName(as_string(arr[i]["next_state"], item_where + ".next_state"))};
        if (!out.insert(std::move(t)).second) throw SchemaError(item_where + " duplicates an earlier transition");
      } catch (const NameError& e) {
        throw SchemaError(item_where + ": " + e.what());
      }
    }
  }
  return out;
}

FsmModel from_json(const json& doc, const std::set<std::string>& allowed_extra_keys) {
  check_keys(doc, {"protocol", "implementation", "alphabet", "states", "initial_states", "final_states", "transitions"},
             allowed_extra_keys, "FSM document");
  FsmModel fsm;
  fsm.protocol = as_string(doc["protocol"], "protocol");
  check_keys(doc["implementation"], {"repo", "commit"}, {}, "implementation");
  fsm.implementation.repo = as_string(doc["implementation"]["repo"], "implementation.repo");
  fsm.implementation.commit = as_string(doc["implementation"]["commit"], "implementation.commit");
  fsm.alphabet = names_from<MessageType>(doc["alphabet"], "alphabet");
  fsm.states = names_from<StateName>(doc["states"], "states");
  fsm.initial_states = names_from<StateName>(doc["initial_states"], "initial_states");
  fsm.final_states = names_from<StateName>(doc["final_states"], "final_states");
  fsm.transitions = transitions_from_json(doc["transitions"]);
  return fsm;
}

json parse_json_text(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << origin << ":" << line << ":" << col << ": malformed JSON";
    throw ParseError(msg.str());
  }
}

FsmModel parse(std::string_view document) { return from_json(parse_json_text(document)); }

FsmModel load_file(const std::string& path) {
  return from_json(parse_json_text(read_file(path), path));
}

void save_file(const FsmModel& fsm, const std::string& path) { write_file(path, serialize(fsm)); }

}  // namespace protofsm::fsm
