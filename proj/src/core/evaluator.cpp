#include "evaluator.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <set>

#include "errors.hpp"
#include "file_io.hpp"

namespace protofsm::eval {
namespace {

unsigned wrong_bits(const fsm::Transition& a, const fsm::Transition& b) {
  unsigned w = 0;
  if (a.current_state != b.current_state) w |= kSource;
  if (a.receive_message != b.receive_message) w |= kMessage;
  if (a.next_state != b.next_state) w |= kDestination;
  return w;
}

std::vector<fsm::Transition> aliased(const std::set<fsm::Transition>& ts, const GroundTruth& gt) {
  std::vector<fsm::Transition> out;
  for (const auto& t : ts) {
    out.push_back({fsm::StateName(gt.resolve(t.current_state.str())),
                   fsm::MessageType(gt.resolve(t.receive_message.str())),
                   fsm::StateName(gt.resolve(t.next_state.str()))});
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::ordered_json transition_json(const std::optional<fsm::Transition>& t) {
  if (!t) return nullptr;
  return {{"current_state", t->current_state.str()},
          {"receive_message", t->receive_message.str()},
          {"next_state", t->next_state.str()}};
}

}  // namespace

void GroundTruth::validate() const {
  fsm::require_valid(fsm, fsm::ValidationLevel::kStrict, "ground truth");
  for (const auto& [from, to] : aliases) {
    std::set<std::string> seen{from};
    std::string cur = to;
    for (auto it = aliases.find(cur); it != aliases.end(); it = aliases.find(cur)) {
      if (!seen.insert(cur).second) throw InvalidFsm("alias cycle through " + cur);
      cur = it->second;
    }
    if (!fsm.states.count(fsm::StateName(cur)) && !fsm.alphabet.count(fsm::MessageType(cur))) {
      throw InvalidFsm("alias target " + cur + " (for " + from + ") is not a state or message of the ground truth");
    }
  }
}

std::string GroundTruth::resolve(const std::string& name) const {
  std::string cur = name;
  for (std::size_t hops = 0; hops <= aliases.size(); ++hops) {
    const auto it = aliases.find(cur);
    if (it == aliases.end()) return cur;
    cur = it->second;
  }
  throw InvalidFsm("alias cycle through " + name);
}

GroundTruth ground_truth_from_json(const nlohmann::json& doc) {
  GroundTruth gt;
  gt.fsm = fsm::from_json(doc, {"aliases"});
  if (doc.contains("aliases")) {
    const auto& a = doc["aliases"];
    if (!a.is_object()) throw SchemaError("aliases must be an object of name -> name");
    for (const auto& [k, v] : a.items()) {
      if (!v.is_string()) throw SchemaError("alias for " + k + " must be a string");
      gt.aliases[fsm::canonicalize_name(k)] = fsm::canonicalize_name(v.get<std::string>());
    }
  }
  gt.validate();
  return gt;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  return ground_truth_from_json(fsm::parse_json_text(read_file(path), path.string()));
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kCorrect: return "correct";
    case Verdict::kPartiallyCorrect: return "partially_correct";
    case Verdict::kIncorrect: return "incorrect";
    case Verdict::kNotFound: return "not_found";
  }
  return "?";
}

std::vector<TransitionJudgment> match_and_classify(const fsm::FsmModel& inferred, const GroundTruth& gt) {
  fsm::require_valid(inferred, fsm::ValidationLevel::kLenient, "inferred fsm");
  gt.validate();

  const auto inf = aliased(inferred.transitions, gt);
  const auto truth = aliased(gt.fsm.transitions, gt);
  std::vector<bool> inf_used(inf.size(), false), truth_used(truth.size(), false);
  std::vector<TransitionJudgment> out;

  // Pass 1: exact.
  for (std::size_t i = 0; i < inf.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth_used[j] || inf[i] != truth[j]) continue;
      inf_used[i] = truth_used[j] = true;
      out.push_back({inf[i], truth[j], Verdict::kCorrect, 0});
      break;
    }
  }
  // Pass 2: one wrong element.
  for (std::size_t i = 0; i < inf.size(); ++i) {
    if (inf_used[i]) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth_used[j]) continue;
      const unsigned w = wrong_bits(inf[i], truth[j]);
      if (std::popcount(w) != 1) continue;
      inf_used[i] = truth_used[j] = true;
      out.push_back({inf[i], truth[j], Verdict::kPartiallyCorrect, w});
      break;
    }
  }
  const unsigned all = kSource | kMessage | kDestination;
  for (std::size_t i = 0; i < inf.size(); ++i) {
    if (!inf_used[i]) out.push_back({inf[i], std::nullopt, Verdict::kIncorrect, all});
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (!truth_used[j]) out.push_back({std::nullopt, truth[j], Verdict::kNotFound, all});
  }
  return out;
}

Metrics metrics(std::size_t c, std::size_t pc, std::size_t ic, std::size_t nf) {
  Metrics m;
  const std::size_t pd = c + pc + ic;
  const std::size_t rd = c + pc + nf;
  if (pd == 0) m.precision_undefined = true;
  else m.precision = static_cast<double>(c) / static_cast<double>(pd);
  if (rd == 0) m.recall_undefined = true;
  else m.recall = static_cast<double>(c) / static_cast<double>(rd);
  return m;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

EvalReport evaluate(const fsm::FsmModel& inferred, const GroundTruth& gt) {
  EvalReport r;
  r.judgments = match_and_classify(inferred, gt);
  r.inferred_states = inferred.states.size();
  r.inferred_transitions = inferred.transitions.size();
  for (const auto& j : r.judgments) {
    switch (j.verdict) {
      case Verdict::kCorrect: ++r.c; break;
      case Verdict::kPartiallyCorrect: ++r.pc; break;
      case Verdict::kIncorrect: ++r.ic; break;
      case Verdict::kNotFound: ++r.nf; break;
    }
  }
  r.m = metrics(r.c, r.pc, r.ic, r.nf);
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  auto judgments = nlohmann::ordered_json::array();
  for (const auto& j : r.judgments) {
    std::vector<std::string> wrong;
    if (j.wrong & kSource) wrong.emplace_back("source");
    if (j.wrong & kMessage) wrong.emplace_back("message");
    if (j.wrong & kDestination) wrong.emplace_back("destination");
    judgments.push_back({{"verdict", to_string(j.verdict)},
                         {"inferred", transition_json(j.inferred)},
                         {"ground_truth", transition_json(j.truth)},
                         {"wrong_elements", wrong}});
  }
  return {{"states", r.inferred_states},
          {"transitions", r.inferred_transitions},
          {"correct", r.c},
          {"partially_correct", r.pc},
          {"incorrect", r.ic},
          {"not_found", r.nf},
          {"precision", r.m.precision},
          {"recall", r.m.recall},
          {"precision_percent", percent(r.m.precision)},
          {"recall_percent", percent(r.m.recall)},
          {"precision_undefined", r.m.precision_undefined},
          {"recall_undefined", r.m.recall_undefined},
          {"judgments", judgments}};
}

std::string format_table(const EvalReport& r, const std::string& label) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-16s %4s %4s %4s %4s %4s %4s %8s %8s\n", "", "S", "T", "C", "PC", "I", "NF",
                "P(%)", "R(%)");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-16s %4zu %4zu %4zu %4zu %4zu %4zu %8s %8s\n", label.c_str(), r.inferred_states,
                r.inferred_transitions, r.c, r.pc, r.ic, r.nf,
                (percent(r.m.precision) + (r.m.precision_undefined ? "*" : "")).c_str(),
                (percent(r.m.recall) + (r.m.recall_undefined ? "*" : "")).c_str());
  out += buf;
  if (r.m.precision_undefined || r.m.recall_undefined) out += "* zero denominator\n";
  return out;
}

}  // namespace protofsm::eval
