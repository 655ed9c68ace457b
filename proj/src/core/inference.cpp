#include "inference.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "digest.hpp"
#include "errors.hpp"
#include "log.hpp"

namespace protofsm::inference {
namespace {

std::size_t stage_index(Stage s) { return static_cast<std::size_t>(s); }

// Replaces {{name}} placeholders in one pass; values are not rescanned.
std::string substitute(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    const std::string name = text.substr(open + 2, close - open - 2);
    out.append(text, pos, open - pos);
    const auto it = values.find(name);
    if (it == values.end()) throw TemplateError("missing slot " + name);
    out += it->second;
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

// End of the JSON value starting at text[start] ('{' or '['), or npos.
std::size_t balanced_end(const std::string& text, std::size_t start) {
  std::vector<char> stack;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') stack.push_back(c == '{' ? '}' : ']');
    else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::string::npos;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::string::npos;
}

std::optional<nlohmann::json> try_parse(const std::string& s) {
  auto j = nlohmann::json::parse(s, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::vector<std::string> string_array(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ParseFailure(std::string(what) + " must be a JSON array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseFailure(std::string(what) + " must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// Canonical names; unusable ones go to `rejected`.
std::vector<std::string> canonical_names(const std::vector<std::string>& raw, std::vector<std::string>& rejected) {
  std::set<std::string> out;
  for (const auto& r : raw) {
    try {
      out.insert(fsm::canonicalize_name(r));
    } catch (const NameError&) {
      rejected.push_back(r);
    }
  }
  return {out.begin(), out.end()};
}

std::string transition_key(const fsm::Transition& t) {
  return t.current_state.str() + "|" + t.receive_message.str() + "|" + t.next_state.str();
}

fsm::Transition transition_from_key(const std::string& key) {
  const auto a = key.find('|');
  const auto b = key.find('|', a + 1);
  return {fsm::StateName(key.substr(0, a)), fsm::MessageType(key.substr(a + 1, b - a - 1)),
          fsm::StateName(key.substr(b + 1))};
}

nlohmann::ordered_json frequency_json(const std::vector<ItemFrequency>& table) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : table) {
    out.push_back({{"item", f.item}, {"count", f.count}, {"frequency", f.frequency}, {"kept", f.kept}});
  }
  return out;
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kCodePaths: return "code_paths";
    case Stage::kStates: return "states";
    case Stage::kMessages: return "messages";
    case Stage::kTransitions: return "transitions";
  }
  return "?";
}

const std::string& default_background() {
  static const std::string text =
      "Background: {{protocol}} is a stateful network protocol. Each peer keeps a protocol state for every "
      "session. When the implementation receives a message of some type while in some state, it processes the "
      "message and moves the session to a next state. Implementations usually declare their states and message "
      "types explicitly, as enumerations, constants or structure fields, and change state in message handlers.";
  return text;
}

const std::string& default_instruction(Stage s) {
  static const std::string texts[] = {
      "Task: find the code paths related to the {{protocol}} state machine.",
      "Task: extract all states defined in the {{protocol}} implementation.",
      "Task: extract all message types defined in the {{protocol}} implementation.",
      "Task: summarize all state transitions of the {{protocol}} implementation from state {{current_state}}.",
  };
  return texts[stage_index(s)];
}

const std::string& stage_template(Stage s) {
  static const std::string texts[] = {
      // code paths
      "You are analyzing the source code of a {{protocol}} implementation. List the source files that define "
      "the {{protocol}} states and message types, and the files that handle received messages and change the "
      "protocol state. Give paths relative to the repository root.",
      // states
      "You are analyzing the source code of a {{protocol}} implementation. The code paths related to its state "
      "machine are:\n{{code_paths}}\nAnalyze these files and list every {{protocol}} state the implementation "
      "defines, using the names from the code, for example enumeration members. Also mark the states a new "
      "session starts in as initial_states and the states in which a session is finished as final_states.",
      // messages
      "You are analyzing the source code of a {{protocol}} implementation. The code paths related to its state "
      "machine are:\n{{code_paths}}\nAnalyze these files and list every {{protocol}} message type the "
      "implementation receives and dispatches on, using the names from the code.",
      // transitions
      "You are analyzing the source code of a {{protocol}} implementation. The code paths related to its state "
      "machine are:\n{{code_paths}}\nThe states are:\n{{states}}\nThe message types are:\n{{messages}}\n"
      "The current state is {{current_state}}. For a peer in state {{current_state}}, list every transition the "
      "implementation performs: the type of the received message and the next state. Use only the states and "
      "message types listed above.",
  };
  return texts[stage_index(s)];
}

const std::string& desired_format(Stage s) {
  static const std::string texts[] = {
      "[\"path/to/state_machine.c\", \"path/to/message_handler.c\"]",
      "{\"states\": [\"STATE_A\", \"STATE_B\"], \"initial_states\": [\"STATE_A\"], \"final_states\": [\"STATE_B\"]}",
      "[\"MESSAGE_A\", \"MESSAGE_B\"]",
      "{\"{{current_state}}\": [{\"receive_message\": \"MESSAGE_A\", \"next_state\": \"STATE_B\"}]}",
  };
  return texts[stage_index(s)];
}

std::vector<std::string> required_slots(Stage s) {
  switch (s) {
    case Stage::kCodePaths: return {};
    case Stage::kStates:
    case Stage::kMessages: return {"code_paths"};
    case Stage::kTransitions: return {"code_paths", "states", "messages", "current_state"};
  }
  return {};
}

std::string render(const PromptSpec& spec) {
  if (spec.protocol.empty()) throw TemplateError("missing slot protocol");
  for (const auto& slot : required_slots(spec.stage)) {
    if (!spec.slots.count(slot)) throw TemplateError("missing slot " + slot);
  }
  std::map<std::string, std::string> values = spec.slots;
  values["protocol"] = spec.protocol;
  if (!values.count("desired_format")) values["desired_format"] = desired_format(spec.stage);
  const std::string& bg = spec.background.empty() ? default_background() : spec.background;
  const std::string& instr = spec.instruction.empty() ? default_instruction(spec.stage) : spec.instruction;
  const std::string text = bg + "\n\n" + instr + "\n\n" + stage_template(spec.stage) +
                           "\n\nDesired format (answer with JSON only, following this pattern):\n{{desired_format}}";
  // The desired format block may itself hold placeholders.
  values["desired_format"] = substitute(values["desired_format"], values);
  return substitute(text, values);
}

std::string bullet_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += "- " + items[i];
  }
  return out;
}

std::optional<nlohmann::json> extract_json(const std::string& response) {
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (response.compare(i, 3, "```") == 0) {
      const auto body = response.find('\n', i + 3);
      if (body == std::string::npos) break;
      const auto close = response.find("```", body + 1);
      if (close == std::string::npos) break;
      if (auto j = try_parse(response.substr(body + 1, close - body - 1))) return j;
      i = close + 2;
      continue;
    }
    const char c = response[i];
    if (c != '{' && c != '[') continue;
    const auto end = balanced_end(response, i);
    if (end == std::string::npos) continue;
    if (auto j = try_parse(response.substr(i, end - i))) return j;
  }
  return std::nullopt;
}

std::string normalize_path(const std::string& path) {
  std::string p = path;
  std::replace(p.begin(), p.end(), '\\', '/');
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= p.size()) {
    auto slash = p.find('/', start);
    if (slash == std::string::npos) slash = p.size();
    const std::string part = p.substr(start, slash - start);
    if (!part.empty() && part != ".") parts.push_back(part);
    start = slash + 1;
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "/" : "") + parts[i];
  return out;
}

ParsedOutput parse_output(Stage stage, const std::string& response, const std::string& current_state) {
  const auto doc = extract_json(response);
  if (!doc) throw ParseFailure("no JSON block in response");
  ParsedOutput out;

  auto list_field = [&](const char* key) -> const nlohmann::json& {
    if (doc->is_object() && doc->contains(key)) return (*doc)[key];
    return *doc;
  };

  switch (stage) {
    case Stage::kCodePaths: {
      std::set<std::string> paths;
      for (const auto& p : string_array(list_field("code_paths"), "code_paths")) {
        const auto n = normalize_path(p);
        if (n.empty()) out.rejected.push_back(p);
        else paths.insert(n);
      }
      out.items.assign(paths.begin(), paths.end());
      break;
    }
    case Stage::kStates: {
      out.items = canonical_names(string_array(list_field("states"), "states"), out.rejected);
      if (doc->is_object()) {
        if (doc->contains("initial_states")) {
          out.initial_states = canonical_names(string_array((*doc)["initial_states"], "initial_states"), out.rejected);
        }
        if (doc->contains("final_states")) {
          out.final_states = canonical_names(string_array((*doc)["final_states"], "final_states"), out.rejected);
        }
      }
      break;
    }
    case Stage::kMessages:
      out.items = canonical_names(string_array(list_field("messages"), "messages"), out.rejected);
      break;
    case Stage::kTransitions: {
      if (!doc->is_object()) throw ParseFailure("transitions must be a JSON object keyed by current state");
      std::string want;
      if (!current_state.empty()) want = fsm::canonicalize_name(current_state);
      std::set<fsm::Transition> ts;
      for (const auto& [key, arr] : doc->items()) {
        if (!arr.is_array()) throw ParseFailure("transitions for " + key + " must be an array");
        std::string from;
        try {
          from = fsm::canonicalize_name(key);
        } catch (const NameError&) {
          out.rejected.push_back(key);
          continue;
        }
        for (const auto& e : arr) {
          if (!e.is_object() || !e.contains("receive_message") || !e.contains("next_state") ||
              !e["receive_message"].is_string() || !e["next_state"].is_string()) {
            throw ParseFailure("transition entries need string receive_message and next_state");
          }
          const auto msg = e["receive_message"].get<std::string>();
          const auto next = e["next_state"].get<std::string>();
          if (!want.empty() && from != want) {
            out.rejected.push_back(key + " --" + msg + "--> " + next);
            continue;
          }
          try {
            ts.insert({fsm::StateName(from), fsm::MessageType(msg), fsm::StateName(next)});
          } catch (const NameError&) {
            out.rejected.push_back(key + " --" + msg + "--> " + next);
          }
        }
      }
      out.transitions.assign(ts.begin(), ts.end());
      for (const auto& t : out.transitions) out.items.push_back(transition_key(t));
      break;
    }
  }
  return out;
}

void ConsensusConfig::validate() const {
  if (iterations < 1) throw ConfigError("consensus iterations must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("consensus threshold must be within (0, 1)");
}

std::vector<ItemFrequency> consensus(const std::vector<std::optional<std::vector<std::string>>>& iterations,
                                     double threshold) {
  std::map<std::string, std::size_t> counts;
  for (const auto& it : iterations) {
    if (!it) continue;
    for (const auto& item : std::set<std::string>(it->begin(), it->end())) ++counts[item];
  }
  std::vector<ItemFrequency> out;
  const double n = static_cast<double>(iterations.size());
  for (const auto& [item, c] : counts) {
    const double f = static_cast<double>(c) / n;
    out.push_back({item, c, f, f > threshold});
  }
  return out;
}

std::vector<std::string> kept(const std::vector<ItemFrequency>& table) {
  std::vector<std::string> out;
  for (const auto& f : table) {
    if (f.kept) out.push_back(f.item);
  }
  return out;
}

std::vector<RetrievedChunk> retrieve_context(const std::string& query, const embedding::VectorIndex& index,
                                             const embedding::EmbeddingBackendSpec& backend,
                                             const RetrievalConfig& rc, std::size_t prompt_chars,
                                             const std::set<std::string>* allowed_docs) {
  if (rc.k == 0) throw ConfigError("retrieval k must be >= 1");
  const auto fp = embedding::fingerprint(backend);
  if (!(fp == index.fingerprint())) {
    throw BackendMismatch("index was built with " + index.fingerprint().kind + " (" + index.fingerprint().model +
                          ") but the configured embedding backend is " + fp.kind + " (" + fp.model + ")");
  }
  if (index.empty()) {
    log::warn("vector index is empty; prompting without code context");
    return {};
  }
  const auto q = embedding::embed({query}, backend).front();

  std::vector<embedding::RetrievalResult> hits;
  if (allowed_docs && !allowed_docs->empty()) {
    for (const auto& r : embedding::top_k(index, q, index.size())) {
      if (allowed_docs->count(index.entries()[r.entry].chunk.doc_path)) hits.push_back(r);
      if (hits.size() == rc.k) break;
    }
    // None of the named files are indexed: fall back to the whole index.
    if (hits.empty()) hits = embedding::top_k(index, q, rc.k);
  } else {
    hits = embedding::top_k(index, q, rc.k);
  }

  std::vector<RetrievedChunk> out;
  for (const auto& h : hits) {
    const auto& c = index.entries()[h.entry].chunk;
    out.push_back({c.doc_path, c.ordinal, h.score, c.text});
  }

  const double budget_tokens = static_cast<double>(rc.window_tokens) - static_cast<double>(rc.output_tokens) -
                               static_cast<double>(prompt_chars) / rc.chars_per_token;
  const double budget_chars = std::max(0.0, budget_tokens * rc.chars_per_token);
  auto total = [&] {
    std::size_t n = 0;
    for (const auto& c : out) n += compose_prompt("", {c}).size();
    return static_cast<double>(n);
  };
  // Results are score-ordered, so the back is always the lowest score.
  while (!out.empty() && total() > budget_chars) out.pop_back();
  if (out.size() < hits.size()) {
    log::info("dropped " + std::to_string(hits.size() - out.size()) + " retrieved chunks to fit the context window");
  }
  return out;
}

std::string compose_prompt(const std::string& rendered, const std::vector<RetrievedChunk>& context) {
  std::string out = rendered;
  if (context.empty()) return out;
  out += "\n\nRelevant source code:";
  for (const auto& c : context) {
    out += "\n\n// file: " + c.doc_path + " (chunk " + std::to_string(c.ordinal) + ")\n" + c.text;
  }
  return out;
}

StageResult run_stage(const PromptSpec& spec, const StageInputs& inputs, llm::Gateway& gateway,
                      const ConsensusConfig& cc) {
  cc.validate();
  const auto start = std::chrono::steady_clock::now();
  StageResult r;
  r.stage = spec.stage;
  if (spec.stage == Stage::kTransitions) r.current_state = spec.slots.count("current_state") ? spec.slots.at("current_state") : "";
  r.iterations = cc.iterations;

  const std::string rendered = render(spec);
  if (inputs.index) {
    if (!inputs.backend) throw ConfigError("retrieval needs the embedding backend that built the index");
    r.context = retrieve_context(rendered, *inputs.index, *inputs.backend, inputs.retrieval, rendered.size(),
                                 inputs.allowed_docs);
  }
  const std::string prompt = compose_prompt(rendered, r.context);
  r.prompt_digest = sha256_hex(prompt);
  r.prompt_chars = prompt.size() * cc.iterations;
  const llm::Transcript transcript({{llm::Role::kUser, prompt}});

  r.raw_responses.assign(cc.iterations, {});
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cc.iterations) return;
      {
        std::lock_guard lk(mu);
        if (error) return;
      }
      try {
        r.raw_responses[i] = gateway.complete(transcript);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(gateway.parallelism(), cc.iterations);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<std::optional<std::vector<std::string>>> votes, initial_votes, final_votes;
  std::set<std::string> rejected;
  for (std::size_t i = 0; i < cc.iterations; ++i) {
    r.response_chars += r.raw_responses[i].size();
    try {
      auto parsed = parse_output(spec.stage, r.raw_responses[i], r.current_state);
      votes.emplace_back(parsed.items);
      rejected.insert(parsed.rejected.begin(), parsed.rejected.end());
      if (parsed.initial_states || parsed.final_states) r.marks_present = true;
      initial_votes.emplace_back(parsed.initial_states.value_or(std::vector<std::string>{}));
      final_votes.emplace_back(parsed.final_states.value_or(std::vector<std::string>{}));
    } catch (const ParseFailure& e) {
      r.parse_failures.push_back(i);
      votes.emplace_back(std::nullopt);
      initial_votes.emplace_back(std::nullopt);
      final_votes.emplace_back(std::nullopt);
      log::info(std::string(to_string(spec.stage)) + " iteration " + std::to_string(i) + ": " + e.what());
    } catch (const NameError& e) {
      r.parse_failures.push_back(i);
      votes.emplace_back(std::nullopt);
      initial_votes.emplace_back(std::nullopt);
      final_votes.emplace_back(std::nullopt);
    }
  }
  r.rejected.assign(rejected.begin(), rejected.end());
  r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (r.parse_failures.size() == cc.iterations) {
    std::string what = to_string(spec.stage);
    if (!r.current_state.empty()) what += " (" + r.current_state + ")";
    throw StageFailed("no parseable response in " + std::to_string(cc.iterations) + " iterations of stage " + what,
                      r.raw_responses);
  }
  r.items = consensus(votes, cc.threshold);
  if (spec.stage == Stage::kStates) {
    r.initial_marks = consensus(initial_votes, cc.threshold);
    r.final_marks = consensus(final_votes, cc.threshold);
  }
  return r;
}

nlohmann::ordered_json to_json(const StageResult& r) {
  nlohmann::ordered_json j = {{"stage", to_string(r.stage)}};
  if (r.stage == Stage::kTransitions) j["current_state"] = r.current_state;
  j["prompt_digest"] = r.prompt_digest;
  j["iterations"] = r.iterations;
  j["parse_failures"] = r.parse_failures;
  j["items"] = frequency_json(r.items);
  j["kept_items"] = r.kept_items();
  std::vector<std::string> dropped;
  for (const auto& f : r.items) {
    if (!f.kept) dropped.push_back(f.item);
  }
  j["dropped_items"] = dropped;
  if (r.stage == Stage::kStates) {
    j["initial_marks"] = frequency_json(r.initial_marks);
    j["final_marks"] = frequency_json(r.final_marks);
  }
  j["rejected"] = r.rejected;
  auto ctx = nlohmann::ordered_json::array();
  for (const auto& c : r.context) ctx.push_back({{"doc_path", c.doc_path}, {"ordinal", c.ordinal}, {"score", c.score}});
  j["context"] = ctx;
  j["tokens"] = {{"prompt_estimate", static_cast<std::size_t>(r.prompt_chars / 4)},
                 {"completion_estimate", static_cast<std::size_t>(r.response_chars / 4)}};
  j["duration_ms"] = r.duration_ms;
  return j;
}

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j = {{"protocol", protocol},
                              {"status", status},
                              {"consensus", {{"iterations", consensus.iterations}, {"threshold", consensus.threshold}}}};
  if (!error.empty()) j["error"] = error;
  auto stage_list = nlohmann::ordered_json::array();
  std::size_t prompt_tokens = 0, completion_tokens = 0;
  for (const auto& s : stages) {
    stage_list.push_back(inference::to_json(s));
    prompt_tokens += s.prompt_chars / 4;
    completion_tokens += s.response_chars / 4;
  }
  j["stages"] = std::move(stage_list);
  j["initial_states_source"] = initial_states_source;
  j["final_states_source"] = final_states_source;
  j["dropped_transitions"] = dropped_transitions;
  j["tokens"] = {{"prompt_estimate", prompt_tokens}, {"completion_estimate", completion_tokens}};
  return j;
}

fsm::FsmModel infer_fsm(const InferenceConfig& cfg, const embedding::VectorIndex* index, llm::Gateway& gateway,
                        RunReport& report) {
  report.protocol = cfg.protocol;
  report.consensus = cfg.consensus;
  report.status = "running";
  try {
    cfg.consensus.validate();
    if (cfg.protocol.empty()) throw ConfigError("protocol label is empty");

    StageInputs inputs;
    inputs.index = index;
    inputs.backend = &cfg.embedding;
    inputs.retrieval = cfg.retrieval;

    auto spec_for = [&](Stage s) {
      PromptSpec p;
      p.stage = s;
      p.protocol = cfg.protocol;
      p.background = cfg.background;
      return p;
    };

    // (1) code paths
    report.stages.push_back(run_stage(spec_for(Stage::kCodePaths), inputs, gateway, cfg.consensus));
    const auto code_paths = report.stages.back().kept_items();
    const std::set<std::string> allowed(code_paths.begin(), code_paths.end());
    inputs.allowed_docs = &allowed;

    // (2) states and messages
    auto states_spec = spec_for(Stage::kStates);
    states_spec.slots["code_paths"] = bullet_list(code_paths);
    report.stages.push_back(run_stage(states_spec, inputs, gateway, cfg.consensus));
    const StageResult states_result = report.stages.back();
    const auto states = states_result.kept_items();

    auto messages_spec = spec_for(Stage::kMessages);
    messages_spec.slots["code_paths"] = bullet_list(code_paths);
    report.stages.push_back(run_stage(messages_spec, inputs, gateway, cfg.consensus));
    const auto messages = report.stages.back().kept_items();

    if (states.empty()) throw StageFailed("no state survived consensus", states_result.raw_responses);
    if (messages.empty()) throw StageFailed("no message type survived consensus", report.stages.back().raw_responses);

    // (3) one transitions prompt family per kept state
    fsm::FsmModel out;
    out.protocol = cfg.protocol;
    out.implementation = cfg.implementation;
    for (const auto& s : states) out.states.insert(fsm::StateName(s));
    for (const auto& m : messages) out.alphabet.insert(fsm::MessageType(m));

    for (const auto& s : states) {
      auto t_spec = spec_for(Stage::kTransitions);
      t_spec.slots = {{"code_paths", bullet_list(code_paths)},
                      {"states", bullet_list(states)},
                      {"messages", bullet_list(messages)},
                      {"current_state", s}};
      report.stages.push_back(run_stage(t_spec, inputs, gateway, cfg.consensus));
      for (const auto& key : report.stages.back().kept_items()) {
        const auto t = transition_from_key(key);
        if (!out.states.count(t.current_state) || !out.states.count(t.next_state) ||
            !out.alphabet.count(t.receive_message)) {
          report.dropped_transitions.push_back(fsm::to_string(t));
          log::warn("dropping transition outside the kept states/messages: " + fsm::to_string(t));
          continue;
        }
        out.transitions.insert(t);
      }
    }

    // Initial and final states.
    if (states_result.marks_present) {
      for (const auto& s : kept(states_result.initial_marks)) {
        if (out.states.count(fsm::StateName(s))) out.initial_states.insert(fsm::StateName(s));
      }
      for (const auto& s : kept(states_result.final_marks)) {
        if (out.states.count(fsm::StateName(s))) out.final_states.insert(fsm::StateName(s));
      }
    }
    if (!out.initial_states.empty()) {
      report.initial_states_source = "model";
    } else {
      std::set<fsm::StateName> has_incoming;
      for (const auto& t : out.transitions) {
        if (t.current_state != t.next_state) has_incoming.insert(t.next_state);
      }
      for (const auto& s : out.states) {
        if (!has_incoming.count(s)) out.initial_states.insert(s);
      }
      if (!out.initial_states.empty()) {
        report.initial_states_source = "heuristic: no incoming transition";
      } else {
        out.initial_states.insert(*out.states.begin());
        report.initial_states_source = "heuristic: first state";
      }
    }
    report.final_states_source = out.final_states.empty() ? "none" : "model";

    fsm::require_valid(out, fsm::ValidationLevel::kLenient, "inferred fsm");
    report.status = "ok";
    return out;
  } catch (const std::exception& e) {
    report.status = "failed";
    report.error = e.what();
    throw;
  }
}

}  // namespace protofsm::inference
