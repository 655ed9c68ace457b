#include "protofsm/protofsm.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "errors.hpp"
#include "evaluator.hpp"
#include "file_io.hpp"
#include "fsm_model.hpp"
#include "fuzz_bridge.hpp"
#include "log.hpp"
#include "pipeline.hpp"

struct pfsm_fsm {
  protofsm::fsm::FsmModel model;
};

struct pfsm_ground_truth {
  protofsm::eval::GroundTruth gt;
};

struct pfsm_config {
  nlohmann::json doc;
  std::filesystem::path base_dir;
  protofsm::pipeline::RunConfig cfg;
};

namespace {

using namespace protofsm;

thread_local std::string g_last_error;

pfsm_status fail(pfsm_status st, const std::string& msg) {
  g_last_error = msg;
  return st;
}

// Runs `fn`, mapping exceptions to status codes and the thread-local message.
template <class Fn>
pfsm_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PFSM_OK;
  } catch (const Error& e) {
    return fail(static_cast<pfsm_status>(e.error_class()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(PFSM_E_INPUT, std::string("ParseError: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PFSM_E_REPO, std::string("IoError: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(PFSM_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PFSM_E_INTERNAL, std::string("internal error: ") + e.what());
  } catch (...) {
    return fail(PFSM_E_INTERNAL, "internal error");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

// A missing or unreadable document is the caller's input problem, not a repo one.
template <class Fn>
auto input_file(Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    throw InputError(e.what());
  }
}

void need(const void* p, const char* what) {
  if (!p) throw ConfigError(std::string(what) + " is NULL");
}

std::string diff_table(const nlohmann::ordered_json& d) {
  const auto& s = d["summary"];
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s\n", "", "a", "b", "b - a");
  out += buf;
  auto row = [&](const char* label, long a, long b) {
    std::snprintf(buf, sizeof buf, "%-12s %8ld %8ld %+8ld\n", label, a, b, b - a);
    out += buf;
  };
  row("states", s["states_a"].get<long>(), s["states_b"].get<long>());
  row("transitions", s["transitions_a"].get<long>(), s["transitions_b"].get<long>());
  std::snprintf(buf, sizeof buf, "shared: %zu states, %zu transitions\n", s["shared_states"].get<std::size_t>(),
                s["shared_transitions"].get<std::size_t>());
  out += buf;
  return out;
}

std::string rate_table(const filter::ModuleSelection& sel) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-40s %7s %7s %8s\n", "directory", "matched", "total", "rate");
  out += buf;
  for (const auto& r : sel.table) {
    std::snprintf(buf, sizeof buf, "%-40s %7zu %7zu %7.2f%%%s\n", r.dir.c_str(), r.matched_docs, r.total_docs,
                  r.rate * 100.0, r.dir == sel.chosen_dir ? "  <- selected" : "");
    out += buf;
  }
  return out;
}

}  // namespace

extern "C" {

const char* pfsm_version(void) { return "0.1.0"; }

const char* pfsm_last_error(void) { return g_last_error.c_str(); }

void pfsm_string_free(char* s) { std::free(s); }

void pfsm_set_log_level(int level) {
  log::set_min_level(static_cast<log::Level>(std::clamp(level, 0, 3)));
}

pfsm_status pfsm_canonicalize_name(const char* raw, char** out) {
  return guarded([&] {
    need(raw, "raw");
    need(out, "out");
    *out = dup(fsm::canonicalize_name(raw));
  });
}

pfsm_status pfsm_fsm_parse(const char* json, pfsm_fsm** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new pfsm_fsm{fsm::parse(json)};
  });
}

pfsm_status pfsm_fsm_load(const char* path, pfsm_fsm** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pfsm_fsm{input_file([&] { return fsm::load_file(path); })};
  });
}

void pfsm_fsm_free(pfsm_fsm* f) { delete f; }

pfsm_status pfsm_fsm_serialize(const pfsm_fsm* f, char** out) {
  return guarded([&] {
    need(f, "fsm");
    need(out, "out");
    *out = dup(fsm::serialize(f->model));
  });
}

pfsm_status pfsm_fsm_save(const pfsm_fsm* f, const char* path) {
  return guarded([&] {
    need(f, "fsm");
    need(path, "path");
    fsm::save_file(f->model, path);
  });
}

pfsm_status pfsm_fsm_counts(const pfsm_fsm* f, size_t* states, size_t* transitions) {
  return guarded([&] {
    need(f, "fsm");
    if (states) *states = f->model.states.size();
    if (transitions) *transitions = f->model.transitions.size();
  });
}

pfsm_status pfsm_fsm_validate(const pfsm_fsm* f, int strict, int* valid, char** violations_json) {
  return guarded([&] {
    need(f, "fsm");
    const auto vs = fsm::validate(f->model, strict ? fsm::ValidationLevel::kStrict : fsm::ValidationLevel::kLenient);
    if (valid) *valid = fsm::has_errors(vs) ? 0 : 1;
    if (violations_json) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& v : vs) {
        arr.push_back({{"severity", v.severity == fsm::Severity::kError ? "error" : "warning"}, {"message", v.message}});
      }
      *violations_json = dup(arr.dump(2));
    }
  });
}

pfsm_status pfsm_fsm_determinize(const pfsm_fsm* f, pfsm_fsm** out) {
  return guarded([&] {
    need(f, "fsm");
    need(out, "out");
    *out = new pfsm_fsm{fsm::determinize(f->model)};
  });
}

pfsm_status pfsm_fsm_diff(const pfsm_fsm* a, const pfsm_fsm* b, char** json_out, char** table_out) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(json_out, "json_out");
    const auto doc = fsm::diff_to_json(fsm::diff(a->model, b->model));
    std::string table;
    if (table_out) table = diff_table(doc);
    *json_out = dup(doc.dump(2));
    if (table_out) *table_out = dup(table);
  });
}

pfsm_status pfsm_ground_truth_load(const char* path, pfsm_ground_truth** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pfsm_ground_truth{input_file([&] { return eval::load_ground_truth(path); })};
  });
}

void pfsm_ground_truth_free(pfsm_ground_truth* gt) { delete gt; }

pfsm_status pfsm_evaluate(const pfsm_fsm* inferred, const pfsm_ground_truth* gt, const char* label,
                          char** report_json, char** table_out) {
  return guarded([&] {
    need(inferred, "inferred");
    need(gt, "gt");
    need(report_json, "report_json");
    const auto r = eval::evaluate(inferred->model, gt->gt);
    std::string table;
    if (table_out) table = eval::format_table(r, label ? label : inferred->model.protocol);
    *report_json = dup(eval::to_json(r).dump(2));
    if (table_out) *table_out = dup(table);
  });
}

pfsm_status pfsm_metrics(size_t c, size_t pc, size_t ic, size_t nf, double* precision, double* recall,
                         int* precision_undefined, int* recall_undefined) {
  return guarded([&] {
    const auto m = eval::metrics(c, pc, ic, nf);
    if (precision) *precision = m.precision;
    if (recall) *recall = m.recall;
    if (precision_undefined) *precision_undefined = m.precision_undefined;
    if (recall_undefined) *recall_undefined = m.recall_undefined;
  });
}

pfsm_status pfsm_seeds_generate(const pfsm_fsm* f, const char* templates, const char* out_dir, char** json_out) {
  return guarded([&] {
    need(f, "fsm");
    need(json_out, "json_out");
    if ((templates == nullptr) != (out_dir == nullptr)) throw ConfigError("templates and out_dir go together");
    const auto set = fuzz::generate_sequences(f->model);
    auto doc = fuzz::to_json(set);
    if (templates) {
      const auto tm = input_file([&] { return fuzz::load_templates(templates); });
      const auto files = fuzz::render_seeds(set.sequences, tm, out_dir);
      auto arr = nlohmann::ordered_json::array();
      for (const auto& p : files) arr.push_back(p.string());
      doc["files"] = std::move(arr);
    }
    *json_out = dup(doc.dump(2));
  });
}

pfsm_status pfsm_config_load(const char* path, pfsm_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    const std::filesystem::path p(path);
    nlohmann::json doc;
    try {
      doc = fsm::parse_json_text(read_file(p), p.string());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    auto base = std::filesystem::absolute(p).parent_path();
    auto cfg = pipeline::config_from_json(doc, base);
    *out = new pfsm_config{std::move(doc), std::move(base), std::move(cfg)};
  });
}

pfsm_status pfsm_config_parse(const char* json, const char* base_dir, pfsm_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    auto doc = nlohmann::json::parse(json, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
    auto base = std::filesystem::absolute(base_dir ? base_dir : ".");
    auto cfg = pipeline::config_from_json(doc, base);
    *out = new pfsm_config{std::move(doc), std::move(base), std::move(cfg)};
  });
}

pfsm_status pfsm_config_set(pfsm_config* c, const char* key, const char* value) {
  return guarded([&] {
    need(c, "config");
    need(key, "key");
    need(value, "value");
    auto doc = c->doc;
    pipeline::apply_override(doc, key, value);
    c->cfg = pipeline::config_from_json(doc, c->base_dir);  // only commit a valid result
    c->doc = std::move(doc);
  });
}

pfsm_status pfsm_config_dump(const pfsm_config* c, char** json_out) {
  return guarded([&] {
    need(c, "config");
    need(json_out, "json_out");
    *json_out = dup(pipeline::to_json(c->cfg).dump(2));
  });
}

void pfsm_config_free(pfsm_config* c) { delete c; }

pfsm_status pfsm_index_build(const pfsm_config* c, char** summary_json, char** table_out) {
  return guarded([&] {
    need(c, "config");
    const auto r = pipeline::build_index(c->cfg);
    if (summary_json) {
      nlohmann::ordered_json doc = {{"index", r.index_path.string()},
                                    {"documents", r.documents},
                                    {"entries", r.entries},
                                    {"selection", filter::to_json(r.selection)}};
      *summary_json = dup(doc.dump(2));
    }
    if (table_out) *table_out = dup(rate_table(r.selection));
  });
}

pfsm_status pfsm_infer(const pfsm_config* c, int build_index, char** summary_json) {
  return guarded([&] {
    need(c, "config");
    const auto r = pipeline::run_infer(c->cfg, build_index != 0);
    if (summary_json) {
      nlohmann::ordered_json doc = {{"fsm", r.fsm_path.string()},
                                    {"report", r.report_path.string()},
                                    {"states", r.fsm.states.size()},
                                    {"transitions", r.fsm.transitions.size()},
                                    {"stages", r.report.stages.size()},
                                    {"initial_states_source", r.report.initial_states_source}};
      *summary_json = dup(doc.dump(2));
    }
  });
}

}  // extern "C"
