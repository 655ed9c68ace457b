// protofsm command line. Everything goes through the C API in protofsm.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "protofsm/protofsm.h"

namespace fs = std::filesystem;

namespace {

// Carries a status code out of a subcommand.
struct Failure {
  int code;
};

void check(pfsm_status st) {
  if (st != PFSM_OK) {
    std::fprintf(stderr, "protofsm: %s\n", pfsm_last_error());
    throw Failure{st};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  pfsm_string_free(s);
  return out;
}

using FsmPtr = std::unique_ptr<pfsm_fsm, decltype(&pfsm_fsm_free)>;
using ConfigPtr = std::unique_ptr<pfsm_config, decltype(&pfsm_config_free)>;
using GtPtr = std::unique_ptr<pfsm_ground_truth, decltype(&pfsm_ground_truth_free)>;

FsmPtr load_fsm(const std::string& path) {
  pfsm_fsm* f = nullptr;
  check(pfsm_fsm_load(path.c_str(), &f));
  return FsmPtr(f, pfsm_fsm_free);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::fprintf(stderr, "protofsm: cannot write %s\n", path.string().c_str());
    throw Failure{PFSM_E_REPO};
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string to_dot(const std::string& fsm_json) {
  const auto doc = nlohmann::json::parse(fsm_json);
  std::string out = "digraph fsm {\n  rankdir=LR;\n  node [shape=circle];\n";
  std::set<std::string> finals;
  for (const auto& s : doc["final_states"]) finals.insert(s.get<std::string>());
  for (const auto& s : doc["states"]) {
    const auto name = s.get<std::string>();
    out += "  " + quote(name) + (finals.count(name) ? " [shape=doublecircle];\n" : ";\n");
  }
  int i = 0;
  for (const auto& s : doc["initial_states"]) {
    const std::string start = "__start" + std::to_string(i++);
    out += "  " + start + " [shape=point];\n  " + start + " -> " + quote(s.get<std::string>()) + ";\n";
  }
  for (const auto& [from, edges] : doc["transitions"].items()) {
    for (const auto& e : edges) {
      out += "  " + quote(from) + " -> " + quote(e["next_state"].get<std::string>()) +
             " [label=" + quote(e["receive_message"].get<std::string>()) + "];\n";
    }
  }
  return out + "}\n";
}

void maybe_dot(const std::optional<std::string>& dot_path, const std::string& fsm_json) {
  if (dot_path) write_text(*dot_path, to_dot(fsm_json));
}

struct ConfigOptions {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> backend;
  std::optional<std::string> fixtures;
  std::optional<int> iterations;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd, bool llm) {
    cmd->add_option("-c,--config", config, "run config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", out, "output directory (overrides output_dir)");
    if (llm) {
      cmd->add_option("--backend", backend, "chat backend")->check(CLI::IsMember({"remote", "fixture"}));
      cmd->add_option("--fixtures", fixtures, "fixture book for --backend fixture")->check(CLI::ExistingFile);
      cmd->add_option("--iterations", iterations, "dialogues per stage")->check(CLI::PositiveNumber);
    }
    cmd->add_option("--set", sets, "config override KEY=VALUE (dotted key)");
  }

  ConfigPtr load() const {
    pfsm_config* c = nullptr;
    check(pfsm_config_load(config.c_str(), &c));
    ConfigPtr cfg(c, pfsm_config_free);
    auto set = [&](const std::string& key, const std::string& value) { check(pfsm_config_set(cfg.get(), key.c_str(), value.c_str())); };
    auto abs = [](const std::string& p) { return nlohmann::json(fs::absolute(p).lexically_normal().string()).dump(); };
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "protofsm: --set expects KEY=VALUE, got %s\n", kv.c_str());
        throw Failure{PFSM_E_CONFIG};
      }
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // fixtures before backend, so switching to the fixture backend validates
    if (fixtures) set("chat.fixtures", abs(*fixtures));
    if (backend) set("chat.backend", nlohmann::json(*backend).dump());
    if (iterations) set("consensus.iterations", std::to_string(*iterations));
    if (out) set("output_dir", abs(*out));
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Protocol state machine inference, evaluation and seed generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pfsm_version()));
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "progress and debug output");
  app.add_flag("-q,--quiet", quiet, "errors only");

  // index
  ConfigOptions index_opts;
  auto* index_cmd = app.add_subcommand("index", "filter, segment and embed the repository into an index");
  index_opts.add_to(index_cmd, false);

  // infer
  ConfigOptions infer_opts;
  bool build_index = false;
  std::optional<std::string> infer_dot;
  auto* infer_cmd = app.add_subcommand("infer", "infer the FSM; writes fsm.json and report.json");
  infer_opts.add_to(infer_cmd, true);
  infer_cmd->add_flag("--build-index", build_index, "(re)build the index first");
  infer_cmd->add_option("--dot", infer_dot, "also write the FSM as a DOT graph");

  // eval
  std::string eval_fsm, eval_gt;
  std::optional<std::string> eval_out, eval_label;
  bool eval_json = false;
  auto* eval_cmd = app.add_subcommand("eval", "score an FSM against ground truth");
  eval_cmd->add_option("fsm", eval_fsm, "inferred FSM")->required();
  eval_cmd->add_option("ground_truth", eval_gt, "ground-truth FSM (may carry aliases)")->required();
  eval_cmd->add_option("-o,--out", eval_out, "write the report document here");
  eval_cmd->add_option("--label", eval_label, "row label in the table");
  eval_cmd->add_flag("--json", eval_json, "print the report document instead of the table");

  // diff
  std::string diff_a, diff_b;
  std::optional<std::string> diff_out;
  bool diff_json = false;
  auto* diff_cmd = app.add_subcommand("diff", "compare two FSMs");
  diff_cmd->add_option("a", diff_a, "first FSM")->required();
  diff_cmd->add_option("b", diff_b, "second FSM")->required();
  diff_cmd->add_option("-o,--out", diff_out, "write the diff document here");
  diff_cmd->add_flag("--json", diff_json, "print the diff document instead of the table");

  // determinize
  std::string det_fsm;
  std::optional<std::string> det_out, det_dot;
  auto* det_cmd = app.add_subcommand("determinize", "subset construction");
  det_cmd->add_option("fsm", det_fsm, "FSM document")->required();
  det_cmd->add_option("-o,--out", det_out, "write the result here instead of stdout");
  det_cmd->add_option("--dot", det_dot, "also write a DOT graph");

  // seeds
  std::string seeds_fsm;
  std::optional<std::string> seeds_templates, seeds_out;
  auto* seeds_cmd = app.add_subcommand("seeds", "transition-cover message sequences and seed files");
  seeds_cmd->add_option("fsm", seeds_fsm, "FSM document")->required();
  auto* tmpl_opt = seeds_cmd->add_option("-t,--templates", seeds_templates, "template map file or directory of <MESSAGE>.raw");
  auto* out_opt = seeds_cmd->add_option("-o,--out", seeds_out, "seed output directory");
  tmpl_opt->needs(out_opt);
  out_opt->needs(tmpl_opt);

  // validate
  std::string val_fsm;
  bool val_strict = false;
  auto* val_cmd = app.add_subcommand("validate", "check FSM invariants");
  val_cmd->add_option("fsm", val_fsm, "FSM document")->required();
  val_cmd->add_flag("--strict", val_strict, "final states required");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return PFSM_E_CONFIG;
  }
  pfsm_set_log_level(quiet ? 3 : verbose ? 0 : 2);

  try {
    if (*index_cmd) {
      const auto cfg = index_opts.load();
      char *summary = nullptr, *table = nullptr;
      check(pfsm_index_build(cfg.get(), &summary, &table));
      const auto doc = nlohmann::json::parse(take(summary));
      std::cout << take(table);
      std::cout << "index: " << doc["index"].get<std::string>() << " (" << doc["entries"] << " chunks from "
                << doc["documents"] << " documents)\n";
    } else if (*infer_cmd) {
      const auto cfg = infer_opts.load();
      char* summary = nullptr;
      const auto st = pfsm_infer(cfg.get(), build_index ? 1 : 0, &summary);
      if (st != PFSM_OK) {
        std::fprintf(stderr, "protofsm: %s\n", pfsm_last_error());
        char* dump = nullptr;
        if (st == PFSM_E_INFERENCE && pfsm_config_dump(cfg.get(), &dump) == PFSM_OK) {
          const auto c = nlohmann::json::parse(take(dump));
          std::fprintf(stderr, "protofsm: partial report written to %s/report.json\n", c["output_dir"].get<std::string>().c_str());
        }
        return st;
      }
      const auto doc = nlohmann::json::parse(take(summary));
      std::cout << "fsm: " << doc["fsm"].get<std::string>() << " (" << doc["states"] << " states, "
                << doc["transitions"] << " transitions)\n"
                << "report: " << doc["report"].get<std::string>() << "\n";
      if (infer_dot) maybe_dot(infer_dot, take([&] {
                                 auto f = load_fsm(doc["fsm"].get<std::string>());
                                 char* s = nullptr;
                                 check(pfsm_fsm_serialize(f.get(), &s));
                                 return s;
                               }()));
    } else if (*eval_cmd) {
      auto f = load_fsm(eval_fsm);
      pfsm_ground_truth* g = nullptr;
      check(pfsm_ground_truth_load(eval_gt.c_str(), &g));
      GtPtr gt(g, pfsm_ground_truth_free);
      char *report = nullptr, *table = nullptr;
      const std::string label = eval_label ? *eval_label : fs::path(eval_fsm).stem().string();
      check(pfsm_evaluate(f.get(), gt.get(), label.c_str(), &report, &table));
      const auto doc = take(report);
      if (eval_out) write_text(*eval_out, doc + "\n");
      std::cout << (eval_json ? doc + "\n" : take(table));
    } else if (*diff_cmd) {
      auto a = load_fsm(diff_a), b = load_fsm(diff_b);
      char *json = nullptr, *table = nullptr;
      check(pfsm_fsm_diff(a.get(), b.get(), &json, &table));
      const auto doc = take(json);
      if (diff_out) write_text(*diff_out, doc + "\n");
      std::cout << (diff_json ? doc + "\n" : take(table));
    } else if (*det_cmd) {
      auto f = load_fsm(det_fsm);
      pfsm_fsm* d = nullptr;
      check(pfsm_fsm_determinize(f.get(), &d));
      FsmPtr det(d, pfsm_fsm_free);
      char* s = nullptr;
      check(pfsm_fsm_serialize(det.get(), &s));
      const auto text = take(s);
      if (det_out) write_text(*det_out, text);
      else std::cout << text;
      maybe_dot(det_dot, text);
    } else if (*seeds_cmd) {
      auto f = load_fsm(seeds_fsm);
      char* json = nullptr;
      check(pfsm_seeds_generate(f.get(), seeds_templates ? seeds_templates->c_str() : nullptr,
                                seeds_out ? seeds_out->c_str() : nullptr, &json));
      const auto doc = nlohmann::json::parse(take(json));
      if (seeds_out) {
        std::cout << "wrote " << doc["files"].size() << " seed files and manifest.json to " << *seeds_out << "\n";
      } else {
        std::cout << doc.dump(2) << "\n";
      }
      for (const auto& t : doc["unreachable"]) std::fprintf(stderr, "unreachable: %s\n", t.get<std::string>().c_str());
    } else if (*val_cmd) {
      auto f = load_fsm(val_fsm);
      int valid = 0;
      char* json = nullptr;
      check(pfsm_fsm_validate(f.get(), val_strict ? 1 : 0, &valid, &json));
      for (const auto& v : nlohmann::json::parse(take(json))) {
        std::cout << v["severity"].get<std::string>() << ": " << v["message"].get<std::string>() << "\n";
      }
      if (!valid) return PFSM_E_INPUT;
      std::cout << "ok\n";
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "protofsm: %s\n", e.what());
    return PFSM_E_INTERNAL;
  }
  return 0;
}
