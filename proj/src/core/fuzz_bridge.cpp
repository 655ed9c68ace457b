#include "fuzz_bridge.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <optional>

#include "digest.hpp"
#include "errors.hpp"
#include "file_io.hpp"
#include "log.hpp"

namespace protofsm::fuzz {
namespace {

struct LengthToken {
  const char* text;
  std::size_t width;
};

constexpr LengthToken kLengthTokens[] = {{"{{LEN8}}", 1}, {"{{LEN16BE}}", 2}, {"{{LEN32BE}}", 4}};

std::string big_endian(std::uint64_t v, std::size_t width) {
  std::string out(width, '\0');
  for (std::size_t i = 0; i < width; ++i) out[width - 1 - i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return out;
}

bool is_prefix(const std::vector<fsm::Transition>& a, const std::vector<fsm::Transition>& b) {
  return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

std::vector<fsm::Transition> SeedSequence::walk() const {
  std::vector<fsm::Transition> out;
  for (std::size_t i = 0; i < messages.size(); ++i) out.push_back({path[i], messages[i], path[i + 1]});
  return out;
}

SequenceSet generate_sequences(const fsm::FsmModel& fsm, Strategy strategy) {
  if (strategy != Strategy::kTransitionCover) throw ConfigError("unsupported sequence strategy");
  fsm::require_valid(fsm, fsm::ValidationLevel::kLenient, "fsm");
  if (fsm.initial_states.empty()) throw InvalidFsm("fsm has no initial states");

  std::map<fsm::StateName, std::vector<fsm::Transition>> out_edges;
  for (const auto& t : fsm.transitions) out_edges[t.current_state].push_back(t);  // sorted: set order

  // Shortest path tree: the transition used to first reach each state.
  std::map<fsm::StateName, std::optional<fsm::Transition>> via;
  std::deque<fsm::StateName> queue;
  for (const auto& s : fsm.initial_states) {
    via[s] = std::nullopt;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const auto s = queue.front();
    queue.pop_front();
    for (const auto& t : out_edges[s]) {
      if (via.count(t.next_state)) continue;
      via[t.next_state] = t;
      queue.push_back(t.next_state);
    }
  }

  auto path_to = [&](const fsm::StateName& s) {
    std::vector<fsm::Transition> rev;
    for (auto cur = s; via.at(cur); cur = via.at(cur)->current_state) rev.push_back(*via.at(cur));
    return std::vector<fsm::Transition>(rev.rbegin(), rev.rend());
  };

  SequenceSet out;
  std::vector<std::vector<fsm::Transition>> walks;
  for (const auto& t : fsm.transitions) {
    if (!via.count(t.current_state)) {
      out.unreachable.push_back(t);
      log::warn("transition unreachable from the initial states: " + fsm::to_string(t));
      continue;
    }
    auto w = path_to(t.current_state);
    w.push_back(t);
    walks.push_back(std::move(w));
  }

  for (std::size_t i = 0; i < walks.size(); ++i) {
    const bool redundant = std::any_of(walks.begin(), walks.end(), [&](const auto& other) { return is_prefix(walks[i], other); });
    if (redundant) continue;
    SeedSequence seq;
    seq.path.push_back(walks[i].front().current_state);
    for (const auto& t : walks[i]) {
      seq.messages.push_back(t.receive_message);
      seq.path.push_back(t.next_state);
      seq.covered.insert(t);
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

PayloadTemplateMap load_templates(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  PayloadTemplateMap out;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".raw" || ext == ".bin")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const fsm::MessageType m(f.stem().string());
      if (out.count(m)) throw ConfigError("two template files for message " + m.str());
      out[m] = read_file(f);
    }
    return out;
  }
  const auto doc = fsm::parse_json_text(read_file(path), path.string());
  if (!doc.is_object()) throw ConfigError(path.string() + ": template map must be an object of message -> file");
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_string()) throw ConfigError(path.string() + ": template for " + k + " must be a file path");
    fs::path file = v.get<std::string>();
    if (file.is_relative()) file = path.parent_path() / file;
    out[fsm::MessageType(k)] = read_file(file);
  }
  return out;
}

std::string render_payload(const std::string& tmpl) {
  std::size_t total = tmpl.size();
  for (const auto& tok : kLengthTokens) {
    const std::string t = tok.text;
    for (auto pos = tmpl.find(t); pos != std::string::npos; pos = tmpl.find(t, pos + t.size())) {
      total = total - t.size() + tok.width;
    }
  }
  std::string out = tmpl;
  for (const auto& tok : kLengthTokens) {
    const std::string t = tok.text;
    if (tok.width < 8 && total >= (std::uint64_t{1} << (8 * tok.width))) {
      if (out.find(t) != std::string::npos) {
        throw ConfigError("payload of " + std::to_string(total) + " bytes does not fit " + t);
      }
    }
    for (auto pos = out.find(t); pos != std::string::npos; pos = out.find(t, pos + tok.width)) {
      out.replace(pos, t.size(), big_endian(total, tok.width));
    }
  }
  return out;
}

std::vector<std::filesystem::path> render_seeds(const std::vector<SeedSequence>& sequences,
                                                const PayloadTemplateMap& templates,
                                                const std::filesystem::path& out_dir) {
  for (const auto& seq : sequences) {
    for (const auto& m : seq.messages) {
      if (!templates.count(m)) throw TemplateMissing(m.str());
    }
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> files;
  auto manifest = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    std::string state_path;
    for (const auto& s : seq.path) state_path += (state_path.empty() ? "" : ">") + s.str();
    char name[64];
    std::snprintf(name, sizeof name, "seq_%04zu_%s.raw", i, sha256_hex(state_path).substr(0, 8).c_str());

    std::string bytes;
    for (const auto& m : seq.messages) bytes += render_payload(templates.at(m));
    const auto file = out_dir / name;
    write_file(file, bytes);
    files.push_back(file);

    std::vector<std::string> msgs, states;
    for (const auto& m : seq.messages) msgs.push_back(m.str());
    for (const auto& s : seq.path) states.push_back(s.str());
    manifest.push_back({{"file", name}, {"messages", msgs}, {"states", states}, {"bytes", bytes.size()}});
  }
  nlohmann::ordered_json doc = {{"strategy", "transition-cover"}, {"seeds", manifest}};
  write_file(out_dir / "manifest.json", doc.dump(2) + "\n");
  return files;
}

nlohmann::ordered_json to_json(const SequenceSet& set) {
  auto seqs = nlohmann::ordered_json::array();
  for (const auto& s : set.sequences) {
    std::vector<std::string> msgs, states;
    for (const auto& m : s.messages) msgs.push_back(m.str());
    for (const auto& st : s.path) states.push_back(st.str());
    seqs.push_back({{"messages", msgs}, {"states", states}, {"covers", s.covered.size()}});
  }
  std::vector<std::string> unreachable;
  for (const auto& t : set.unreachable) unreachable.push_back(fsm::to_string(t));
  return {{"strategy", "transition-cover"}, {"sequences", seqs}, {"unreachable", unreachable}};
}

}  // namespace protofsm::fuzz
