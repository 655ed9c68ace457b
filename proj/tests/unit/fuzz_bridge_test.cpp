#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "fuzz_bridge.hpp"
#include "oracles.hpp"

using namespace protofsm;
using namespace protofsm::fsm;
using namespace protofsm::fuzz;
namespace fs = std::filesystem;

namespace {

Transition tr(const char* a, const char* m, const char* b) { return {StateName(a), MessageType(m), StateName(b)}; }

FsmModel linear() {
  FsmModel m;
  m.protocol = "linear";
  m.alphabet = {MessageType("m1"), MessageType("m2")};
  m.states = {StateName("A"), StateName("B"), StateName("C")};
  m.initial_states = {StateName("A")};
  m.final_states = {StateName("C")};
  m.transitions = {tr("A", "m1", "B"), tr("B", "m2", "C")};
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pfsm_fuzz_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("linear fsm gives one sequence") {
  const auto set = generate_sequences(linear());
  REQUIRE(set.sequences.size() == 1);
  const auto& s = set.sequences[0];
  CHECK(s.messages == std::vector<MessageType>{MessageType("m1"), MessageType("m2")});
  CHECK(s.path == std::vector<StateName>{StateName("A"), StateName("B"), StateName("C")});
  CHECK(s.covered == linear().transitions);
  CHECK(set.unreachable.empty());
}

TEST_CASE("unreachable transitions are reported, not covered") {
  auto m = linear();
  m.states.insert(StateName("Z"));
  m.transitions.insert(tr("Z", "m1", "A"));
  const auto set = generate_sequences(m);
  REQUIRE(set.unreachable.size() == 1);
  CHECK(set.unreachable[0] == tr("Z", "m1", "A"));
  for (const auto& s : set.sequences) CHECK_FALSE(s.covered.count(tr("Z", "m1", "A")));
}

TEST_CASE("no initial states") {
  auto m = linear();
  m.initial_states.clear();
  CHECK_THROWS_AS(generate_sequences(m), InvalidFsm);
}

TEST_CASE("nondeterministic fan-out covers each edge") {
  auto m = linear();
  m.transitions.insert(tr("A", "m1", "C"));
  const auto set = generate_sequences(m);
  std::set<Transition> all;
  for (const auto& s : set.sequences) all.insert(s.covered.begin(), s.covered.end());
  CHECK(all == m.transitions);
}

TEST_CASE("cover, walk validity and minimality on random fsms") {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 100; ++iter) {
    const auto raw = testing::random_fsm(rng, 8, 3, 0.08);
    const auto model = testing::to_model(raw);
    const auto set = generate_sequences(model);
    const auto reachable = testing::oracle_reachable_edges(raw);
    const auto dist = testing::oracle_distances(raw);

    std::set<std::tuple<std::string, std::string, std::string>> covered;
    for (const auto& s : set.sequences) {
      REQUIRE(s.path.size() == s.messages.size() + 1);
      CHECK(raw.initial.count(s.path[0].str()));
      for (std::size_t i = 0; i < s.messages.size(); ++i) {
        CHECK(raw.edges.count({s.path[i].str(), s.messages[i].str(), s.path[i + 1].str()}));
      }
      // Target is the last step; the walk before it is a shortest path to its source.
      CHECK(int(s.messages.size()) == dist.at(s.path[s.path.size() - 2].str()) + 1);
      for (const auto& t : s.covered) covered.insert({t.current_state.str(), t.receive_message.str(), t.next_state.str()});
      const auto w = s.walk();
      CHECK(std::set<Transition>(w.begin(), w.end()) == s.covered);
    }
    CHECK(covered == reachable);
    CHECK(set.unreachable.size() + reachable.size() == raw.edges.size());

    // No emitted sequence is a strict prefix of another.
    for (const auto& a : set.sequences) {
      for (const auto& b : set.sequences) {
        if (a.messages.size() >= b.messages.size()) continue;
        const auto wa = a.walk(), wb = b.walk();
        CHECK_FALSE(std::equal(wa.begin(), wa.end(), wb.begin()));
      }
    }
    CHECK(to_json(generate_sequences(model)) == to_json(set));
  }
}

TEST_CASE("render_seeds writes raw concatenations and a manifest") {
  TempDir tmp;
  SeedSequence one;
  one.messages = {MessageType("m1")};
  one.path = {StateName("A"), StateName("B")};
  const PayloadTemplateMap templates{{MessageType("m1"), "AB"}, {MessageType("m2"), std::string("\x00\xff", 2)}};

  const auto files = render_seeds({one}, templates, tmp.path / "a");
  REQUIRE(files.size() == 1);
  CHECK(slurp(files[0]) == "AB");
  CHECK(files[0].filename().string().rfind("seq_0000_", 0) == 0);
  CHECK(files[0].extension() == ".raw");

  const auto set = generate_sequences([] {
    auto m = linear();
    m.transitions.insert(tr("A", "m2", "C"));
    return m;
  }());
  REQUIRE(set.sequences.size() == 2);
  const auto two = render_seeds(set.sequences, templates, tmp.path / "b");
  REQUIRE(two.size() == 2);
  CHECK(two[0] != two[1]);
  const auto manifest = nlohmann::json::parse(slurp(tmp.path / "b" / "manifest.json"));
  REQUIRE(manifest["seeds"].size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& row = manifest["seeds"][i];
    CHECK(row["file"] == two[i].filename().string());
    CHECK(row["messages"].size() == set.sequences[i].messages.size());
    std::string expect;
    for (const auto& m : set.sequences[i].messages) expect += templates.at(m);
    CHECK(slurp(two[i]) == expect);
  }
}

TEST_CASE("missing template fails before writing anything") {
  TempDir tmp;
  const auto set = generate_sequences(linear());
  const PayloadTemplateMap templates{{MessageType("m1"), "AB"}};
  try {
    render_seeds(set.sequences, templates, tmp.path / "out");
    FAIL("expected TemplateMissing");
  } catch (const TemplateMissing& e) {
    CHECK(std::string(e.what()).find("M2") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("length placeholders") {
  CHECK(render_payload("AB") == "AB");
  CHECK(render_payload("{{LEN8}}xyz") == std::string("\x04xyz"));
  CHECK(render_payload("{{LEN16BE}}ab") == std::string("\x00\x04" "ab", 4));
  CHECK(render_payload("hd{{LEN32BE}}") == std::string("hd\x00\x00\x00\x06", 6));
  CHECK(render_payload(std::string(300, 'x') + "{{LEN16BE}}").substr(300) == std::string("\x01\x2e", 2));
  CHECK_THROWS_AS(render_payload(std::string(300, 'x') + "{{LEN8}}"), ConfigError);
}

TEST_CASE("load_templates from a map file and a directory") {
  TempDir tmp;
  {
    std::ofstream(tmp.path / "m1.raw", std::ios::binary) << "AB";
    std::ofstream(tmp.path / "m2.bin", std::ios::binary) << "CD";
    std::ofstream(tmp.path / "notes.txt") << "ignored";
  }
  const auto dir = load_templates(tmp.path);
  CHECK(dir.size() == 2);
  CHECK(dir.at(MessageType("M1")) == "AB");
  CHECK(dir.at(MessageType("M2")) == "CD");

  fs::create_directories(tmp.path / "map");
  std::ofstream(tmp.path / "map" / "t.json") << R"({"m1": "../m1.raw"})";
  const auto map = load_templates(tmp.path / "map" / "t.json");
  CHECK(map.at(MessageType("M1")) == "AB");

  std::ofstream(tmp.path / "map" / "bad.json") << R"(["m1"])";
  CHECK_THROWS_AS(load_templates(tmp.path / "map" / "bad.json"), ConfigError);
}
