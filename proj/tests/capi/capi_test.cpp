#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <thread>

#include "protofsm/protofsm.h"

namespace fs = std::filesystem;

namespace {

const fs::path kData = PROTOFSM_TEST_DATA;

std::string take(char* s) {
  std::string out = s ? s : "";
  pfsm_string_free(s);
  return out;
}

pfsm_fsm* load(const fs::path& p) {
  pfsm_fsm* f = nullptr;
  REQUIRE(pfsm_fsm_load(p.string().c_str(), &f) == PFSM_OK);
  return f;
}

}  // namespace

TEST_CASE("status codes and last error") {
  pfsm_fsm* f = nullptr;
  CHECK(pfsm_fsm_parse("{not json", &f) == PFSM_E_INPUT);
  CHECK(f == nullptr);
  CHECK(std::string(pfsm_last_error()).find("ParseError") != std::string::npos);
  CHECK(pfsm_fsm_load("/definitely/not/here.json", &f) == PFSM_E_INPUT);
  CHECK(pfsm_fsm_parse(nullptr, &f) == PFSM_E_CONFIG);

  char* out = nullptr;
  CHECK(pfsm_canonicalize_name("Client Hello", &out) == PFSM_OK);
  CHECK(std::string(pfsm_last_error()).empty());
  CHECK(take(out) == "CLIENT_HELLO");
  CHECK(pfsm_canonicalize_name("  ??? ", &out) == PFSM_E_INPUT);
  CHECK(std::string(pfsm_last_error()).find("NameError") != std::string::npos);
}

TEST_CASE("last error is per thread") {
  pfsm_fsm* f = nullptr;
  CHECK(pfsm_fsm_parse("[", &f) != PFSM_OK);
  std::string other;
  std::thread([&] { other = pfsm_last_error(); }).join();
  CHECK(other.empty());
  CHECK_FALSE(std::string(pfsm_last_error()).empty());
}

TEST_CASE("fsm round trip, counts, validate, determinize") {
  pfsm_fsm* f = load(kData / "ikev2" / "strongswan_inferred.json");
  size_t s = 0, t = 0;
  CHECK(pfsm_fsm_counts(f, &s, &t) == PFSM_OK);
  CHECK(s == 8);
  CHECK(t == 20);

  char* text = nullptr;
  REQUIRE(pfsm_fsm_serialize(f, &text) == PFSM_OK);
  const auto doc = take(text);
  pfsm_fsm* g = nullptr;
  REQUIRE(pfsm_fsm_parse(doc.c_str(), &g) == PFSM_OK);
  REQUIRE(pfsm_fsm_serialize(g, &text) == PFSM_OK);
  CHECK(take(text) == doc);

  int valid = 0;
  char* violations = nullptr;
  CHECK(pfsm_fsm_validate(f, 1, &valid, &violations) == PFSM_OK);
  CHECK(valid == 1);
  CHECK(take(violations) == "[]");

  pfsm_fsm* d = nullptr;
  CHECK(pfsm_fsm_determinize(f, &d) == PFSM_OK);
  pfsm_fsm_free(d);
  pfsm_fsm_free(g);
  pfsm_fsm_free(f);
}

TEST_CASE("evaluate and metrics") {
  pfsm_fsm* f = load(kData / "ikev2" / "strongswan_inferred.json");
  pfsm_ground_truth* gt = nullptr;
  REQUIRE(pfsm_ground_truth_load((kData / "ikev2" / "strongswan_ground_truth.json").string().c_str(), &gt) == PFSM_OK);
  char *report = nullptr, *table = nullptr;
  REQUIRE(pfsm_evaluate(f, gt, "strongSwan", &report, &table) == PFSM_OK);
  const auto r = take(report);
  CHECK(r.find("\"correct\": 19") != std::string::npos);
  CHECK(r.find("\"not_found\": 4") != std::string::npos);
  CHECK(take(table).find("95.00") != std::string::npos);
  pfsm_ground_truth_free(gt);
  pfsm_fsm_free(f);

  double p = -1, rc = -1;
  int pu = -1, ru = -1;
  CHECK(pfsm_metrics(0, 0, 0, 0, &p, &rc, &pu, &ru) == PFSM_OK);
  CHECK(p == 0.0);
  CHECK(rc == 0.0);
  CHECK(pu == 1);
  CHECK(ru == 1);
}

TEST_CASE("diff of identical fsms is empty") {
  pfsm_fsm* f = load(kData / "toy" / "golden_fsm.json");
  char* json = nullptr;
  REQUIRE(pfsm_fsm_diff(f, f, &json, nullptr) == PFSM_OK);
  const auto d = take(json);
  CHECK(d.find("\"transitions_only_in_a\": []") != std::string::npos);
  CHECK(d.find("\"transitions_only_in_b\": []") != std::string::npos);
  pfsm_fsm_free(f);
}

TEST_CASE("seeds") {
  pfsm_fsm* f = load(kData / "linear" / "fsm.json");
  char* json = nullptr;
  REQUIRE(pfsm_seeds_generate(f, nullptr, nullptr, &json) == PFSM_OK);
  CHECK(take(json).find("\"M1\"") != std::string::npos);
  CHECK(pfsm_seeds_generate(f, "x", nullptr, &json) == PFSM_E_CONFIG);
  const auto out = fs::temp_directory_path() / ("pfsm_capi_" + std::to_string(std::random_device{}()));
  CHECK(pfsm_seeds_generate(f, (kData / "ikev2").string().c_str(), out.string().c_str(), &json) == PFSM_E_INPUT);
  CHECK(std::string(pfsm_last_error()).find("TemplateMissing") != std::string::npos);
  pfsm_fsm_free(f);
  fs::remove_all(out);
}

TEST_CASE("config handle") {
  pfsm_config* cfg = nullptr;
  REQUIRE(pfsm_config_load((kData / "toy" / "config.json").string().c_str(), &cfg) == PFSM_OK);
  CHECK(pfsm_config_set(cfg, "consensus.iterations", "1") == PFSM_OK);
  CHECK(pfsm_config_set(cfg, "consensus.threshold", "2") == PFSM_E_CONFIG);
  char* dump = nullptr;
  REQUIRE(pfsm_config_dump(cfg, &dump) == PFSM_OK);
  const auto d = take(dump);
  CHECK(d.find("\"iterations\": 1") != std::string::npos);
  CHECK(d.find("\"threshold\": 0.8") != std::string::npos);  // rejected override left no trace
  CHECK(pfsm_config_set(cfg, "no_such_key", "1") == PFSM_E_CONFIG);
  pfsm_config_free(cfg);

  CHECK(pfsm_config_parse("{}", ".", &cfg) == PFSM_E_CONFIG);
  CHECK(pfsm_config_load("/no/such/config.json", &cfg) == PFSM_E_CONFIG);
}

TEST_CASE("config dump never carries the credential") {
  ::setenv("PFSM_CAPI_SENTINEL_KEY", "sk-capi-sentinel-9f8e7d", 1);
  pfsm_config* cfg = nullptr;
  REQUIRE(pfsm_config_load((kData / "toy" / "config.json").string().c_str(), &cfg) == PFSM_OK);
  REQUIRE(pfsm_config_set(cfg, "chat.credential_env", "PFSM_CAPI_SENTINEL_KEY") == PFSM_OK);
  char* dump = nullptr;
  REQUIRE(pfsm_config_dump(cfg, &dump) == PFSM_OK);
  const auto d = take(dump);
  CHECK(d.find("PFSM_CAPI_SENTINEL_KEY") != std::string::npos);
  CHECK(d.find("sk-capi-sentinel") == std::string::npos);
  pfsm_config_free(cfg);
  ::unsetenv("PFSM_CAPI_SENTINEL_KEY");
}
