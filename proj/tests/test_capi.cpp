#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>

#include "mtpsim/mtpsim.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  mtp_string_free(s);
  return out;
}

const char* kHonest = R"({"schema": "mtpsim/1", "protocol": "Auth", "sessions": 1,
  "principals": [{"name": "A", "kind": "client"}, {"name": "S", "kind": "server"}],
  "pairs": [{"initiator": "A", "responder": "S"}]})";

}  // namespace

TEST_CASE("version and listings") {
  CHECK(std::string(mtp_version()).size() > 0);
  char* q = nullptr;
  REQUIRE(mtp_list_queries(&q) == MTP_OK);
  const auto queries = take(q);
  CHECK(queries.find("auth.client_auth\t") != std::string::npos);
  CHECK(queries.find("rk.uks\t") != std::string::npos);
  char* p = nullptr;
  REQUIRE(mtp_list_presets(&p) == MTP_OK);
  CHECK(take(p).find("uks_rekey\t") != std::string::npos);
  char* pq = nullptr;
  REQUIRE(mtp_preset_query("client_impersonation", &pq) == MTP_OK);
  CHECK(take(pq) == "auth.client_auth");
}

TEST_CASE("honest run, check and trace text") {
  mtp_scenario* sc = nullptr;
  REQUIRE(mtp_scenario_load_json(kHonest, &sc) == MTP_OK);
  mtp_trace* t = nullptr;
  REQUIRE(mtp_run(sc, &t) == MTP_OK);
  CHECK(mtp_trace_check_soundness(t, 4) == MTP_OK);

  mtp_verdict* v = nullptr;
  REQUIRE(mtp_check(t, "auth.server_auth", &v) == MTP_OK);
  CHECK(mtp_verdict_holds(v) == 1);
  char* report = nullptr;
  REQUIRE(mtp_verdict_report(v, &report) == MTP_OK);
  CHECK(take(report).find("auth.server_auth") != std::string::npos);
  char* vj = nullptr;
  REQUIRE(mtp_verdict_json(v, &vj) == MTP_OK);
  CHECK(take(vj).find("\"holds\": true") != std::string::npos);
  mtp_verdict_free(v);

  char* text = nullptr;
  REQUIRE(mtp_trace_to_jsonl(t, &text) == MTP_OK);
  CHECK(take(text).find("mtpsim-trace/1") != std::string::npos);
  char* summary = nullptr;
  REQUIRE(mtp_trace_summary(t, &summary) == MTP_OK);
  CHECK(take(summary).find("ClientAcceptsAuthKey") != std::string::npos);

  const std::string path = "capi_trace.jsonl";
  REQUIRE(mtp_trace_write_file(t, path.c_str()) == MTP_OK);
  mtp_trace* back = nullptr;
  REQUIRE(mtp_trace_load_file(path.c_str(), &back) == MTP_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(mtp_trace_to_jsonl(t, &a) == MTP_OK);
  REQUIRE(mtp_trace_to_jsonl(back, &b) == MTP_OK);
  CHECK(take(a) == take(b));
  std::remove(path.c_str());

  mtp_trace_free(back);
  mtp_trace_free(t);
  mtp_scenario_free(sc);
}

TEST_CASE("presets violate their query") {
  mtp_scenario* sc = nullptr;
  REQUIRE(mtp_scenario_preset("uks_rekey", &sc) == MTP_OK);
  mtp_trace* t = nullptr;
  REQUIRE(mtp_run(sc, &t) == MTP_OK);
  mtp_verdict* v = nullptr;
  CHECK(mtp_check(t, "rk.uks", &v) == MTP_VIOLATED);
  CHECK(mtp_verdict_holds(v) == 0);
  mtp_verdict_free(v);
  mtp_trace_free(t);
  mtp_scenario_free(sc);
}

TEST_CASE("explore through the C interface") {
  mtp_scenario* sc = nullptr;
  REQUIRE(mtp_scenario_load_json(kHonest, &sc) == MTP_OK);
  mtp_explore_options opts;
  mtp_explore_options_init(&opts);
  CHECK(opts.jobs == 1);
  opts.max_actions = 6;
  opts.sessions = 2;
  mtp_verdict* v = nullptr;
  mtp_trace* cex = nullptr;
  REQUIRE(mtp_explore(sc, "auth.client_auth", &opts, &v, &cex) == MTP_VIOLATED);
  REQUIRE(cex != nullptr);
  mtp_verdict* again = nullptr;
  CHECK(mtp_check(cex, "auth.client_auth", &again) == MTP_VIOLATED);
  mtp_verdict_free(again);
  mtp_verdict_free(v);
  mtp_trace_free(cex);

  v = nullptr;
  cex = nullptr;
  REQUIRE(mtp_explore(sc, "auth.server_auth", &opts, &v, &cex) == MTP_OK);
  CHECK(cex == nullptr);
  CHECK(mtp_verdict_holds(v) == 1);
  mtp_verdict_free(v);
  mtp_scenario_free(sc);
}

TEST_CASE("error codes") {
  mtp_scenario* sc = nullptr;
  CHECK(mtp_scenario_load_json("{not json", &sc) == MTP_ERR_INPUT);
  CHECK(sc == nullptr);
  CHECK(std::string(mtp_last_error()).size() > 0);
  CHECK(mtp_scenario_load_json(R"({"schema": "mtpsim/9"})", &sc) == MTP_ERR_INPUT);
  CHECK(mtp_scenario_load_file("/nonexistent/scenario.json", &sc) == MTP_ERR_INPUT);
  CHECK(mtp_scenario_preset("no_such_attack", &sc) == MTP_ERR_UNKNOWN);
  CHECK(std::string(mtp_last_error()).find("no_such_attack") != std::string::npos);
  CHECK(mtp_scenario_load_json(nullptr, &sc) == MTP_ERR_INPUT);
  CHECK(mtp_scenario_load_json(kHonest, nullptr) == MTP_ERR_INPUT);

  REQUIRE(mtp_scenario_load_json(kHonest, &sc) == MTP_OK);
  mtp_trace* t = nullptr;
  REQUIRE(mtp_run(sc, &t) == MTP_OK);
  mtp_verdict* v = nullptr;
  CHECK(mtp_check(t, "auth.nothing", &v) == MTP_ERR_UNKNOWN);
  CHECK(v == nullptr);
  CHECK(mtp_check(nullptr, "auth.client_auth", &v) == MTP_ERR_INPUT);
  CHECK(mtp_explore(sc, "auth.client_auth", nullptr, nullptr, nullptr) == MTP_ERR_INPUT);
  mtp_trace_free(t);

  // Explore is not a run strategy.
  mtp_scenario* ex = nullptr;
  std::string text = kHonest;
  text.insert(text.size() - 1, R"(, "attacker": {"strategy": "Explore"})");
  REQUIRE(mtp_scenario_load_json(text.c_str(), &ex) == MTP_OK);
  CHECK(mtp_run(ex, &t) == MTP_ERR_INPUT);
  mtp_scenario_free(ex);

  // A script that replays a message that does not exist.
  text = kHonest;
  text.insert(text.size() - 1, R"(, "attacker": {"strategy": "Scripted", "actions": [
      {"op": "forward", "msg": {"from": "A/client#1", "index": 7}}]})");
  REQUIRE(mtp_scenario_load_json(text.c_str(), &ex) == MTP_OK);
  CHECK(mtp_run(ex, &t) == MTP_ERR_SCRIPT);
  mtp_scenario_free(ex);

  // A run bound.
  text = kHonest;
  text.insert(text.size() - 1, R"(, "bounds": {"max_steps": 2})");
  REQUIRE(mtp_scenario_load_json(text.c_str(), &ex) == MTP_OK);
  CHECK(mtp_run(ex, &t) == MTP_ERR_BOUNDS);
  mtp_scenario_free(ex);

  // Freeing null handles is allowed.
  mtp_scenario_free(nullptr);
  mtp_trace_free(nullptr);
  mtp_verdict_free(nullptr);
  mtp_string_free(nullptr);
  mtp_scenario_free(sc);
}

TEST_CASE("scenario serialization and seeds") {
  mtp_scenario* sc = nullptr;
  REQUIRE(mtp_scenario_load_json(kHonest, &sc) == MTP_OK);
  REQUIRE(mtp_scenario_set_seed(sc, 77) == MTP_OK);
  char* j = nullptr;
  REQUIRE(mtp_scenario_to_json(sc, &j) == MTP_OK);
  const auto text = take(j);
  CHECK(text.find("\"seed\": 77") != std::string::npos);
  mtp_scenario* back = nullptr;
  CHECK(mtp_scenario_load_json(text.c_str(), &back) == MTP_OK);
  mtp_scenario_free(back);
  mtp_scenario_free(sc);
}
