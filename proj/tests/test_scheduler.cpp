#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "io.hpp"
#include "presets.hpp"
#include "scheduler.hpp"

using namespace mtpsim;
using nlohmann::json;

namespace {

Scenario auth_scenario(int sessions = 1) {
  auto sc = scenario_from_json(json::parse(R"({
    "schema": "mtpsim/1", "name": "t", "protocol": "Auth",
    "principals": [{"name": "A", "kind": "client"}, {"name": "S", "kind": "server"}],
    "pairs": [{"initiator": "A", "responder": "S"}]})"));
  sc.sessions = sessions;
  return sc;
}

std::vector<std::string> event_names(const Trace& t) {
  std::vector<std::string> out;
  for (const auto& [pos, e] : t.events()) out.push_back(e->name);
  return out;
}

int count(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<int>(std::count(v.begin(), v.end(), s));
}

Scenario with_actions(Scenario sc, const char* actions) {
  sc.strategy = Strategy::Scripted;
  sc.actions.clear();
  for (const auto& a : json::parse(actions)) sc.actions.push_back(action_from_json(a));
  return sc;
}

}  // namespace

TEST_CASE("passive auth run completes every session") {
  for (int n : {1, 2, 3}) {
    const Trace t = run(auth_scenario(n));
    const auto names = event_names(t);
    CHECK(count(names, "ClientAcceptsAuthKey") == n);
    CHECK(count(names, "ServerAcceptsAuthKey") == n);
    CHECK(check_attacker_soundness(t, kDefaultSynthesisDepth).empty());
    for (std::size_t i = 0; i < t.entries.size(); ++i) CHECK(t.entries[i].step == i);
  }
}

TEST_CASE("passive secret chat and rekey runs complete") {
  const auto sc = scenario_from_json(json::parse(R"({
    "schema": "mtpsim/1", "protocol": "SecretChat", "sessions": 1,
    "principals": [{"name": "A"}, {"name": "B"}], "pairs": [{"initiator": "A", "responder": "B"}]})"));
  const auto names = event_names(run(sc));
  CHECK(count(names, "OutOfBandKeyComparisonSucceeded") == 2);
  CHECK(count(names, "SendsSecretChatMsg") == 2);
  CHECK(count(names, "ReceivesSecretChatMsg") == 2);

  auto rk = sc;
  rk.protocol = Protocol::Rekey;
  for (auto& p : rk.pairs) p.protocol = Protocol::Rekey;
  const auto rnames = event_names(run(rk));
  CHECK(count(rnames, "InitiatorNegotiatesNewKey") == 1);
  CHECK(count(rnames, "ResponderNegotiatesNewKey") == 1);
}

TEST_CASE("composed run chains authorization, secret chat and rekeying") {
  const auto sc = scenario_from_json(json::parse(R"({
    "schema": "mtpsim/1", "protocol": "Composed", "sessions": 1,
    "principals": [{"name": "A"}, {"name": "B"}, {"name": "S", "kind": "server"}],
    "pairs": [
      {"initiator": "A", "responder": "S", "protocol": "Auth"},
      {"initiator": "B", "responder": "S", "protocol": "Auth"},
      {"initiator": "A", "responder": "B", "protocol": "SecretChat"},
      {"initiator": "A", "responder": "B", "protocol": "Rekey"}]})"));
  const Trace t = run(sc);
  const auto names = event_names(t);
  CHECK(count(names, "ClientAcceptsAuthKey") == 2);
  CHECK(count(names, "ReceivesSecretChatMsg") == 2);
  CHECK(count(names, "ResponderNegotiatesNewKey") == 1);
  CHECK(check_attacker_soundness(t, kDefaultSynthesisDepth).empty());
}

TEST_CASE("runs are deterministic") {
  for (const auto& p : presets()) {
    const auto sc = preset_attack(p.name);
    CHECK(trace_to_jsonl(run(sc)) == trace_to_jsonl(run(sc)));
  }
  CHECK(trace_to_jsonl(run(auth_scenario(2))) == trace_to_jsonl(run(auth_scenario(2))));
}

TEST_CASE("the seed is recorded but does not change the run") {
  auto a = auth_scenario(2), b = auth_scenario(2);
  b.seed = 99;
  const Trace ta = run(a), tb = run(b);
  CHECK(tb.seed == 99);
  REQUIRE(ta.entries.size() == tb.entries.size());
  for (std::size_t i = 0; i < ta.entries.size(); ++i) CHECK(ta.entries[i].term == tb.entries[i].term);
}

TEST_CASE("scripted presets deliver only derivable terms") {
  for (const auto& p : presets()) {
    const Trace t = run(preset_attack(p.name));
    INFO(p.name);
    CHECK(check_attacker_soundness(t, kDefaultSynthesisDepth).empty());
  }
}

TEST_CASE("soundness check rejects a delivery the attacker could not make") {
  Trace t = run(auth_scenario(1));
  TraceEntry bad;
  bad.step = t.entries.size();
  bad.kind = EntryKind::Delivered;
  bad.actor = "S/server#1";
  bad.term = fresh(123456, Sort::PrivKey, "S");
  t.entries.push_back(bad);
  CHECK_FALSE(check_attacker_soundness(t, kDefaultSynthesisDepth).empty());
}

TEST_CASE("script errors") {
  const auto base = auth_scenario(1);
  CHECK_THROWS_AS(run(with_actions(base, R"([{"op": "deliver", "to": "S/server#1",
      "recipe": {"msg": {"from": "A/client#1", "index": 5}}}])")), ScriptError);
  CHECK_THROWS_AS(run(with_actions(base, R"([{"op": "deliver", "to": "Nobody#1", "recipe": {"const": "g"}}])")),
                  ScriptError);
  // The server's private key is not derivable.
  CHECK_THROWS_AS(run(with_actions(base, R"([{"op": "forward", "msg": {"from": "A/client#1", "index": 0}},
      {"op": "synthesize", "recipe": {"dec": [{"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]},
                                          {"const": "g"}]}}])")),
                  ScriptError);
  CHECK_THROWS_AS(run(with_actions(base, R"([{"op": "phase_boundary"},
      {"op": "forward", "msg": {"from": "A/client#1", "index": 0}}])")),
                  ScriptError);
}

TEST_CASE("scripted forward and drop") {
  const auto t = run(with_actions(auth_scenario(1), R"([
      {"op": "forward", "msg": {"from": "A/client#1", "index": 0}},
      {"op": "forward", "msg": {"from": "S/server#1", "index": 0}},
      {"op": "drop", "msg": {"from": "A/client#1", "index": 1}}])"));
  const auto names = event_names(t);
  CHECK(count(names, "ClientRequestsDHParameters") == 1);
  CHECK(count(names, "ServerSendsDHParameters") == 0);
}

TEST_CASE("scenario validation") {
  auto parse = [](const char* text) { return Engine(scenario_from_json(json::parse(text))); };
  CHECK_THROWS_AS(parse(R"({"schema": "mtpsim/2"})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"bogus": 1})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"principals": [{"name": "A"}], "pairs": [{"initiator": "A", "responder": "Z"}]})"),
                  ScenarioError);
  CHECK_THROWS_AS(parse(R"({"protocol": "Auth", "principals": [{"name": "A"}, {"name": "B"}],
                            "pairs": [{"initiator": "A", "responder": "B"}]})"),
                  ScenarioError);
  CHECK_THROWS_AS(parse(R"({"principals": [{"name": "A", "kind": "wizard"}]})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"principals": [{"name": "A", "flags": {"fly": true}}]})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"compromise": [{"kind": "Telepathy", "target": "A"}]})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"oob_mode": "Sometimes"})"), ScenarioError);
  CHECK_THROWS_AS(parse(R"({"attacker": {"strategy": "Scripted", "actions": [{"op": "teleport"}]}})"),
                  ScenarioError);
}

TEST_CASE("explore strategy needs a query") {
  auto sc = auth_scenario(1);
  sc.strategy = Strategy::Explore;
  CHECK_THROWS_AS(run(sc), ScenarioError);
}

TEST_CASE("max_steps bounds a passive run") {
  auto sc = auth_scenario(3);
  sc.bounds.max_steps = 4;
  CHECK_THROWS_AS(run(sc), BoundsExceeded);
}

TEST_CASE("compromises publish the secret and record one event") {
  auto sc = auth_scenario(1);
  sc.compromise.push_back({CompromiseKind::LeakRSAKey, "S", RunPhase::During});
  sc.compromise.push_back({CompromiseKind::CompromiseNonce, "A", RunPhase::During});
  sc.compromise.push_back({CompromiseKind::PostCompromiseAuthKey, "A", RunPhase::Post});
  const Trace t = run(sc);
  std::vector<std::string> compromised;
  for (const auto& e : t.entries)
    if (e.kind == EntryKind::Compromised) {
      compromised.push_back(e.event->name);
      CHECK(t.final_knowledge.contains(e.term));
    }
  CHECK(compromised == std::vector<std::string>{"CompromisedRSAKey", "CompromisedNonce", "PostCompromisedAuthKey"});
  // The post-run compromise comes after every protocol event.
  CHECK(t.entries.back().kind == EntryKind::Compromised);
}

TEST_CASE("trace files round trip") {
  for (const auto& p : presets()) {
    const Trace t = run(preset_attack(p.name));
    const std::string text = trace_to_jsonl(t);
    const Trace back = trace_from_jsonl(text);
    CHECK(trace_to_jsonl(back) == text);
    CHECK(back.final_knowledge.facts() == t.final_knowledge.facts());
  }
}

TEST_CASE("scenario files round trip") {
  for (const auto& p : presets()) {
    const auto sc = preset_attack(p.name);
    const auto j = scenario_to_json(sc);
    CHECK(scenario_to_json(scenario_from_json(j)) == j);
  }
}
