#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "explore.hpp"
#include "io.hpp"

using namespace mtpsim;
using nlohmann::json;

namespace {

Scenario auth(int sessions, const char* client_flags = "{}", const char* server_flags = "{}",
              const char* compromise = "[]") {
  auto j = json::parse(R"({
    "schema": "mtpsim/1", "name": "t", "protocol": "Auth",
    "principals": [{"name": "A", "kind": "client"}, {"name": "S", "kind": "server"}],
    "pairs": [{"initiator": "A", "responder": "S"}],
    "attacker": {"strategy": "Explore"}})");
  j["sessions"] = sessions;
  j["principals"][0]["flags"] = json::parse(client_flags);
  j["principals"][1]["flags"] = json::parse(server_flags);
  j["compromise"] = json::parse(compromise);
  return scenario_from_json(j);
}

Scenario chat(const char* oob, const char* flags = "{}") {
  auto j = json::parse(R"({
    "schema": "mtpsim/1", "name": "t", "protocol": "SecretChat", "sessions": 1,
    "principals": [{"name": "A"}, {"name": "B"}],
    "pairs": [{"initiator": "A", "responder": "B"}],
    "attacker": {"strategy": "Explore"}})");
  j["oob_mode"] = oob;
  j["principals"][0]["flags"] = json::parse(flags);
  return scenario_from_json(j);
}

struct Naive {
  const Engine& engine;
  const Query& query;
  std::size_t states = 0;

  bool bad(const World& w) const {
    World c = w;
    if (engine.has_post_compromises()) engine.publish_post(c);
    c.trace.final_knowledge = c.knowledge;
    return !check(c.trace, query).holds;
  }

  // Every derivable candidate for every role, no caching or pruning.
  bool search(const World& w, int depth) {
    ++states;
    if (bad(w)) return true;
    if (depth == 0) return false;
    for (int r = 0; r < static_cast<int>(w.roles.size()); ++r) {
      if (!w.roles[r].active) continue;
      for (const auto& t : shape_candidates(w.knowledge, engine.expects(w, r), engine.depth())) {
        World c = w;
        if (engine.deliver_term(c, r, t) == StepStatus::Discard) continue;
        if (search(c, depth - 1)) return true;
      }
    }
    return false;
  }
};

bool naive_violated(const Scenario& sc, const Query& q, int depth) {
  const Engine engine(sc);
  Naive n{engine, q};
  World root = engine.initial();
  root.exploring = true;
  return n.search(root, depth);
}

}  // namespace

TEST_CASE("explore agrees with unpruned search at small depth") {
  struct Case {
    Scenario sc;
    const char* query;
    int depth;
  };
  const std::vector<Case> cases = {
      {auth(1), "auth.client_auth", 4},
      {auth(1), "auth.server_auth", 5},
      {auth(2), "auth.server_auth", 4},
      {auth(1), "auth.key_agreement", 5},
      {auth(1), "auth.session_match", 5},
      {auth(1), "auth.secrecy", 5},
      {auth(1, "{}", "{}", R"([{"kind": "LeakRSAKey", "target": "S"}])"), "auth.secrecy~rsa", 5},
      {auth(1, "{}", "{}", R"([{"kind": "LeakRSAKey", "target": "S"}])"), "auth.server_auth~rsa", 4},
      {auth(1, R"({"skip_dh_check": true})", R"({"serve_bad_dh": true})"), "auth.secrecy~dhcheck", 5},
      {auth(1, "{}", "{}", R"([{"kind": "PostCompromiseAuthKey", "target": "A", "phase": "Post"}])"),
       "auth.secrecy~postauth", 5},
      {chat("Perform"), "sc.secrecy", 4},
      {chat("Skip"), "sc.secrecy~oob", 4},
      {chat("Perform", R"({"skip_dh_check": true})"), "sc.secrecy~dhcheck", 4},
      {chat("Perform"), "sc.integrity", 4},
  };
  int violated = 0;
  for (const auto& c : cases) {
    const Query q = find_query(c.query);
    ExploreOptions opts;
    opts.max_actions = c.depth;
    const auto res = explore(c.sc, q, opts);
    INFO(c.query << " depth " << c.depth);
    CHECK(res.violated == naive_violated(c.sc, q, c.depth));
    violated += res.violated;
  }
  // Both outcomes occur, so the comparison is not vacuous.
  CHECK(violated > 0);
  CHECK(violated < static_cast<int>(cases.size()));
}

TEST_CASE("counterexamples replay as scripted runs") {
  const auto q = find_query("auth.client_auth");
  ExploreOptions opts;
  opts.max_actions = 8;
  const auto res = explore(auth(2), q, opts);
  REQUIRE(res.violated);
  CHECK(res.script.strategy == Strategy::Scripted);
  CHECK(static_cast<int>(res.script.actions.size()) <= 8);
  CHECK_FALSE(check(run(res.script), q).holds);
  CHECK(check_attacker_soundness(res.trace, kDefaultSynthesisDepth).empty());
  // Deepening one action at a time finds a counterexample no longer than
  // the default schedule does.
  opts.deepen_limit = 0;
  const auto step = explore(auth(2), q, opts);
  REQUIRE(step.violated);
  CHECK(step.script.actions.size() <= res.script.actions.size());
}

TEST_CASE("parallel explore gives the same answer") {
  for (const char* name : {"auth.client_auth", "auth.server_auth"}) {
    const auto q = find_query(name);
    ExploreOptions one, two;
    one.max_actions = two.max_actions = 6;
    two.jobs = 2;
    const auto a = explore(auth(2), q, one);
    const auto b = explore(auth(2), q, two);
    INFO(name);
    CHECK(a.violated == b.violated);
    CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));
  }
}

TEST_CASE("explore is deterministic") {
  const auto q = find_query("auth.client_auth");
  ExploreOptions opts;
  opts.max_actions = 8;
  const auto a = explore(auth(2), q, opts);
  const auto b = explore(auth(2), q, opts);
  CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));
  CHECK(a.stats.states == b.stats.states);
}

TEST_CASE("exhausted search reports it") {
  // One client session and one server session run out of inputs.
  const auto res = explore(auth(1), find_query("auth.server_auth"));
  CHECK_FALSE(res.violated);
  CHECK(res.stats.exhausted);
  CHECK(res.stats.depth_reached < 12);
  CHECK(res.verdict.holds);
}

TEST_CASE("state cap raises BoundsExceeded") {
  auto sc = auth(2);
  sc.bounds.max_states = 50;
  CHECK_THROWS_AS(explore(sc, find_query("auth.server_auth")), BoundsExceeded);
}

TEST_CASE("shape candidates") {
  const Term n = fresh(1, Sort::Nonce, "A/client#1");
  const Term k = fresh(2, Sort::SharedKey, "A/client#1");
  const auto kb = close(Knowledge({n, k, pub::g()}));

  const auto nonces = shape_candidates(kb, Shape::any(Sort::Nonce), 4);
  CHECK(nonces == std::vector<Term>{std::min(n, attacker_fresh(Sort::Nonce)), std::max(n, attacker_fresh(Sort::Nonce))});

  const auto elems = shape_candidates(kb, Shape::any(Sort::Element), 4);
  CHECK(std::count(elems.begin(), elems.end(), pub::g()) == 1);
  CHECK(std::count(elems.begin(), elems.end(), bad_elem()) == 1);
  CHECK(std::count(elems.begin(), elems.end(), dh_combine(pub::g(), attacker_fresh(Sort::PrivKey))) == 1);

  CHECK(shape_candidates(kb, Shape::exact(fresh(3, Sort::Nonce, "B/client#1")), 4).empty());
  CHECK(shape_candidates(kb, Shape::exact(hash(n)), 4).size() == 1);
  CHECK(shape_candidates(kb, Shape::exact(hash(n)), 0).empty());

  const auto pairs = shape_candidates(kb, Shape::tuple({Shape::any(Sort::Nonce), Shape::exact(n)}), 4);
  CHECK(pairs.size() == 2);
  for (const auto& t : pairs) CHECK(derivable(kb, t, 4));

  const auto boxes = shape_candidates(kb, Shape::senc(Shape::exact(n), k), 4);
  REQUIRE(boxes.size() == 1);
  CHECK(decrypt_sym(boxes[0], k).plain == n);
  CHECK(shape_candidates(kb, Shape::senc(Shape::exact(n), fresh(9, Sort::SharedKey, "B/client#1")), 4).empty());

  CHECK_THROWS_AS(shape_candidates(kb, Shape::tuple({Shape::any(Sort::Element), Shape::any(Sort::Element)}), 4, 3),
                  BoundsExceeded);
}

TEST_CASE("world hash tracks the state the search depends on") {
  const Engine engine(auth(1));
  const auto q = find_query("auth.server_auth");
  const auto os = order_sensitive_events(q), ref = referenced_events(q);
  World a = engine.initial(), b = engine.initial();
  CHECK(world_hash(a, os, ref) == world_hash(b, os, ref));
  const auto cands = shape_candidates(a.knowledge, engine.expects(a, 1), engine.depth());
  REQUIRE_FALSE(cands.empty());
  REQUIRE(engine.deliver_term(a, 1, cands.front()) != StepStatus::Discard);
  CHECK_FALSE(world_hash(a, os, ref) == world_hash(b, os, ref));
}
