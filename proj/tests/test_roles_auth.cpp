#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "roles_auth.hpp"

using namespace mtpsim;

namespace {

const Term kA = pub::principal("A");
const Term kS = pub::principal("S");
const Term kSk = fresh(5000, Sort::PrivKey, "S");

AuthClientState client(bool skip = false, std::uint64_t base = 1000) {
  return make_auth_client(kA, pk(kSk), AuthClientFlags{skip}, NameSpace{base, "A"});
}

AuthServerState server(AuthServerFlags f = {}, std::uint64_t base = 2000) {
  return make_auth_server(kS, kSk, fresh(2999, Sort::Nonce, "S"), f, NameSpace{base, "S"});
}

bool has_event(const std::vector<Event>& ev, const std::string& name) {
  for (const auto& e : ev)
    if (e.name == name) return true;
  return false;
}

struct Run {
  AuthClientState c;
  AuthServerState s;
  std::vector<Term> messages;
  std::vector<Event> events;
};

// Forwards every message unchanged between one client and one server.
Run honest(AuthClientState c, AuthServerState s) {
  Run r;
  auto cs = auth_client_step(c, Start{});
  r.messages.push_back(cs.outputs.at(0));
  auto ss = auth_server_step(s, cs.outputs.at(0));
  for (int round = 0; round < 3; ++round) {
    REQUIRE(ss.status == StepStatus::Ok);
    r.events.insert(r.events.end(), ss.events.begin(), ss.events.end());
    r.messages.push_back(ss.outputs.at(0));
    cs = auth_client_step(cs.state, ss.outputs.at(0));
    REQUIRE(cs.status == StepStatus::Ok);
    r.events.insert(r.events.end(), cs.events.begin(), cs.events.end());
    if (round == 2) break;
    r.messages.push_back(cs.outputs.at(0));
    ss = auth_server_step(ss.state, cs.outputs.at(0));
  }
  r.c = cs.state;
  r.s = ss.state;
  return r;
}

}  // namespace

TEST_CASE("client start emits a fresh nonce") {
  const auto st = auth_client_step(client(), Start{});
  CHECK(st.status == StepStatus::Ok);
  REQUIRE(st.outputs.size() == 1);
  CHECK(st.outputs[0].ctor() == Ctor::Fresh);
  CHECK(st.outputs[0].sort() == Sort::Nonce);
  CHECK(st.state.phase == AuthClientPhase::AwaitResPQ);
}

TEST_CASE("client discards ResPQ with the wrong nonce") {
  const auto st = auth_client_step(client(), Start{});
  const Term other = fresh(77, Sort::Nonce, "E");
  const Term res = tuple({other, fresh(78, Sort::Nonce, "S"), pub::qr(), tuple({fingerprint(pk(kSk))})});
  const auto d = auth_client_step(st.state, res);
  CHECK(d.status == StepStatus::Discard);
  CHECK(d.state.phase == AuthClientPhase::AwaitResPQ);
  CHECK(d.outputs.empty());
  CHECK(d.events.empty());
}

TEST_CASE("client discards ResPQ without its server fingerprint") {
  const auto st = auth_client_step(client(), Start{});
  const Term res = tuple({st.outputs[0], fresh(78, Sort::Nonce, "S"), pub::qr(),
                          tuple({fingerprint(pk(fresh(79, Sort::PrivKey, "E")))})});
  CHECK(auth_client_step(st.state, res).status == StepStatus::Discard);
}

TEST_CASE("server answers ReqPQ with a fresh nonce and its fingerprint") {
  const Term nc = fresh(1, Sort::Nonce, "A");
  const auto st = auth_server_step(server(), nc);
  REQUIRE(st.status == StepStatus::Ok);
  const Term& res = st.outputs.at(0);
  CHECK(res.arg(0) == nc);
  CHECK(res.arg(1).ctor() == Ctor::Fresh);
  CHECK(res.arg(1).origin() == "S");
  CHECK(res.arg(3) == tuple({fingerprint(pk(kSk))}));
  // Reused nonce: every session of the server gets the same n_s.
  AuthServerFlags reuse;
  reuse.reuse_ns = true;
  const auto r1 = auth_server_step(server(reuse, 2000), nc);
  const auto r2 = auth_server_step(server(reuse, 3000), nc);
  CHECK(r1.state.n_s == r2.state.n_s);
  CHECK(auth_server_step(server({}, 2000), nc).state.n_s != auth_server_step(server({}, 3000), nc).state.n_s);
}

TEST_CASE("honest run agrees on the key and passes the events in order") {
  const auto r = honest(client(), server());
  CHECK(r.c.phase == AuthClientPhase::Done);
  CHECK(r.s.phase == AuthServerPhase::Done);
  CHECK(term_equal(r.c.auth_key, r.s.auth_key));
  std::vector<std::string> names;
  for (const auto& e : r.events) names.push_back(e.name);
  CHECK(names == std::vector<std::string>{"ClientRequestsDHParameters", "ServerSendsDHParameters",
                                          "ClientReceivesDHParameters", "ServerAcceptsClient",
                                          "ServerAcceptsAuthKey", "ClientAcceptsAuthKey"});
  CHECK_FALSE(has_event(r.events, "ClientChecksDHParameters"));
}

TEST_CASE("server discards a payload for a different server") {
  const auto c1 = auth_client_step(make_auth_client(kA, pk(fresh(6000, Sort::PrivKey, "T")), {},
                                                    NameSpace{1000, "A"}),
                                   Start{});
  const auto s1 = auth_server_step(server(), c1.outputs[0]);
  // Rewrite the fingerprint list to name the other server so the client talks.
  const Term& res = s1.outputs[0];
  const Term forged = tuple({res.arg(0), res.arg(1), res.arg(2),
                             tuple({fingerprint(pk(fresh(6000, Sort::PrivKey, "T")))})});
  const auto c2 = auth_client_step(c1.state, forged);
  REQUIRE(c2.status == StepStatus::Ok);
  const Term& req = c2.outputs[0];
  const Term patched = tuple({req.arg(0), req.arg(1), req.arg(2), req.arg(3), fingerprint(pk(kSk)), req.arg(5)});
  CHECK(auth_server_step(s1.state, patched).status == StepStatus::Discard);
}

TEST_CASE("duplicate key hash is a uniqueness failure") {
  auto first = honest(client(), server());
  AuthServerState again = server({}, 2000);
  again.known_key_hashes = first.s.known_key_hashes;
  // Same names for both parties reproduce the same key.
  auto cs = auth_client_step(client(), Start{});
  auto ss = auth_server_step(again, cs.outputs[0]);
  cs = auth_client_step(cs.state, ss.outputs[0]);
  ss = auth_server_step(ss.state, cs.outputs[0]);
  cs = auth_client_step(cs.state, ss.outputs[0]);
  ss = auth_server_step(ss.state, cs.outputs[0]);
  CHECK(ss.status == StepStatus::UniquenessFailure);
  CHECK(ss.outputs.empty());
  CHECK_FALSE(has_event(ss.events, "ServerAcceptsAuthKey"));
}

TEST_CASE("validate_dh_config") {
  const Term ga = dh_combine(pub::g(), fresh(1, Sort::PrivKey, "S"));
  CHECK(validate_dh_config(pub::dh_good(), ga));
  CHECK_FALSE(validate_dh_config(pub::dh_bad(), bad_elem()));
  CHECK_FALSE(validate_dh_config(pub::dh_good(), bad_elem()));
  CHECK_FALSE(validate_dh_config(pub::dh_bad(), ga));
}

TEST_CASE("bad DH parameters: checking client fails, skipping client accepts") {
  AuthServerFlags bad;
  bad.serve_bad_dh = true;
  auto run_until_dh = [&](bool skip) {
    auto cs = auth_client_step(client(skip), Start{});
    auto ss = auth_server_step(server(bad), cs.outputs[0]);
    cs = auth_client_step(cs.state, ss.outputs[0]);
    ss = auth_server_step(ss.state, cs.outputs[0]);
    return auth_client_step(cs.state, ss.outputs[0]);
  };
  const auto checked = run_until_dh(false);
  CHECK(checked.status == StepStatus::Failed);
  CHECK(checked.state.phase == AuthClientPhase::Failed);
  CHECK(has_event(checked.events, "ClientReceivesDHParameters"));  // recorded before validation
  const auto skipped = run_until_dh(true);
  CHECK(skipped.status == StepStatus::Ok);
  CHECK(skipped.state.auth_key == bad_elem());
  bool bot = false;
  for (const auto& e : skipped.events)
    if (e.name == "ClientChecksDHParameters") bot = e.args == std::vector<Term>{pub::bot()};
  CHECK(bot);
}

TEST_CASE("out-of-phase inputs are discarded without events") {
  const auto r = honest(client(), server());
  std::vector<AuthClientState> clients{client()};
  std::vector<AuthServerState> servers{server()};
  {
    auto cs = auth_client_step(client(), Start{});
    auto ss = auth_server_step(server(), cs.outputs[0]);
    clients.push_back(cs.state);
    servers.push_back(ss.state);
    cs = auth_client_step(cs.state, ss.outputs[0]);
    ss = auth_server_step(ss.state, cs.outputs[0]);
    clients.push_back(cs.state);
    servers.push_back(ss.state);
    cs = auth_client_step(cs.state, ss.outputs[0]);
    ss = auth_server_step(ss.state, cs.outputs[0]);
    clients.push_back(cs.state);
    servers.push_back(ss.state);
  }
  clients.push_back(r.c);
  servers.push_back(r.s);
  int checked = 0;
  for (std::size_t i = 0; i < r.messages.size(); ++i) {
    const Term& m = r.messages[i];
    for (const auto& c : clients) {
      if (shape_matches(auth_client_expects(c), m)) continue;
      const auto st = auth_client_step(c, m);
      CHECK(st.status == StepStatus::Discard);
      CHECK(st.events.empty());
      ++checked;
    }
    for (const auto& s : servers) {
      if (shape_matches(auth_server_expects(s), m)) continue;
      const auto st = auth_server_step(s, m);
      CHECK(st.status == StepStatus::Discard);
      CHECK(st.events.empty());
      ++checked;
    }
  }
  CHECK(checked > 30);
}

TEST_CASE("expected shapes accept exactly the honest messages") {
  auto cs = auth_client_step(client(), Start{});
  CHECK(shape_matches(auth_server_expects(server()), cs.outputs[0]));
  auto ss = auth_server_step(server(), cs.outputs[0]);
  CHECK(shape_matches(auth_client_expects(cs.state), ss.outputs[0]));
  cs = auth_client_step(cs.state, ss.outputs[0]);
  CHECK(shape_matches(auth_server_expects(ss.state), cs.outputs[0]));
  ss = auth_server_step(ss.state, cs.outputs[0]);
  CHECK(shape_matches(auth_client_expects(cs.state), ss.outputs[0]));
  cs = auth_client_step(cs.state, ss.outputs[0]);
  CHECK(shape_matches(auth_server_expects(ss.state), cs.outputs[0]));
  ss = auth_server_step(ss.state, cs.outputs[0]);
  CHECK(shape_matches(auth_client_expects(cs.state), ss.outputs[0]));
}

TEST_CASE("compromise processes") {
  const auto leak = compromise_step(CompromiseKind::LeakRSAKey, kSk, RunPhase::During);
  CHECK(leak.published == kSk);
  CHECK(leak.event.name == "CompromisedRSAKey");
  CHECK(leak.event.args == std::vector<Term>{kSk});
  const Term k = fresh(9, Sort::SharedKey, "A");
  const auto post = compromise_step(CompromiseKind::PostCompromiseAuthKey, k, RunPhase::Post);
  CHECK(post.published == k);
  CHECK(post.event.name == "PostCompromisedAuthKey");
  CHECK_THROWS_AS(compromise_step(CompromiseKind::PostCompromiseNonce, k, RunPhase::During), PhaseViolation);
  CHECK_THROWS_AS(compromise_step(CompromiseKind::LeakRSAKey, kSk, RunPhase::Post), PhaseViolation);
  const auto forged = compromise_step(CompromiseKind::ForgeServerIdentity, kS, RunPhase::During);
  CHECK(forged.event.name == "ForgedServerIdentity");
  CHECK(forged.published.ctor() == Ctor::PK);
  CHECK(forged.published.arg(0).is_attacker_fresh());
}

TEST_CASE("compromise kind names round trip") {
  for (auto k : {CompromiseKind::LeakRSAKey, CompromiseKind::CompromiseNonce, CompromiseKind::ForgeServerIdentity,
                 CompromiseKind::LeakAuthKey, CompromiseKind::PostCompromiseNonce,
                 CompromiseKind::PostCompromiseRSAKey, CompromiseKind::PostCompromiseAuthKey,
                 CompromiseKind::PostCompromiseSessionKey})
    CHECK(kind_from_name(kind_name(k)) == k);
  CHECK_FALSE(kind_from_name("Bogus").has_value());
}
