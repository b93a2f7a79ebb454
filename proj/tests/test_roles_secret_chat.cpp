#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "deduction.hpp"
#include "roles_secret_chat.hpp"

using namespace mtpsim;

namespace {

const Term kA = pub::principal("A");
const Term kB = pub::principal("B");

SecretChatState initiator(ScFlags f = {}) { return make_secret_chat(ScRole::Initiator, kA, kB, f, NameSpace{1000, "A"}); }
SecretChatState responder(ScFlags f = {}) { return make_secret_chat(ScRole::Responder, kB, kA, f, NameSpace{2000, "B"}); }

bool has_event(const std::vector<Event>& ev, const std::string& name) {
  for (const auto& e : ev)
    if (e.name == name) return true;
  return false;
}

struct Handshake {
  Step<SecretChatState> i, r;
  Term request;
};

Handshake handshake(ScFlags fi = {}, ScFlags fr = {}, const Term& cfg = pub::dh_good()) {
  Handshake h;
  h.i = sc_step(initiator(fi), cfg);
  h.request = h.i.outputs.at(0);
  h.r = sc_step(sc_step(responder(fr), cfg).state, h.request);
  if (h.r.status == StepStatus::Ok) h.i = sc_step(h.i.state, h.r.outputs.at(0));
  return h;
}

}  // namespace

TEST_CASE("initiator start emits a fresh chat id and half-key") {
  const auto st = sc_step(initiator(), pub::dh_good());
  REQUIRE(st.status == StepStatus::Ok);
  const Term& req = st.outputs.at(0);
  CHECK(req.arg(0).sort() == Sort::ChatID);
  CHECK(req.arg(0).ctor() == Ctor::Fresh);
  CHECK(req.arg(1) == dh_combine(pub::g(), st.state.own_exp));
  CHECK(st.state.phase == ScPhase::AwaitHalfKey);
}

TEST_CASE("honest exchange agrees on the session key and claims it out of band") {
  const auto h = handshake();
  REQUIRE(h.r.status == StepStatus::Ok);
  REQUIRE(h.i.status == StepStatus::Ok);
  CHECK(term_equal(h.i.state.session_key, h.r.state.session_key));
  CHECK(h.i.state.phase == ScPhase::AwaitOOB);
  CHECK(h.r.state.phase == ScPhase::AwaitOOB);
  REQUIRE(h.i.claims.size() == 1);
  REQUIRE(h.r.claims.size() == 1);
  CHECK(h.i.claims[0] == QrClaim{kA, kB, h.i.state.session_key, std::nullopt});
  CHECK(h.r.claims[0] == QrClaim{kB, kA, h.r.state.session_key, std::nullopt});
  CHECK(h.r.outputs.at(0).arg(2) == hash(h.r.state.session_key));
}

TEST_CASE("key hash mismatch is discarded when the initiator checks it") {
  ScFlags checking;
  checking.verify_key_hash = true;
  auto i = sc_step(initiator(checking), pub::dh_good());
  auto r = sc_step(sc_step(responder(), pub::dh_good()).state, i.outputs.at(0));
  const Term& reply = r.outputs.at(0);
  const Term wrong = tuple({reply.arg(0), reply.arg(1), hash(fresh(9, Sort::SessionKey, "E"))});
  CHECK(sc_step(i.state, wrong).status == StepStatus::Discard);
  CHECK(sc_step(i.state, reply).status == StepStatus::Ok);
}

TEST_CASE("initiator discards a reply for another chat") {
  auto i = sc_step(initiator(), pub::dh_good());
  const Term other = tuple({fresh(7, Sort::ChatID, "E"), dh_combine(pub::g(), attacker_fresh(Sort::PrivKey)),
                            hash(pub::g())});
  CHECK(sc_step(i.state, other).status == StepStatus::Discard);
}

TEST_CASE("BadElem half-key: checking responder fails, skipping responder keys on BadElem") {
  auto r = sc_step(responder(), pub::dh_good()).state;
  const Term req = tuple({fresh(7, Sort::ChatID, "E"), bad_elem()});
  const auto checked = sc_step(r, req);
  CHECK(checked.status == StepStatus::Failed);
  CHECK(checked.state.phase == ScPhase::Failed);
  CHECK_FALSE(checked.state.session_key.valid());
  ScFlags skip;
  skip.skip_dh_check = true;
  const auto skipped = sc_step(sc_step(responder(skip), pub::dh_good()).state, req);
  REQUIRE(skipped.status == StepStatus::Ok);
  CHECK(skipped.state.session_key == bad_elem());
  CHECK(has_event(skipped.events, "ClientChecksDHConfig"));
  CHECK(derivable(close(Knowledge()), skipped.state.session_key, 0));
}

TEST_CASE("out-of-band channel in Perform mode") {
  const Term k = fresh(5, Sort::SessionKey, "A"), k2 = fresh(6, Sort::SessionKey, "A");
  OobState s;
  auto a = oob_channel_step(s, QrClaim{kA, kB, k, std::nullopt});
  CHECK(a.events.empty());
  CHECK(a.confirmations.empty());
  auto b = oob_channel_step(a.state, QrClaim{kB, kA, k, std::nullopt});
  REQUIRE(b.events.size() == 2);
  CHECK(b.events[0].name == "OutOfBandKeyComparisonSucceeded");
  CHECK(b.confirmations.size() == 2);
  CHECK(b.state.pending.empty());
  // A mismatched key blocks and keeps the claim.
  auto c = oob_channel_step(a.state, QrClaim{kB, kA, k2, std::nullopt});
  CHECK(c.events.empty());
  CHECK(c.confirmations.empty());
  CHECK(c.state.pending.size() == 2);
  // Same principals in the same order do not match either.
  CHECK(oob_channel_step(a.state, QrClaim{kA, kB, k, std::nullopt}).events.empty());
}

TEST_CASE("out-of-band channel in Skip mode") {
  const Term k = fresh(5, Sort::SessionKey, "A");
  OobState s;
  s.mode = OobMode::Skip;
  auto a = oob_channel_step(s, QrClaim{kA, kB, k, std::nullopt});
  REQUIRE(a.events.size() == 1);
  CHECK(a.events[0].name == "OutOfBandKeyComparisonSkipped");
  CHECK(a.events[0].args == std::vector<Term>{kA, k});
  REQUIRE(a.confirmations.size() == 1);
  CHECK(a.confirmations[0] == QrOk{kA, kB, k, std::nullopt});
}

TEST_CASE("chat id in the claim separates sessions") {
  const Term k = fresh(5, Sort::SessionKey, "A");
  const Term i1 = fresh(1, Sort::ChatID, "A"), i2 = fresh(2, Sort::ChatID, "B");
  OobState s;
  auto a = oob_channel_step(s, QrClaim{kA, kB, k, i1});
  CHECK(oob_channel_step(a.state, QrClaim{kB, kA, k, i2}).events.empty());
  CHECK(oob_channel_step(a.state, QrClaim{kB, kA, k, i1}).events.size() == 2);
}

TEST_CASE("confirmation leads to chatting and an exchanged message") {
  auto h = handshake();
  OobState oob;
  auto o1 = oob_channel_step(oob, h.i.claims[0]);
  auto o2 = oob_channel_step(o1.state, h.r.claims[0]);
  REQUIRE(o2.confirmations.size() == 2);
  Step<SecretChatState> i = h.i, r = h.r;
  for (const auto& ok : o2.confirmations) {
    if (ok.x == kA) i = sc_step(i.state, ok);
    else r = sc_step(r.state, ok);
  }
  REQUIRE(i.state.phase == ScPhase::Chatting);
  REQUIRE(r.state.phase == ScPhase::Chatting);
  REQUIRE(i.outputs.size() == 1);
  const Event& sent = i.events.at(0);
  CHECK(sent.name == "SendsSecretChatMsg");
  const auto got = sc_step(r.state, i.outputs[0]);
  REQUIRE(got.status == StepStatus::Ok);
  const Event& recv = got.events.at(0);
  CHECK(recv.name == "ReceivesSecretChatMsg");
  // (X, id, I, R, k, m): same chat, roles and message on both sides.
  CHECK(recv.args[1] == sent.args[1]);
  CHECK(recv.args[2] == sent.args[2]);
  CHECK(recv.args[3] == sent.args[3]);
  CHECK(recv.args[4] == sent.args[4]);
  CHECK(recv.args[5] == sent.args[5]);
  // Ciphertext under another key is rejected.
  const Term foreign = senc(fresh(8, Sort::Message, "E"), fresh(9, Sort::SessionKey, "E"), attacker_fresh(Sort::Nonce));
  CHECK(sc_step(r.state, foreign).status == StepStatus::Discard);
}

TEST_CASE("a confirmation for another key is ignored") {
  auto h = handshake();
  const QrOk wrong{kA, kB, fresh(9, Sort::SessionKey, "E"), std::nullopt};
  CHECK(sc_step(h.i.state, wrong).status == StepStatus::Discard);
}

TEST_CASE("skip mode reaches chatting without a Succeeded event") {
  auto h = handshake();
  OobState oob;
  oob.mode = OobMode::Skip;
  auto o = oob_channel_step(oob, h.i.claims[0]);
  CHECK_FALSE(has_event(o.events, "OutOfBandKeyComparisonSucceeded"));
  const auto i = sc_step(h.i.state, o.confirmations.at(0));
  CHECK(i.state.phase == ScPhase::Chatting);
}

TEST_CASE("shapes accept the honest messages") {
  auto i = sc_step(initiator(), pub::dh_good());
  auto r0 = sc_step(responder(), pub::dh_good()).state;
  CHECK(shape_matches(sc_expects(initiator()), pub::dh_good()));
  CHECK(shape_matches(sc_expects(r0), i.outputs[0]));
  auto r = sc_step(r0, i.outputs[0]);
  CHECK(shape_matches(sc_expects(i.state), r.outputs[0]));
}
