#include "roles_secret_chat.hpp"

#include "roles_auth.hpp"

namespace mtpsim {

namespace {

constexpr std::uint64_t kChatId = 0, kExp = 1, kMsg = 2, kMsgIv = 3;

Event ev(std::string name, std::vector<Term> args) { return Event{std::move(name), std::move(args)}; }

QrClaim claim_for(const SecretChatState& s) {
  QrClaim c{s.principal, s.peer, s.session_key, std::nullopt};
  if (s.flags.oob_includes_chat_id) c.chat_id = s.chat_id;
  return c;
}

// Shared tail of both roles once the peer's half-key is in hand.
Step<SecretChatState> derive_key(SecretChatState n, const Term& other_half,
                                 std::vector<Term> outputs, std::vector<Event> events) {
  if (n.flags.skip_dh_check) {
    events.push_back(ev("ClientChecksDHConfig", {n.principal, pub::bot()}));
  } else if (!validate_dh_config(n.dh_cfg, other_half)) {
    n.phase = ScPhase::Failed;
    n.session_key = Term{};
    return {n, StepStatus::Failed, {}, std::move(events), {}};
  }
  n.phase = ScPhase::AwaitOOB;
  QrClaim c = claim_for(n);
  return {n, StepStatus::Ok, std::move(outputs), std::move(events), {c}};
}

bool confirms(const SecretChatState& s, const QrOk& ok) {
  if (ok.x != s.principal || ok.y != s.peer || ok.k != s.session_key) return false;
  if (s.flags.oob_includes_chat_id) return ok.chat_id && *ok.chat_id == s.chat_id;
  return true;
}

}  // namespace

std::string_view phase_name(ScPhase p) {
  switch (p) {
    case ScPhase::Init: return "Init";
    case ScPhase::AwaitAccept: return "AwaitAccept";
    case ScPhase::AwaitHalfKey: return "AwaitHalfKey";
    case ScPhase::AwaitOOB: return "AwaitOOB";
    case ScPhase::Chatting: return "Chatting";
    case ScPhase::Failed: return "Failed";
  }
  return "?";
}

SecretChatState make_secret_chat(ScRole role, Term principal, Term peer, ScFlags flags,
                                 NameSpace names) {
  SecretChatState s;
  s.role = role;
  s.principal = std::move(principal);
  s.peer = std::move(peer);
  s.flags = flags;
  s.names = std::move(names);
  return s;
}

Step<SecretChatState> sc_send(const SecretChatState& s) {
  if (s.phase != ScPhase::Chatting || s.sent_msg.valid()) return discard(s);
  SecretChatState n = s;
  n.sent_msg = s.names.make(kMsg, Sort::Message);
  Term c = senc(n.sent_msg, s.session_key, s.names.make(kMsgIv, Sort::Nonce));
  return {n,
          StepStatus::Ok,
          {c},
          {ev("SendsSecretChatMsg",
              {s.principal, s.chat_id, s.initiator(), s.responder(), s.session_key, n.sent_msg})},
          {}};
}

Step<SecretChatState> sc_receive(const SecretChatState& s, const Term& ciphertext) {
  if (s.phase != ScPhase::Chatting || s.received_msg.valid()) return discard(s);
  auto dec = decrypt_sym(ciphertext, s.session_key);
  if (!dec.ok()) return discard(s);
  SecretChatState n = s;
  n.received_msg = dec.plain;
  return {n,
          StepStatus::Ok,
          {},
          {ev("ReceivesSecretChatMsg",
              {s.principal, s.chat_id, s.initiator(), s.responder(), s.session_key, dec.plain})},
          {}};
}

namespace {

Step<SecretChatState> common_step(const SecretChatState& s, const Input& in) {
  if (s.phase == ScPhase::AwaitOOB) {
    const auto* ok = std::get_if<QrOk>(&in);
    if (!ok || !confirms(s, *ok)) return discard(s);
    SecretChatState n = s;
    n.phase = ScPhase::Chatting;
    return sc_send(n);
  }
  if (s.phase == ScPhase::Chatting) {
    const auto* c = std::get_if<Term>(&in);
    if (!c) return discard(s);
    return sc_receive(s, *c);
  }
  return discard(s);
}

}  // namespace

Step<SecretChatState> sc_initiator_step(const SecretChatState& s, const Input& in) {
  const Term* msg = std::get_if<Term>(&in);
  switch (s.phase) {
    case ScPhase::Init: {
      if (!msg || msg->ctor() != Ctor::DHConfig) return discard(s);
      SecretChatState n = s;
      n.dh_cfg = *msg;
      n.chat_id = s.names.make(kChatId, Sort::ChatID);
      n.own_exp = s.names.make(kExp, Sort::PrivKey);
      const Term g_a = dh_combine(msg->arg(0), n.own_exp);
      n.phase = ScPhase::AwaitHalfKey;
      return {n, StepStatus::Ok, {tuple({n.chat_id, g_a})}, {}, {}};
    }
    case ScPhase::AwaitHalfKey: {
      if (!msg || !is_tuple(*msg, 3) || msg->arg(0) != s.chat_id || !is_elem(msg->arg(1)))
        return discard(s);
      const Term& g_b = msg->arg(1);
      SecretChatState n = s;
      n.session_key = dh_combine(g_b, s.own_exp);
      if (s.flags.verify_key_hash && msg->arg(2) != hash(n.session_key)) return discard(s);
      return derive_key(std::move(n), g_b, {}, {});
    }
    default:
      return common_step(s, in);
  }
}

Step<SecretChatState> sc_responder_step(const SecretChatState& s, const Input& in) {
  const Term* msg = std::get_if<Term>(&in);
  switch (s.phase) {
    case ScPhase::Init: {
      if (!msg || msg->ctor() != Ctor::DHConfig) return discard(s);
      SecretChatState n = s;
      n.dh_cfg = *msg;
      n.phase = ScPhase::AwaitAccept;
      return {n, StepStatus::Ok, {}, {}, {}};
    }
    case ScPhase::AwaitAccept: {
      if (!msg || !is_tuple(*msg, 2) || msg->arg(0).sort() != Sort::ChatID ||
          !is_elem(msg->arg(1)))
        return discard(s);
      const Term& g_a = msg->arg(1);
      SecretChatState n = s;
      n.chat_id = msg->arg(0);
      n.own_exp = s.names.make(kExp, Sort::PrivKey);
      n.session_key = dh_combine(g_a, n.own_exp);
      const Term g_b = dh_combine(s.dh_cfg.arg(0), n.own_exp);
      Term reply = tuple({n.chat_id, g_b, hash(n.session_key)});
      return derive_key(std::move(n), g_a, {reply}, {});
    }
    default:
      return common_step(s, in);
  }
}

Step<SecretChatState> sc_step(const SecretChatState& s, const Input& in) {
  return s.role == ScRole::Initiator ? sc_initiator_step(s, in) : sc_responder_step(s, in);
}

Shape sc_expects(const SecretChatState& s) {
  using S = Shape;
  switch (s.phase) {
    case ScPhase::Init:
      return S::one_of({pub::dh_good(), pub::dh_bad()});
    case ScPhase::AwaitAccept:
      return S::tuple({S::any(Sort::ChatID), S::any(Sort::Element)});
    case ScPhase::AwaitHalfKey:
      return S::tuple({S::exact(s.chat_id), S::any(Sort::Element), S::any_hash()});
    case ScPhase::Chatting:
      if (s.received_msg.valid()) return S::ignored();
      return S::senc(S::any(Sort::Message), s.session_key);
    default:
      return S::ignored();
  }
}

Hash128 state_hash(const SecretChatState& s) {
  HashBuilder hb;
  hb.add(std::uint64_t{3});
  hb.add(static_cast<std::uint64_t>(s.phase));
  for (const Term* t : {&s.chat_id, &s.dh_cfg, &s.session_key, &s.sent_msg, &s.received_msg})
    hb.add(*t);
  return hb.done();
}

OobStep oob_channel_step(const OobState& s, const QrClaim& claim) {
  OobStep out{s, {}, {}};
  const auto& k = claim.k;
  if (s.mode == OobMode::Skip) {
    out.events.push_back(ev("OutOfBandKeyComparisonSkipped", {claim.x, k}));
    out.confirmations.push_back(QrOk{claim.x, claim.y, k, claim.chat_id});
    return out;
  }
  auto& pending = out.state.pending;
  for (auto it = pending.begin(); it != pending.end(); ++it) {
    if (it->x == claim.y && it->y == claim.x && it->k == k && it->chat_id == claim.chat_id) {
      const Term x = it->x, y = it->y;
      pending.erase(it);
      out.events.push_back(ev("OutOfBandKeyComparisonSucceeded", {x, y, k}));
      out.events.push_back(ev("OutOfBandKeyComparisonSucceeded", {y, x, k}));
      out.confirmations.push_back(QrOk{x, y, k, claim.chat_id});
      out.confirmations.push_back(QrOk{y, x, k, claim.chat_id});
      return out;
    }
  }
  pending.push_back(claim);
  return out;
}

Hash128 state_hash(const OobState& s) {
  HashBuilder hb;
  hb.add(std::uint64_t{4});
  for (const auto& c : s.pending) {
    hb.add(c.x);
    hb.add(c.y);
    hb.add(c.k);
    if (c.chat_id) hb.add(*c.chat_id);
  }
  return hb.done();
}

}  // namespace mtpsim
