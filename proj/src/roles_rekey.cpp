#include "roles_rekey.hpp"

#include "roles_auth.hpp"

namespace mtpsim {

namespace {

constexpr std::uint64_t kSessionId = 0, kExp = 1, kIv1 = 2, kIv2 = 3, kMsg = 4, kMsgIv = 5;

Event ev(std::string name, std::vector<Term> args) { return Event{std::move(name), std::move(args)}; }

std::optional<Term> open(const RekeyState& s, const Input& in, std::size_t arity) {
  const Term* msg = std::get_if<Term>(&in);
  if (!msg) return std::nullopt;
  auto dec = decrypt_sym(*msg, s.current_key);
  if (!dec.ok() || !is_tuple(dec.plain, arity)) return std::nullopt;
  return dec.plain;
}

bool usable_half(const RekeyState& s, const Term& half) {
  return is_elem(half) && validate_dh_config(s.dh_cfg, half);
}

Term final_message(RekeyState& n) {
  n.sent_msg = n.names.make(kMsg, Sort::Message);
  return senc(n.sent_msg, n.new_key, n.names.make(kMsgIv, Sort::Nonce));
}

}  // namespace

std::string_view phase_name(RkPhase p) {
  switch (p) {
    case RkPhase::Init: return "Init";
    case RkPhase::AwaitHalfKey: return "AwaitHalfKey";
    case RkPhase::AwaitAck: return "AwaitAck";
    case RkPhase::Done: return "Done";
  }
  return "?";
}

RekeyState make_rekey(RkRole role, Term principal, Term peer, Term current_key, Term dh_cfg,
                      NameSpace names) {
  RekeyState s;
  s.role = role;
  s.principal = std::move(principal);
  s.peer = std::move(peer);
  s.current_key = std::move(current_key);
  s.dh_cfg = std::move(dh_cfg);
  s.names = std::move(names);
  return s;
}

Step<RekeyState> rk_initiator_step(const RekeyState& s, const Input& in) {
  RekeyState n = s;
  switch (s.phase) {
    case RkPhase::Init: {
      if (!std::holds_alternative<Start>(in)) return discard(s);
      n.session_id = s.names.make(kSessionId, Sort::ChatID);
      n.own_exp = s.names.make(kExp, Sort::PrivKey);
      const Term g_a = dh_combine(s.dh_cfg.arg(0), n.own_exp);
      n.phase = RkPhase::AwaitHalfKey;
      return {n,
              StepStatus::Ok,
              {senc(tuple({n.session_id, g_a}), s.current_key, s.names.make(kIv1, Sort::Nonce))},
              {},
              {}};
    }
    case RkPhase::AwaitHalfKey: {
      auto p = open(s, in, 3);
      if (!p || p->arg(0) != s.session_id || !usable_half(s, p->arg(1))) return discard(s);
      n.new_key = dh_combine(p->arg(1), s.own_exp);
      const Term fp = fingerprint(n.new_key);
      if (p->arg(2) != fp) return discard(s);
      n.phase = RkPhase::Done;
      Term ack = senc(tuple({s.session_id, fp}), s.current_key, s.names.make(kIv2, Sort::Nonce));
      Term m = final_message(n);
      return {n,
              StepStatus::Ok,
              {ack, m},
              {ev("InitiatorNegotiatesNewKey", {s.session_id, s.principal, s.peer, n.new_key})},
              {}};
    }
    default:
      return discard(s);
  }
}

Step<RekeyState> rk_responder_step(const RekeyState& s, const Input& in) {
  RekeyState n = s;
  switch (s.phase) {
    case RkPhase::Init: {
      auto p = open(s, in, 2);
      if (!p || p->arg(0).sort() != Sort::ChatID || !usable_half(s, p->arg(1))) return discard(s);
      n.session_id = p->arg(0);
      n.own_exp = s.names.make(kExp, Sort::PrivKey);
      n.new_key = dh_combine(p->arg(1), n.own_exp);
      const Term g_b = dh_combine(s.dh_cfg.arg(0), n.own_exp);
      n.phase = RkPhase::AwaitAck;
      return {n,
              StepStatus::Ok,
              {senc(tuple({n.session_id, g_b, fingerprint(n.new_key)}), s.current_key,
                    s.names.make(kIv1, Sort::Nonce))},
              {},
              {}};
    }
    case RkPhase::AwaitAck: {
      auto p = open(s, in, 2);
      if (!p || p->arg(0) != s.session_id || p->arg(1) != fingerprint(s.new_key))
        return discard(s);
      n.phase = RkPhase::Done;
      Term m = final_message(n);
      return {n,
              StepStatus::Ok,
              {m},
              {ev("ResponderNegotiatesNewKey", {s.session_id, s.peer, s.principal, s.new_key})},
              {}};
    }
    default:
      return discard(s);
  }
}

Step<RekeyState> rk_step(const RekeyState& s, const Input& in) {
  return s.role == RkRole::Initiator ? rk_initiator_step(s, in) : rk_responder_step(s, in);
}

Shape rk_expects(const RekeyState& s) {
  using S = Shape;
  if (s.role == RkRole::Initiator) {
    if (s.phase != RkPhase::AwaitHalfKey) return S::ignored();
    return S::senc(S::tuple({S::exact(s.session_id), S::any(Sort::Element),
                             S::any(Sort::Fingerprint)}),
                   s.current_key);
  }
  switch (s.phase) {
    case RkPhase::Init:
      return S::senc(S::tuple({S::any(Sort::ChatID), S::any(Sort::Element)}), s.current_key);
    case RkPhase::AwaitAck:
      return S::senc(S::tuple({S::exact(s.session_id), S::fingerprint_of(s.new_key)}),
                     s.current_key);
    default:
      return S::ignored();
  }
}

Hash128 state_hash(const RekeyState& s) {
  HashBuilder hb;
  hb.add(std::uint64_t{5});
  hb.add(static_cast<std::uint64_t>(s.phase));
  for (const Term* t : {&s.session_id, &s.current_key, &s.new_key}) hb.add(*t);
  return hb.done();
}

}  // namespace mtpsim
