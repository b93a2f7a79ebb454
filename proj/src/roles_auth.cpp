#include "roles_auth.hpp"

#include <algorithm>

#include "deduction.hpp"

namespace mtpsim {

namespace {

// Client slots.
constexpr std::uint64_t kClientNc = 0, kClientNk = 1, kClientB = 2, kClientIv = 3, kClientMsg = 4,
                        kClientMsgIv = 5;
// Server slots.
constexpr std::uint64_t kServerNs = 0, kServerA = 1, kServerIv = 2;

Event ev(std::string name, std::vector<Term> args) { return Event{std::move(name), std::move(args)}; }

}  // namespace

std::string_view phase_name(AuthClientPhase p) {
  switch (p) {
    case AuthClientPhase::Init: return "Init";
    case AuthClientPhase::AwaitResPQ: return "AwaitResPQ";
    case AuthClientPhase::AwaitServerDH: return "AwaitServerDH";
    case AuthClientPhase::AwaitAck: return "AwaitAck";
    case AuthClientPhase::Done: return "Done";
    case AuthClientPhase::Failed: return "Failed";
  }
  return "?";
}

std::string_view phase_name(AuthServerPhase p) {
  switch (p) {
    case AuthServerPhase::AwaitReqPQ: return "AwaitReqPQ";
    case AuthServerPhase::AwaitDHAnswer: return "AwaitDHAnswer";
    case AuthServerPhase::AwaitClientDH: return "AwaitClientDH";
    case AuthServerPhase::Done: return "Done";
    case AuthServerPhase::Failed: return "Failed";
  }
  return "?";
}

AuthClientState make_auth_client(Term principal, Term server_pk, AuthClientFlags flags,
                                 NameSpace names) {
  AuthClientState s;
  s.principal = std::move(principal);
  s.server_pk = std::move(server_pk);
  s.flags = flags;
  s.names = std::move(names);
  return s;
}

AuthServerState make_auth_server(Term principal, Term sk, Term fixed_ns, AuthServerFlags flags,
                                 NameSpace names) {
  AuthServerState s;
  s.principal = std::move(principal);
  s.sk = std::move(sk);
  s.fixed_ns = std::move(fixed_ns);
  s.flags = flags;
  s.names = std::move(names);
  return s;
}

bool validate_dh_config(const Term& cfg, const Term& g_received) {
  return cfg.ctor() == Ctor::DHConfig && cfg.quality() == DhQuality::Good &&
         g_received.ctor() != Ctor::BadElem;
}

Step<AuthClientState> auth_client_step(const AuthClientState& s, const Input& in) {
  const Term* msg = std::get_if<Term>(&in);
  AuthClientState n = s;
  switch (s.phase) {
    case AuthClientPhase::Init: {
      if (!std::holds_alternative<Start>(in)) return discard(s);
      n.n_c = s.names.make(kClientNc, Sort::Nonce);
      n.phase = AuthClientPhase::AwaitResPQ;
      return {n, StepStatus::Ok, {n.n_c}, {}, {}};
    }
    case AuthClientPhase::AwaitResPQ: {
      if (!msg || !is_tuple(*msg, 4)) return discard(s);
      const Term& m = *msg;
      if (m.arg(0) != s.n_c || m.arg(1).sort() != Sort::Nonce || m.arg(2) != pub::qr())
        return discard(s);
      const Term fp = fingerprint(s.server_pk);
      const Term& fps = m.arg(3);
      if (fps.ctor() != Ctor::Tuple ||
          std::find(fps.args().begin(), fps.args().end(), fp) == fps.args().end())
        return discard(s);
      n.n_s = m.arg(1);
      n.n_k = s.names.make(kClientNk, Sort::Nonce);
      Term payload =
          aenc(tuple({pub::qr(), pub::q(), pub::r(), n.n_c, n.n_s, n.n_k}), s.server_pk);
      n.phase = AuthClientPhase::AwaitServerDH;
      return {n,
              StepStatus::Ok,
              {tuple({n.n_c, n.n_s, pub::q(), pub::r(), fp, payload})},
              {ev("ClientRequestsDHParameters", {n.n_c, n.n_s})},
              {}};
    }
    case AuthClientPhase::AwaitServerDH: {
      if (!msg || !is_tuple(*msg, 3) || msg->arg(0) != s.n_c || msg->arg(1) != s.n_s)
        return discard(s);
      const Term tk = tmp_key(s.n_s, s.n_k);
      auto dec = decrypt_sym(msg->arg(2), tk);
      if (!dec.ok() || !is_tuple(dec.plain, 5)) return discard(s);
      const Term& p = dec.plain;
      if (p.arg(0) != s.n_c || p.arg(1) != s.n_s || !is_elem(p.arg(2)) ||
          p.arg(3).ctor() != Ctor::Const || !is_elem(p.arg(4)))
        return discard(s);
      const Term& g = p.arg(2);
      const Term& g_a = p.arg(4);
      n.dh_cfg = dh_config(g, p.arg(3));
      std::vector<Event> events{ev("ClientReceivesDHParameters", {s.n_c, s.n_s, s.n_k, g, g_a})};
      if (s.flags.skip_dh_check) {
        events.push_back(ev("ClientChecksDHParameters", {pub::bot()}));
      } else if (!validate_dh_config(n.dh_cfg, g_a)) {
        n.phase = AuthClientPhase::Failed;
        return {n, StepStatus::Failed, {}, std::move(events), {}};
      }
      n.b = s.names.make(kClientB, Sort::PrivKey);
      n.auth_key = dh_combine(g_a, n.b);
      const Term g_b = dh_combine(g, n.b);
      n.phase = AuthClientPhase::AwaitAck;
      Term enc = senc(tuple({s.n_c, s.n_s, g_b}), tk, s.names.make(kClientIv, Sort::Nonce));
      return {n, StepStatus::Ok, {tuple({s.n_c, s.n_s, enc})}, std::move(events), {}};
    }
    case AuthClientPhase::AwaitAck: {
      if (!msg || *msg != tuple({s.n_c, s.n_s, hash(s.n_k)})) return discard(s);
      n.cloud_msg = s.names.make(kClientMsg, Sort::Message);
      n.phase = AuthClientPhase::Done;
      Term cloud = senc(n.cloud_msg, s.auth_key, s.names.make(kClientMsgIv, Sort::Nonce));
      return {n,
              StepStatus::Ok,
              {cloud},
              {ev("ClientAcceptsAuthKey", {s.n_c, s.n_s, s.auth_key})},
              {}};
    }
    case AuthClientPhase::Done:
    case AuthClientPhase::Failed:
      break;
  }
  return discard(s);
}

Step<AuthServerState> auth_server_step(const AuthServerState& s, const Input& in) {
  const Term* msg = std::get_if<Term>(&in);
  if (!msg) return discard(s);
  AuthServerState n = s;
  const Term server_pk = pk(s.sk);
  switch (s.phase) {
    case AuthServerPhase::AwaitReqPQ: {
      if (msg->sort() != Sort::Nonce) return discard(s);
      n.n_c = *msg;
      n.n_s = s.flags.reuse_ns ? s.fixed_ns : s.names.make(kServerNs, Sort::Nonce);
      n.phase = AuthServerPhase::AwaitDHAnswer;
      return {n,
              StepStatus::Ok,
              {tuple({n.n_c, n.n_s, pub::qr(), tuple({fingerprint(server_pk)})})},
              {},
              {}};
    }
    case AuthServerPhase::AwaitDHAnswer: {
      const Term& m = *msg;
      if (!is_tuple(m, 6) || m.arg(0) != s.n_c || m.arg(1) != s.n_s || m.arg(2) != pub::q() ||
          m.arg(3) != pub::r() || m.arg(4) != fingerprint(server_pk))
        return discard(s);
      auto dec = decrypt_asym(m.arg(5), s.sk);
      if (!dec.ok() || !is_tuple(dec.plain, 6)) return discard(s);
      const Term& p = dec.plain;
      if (p.arg(0) != pub::qr() || p.arg(1) != pub::q() || p.arg(2) != pub::r() ||
          p.arg(3) != s.n_c || p.arg(4) != s.n_s || p.arg(5).sort() != Sort::Nonce)
        return discard(s);
      n.n_k = p.arg(5);
      n.dh_cfg = s.flags.serve_bad_dh ? pub::dh_bad() : pub::dh_good();
      n.a = s.names.make(kServerA, Sort::PrivKey);
      const Term& g = n.dh_cfg.arg(0);
      const Term g_a = dh_combine(g, n.a);
      n.phase = AuthServerPhase::AwaitClientDH;
      Term enc = senc(tuple({s.n_c, s.n_s, g, n.dh_cfg.arg(1), g_a}), tmp_key(s.n_s, n.n_k),
                      s.names.make(kServerIv, Sort::Nonce));
      return {n,
              StepStatus::Ok,
              {tuple({s.n_c, s.n_s, enc})},
              {ev("ServerSendsDHParameters", {s.n_c, s.n_s, n.n_k, g, g_a})},
              {}};
    }
    case AuthServerPhase::AwaitClientDH: {
      if (!is_tuple(*msg, 3) || msg->arg(0) != s.n_c || msg->arg(1) != s.n_s) return discard(s);
      auto dec = decrypt_sym(msg->arg(2), tmp_key(s.n_s, s.n_k));
      if (!dec.ok() || !is_tuple(dec.plain, 3)) return discard(s);
      const Term& p = dec.plain;
      if (p.arg(0) != s.n_c || p.arg(1) != s.n_s || !is_elem(p.arg(2))) return discard(s);
      n.auth_key = dh_combine(p.arg(2), s.a);
      const Term h = hash(n.auth_key);
      auto pos = std::lower_bound(n.known_key_hashes.begin(), n.known_key_hashes.end(), h);
      if (pos != n.known_key_hashes.end() && *pos == h) {
        n.phase = AuthServerPhase::Failed;
        return {n, StepStatus::UniquenessFailure, {}, {}, {}};
      }
      n.known_key_hashes.insert(pos, h);
      n.phase = AuthServerPhase::Done;
      return {n,
              StepStatus::Ok,
              {tuple({s.n_c, s.n_s, hash(s.n_k)})},
              {ev("ServerAcceptsClient", {s.n_c, s.n_s}),
               ev("ServerAcceptsAuthKey", {s.n_c, s.n_s, n.auth_key})},
              {}};
    }
    case AuthServerPhase::Done:
    case AuthServerPhase::Failed:
      break;
  }
  return discard(s);
}

Shape auth_client_expects(const AuthClientState& s) {
  using S = Shape;
  switch (s.phase) {
    case AuthClientPhase::AwaitResPQ:
      return S::tuple({S::exact(s.n_c), S::any(Sort::Nonce), S::exact(pub::qr()),
                       S::tuple({S::fingerprint_of(s.server_pk)})});
    case AuthClientPhase::AwaitServerDH:
      return S::tuple(
          {S::exact(s.n_c), S::exact(s.n_s),
           S::senc(S::tuple({S::exact(s.n_c), S::exact(s.n_s), S::one_of({pub::g(), bad_elem()}),
                             S::one_of({pub::p_good(), pub::p_bad()}), S::any(Sort::Element)}),
                   tmp_key(s.n_s, s.n_k))});
    case AuthClientPhase::AwaitAck:
      return S::tuple({S::exact(s.n_c), S::exact(s.n_s), S::hash_of(s.n_k)});
    default:
      return S::ignored();
  }
}

Shape auth_server_expects(const AuthServerState& s) {
  using S = Shape;
  const Term server_pk = pk(s.sk);
  switch (s.phase) {
    case AuthServerPhase::AwaitReqPQ:
      return S::any(Sort::Nonce);
    case AuthServerPhase::AwaitDHAnswer:
      return S::tuple(
          {S::exact(s.n_c), S::exact(s.n_s), S::exact(pub::q()), S::exact(pub::r()),
           S::fingerprint_of(server_pk),
           S::aenc(S::tuple({S::exact(pub::qr()), S::exact(pub::q()), S::exact(pub::r()),
                             S::exact(s.n_c), S::exact(s.n_s), S::any(Sort::Nonce)}),
                   server_pk)});
    case AuthServerPhase::AwaitClientDH:
      return S::tuple(
          {S::exact(s.n_c), S::exact(s.n_s),
           S::senc(S::tuple({S::exact(s.n_c), S::exact(s.n_s), S::any(Sort::Element)}),
                   tmp_key(s.n_s, s.n_k))});
    default:
      return S::ignored();
  }
}

Hash128 state_hash(const AuthClientState& s) {
  HashBuilder hb;
  hb.add(std::uint64_t{1});
  hb.add(static_cast<std::uint64_t>(s.phase));
  for (const Term* t : {&s.n_c, &s.n_s, &s.n_k, &s.server_pk, &s.dh_cfg, &s.auth_key})
    hb.add(*t);
  return hb.done();
}

Hash128 state_hash(const AuthServerState& s) {
  HashBuilder hb;
  hb.add(std::uint64_t{2});
  hb.add(static_cast<std::uint64_t>(s.phase));
  for (const Term* t : {&s.n_c, &s.n_s, &s.n_k, &s.auth_key}) hb.add(*t);
  for (const auto& h : s.known_key_hashes) hb.add(h);
  return hb.done();
}

std::string_view kind_name(CompromiseKind k) {
  switch (k) {
    case CompromiseKind::LeakRSAKey: return "LeakRSAKey";
    case CompromiseKind::CompromiseNonce: return "CompromiseNonce";
    case CompromiseKind::ForgeServerIdentity: return "ForgeServerIdentity";
    case CompromiseKind::LeakAuthKey: return "LeakAuthKey";
    case CompromiseKind::PostCompromiseNonce: return "PostCompromiseNonce";
    case CompromiseKind::PostCompromiseRSAKey: return "PostCompromiseRSAKey";
    case CompromiseKind::PostCompromiseAuthKey: return "PostCompromiseAuthKey";
    case CompromiseKind::PostCompromiseSessionKey: return "PostCompromiseSessionKey";
  }
  return "?";
}

std::optional<CompromiseKind> kind_from_name(std::string_view name) {
  for (auto k : {CompromiseKind::LeakRSAKey, CompromiseKind::CompromiseNonce,
                 CompromiseKind::ForgeServerIdentity, CompromiseKind::LeakAuthKey,
                 CompromiseKind::PostCompromiseNonce, CompromiseKind::PostCompromiseRSAKey,
                 CompromiseKind::PostCompromiseAuthKey, CompromiseKind::PostCompromiseSessionKey})
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

bool is_post_kind(CompromiseKind k) {
  switch (k) {
    case CompromiseKind::PostCompromiseNonce:
    case CompromiseKind::PostCompromiseRSAKey:
    case CompromiseKind::PostCompromiseAuthKey:
    case CompromiseKind::PostCompromiseSessionKey:
      return true;
    default:
      return false;
  }
}

Compromise compromise_step(CompromiseKind kind, const Term& secret, RunPhase phase) {
  const bool post = is_post_kind(kind);
  if (post && phase == RunPhase::During)
    throw PhaseViolation(std::string(kind_name(kind)) + " cannot fire while the run is in progress");
  if (!post && phase == RunPhase::Post)
    throw PhaseViolation(std::string(kind_name(kind)) + " must fire during the run");
  switch (kind) {
    case CompromiseKind::LeakRSAKey:
      return {secret, ev("CompromisedRSAKey", {secret})};
    case CompromiseKind::CompromiseNonce:
      return {secret, ev("CompromisedNonce", {secret})};
    case CompromiseKind::ForgeServerIdentity:
      return {pk(attacker_fresh(Sort::PrivKey)), ev("ForgedServerIdentity", {secret})};
    case CompromiseKind::LeakAuthKey:
      return {secret, ev("CompromisedAuthKey", {secret})};
    case CompromiseKind::PostCompromiseNonce:
      return {secret, ev("PostCompromisedNonce", {secret})};
    case CompromiseKind::PostCompromiseRSAKey:
      return {secret, ev("PostCompromisedRSAKey", {secret})};
    case CompromiseKind::PostCompromiseAuthKey:
      return {secret, ev("PostCompromisedAuthKey", {secret})};
    case CompromiseKind::PostCompromiseSessionKey:
      return {secret, ev("PostCompromisedSessionKey", {secret})};
  }
  return {secret, {}};
}

}  // namespace mtpsim
