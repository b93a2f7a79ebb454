#pragma once

// Authorization-key protocol: client and server state machines and the
// compromise processes.

#include <stdexcept>
#include <string>
#include <vector>

#include "protocol.hpp"

namespace mtpsim {

enum class AuthClientPhase { Init, AwaitResPQ, AwaitServerDH, AwaitAck, Done, Failed };
enum class AuthServerPhase { AwaitReqPQ, AwaitDHAnswer, AwaitClientDH, Done, Failed };

std::string_view phase_name(AuthClientPhase p);
std::string_view phase_name(AuthServerPhase p);

struct AuthClientFlags {
  bool skip_dh_check = false;
};

struct AuthServerFlags {
  bool reuse_ns = false;
  bool serve_bad_dh = false;
};

struct AuthClientState {
  Term principal;
  AuthClientPhase phase = AuthClientPhase::Init;
  Term n_c, n_s, n_k;
  Term server_pk;
  Term dh_cfg;
  Term b;
  Term auth_key;
  Term cloud_msg;  // sent under auth_key once the key is accepted
  AuthClientFlags flags;
  NameSpace names;
};

struct AuthServerState {
  Term principal;
  AuthServerPhase phase = AuthServerPhase::AwaitReqPQ;
  Term n_c, n_s, n_k;
  Term sk;
  Term a;
  Term dh_cfg;
  Term auth_key;
  Term fixed_ns;  // used instead of a fresh n_s when reuse_ns is set
  std::vector<Term> known_key_hashes;  // sorted, shared by all sessions of the server
  AuthServerFlags flags;
  NameSpace names;
};

AuthClientState make_auth_client(Term principal, Term server_pk, AuthClientFlags flags,
                                 NameSpace names);
AuthServerState make_auth_server(Term principal, Term sk, Term fixed_ns, AuthServerFlags flags,
                                 NameSpace names);

Step<AuthClientState> auth_client_step(const AuthClientState& s, const Input& in);
Step<AuthServerState> auth_server_step(const AuthServerState& s, const Input& in);

Shape auth_client_expects(const AuthClientState& s);
Shape auth_server_expects(const AuthServerState& s);

/// Symbolic DH parameter check: good configuration and a non-degenerate
/// received element.
bool validate_dh_config(const Term& cfg, const Term& g_received);

Hash128 state_hash(const AuthClientState& s);
Hash128 state_hash(const AuthServerState& s);

enum class CompromiseKind {
  LeakRSAKey,
  CompromiseNonce,
  ForgeServerIdentity,
  LeakAuthKey,
  PostCompromiseNonce,
  PostCompromiseRSAKey,
  PostCompromiseAuthKey,
  PostCompromiseSessionKey,
};

enum class RunPhase { During, Post };

std::string_view kind_name(CompromiseKind k);
std::optional<CompromiseKind> kind_from_name(std::string_view name);
bool is_post_kind(CompromiseKind k);

class PhaseViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Compromise {
  Term published;
  Event event;
};

/// Publishes `secret` and records the matching compromise event. For
/// ForgeServerIdentity `secret` is the server principal and the published
/// term is the attacker's replacement public key.
Compromise compromise_step(CompromiseKind kind, const Term& secret, RunPhase phase);

}  // namespace mtpsim
