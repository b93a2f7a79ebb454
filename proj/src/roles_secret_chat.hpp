#pragma once

// Secret-chat key exchange, the out-of-band key comparison channel and the
// post-handshake message exchange.

#include <string>
#include <vector>

#include "protocol.hpp"

namespace mtpsim {

enum class ScRole { Initiator, Responder };
enum class ScPhase { Init, AwaitAccept, AwaitHalfKey, AwaitOOB, Chatting, Failed };

std::string_view phase_name(ScPhase p);

struct ScFlags {
  bool skip_dh_check = false;
  // Compare the received Hash(k) against the locally computed key. Off by
  // default: the fingerprint is a sanity check that the protocol does not
  // rely on.
  bool verify_key_hash = false;
  bool oob_includes_chat_id = false;
};

struct SecretChatState {
  Term principal;
  Term peer;
  ScRole role = ScRole::Initiator;
  ScPhase phase = ScPhase::Init;
  Term chat_id;
  Term dh_cfg;
  Term own_exp;
  Term session_key;
  Term sent_msg;
  Term received_msg;
  ScFlags flags;
  NameSpace names;

  Term initiator() const { return role == ScRole::Initiator ? principal : peer; }
  Term responder() const { return role == ScRole::Initiator ? peer : principal; }
};

SecretChatState make_secret_chat(ScRole role, Term principal, Term peer, ScFlags flags,
                                 NameSpace names);

Step<SecretChatState> sc_initiator_step(const SecretChatState& s, const Input& in);
Step<SecretChatState> sc_responder_step(const SecretChatState& s, const Input& in);
Step<SecretChatState> sc_step(const SecretChatState& s, const Input& in);

Step<SecretChatState> sc_send(const SecretChatState& s);
Step<SecretChatState> sc_receive(const SecretChatState& s, const Term& ciphertext);

Shape sc_expects(const SecretChatState& s);
Hash128 state_hash(const SecretChatState& s);

enum class OobMode { Perform, Skip };

struct OobState {
  OobMode mode = OobMode::Perform;
  std::vector<QrClaim> pending;  // unmatched claims, in arrival order
};

struct OobStep {
  OobState state;
  std::vector<Event> events;
  std::vector<QrOk> confirmations;
};

OobStep oob_channel_step(const OobState& s, const QrClaim& claim);
Hash128 state_hash(const OobState& s);

}  // namespace mtpsim
