#pragma once

// Rekeying inside an established secret chat. Every message travels under the
// current session key.

#include "protocol.hpp"

namespace mtpsim {

enum class RkRole { Initiator, Responder };
enum class RkPhase { Init, AwaitHalfKey, AwaitAck, Done };

std::string_view phase_name(RkPhase p);

struct RekeyState {
  Term principal;
  Term peer;  // intended partner
  RkRole role = RkRole::Initiator;
  RkPhase phase = RkPhase::Init;
  Term session_id;
  Term current_key;
  Term dh_cfg;
  Term own_exp;
  Term new_key;
  Term sent_msg;  // sent under new_key once the exchange completes
  NameSpace names;
};

RekeyState make_rekey(RkRole role, Term principal, Term peer, Term current_key, Term dh_cfg,
                      NameSpace names);

Step<RekeyState> rk_initiator_step(const RekeyState& s, const Input& in);
Step<RekeyState> rk_responder_step(const RekeyState& s, const Input& in);
Step<RekeyState> rk_step(const RekeyState& s, const Input& in);

Shape rk_expects(const RekeyState& s);
Hash128 state_hash(const RekeyState& s);

}  // namespace mtpsim
