#include "presets.hpp"

#include "io.hpp"

namespace mtpsim {

namespace {

// The server answers a legitimate client's first message, then the attacker
// finishes the exchange with its own n_k and exponent.
const char* const kClientImpersonation = R"JSON({
  "schema": "mtpsim/1",
  "name": "client_impersonation",
  "protocol": "Auth",
  "principals": [{"name": "A", "kind": "client"}, {"name": "S", "kind": "server"}],
  "pairs": [{"initiator": "A", "responder": "S", "sessions": 1}],
  "attacker": {"strategy": "Scripted", "actions": [
    {"op": "forward", "msg": {"from": "A/client#1", "index": 0}},
    {"op": "deliver", "to": "S/server#1", "recipe": {"ctor": "Tuple", "args": [
      {"msg": {"from": "A/client#1", "index": 0}},
      {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]},
      {"const": "q"},
      {"const": "r"},
      {"proj": [{"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 3]}, 0]},
      {"ctor": "AEnc", "args": [
        {"ctor": "Tuple", "args": [
          {"const": "qr"}, {"const": "q"}, {"const": "r"},
          {"msg": {"from": "A/client#1", "index": 0}},
          {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]},
          {"afresh": "Nonce"}]},
        {"public_key": "S"}]}]}},
    {"op": "synthesize", "recipe": {"proj": [{"dec": [
      {"proj": [{"msg": {"from": "S/server#1", "index": 1}}, 2]},
      {"ctor": "TmpKey", "args": [
        {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]}, {"afresh": "Nonce"}]}]}, 4]}},
    {"op": "deliver", "to": "S/server#1", "recipe": {"ctor": "Tuple", "args": [
      {"msg": {"from": "A/client#1", "index": 0}},
      {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]},
      {"ctor": "SEnc", "args": [
        {"ctor": "Tuple", "args": [
          {"msg": {"from": "A/client#1", "index": 0}},
          {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]},
          {"dh": [{"const": "g"}, {"afresh": "PrivKey"}]}]},
        {"ctor": "TmpKey", "args": [
          {"proj": [{"msg": {"from": "S/server#1", "index": 0}}, 1]}, {"afresh": "Nonce"}]},
        {"afresh": "Nonce"}]}]}}
  ]}
})JSON";

// A client that skips the DH checks accepts the weak group; the resulting
// authorization key is the degenerate element everybody knows.
const char* const kWeakDhMitm = R"JSON({
  "schema": "mtpsim/1",
  "name": "weak_dh_mitm",
  "protocol": "Auth",
  "principals": [
    {"name": "A", "kind": "client", "flags": {"skip_dh_check": true}},
    {"name": "S", "kind": "server", "flags": {"serve_bad_dh": true}}],
  "pairs": [{"initiator": "A", "responder": "S", "sessions": 1}],
  "attacker": {"strategy": "Scripted", "actions": [
    {"op": "forward", "msg": {"from": "A/client#1", "index": 0}},
    {"op": "forward", "msg": {"from": "S/server#1", "index": 0}},
    {"op": "forward", "msg": {"from": "A/client#1", "index": 1}},
    {"op": "forward", "msg": {"from": "S/server#1", "index": 1}},
    {"op": "forward", "msg": {"from": "A/client#1", "index": 2}},
    {"op": "forward", "msg": {"from": "S/server#1", "index": 2}},
    {"op": "synthesize", "recipe": {"dec": [{"msg": {"from": "A/client#1", "index": 3}}, {"const": "BadElem"}]}}
  ]}
})JSON";

// The server plays the responder in two chats started in opposite
// directions and hands each initiator the other's half-key.
const char* const kCrossSessionSc = R"JSON({
  "schema": "mtpsim/1",
  "name": "cross_session_sc",
  "protocol": "SecretChat",
  "principals": [{"name": "A", "kind": "client"}, {"name": "B", "kind": "client"}],
  "pairs": [
    {"initiator": "A", "responder": "B", "sessions": 1},
    {"initiator": "B", "responder": "A", "sessions": 1}],
  "oob_mode": "Perform",
  "attacker": {"strategy": "Scripted", "actions": [
    {"op": "deliver", "to": "A/sc-init#1", "recipe": {"const": "dh_good"}},
    {"op": "deliver", "to": "B/sc-init#1", "recipe": {"const": "dh_good"}},
    {"op": "deliver", "to": "B/sc-init#1", "recipe": {"ctor": "Tuple", "args": [
      {"proj": [{"msg": {"from": "B/sc-init#1", "index": 0}}, 0]},
      {"proj": [{"msg": {"from": "A/sc-init#1", "index": 0}}, 1]},
      {"ctor": "Hash", "args": [{"const": "bot"}]}]}},
    {"op": "deliver", "to": "A/sc-init#1", "recipe": {"ctor": "Tuple", "args": [
      {"proj": [{"msg": {"from": "A/sc-init#1", "index": 0}}, 0]},
      {"proj": [{"msg": {"from": "B/sc-init#1", "index": 0}}, 1]},
      {"ctor": "Hash", "args": [{"const": "bot"}]}]}},
    {"op": "replay", "msg": {"from": "B/sc-init#1", "index": 1}, "to": "A/sc-init#1"},
    {"op": "replay", "msg": {"from": "A/sc-init#1", "index": 1}, "to": "B/sc-init#1"}
  ]}
})JSON";

// E and E' each share a chat with one victim and relay the rekeying
// messages between the two chats.
const char* const kUksRekey = R"JSON({
  "schema": "mtpsim/1",
  "name": "uks_rekey",
  "protocol": "Rekey",
  "principals": [
    {"name": "A", "kind": "client"}, {"name": "B", "kind": "client"},
    {"name": "E", "kind": "rogue"}, {"name": "E'", "kind": "rogue"}],
  "pairs": [
    {"initiator": "A", "responder": "E", "sessions": 1},
    {"initiator": "E'", "responder": "B", "sessions": 1}],
  "attacker": {"strategy": "Scripted", "actions": [
    {"op": "deliver", "to": "B/rk-resp#1", "recipe": {"ctor": "SEnc", "args": [
      {"dec": [{"msg": {"from": "A/rk-init#1", "index": 0}}, {"shared_key": ["A", "E"]}]},
      {"shared_key": ["E'", "B"]}, {"afresh": "Nonce"}]}},
    {"op": "deliver", "to": "A/rk-init#1", "recipe": {"ctor": "SEnc", "args": [
      {"dec": [{"msg": {"from": "B/rk-resp#1", "index": 0}}, {"shared_key": ["E'", "B"]}]},
      {"shared_key": ["A", "E"]}, {"afresh": "Nonce"}]}},
    {"op": "deliver", "to": "B/rk-resp#1", "recipe": {"ctor": "SEnc", "args": [
      {"dec": [{"msg": {"from": "A/rk-init#1", "index": 1}}, {"shared_key": ["A", "E"]}]},
      {"shared_key": ["E'", "B"]}, {"afresh": "Nonce"}]}}
  ]}
})JSON";

struct Entry {
  PresetInfo info;
  const char* json;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> all{
      {{"client_impersonation",
        "the attacker takes over a session after the first round and the server accepts it as the client",
        "auth.client_auth"},
       kClientImpersonation},
      {{"weak_dh_mitm",
        "a client skipping DH checks accepts weak parameters and its cloud message leaks",
        "auth.secrecy~dhcheck"},
       kWeakDhMitm},
      {{"cross_session_sc",
        "the server cross-wires two secret chats between the same clients",
        "sc.integrity_same_chat"},
       kCrossSessionSc},
      {{"uks_rekey",
        "two rogue clients relay a rekeying so that A and B share a key while each believes the peer is rogue",
        "rk.uks"},
       kUksRekey},
  };
  return all;
}

}  // namespace

const std::vector<PresetInfo>& presets() {
  static const std::vector<PresetInfo> all = [] {
    std::vector<PresetInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return all;
}

const PresetInfo& preset_info(const std::string& name) {
  for (const auto& e : entries())
    if (e.info.name == name) return e.info;
  throw UnknownPreset("unknown preset " + name);
}

Scenario preset_attack(const std::string& name) {
  for (const auto& e : entries())
    if (e.info.name == name) return scenario_from_json(nlohmann::json::parse(e.json));
  throw UnknownPreset("unknown preset " + name);
}

}  // namespace mtpsim
