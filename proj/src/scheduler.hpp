#pragma once

// The adversarial network: scenario configuration, role instantiation, message
// delivery, compromise schedule and trace recording.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "deduction.hpp"
#include "roles_auth.hpp"
#include "roles_rekey.hpp"
#include "roles_secret_chat.hpp"

namespace mtpsim {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol { Auth, SecretChat, Rekey, Composed };
enum class PrincipalKind { Client, Server, Rogue };
enum class Strategy { Passive, Scripted, Explore };

struct PrincipalFlags {
  bool skip_dh_check = false;
  bool reuse_ns = false;
  bool serve_bad_dh = false;
  bool verify_key_hash = false;
};

struct PrincipalDecl {
  std::string name;
  PrincipalKind kind = PrincipalKind::Client;
  PrincipalFlags flags;
};

struct PairDecl {
  std::string initiator;
  std::string responder;
  Protocol protocol = Protocol::Auth;
  int sessions = 0;  // 0: use the scenario default
};

struct CompromiseDecl {
  CompromiseKind kind = CompromiseKind::LeakRSAKey;
  std::string target;  // principal name
  RunPhase phase = RunPhase::During;
};

struct MsgRef {
  std::string from;  // role label
  std::size_t index = 0;
  friend bool operator==(const MsgRef&, const MsgRef&) = default;
};

struct Action {
  enum class Kind { Deliver, Forward, Replay, Drop, Synthesize, PhaseBoundary };
  Kind kind = Kind::Deliver;
  std::string to;
  nlohmann::json recipe;
  MsgRef ref;
};

struct Bounds {
  int max_steps = 10000;
  int synthesis_depth = kDefaultSynthesisDepth;
  std::size_t recipe_cap = kDefaultRecipeCap;
  int max_actions = 12;
  std::size_t max_states = 5'000'000;
};

inline constexpr int kDefaultSessions = 2;

struct Scenario {
  std::string name;
  Protocol protocol = Protocol::Auth;
  std::vector<PrincipalDecl> principals;
  std::vector<PairDecl> pairs;
  int sessions = kDefaultSessions;
  OobMode oob_mode = OobMode::Perform;
  bool oob_includes_chat_id = false;
  std::vector<CompromiseDecl> compromise;
  Strategy strategy = Strategy::Passive;
  std::vector<Action> actions;
  Bounds bounds;
  std::uint64_t seed = 0;
};

std::string_view protocol_name(Protocol p);
std::string_view strategy_name(Strategy s);

enum class EntryKind { Sent, Delivered, Event, Compromised, AttackerSynthesized };

std::string_view entry_kind_name(EntryKind k);

struct TraceEntry {
  std::size_t step = 0;
  EntryKind kind = EntryKind::Sent;
  std::string actor;
  Term term;                    // message or published secret
  std::optional<Event> event;   // Event and Compromised entries
  std::optional<MsgRef> source; // Delivered: the replayed message, if any
  nlohmann::json recipe;        // AttackerSynthesized / Delivered
  std::size_t index = 0;        // Sent: output index of the actor
  std::string status;           // Delivered: step status
};

struct Trace {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<Term> initial_knowledge;
  std::vector<TraceEntry> entries;
  Knowledge final_knowledge;  // closed

  std::vector<std::pair<std::size_t, const Event*>> events() const;
};

using RoleState = std::variant<AuthClientState, AuthServerState, SecretChatState, RekeyState>;

struct RoleInstance {
  std::string label;      // "A/client#1"
  std::string principal;
  std::string kind;       // client, server, sc-init, sc-resp, rk-init, rk-resp
  std::string peer;       // intended partner principal (empty for auth roles)
  int pair = -1;
  int stage = 0;
  int partner = -1;       // counterpart role index for passive forwarding
  bool active = false;
  bool pristine = true;   // has not received any input
  RoleState state;
  std::vector<Term> sent;
};

struct World {
  std::vector<RoleInstance> roles;
  OobState oob;
  Knowledge knowledge;  // closed attacker knowledge
  Trace trace;
  std::deque<std::pair<int, std::size_t>> queue;  // passive forwarding queue
  RunPhase phase = RunPhase::During;
  int stage = 0;
  int deliveries = 0;
  bool exploring = false;  // lean bookkeeping: no recipes, no forwarding queue
};

/// Validated scenario plus the operations that advance a World.
class Engine {
 public:
  explicit Engine(Scenario sc);

  const Scenario& scenario() const { return sc_; }
  int depth() const { return sc_.bounds.synthesis_depth; }

  /// World after setup: initial knowledge, start-of-run compromises, first
  /// stage activated and initiators started.
  World initial() const;

  int role_index(const std::string& label) const;

  /// Delivers `msg` to role `r`. `source` or `recipe` describe the origin.
  StepStatus deliver(World& w, int r, const Term& msg, const std::optional<MsgRef>& source,
                     const nlohmann::json& recipe) const;

  /// Attacker delivery of a term it can derive, with the bookkeeping of a
  /// scripted Deliver action: replayed messages cite their source, anything
  /// else is recorded as AttackerSynthesized together with its recipe.
  StepStatus deliver_term(World& w, int r, const Term& t) const;

  /// Fires the Post compromises and moves the world to the Post phase.
  void publish_post(World& w) const;

  /// Evaluates an attacker recipe against the current knowledge.
  Term eval_recipe(const World& w, const nlohmann::json& recipe) const;
  const Term& sent_message(const World& w, const MsgRef& ref) const;

  Shape expects(const World& w, int r) const;

  /// A delivery's status and events as computed by the role alone; the world
  /// is not touched. Matches deliver() exactly when step_local() holds.
  struct Preview {
    StepStatus status = StepStatus::Discard;
    std::vector<Event> events;
    bool claims = false;
  };
  Preview preview(const World& w, int r, const Term& msg) const;
  /// No event-triggered compromises and a single stage, so no delivery emits
  /// events beyond those of the receiving role.
  bool step_local() const;

  /// Passive strategy: deliver config messages and forward FIFO.
  void run_passive(World& w) const;
  void run_action(World& w, const Action& a) const;

  bool has_post_compromises() const;

 private:
  void build_roles();
  void activate_stage(World& w, int stage) const;
  void maybe_advance_stage(World& w) const;
  void record(World& w, TraceEntry e) const;
  void publish(World& w, const std::string& actor, const Compromise& c) const;
  void handle_step(World& w, int r, StepStatus status, std::vector<Term> outputs,
                   std::vector<Event> events, std::vector<QrClaim> claims) const;
  void sync_server_hashes(World& w, int r) const;
  bool role_halted(const RoleInstance& ri) const;
  int principal_index(const std::string& name) const;
  Term principal_name(std::uint64_t p, std::uint64_t slot, Sort sort) const;
  Term pair_key(const std::string& a, const std::string& b) const;

  Scenario sc_;
  std::vector<RoleInstance> roles_;
  std::vector<Term> initial_knowledge_;
  std::map<std::string, int> label_index_;
  int stages_ = 1;
};

/// Runs the scenario with its Passive or Scripted strategy.
Trace run(const Scenario& sc);

/// Re-derives attacker knowledge entry by entry and checks every delivered
/// term. Returns an empty string on success, otherwise a description.
std::string check_attacker_soundness(const Trace& t, int depth);

}  // namespace mtpsim
