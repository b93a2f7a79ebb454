#include "scheduler.hpp"

#include <algorithm>
#include <set>

namespace mtpsim {

namespace {

constexpr std::uint64_t kPrincipalBase = 100, kPrincipalStride = 8;
constexpr std::uint64_t kRoleBase = 1000, kRoleStride = 16;
constexpr std::uint64_t kPairKeyBase = 500000, kPairKeyStride = 16;

// Principal-level slots.
constexpr std::uint64_t kServerSk = 0, kServerFixedNs = 1, kAuthKey = 2;

struct AnyStep {
  StepStatus status;
  std::vector<Term> outputs;
  std::vector<Event> events;
  std::vector<QrClaim> claims;
};

template <typename S>
AnyStep take(S& slot, Step<S> r) {
  slot = std::move(r.state);
  return {r.status, std::move(r.outputs), std::move(r.events), std::move(r.claims)};
}

AnyStep step_role(RoleState& st, const Input& in) {
  return std::visit(
      [&](auto& s) -> AnyStep {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AuthClientState>) return take(s, auth_client_step(s, in));
        if constexpr (std::is_same_v<T, AuthServerState>) return take(s, auth_server_step(s, in));
        if constexpr (std::is_same_v<T, SecretChatState>) return take(s, sc_step(s, in));
        if constexpr (std::is_same_v<T, RekeyState>) return take(s, rk_step(s, in));
      },
      st);
}

bool is_initiator_kind(const std::string& kind) { return kind == "client" || kind == "rk-init"; }

Term public_const(const std::string& name) {
  if (auto t = pub::by_name(name)) return *t;
  throw ScriptError("unknown public constant '" + name + "'");
}

}  // namespace

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Auth: return "Auth";
    case Protocol::SecretChat: return "SecretChat";
    case Protocol::Rekey: return "Rekey";
    case Protocol::Composed: return "Composed";
  }
  return "?";
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Passive: return "Passive";
    case Strategy::Scripted: return "Scripted";
    case Strategy::Explore: return "Explore";
  }
  return "?";
}

std::string_view entry_kind_name(EntryKind k) {
  switch (k) {
    case EntryKind::Sent: return "Sent";
    case EntryKind::Delivered: return "Delivered";
    case EntryKind::Event: return "Event";
    case EntryKind::Compromised: return "Compromised";
    case EntryKind::AttackerSynthesized: return "AttackerSynthesized";
  }
  return "?";
}

std::vector<std::pair<std::size_t, const Event*>> Trace::events() const {
  std::vector<std::pair<std::size_t, const Event*>> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].event) out.emplace_back(i, &*entries[i].event);
  return out;
}

// ---------------------------------------------------------------------------

Engine::Engine(Scenario sc) : sc_(std::move(sc)) {
  const auto& b = sc_.bounds;
  if (b.max_steps <= 0 || b.synthesis_depth < 0 || b.recipe_cap == 0 || b.max_actions < 0 ||
      b.max_states == 0)
    throw ScenarioError("bounds: every bound must be positive");
  if (sc_.sessions <= 0) throw ScenarioError("sessions: must be positive");
  std::set<std::string> names;
  for (const auto& p : sc_.principals) {
    if (p.name.empty()) throw ScenarioError("principals: empty name");
    if (!names.insert(p.name).second) throw ScenarioError("principals: duplicate name " + p.name);
  }
  for (const auto& c : sc_.compromise) {
    if (principal_index(c.target) < 0)
      throw ScenarioError("compromise: unknown target principal " + c.target);
    if (is_post_kind(c.kind) != (c.phase == RunPhase::Post))
      throw PhaseViolation(std::string(kind_name(c.kind)) + " declared in the wrong phase");
  }
  build_roles();
}

int Engine::principal_index(const std::string& name) const {
  for (std::size_t i = 0; i < sc_.principals.size(); ++i)
    if (sc_.principals[i].name == name) return static_cast<int>(i);
  return -1;
}

Term Engine::principal_name(std::uint64_t p, std::uint64_t slot, Sort sort) const {
  return fresh(kPrincipalBase + kPrincipalStride * p + slot, sort, sc_.principals[p].name);
}

Term Engine::pair_key(const std::string& a, const std::string& b) const {
  for (std::size_t q = 0; q < sc_.pairs.size(); ++q) {
    const auto& pr = sc_.pairs[q];
    if ((pr.initiator == a && pr.responder == b) || (pr.initiator == b && pr.responder == a)) {
      const auto& first = pr.initiator;
      const auto& second = pr.responder;
      return fresh(kPairKeyBase + kPairKeyStride * q, Sort::SessionKey, first + "~" + second);
    }
  }
  throw ScriptError("no established chat between " + a + " and " + b);
}

void Engine::build_roles() {
  std::map<std::string, int> counters;
  auto next_label = [&](const std::string& principal, const std::string& kind) {
    int n = ++counters[principal + "/" + kind];
    return principal + "/" + kind + "#" + std::to_string(n);
  };
  auto add_role = [&](const std::string& principal, const std::string& kind,
                      const std::string& peer, int pair, int stage) {
    RoleInstance ri;
    ri.label = next_label(principal, kind);
    ri.principal = principal;
    ri.kind = kind;
    ri.peer = peer;
    ri.pair = pair;
    ri.stage = stage;
    roles_.push_back(std::move(ri));
    return static_cast<int>(roles_.size()) - 1;
  };
  auto stage_of = [&](Protocol p) {
    if (sc_.protocol != Protocol::Composed) return 0;
    switch (p) {
      case Protocol::Auth: return 0;
      case Protocol::SecretChat: return 1;
      default: return 2;
    }
  };

  for (std::size_t q = 0; q < sc_.pairs.size(); ++q) {
    const auto& pr = sc_.pairs[q];
    const int pi = principal_index(pr.initiator), pj = principal_index(pr.responder);
    const std::string where = "pairs[" + std::to_string(q) + "]";
    if (pi < 0) throw ScenarioError(where + ".initiator: unknown principal " + pr.initiator);
    if (pj < 0) throw ScenarioError(where + ".responder: unknown principal " + pr.responder);
    if (pi == pj) throw ScenarioError(where + ": initiator and responder coincide");
    const Protocol proto = pr.protocol;
    if (proto == Protocol::Composed) throw ScenarioError(where + ".protocol: must be concrete");
    if (sc_.protocol != Protocol::Composed && proto != sc_.protocol)
      throw ScenarioError(where + ".protocol: differs from scenario protocol");
    const auto& I = sc_.principals[pi];
    const auto& R = sc_.principals[pj];
    const int n = pr.sessions > 0 ? pr.sessions : sc_.sessions;
    const int stage = stage_of(proto);
    const bool i_rogue = I.kind == PrincipalKind::Rogue;
    const bool r_rogue = R.kind == PrincipalKind::Rogue;
    if (proto == Protocol::Auth) {
      if (R.kind != PrincipalKind::Server) throw ScenarioError(where + ".responder: must be a server");
      if (I.kind == PrincipalKind::Server) throw ScenarioError(where + ".initiator: must be a client");
    } else if (I.kind == PrincipalKind::Server || R.kind == PrincipalKind::Server) {
      throw ScenarioError(where + ": chat participants must be clients");
    }
    const char* ik = proto == Protocol::Auth       ? "client"
                     : proto == Protocol::SecretChat ? "sc-init"
                                                     : "rk-init";
    const char* rk = proto == Protocol::Auth       ? "server"
                     : proto == Protocol::SecretChat ? "sc-resp"
                                                     : "rk-resp";
    const std::string ipeer = proto == Protocol::Auth ? "" : R.name;
    const std::string rpeer = proto == Protocol::Auth ? "" : I.name;
    for (int j = 0; j < n; ++j) {
      int a = i_rogue ? -1 : add_role(I.name, ik, ipeer, static_cast<int>(q), stage);
      int b = r_rogue ? -1 : add_role(R.name, rk, rpeer, static_cast<int>(q), stage);
      if (a >= 0 && b >= 0) {
        roles_[a].partner = b;
        roles_[b].partner = a;
      }
    }
  }

  for (std::size_t k = 0; k < roles_.size(); ++k) {
    auto& ri = roles_[k];
    NameSpace ns{kRoleBase + kRoleStride * k, ri.label};
    const auto& pr = sc_.pairs[ri.pair];
    const int pidx = principal_index(ri.principal);
    const auto& flags = sc_.principals[pidx].flags;
    if (ri.kind == "client") {
      const int s = principal_index(pr.responder);
      ri.state = make_auth_client(pub::principal(ri.principal),
                                  pk(principal_name(s, kServerSk, Sort::PrivKey)),
                                  AuthClientFlags{flags.skip_dh_check}, ns);
    } else if (ri.kind == "server") {
      ri.state = make_auth_server(pub::principal(ri.principal),
                                  principal_name(pidx, kServerSk, Sort::PrivKey),
                                  principal_name(pidx, kServerFixedNs, Sort::Nonce),
                                  AuthServerFlags{flags.reuse_ns, flags.serve_bad_dh}, ns);
    } else if (ri.kind == "sc-init" || ri.kind == "sc-resp") {
      ScFlags f{flags.skip_dh_check, flags.verify_key_hash, sc_.oob_includes_chat_id};
      ri.state = make_secret_chat(ri.kind == "sc-init" ? ScRole::Initiator : ScRole::Responder,
                                  pub::principal(ri.principal), pub::principal(ri.peer), f, ns);
    } else {
      Term key = sc_.protocol == Protocol::Composed ? Term{} : pair_key(pr.initiator, pr.responder);
      ri.state = make_rekey(ri.kind == "rk-init" ? RkRole::Initiator : RkRole::Responder,
                            pub::principal(ri.principal), pub::principal(ri.peer), key,
                            pub::dh_good(), ns);
    }
    label_index_[ri.label] = static_cast<int>(k);
    stages_ = std::max(stages_, ri.stage + 1);
  }

  for (const auto& t : public_signature()) initial_knowledge_.push_back(t);
  for (std::size_t p = 0; p < sc_.principals.size(); ++p) {
    const auto& d = sc_.principals[p];
    initial_knowledge_.push_back(pub::principal(d.name));
    if (d.kind == PrincipalKind::Server)
      initial_knowledge_.push_back(pk(principal_name(p, kServerSk, Sort::PrivKey)));
  }
  if (sc_.protocol == Protocol::Rekey || sc_.protocol == Protocol::SecretChat) {
    for (const auto& pr : sc_.pairs) {
      const bool rogue = sc_.principals[principal_index(pr.initiator)].kind == PrincipalKind::Rogue ||
                         sc_.principals[principal_index(pr.responder)].kind == PrincipalKind::Rogue;
      if (rogue && sc_.protocol == Protocol::Rekey)
        initial_knowledge_.push_back(pair_key(pr.initiator, pr.responder));
    }
  }
}

int Engine::role_index(const std::string& label) const {
  auto it = label_index_.find(label);
  return it == label_index_.end() ? -1 : it->second;
}

bool Engine::has_post_compromises() const {
  return std::any_of(sc_.compromise.begin(), sc_.compromise.end(),
                     [](const CompromiseDecl& c) { return c.phase == RunPhase::Post; });
}

void Engine::record(World& w, TraceEntry e) const {
  e.step = w.trace.entries.size();
  w.trace.entries.push_back(std::move(e));
}

void Engine::publish(World& w, const std::string& actor, const Compromise& c) const {
  TraceEntry e;
  e.kind = EntryKind::Compromised;
  e.actor = actor;
  e.term = c.published;
  e.event = c.event;
  record(w, std::move(e));
  w.knowledge = close(w.knowledge.with({c.published}), depth());
}

World Engine::initial() const {
  World w;
  w.roles = roles_;
  w.oob.mode = sc_.oob_mode;
  w.knowledge = close(Knowledge(initial_knowledge_), depth());
  w.trace.scenario = sc_.name;
  w.trace.seed = sc_.seed;
  w.trace.initial_knowledge = initial_knowledge_;

  for (const auto& c : sc_.compromise) {
    if (c.phase != RunPhase::During) continue;
    const int p = principal_index(c.target);
    const bool server = sc_.principals[p].kind == PrincipalKind::Server;
    switch (c.kind) {
      case CompromiseKind::LeakRSAKey:
        if (!server) throw ScenarioError("compromise: LeakRSAKey targets a server");
        publish(w, c.target, compromise_step(c.kind, principal_name(p, kServerSk, Sort::PrivKey),
                                             RunPhase::During));
        break;
      case CompromiseKind::ForgeServerIdentity: {
        if (!server) throw ScenarioError("compromise: ForgeServerIdentity targets a server");
        auto res = compromise_step(c.kind, pub::principal(c.target), RunPhase::During);
        for (auto& ri : w.roles) {
          if (ri.kind != "client" || sc_.pairs[ri.pair].responder != c.target) continue;
          std::get<AuthClientState>(ri.state).server_pk = res.published;
        }
        publish(w, c.target, res);
        break;
      }
      case CompromiseKind::LeakAuthKey:
        if (sc_.protocol == Protocol::SecretChat || sc_.protocol == Protocol::Rekey)
          publish(w, c.target, compromise_step(c.kind, principal_name(p, kAuthKey, Sort::SharedKey),
                                               RunPhase::During));
        break;
      default:
        break;  // fired when the secret comes into existence
    }
  }
  int first = 0;
  while (first < stages_ && std::none_of(w.roles.begin(), w.roles.end(), [&](const RoleInstance& r) {
           return r.stage == first;
         }))
    ++first;
  if (first < stages_) activate_stage(w, first);
  return w;
}

void Engine::activate_stage(World& w, int stage) const {
  w.stage = stage;
  for (auto& ri : w.roles) {
    if (ri.stage != stage) continue;
    if (auto* rk = std::get_if<RekeyState>(&ri.state); rk && !rk->current_key.valid()) {
      // Composed run: continue over the established secret chat.
      for (const auto& other : w.roles) {
        const auto* sc = std::get_if<SecretChatState>(&other.state);
        if (!sc || other.principal != ri.principal || other.peer != ri.peer) continue;
        if (sc->phase != ScPhase::Chatting) continue;
        rk->current_key = sc->session_key;
        rk->dh_cfg = sc->dh_cfg;
        break;
      }
      if (!rk->current_key.valid()) continue;
    }
    ri.active = true;
  }
  for (int r = 0; r < static_cast<int>(w.roles.size()); ++r) {
    auto& ri = w.roles[r];
    if (!ri.active || ri.stage != stage || !is_initiator_kind(ri.kind)) continue;
    auto res = step_role(ri.state, Start{});
    handle_step(w, r, res.status, std::move(res.outputs), std::move(res.events),
                std::move(res.claims));
  }
}

bool Engine::role_halted(const RoleInstance& ri) const {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AuthClientState>)
          return s.phase == AuthClientPhase::Done || s.phase == AuthClientPhase::Failed;
        if constexpr (std::is_same_v<T, AuthServerState>)
          return s.phase == AuthServerPhase::Done || s.phase == AuthServerPhase::Failed;
        if constexpr (std::is_same_v<T, SecretChatState>)
          return s.phase == ScPhase::Failed ||
                 (s.phase == ScPhase::Chatting && s.sent_msg.valid() && s.received_msg.valid());
        if constexpr (std::is_same_v<T, RekeyState>) return s.phase == RkPhase::Done;
      },
      ri.state);
}

void Engine::maybe_advance_stage(World& w) const {
  while (w.stage + 1 < stages_) {
    for (const auto& ri : w.roles)
      if (ri.stage == w.stage && !role_halted(ri)) return;
    activate_stage(w, w.stage + 1);
  }
}

void Engine::sync_server_hashes(World& w, int r) const {
  const auto& src = std::get<AuthServerState>(w.roles[r].state);
  for (auto& ri : w.roles) {
    if (ri.kind != "server" || ri.principal != w.roles[r].principal) continue;
    std::get<AuthServerState>(ri.state).known_key_hashes = src.known_key_hashes;
  }
}

void Engine::handle_step(World& w, int r, StepStatus status, std::vector<Term> outputs,
                         std::vector<Event> events, std::vector<QrClaim> claims) const {
  const std::string label = w.roles[r].label;
  const std::string principal = w.roles[r].principal;
  for (auto& e : events) {
    TraceEntry te;
    te.kind = EntryKind::Event;
    te.actor = label;
    te.event = e;
    record(w, std::move(te));
  }
  if (!outputs.empty()) {
    for (auto& t : outputs) {
      auto& ri = w.roles[r];
      TraceEntry te;
      te.kind = EntryKind::Sent;
      te.actor = label;
      te.term = t;
      te.index = ri.sent.size();
      if (!w.exploring) w.queue.emplace_back(r, ri.sent.size());
      ri.sent.push_back(t);
      record(w, std::move(te));
    }
    w.knowledge = close(w.knowledge.with(outputs), depth());
  }
  if (status == StepStatus::Ok && w.roles[r].kind == "server") sync_server_hashes(w, r);

  for (const auto& e : events) {
    for (const auto& c : sc_.compromise) {
      if (c.target != principal) continue;
      if (c.kind == CompromiseKind::CompromiseNonce && e.name == "ClientRequestsDHParameters") {
        const auto& cs = std::get<AuthClientState>(w.roles[r].state);
        publish(w, principal, compromise_step(c.kind, cs.n_k, RunPhase::During));
      }
      if (c.kind == CompromiseKind::LeakAuthKey && e.name == "ClientAcceptsAuthKey") {
        const auto& cs = std::get<AuthClientState>(w.roles[r].state);
        publish(w, principal, compromise_step(c.kind, cs.auth_key, RunPhase::During));
      }
    }
  }

  for (const auto& claim : claims) {
    OobStep o = oob_channel_step(w.oob, claim);
    w.oob = std::move(o.state);
    for (auto& e : o.events) {
      TraceEntry te;
      te.kind = EntryKind::Event;
      te.actor = "oob";
      te.event = std::move(e);
      record(w, std::move(te));
    }
    for (const auto& ok : o.confirmations) {
      for (int k = 0; k < static_cast<int>(w.roles.size()); ++k) {
        auto* sc = std::get_if<SecretChatState>(&w.roles[k].state);
        if (!sc || sc->phase != ScPhase::AwaitOOB || sc->principal != ok.x || sc->peer != ok.y ||
            sc->session_key != ok.k)
          continue;
        if (ok.chat_id && sc->chat_id != *ok.chat_id) continue;
        auto res = step_role(w.roles[k].state, ok);
        handle_step(w, k, res.status, std::move(res.outputs), std::move(res.events),
                    std::move(res.claims));
        break;
      }
    }
  }
  maybe_advance_stage(w);
}

StepStatus Engine::deliver(World& w, int r, const Term& msg, const std::optional<MsgRef>& source,
                           const nlohmann::json& recipe) const {
  if (w.phase == RunPhase::Post) throw ScriptError("honest roles have halted after the phase boundary");
  if (r < 0 || r >= static_cast<int>(w.roles.size())) throw ScriptError("unknown recipient");
  auto& ri = w.roles[r];
  TraceEntry te;
  te.kind = EntryKind::Delivered;
  te.actor = ri.label;
  te.term = msg;
  te.source = source;
  te.recipe = recipe;
  ++w.deliveries;
  if (!ri.active) {
    te.status = "Inactive";
    record(w, std::move(te));
    return StepStatus::Discard;
  }
  auto res = step_role(ri.state, msg);
  te.status = std::string(status_name(res.status));
  record(w, std::move(te));
  if (res.status != StepStatus::Discard) w.roles[r].pristine = false;
  handle_step(w, r, res.status, std::move(res.outputs), std::move(res.events),
              std::move(res.claims));
  return res.status;
}

Engine::Preview Engine::preview(const World& w, int r, const Term& msg) const {
  const auto& ri = w.roles.at(r);
  if (!ri.active || w.phase == RunPhase::Post) return {};
  RoleState st = ri.state;
  auto res = step_role(st, msg);
  return {res.status, std::move(res.events), !res.claims.empty()};
}

bool Engine::step_local() const {
  if (stages_ > 1) return false;
  return std::none_of(sc_.compromise.begin(), sc_.compromise.end(), [](const CompromiseDecl& c) {
    return c.phase == RunPhase::During &&
           (c.kind == CompromiseKind::CompromiseNonce || c.kind == CompromiseKind::LeakAuthKey);
  });
}

void Engine::publish_post(World& w) const {
  if (w.phase == RunPhase::Post) return;
  w.phase = RunPhase::Post;
  for (const auto& c : sc_.compromise) {
    if (c.phase != RunPhase::Post) continue;
    const int p = principal_index(c.target);
    std::vector<Term> secrets;
    auto add = [&](const Term& t) {
      if (t.valid() && std::find(secrets.begin(), secrets.end(), t) == secrets.end())
        secrets.push_back(t);
    };
    for (const auto& ri : w.roles) {
      if (ri.principal != c.target) continue;
      if (const auto* cs = std::get_if<AuthClientState>(&ri.state)) {
        if (c.kind == CompromiseKind::PostCompromiseNonce) add(cs->n_k);
        if (c.kind == CompromiseKind::PostCompromiseAuthKey) add(cs->auth_key);
      } else if (const auto* sc = std::get_if<SecretChatState>(&ri.state)) {
        if (c.kind == CompromiseKind::PostCompromiseSessionKey) add(sc->session_key);
      } else if (const auto* rk = std::get_if<RekeyState>(&ri.state)) {
        if (c.kind == CompromiseKind::PostCompromiseSessionKey) add(rk->current_key);
      }
    }
    if (c.kind == CompromiseKind::PostCompromiseRSAKey) {
      if (sc_.principals[p].kind != PrincipalKind::Server)
        throw ScenarioError("compromise: PostCompromiseRSAKey targets a server");
      add(principal_name(p, kServerSk, Sort::PrivKey));
    }
    if (c.kind == CompromiseKind::PostCompromiseAuthKey &&
        (sc_.protocol == Protocol::SecretChat || sc_.protocol == Protocol::Rekey))
      add(principal_name(p, kAuthKey, Sort::SharedKey));
    for (const auto& s : secrets) publish(w, c.target, compromise_step(c.kind, s, RunPhase::Post));
  }
}

const Term& Engine::sent_message(const World& w, const MsgRef& ref) const {
  const int r = role_index(ref.from);
  if (r < 0) throw ScriptError("unknown role '" + ref.from + "'");
  const auto& sent = w.roles[r].sent;
  if (ref.index >= sent.size())
    throw ScriptError(ref.from + " has not sent message " + std::to_string(ref.index));
  return sent[ref.index];
}

Term Engine::eval_recipe(const World& w, const nlohmann::json& j) const {
  if (!j.is_object() || (j.size() != 1 && !j.contains("ctor")))
    throw ScriptError("recipe must be an object with one key: " + j.dump());
  try {
    if (j.contains("msg")) {
      const auto& m = j.at("msg");
      return sent_message(w, MsgRef{m.at("from").get<std::string>(), m.at("index").get<std::size_t>()});
    }
    if (j.contains("proj")) {
      const auto& a = j.at("proj");
      Term t = eval_recipe(w, a.at(0));
      const auto i = a.at(1).get<std::size_t>();
      if (t.ctor() != Ctor::Tuple || i >= t.arity()) throw ScriptError("projection out of range");
      return t.arg(i);
    }
    if (j.contains("dec")) {
      auto d = decrypt_sym(eval_recipe(w, j.at("dec").at(0)), eval_recipe(w, j.at("dec").at(1)));
      if (!d.ok()) throw ScriptError("symmetric decryption failed: " + j.dump());
      return d.plain;
    }
    if (j.contains("adec")) {
      auto d = decrypt_asym(eval_recipe(w, j.at("adec").at(0)), eval_recipe(w, j.at("adec").at(1)));
      if (!d.ok()) throw ScriptError("asymmetric decryption failed: " + j.dump());
      return d.plain;
    }
    if (j.contains("const")) return public_const(j.at("const").get<std::string>());
    if (j.contains("principal")) return pub::principal(j.at("principal").get<std::string>());
    if (j.contains("public_key")) {
      const auto name = j.at("public_key").get<std::string>();
      const int p = principal_index(name);
      if (p < 0 || sc_.principals[p].kind != PrincipalKind::Server)
        throw ScriptError("public_key: " + name + " is not a server");
      return pk(principal_name(p, kServerSk, Sort::PrivKey));
    }
    if (j.contains("afresh")) {
      auto s = sort_from_name(j.at("afresh").get<std::string>());
      if (!s) throw ScriptError("unknown sort in " + j.dump());
      return attacker_fresh(*s);
    }
    if (j.contains("dh"))
      return dh_combine(eval_recipe(w, j.at("dh").at(0)), eval_recipe(w, j.at("dh").at(1)));
    if (j.contains("shared_key"))
      return pair_key(j.at("shared_key").at(0).get<std::string>(),
                      j.at("shared_key").at(1).get<std::string>());
    if (j.contains("term")) return term_from_json(j.at("term"));
    if (j.contains("ctor")) {
      const auto name = j.at("ctor").get<std::string>();
      std::vector<Term> args;
      for (const auto& a : j.value("args", nlohmann::json::array())) args.push_back(eval_recipe(w, a));
      return apply_ctor(name, std::move(args));
    }
  } catch (const SortError& e) {
    throw ScriptError(std::string("ill-sorted recipe: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ScriptError(std::string("malformed recipe: ") + e.what());
  }
  throw ScriptError("unknown recipe form: " + j.dump());
}

Shape Engine::expects(const World& w, int r) const {
  const auto& ri = w.roles[r];
  if (!ri.active) return Shape::ignored();
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AuthClientState>) return auth_client_expects(s);
        if constexpr (std::is_same_v<T, AuthServerState>) return auth_server_expects(s);
        if constexpr (std::is_same_v<T, SecretChatState>) return sc_expects(s);
        if constexpr (std::is_same_v<T, RekeyState>) return rk_expects(s);
      },
      ri.state);
}

void Engine::run_passive(World& w) const {
  for (;;) {
    for (int r = 0; r < static_cast<int>(w.roles.size()); ++r) {
      const auto& ri = w.roles[r];
      const auto* sc = std::get_if<SecretChatState>(&ri.state);
      if (ri.active && sc && sc->phase == ScPhase::Init)
        deliver(w, r, pub::dh_good(), std::nullopt, nlohmann::json{{"const", "dh_good"}});
    }
    if (w.queue.empty()) break;
    if (w.deliveries >= sc_.bounds.max_steps)
      throw BoundsExceeded("passive run exceeded max_steps=" + std::to_string(sc_.bounds.max_steps));
    auto [from, idx] = w.queue.front();
    w.queue.pop_front();
    const int to = w.roles[from].partner;
    if (to < 0) continue;
    deliver(w, to, w.roles[from].sent[idx], MsgRef{w.roles[from].label, idx}, nullptr);
  }
}

StepStatus Engine::deliver_term(World& w, int r, const Term& t) const {
  std::optional<MsgRef> src;
  for (const auto& ri : w.roles) {
    for (std::size_t i = 0; i < ri.sent.size() && !src; ++i)
      if (ri.sent[i] == t) src = MsgRef{ri.label, i};
    if (src) break;
  }
  if (src) return deliver(w, r, t, src, nullptr);
  nlohmann::json how = w.exploring ? nlohmann::json() : explain(w.knowledge, t, depth());
  TraceEntry te;
  te.kind = EntryKind::AttackerSynthesized;
  te.actor = "attacker";
  te.term = t;
  te.recipe = how;
  record(w, std::move(te));
  return deliver(w, r, t, std::nullopt, how);
}

void Engine::run_action(World& w, const Action& a) const {
  if (w.deliveries >= sc_.bounds.max_steps)
    throw BoundsExceeded("script exceeded max_steps=" + std::to_string(sc_.bounds.max_steps));
  auto synthesize = [&](const nlohmann::json& recipe) {
    Term t = eval_recipe(w, recipe);
    if (!derivable(w.knowledge, t, depth()))
      throw ScriptError("recipe is not derivable from attacker knowledge: " + recipe.dump());
    return t;
  };
  switch (a.kind) {
    case Action::Kind::Deliver: {
      const int r = role_index(a.to);
      if (r < 0) throw ScriptError("deliver: unknown role '" + a.to + "'");
      deliver_term(w, r, synthesize(a.recipe));
      break;
    }
    case Action::Kind::Forward: {
      const Term t = sent_message(w, a.ref);
      const int to = w.roles[role_index(a.ref.from)].partner;
      if (to < 0) throw ScriptError("forward: " + a.ref.from + " has no honest partner");
      deliver(w, to, t, a.ref, nullptr);
      break;
    }
    case Action::Kind::Replay: {
      const Term t = sent_message(w, a.ref);
      const int r = role_index(a.to);
      if (r < 0) throw ScriptError("replay: unknown role '" + a.to + "'");
      deliver(w, r, t, a.ref, nullptr);
      break;
    }
    case Action::Kind::Drop: {
      sent_message(w, a.ref);
      const int from = role_index(a.ref.from);
      auto it = std::find(w.queue.begin(), w.queue.end(), std::make_pair(from, a.ref.index));
      if (it != w.queue.end()) w.queue.erase(it);
      break;
    }
    case Action::Kind::Synthesize: {
      Term t = synthesize(a.recipe);
      TraceEntry te;
      te.kind = EntryKind::AttackerSynthesized;
      te.actor = "attacker";
      te.term = t;
      te.recipe = explain(w.knowledge, t, depth());
      record(w, std::move(te));
      break;
    }
    case Action::Kind::PhaseBoundary:
      publish_post(w);
      break;
  }
}

Trace run(const Scenario& sc) {
  Engine engine(sc);
  World w = engine.initial();
  switch (sc.strategy) {
    case Strategy::Passive:
      engine.run_passive(w);
      break;
    case Strategy::Scripted:
      for (const auto& a : sc.actions) engine.run_action(w, a);
      break;
    case Strategy::Explore:
      throw ScenarioError("attacker.strategy: Explore needs a query; use explore()");
  }
  engine.publish_post(w);
  w.trace.final_knowledge = w.knowledge;
  return std::move(w.trace);
}

std::string check_attacker_soundness(const Trace& t, int depth) {
  Knowledge k = close(Knowledge(t.initial_knowledge), depth);
  for (const auto& e : t.entries) {
    switch (e.kind) {
      case EntryKind::Sent:
      case EntryKind::Compromised:
        if (e.term.valid()) k = close(k.with({e.term}), depth);
        break;
      case EntryKind::Delivered:
      case EntryKind::AttackerSynthesized:
        if (!derivable(k, e.term, depth))
          return "entry " + std::to_string(e.step) + " delivers an underivable term " +
                 e.term.to_string();
        break;
      case EntryKind::Event:
        break;
    }
  }
  return {};
}

}  // namespace mtpsim
