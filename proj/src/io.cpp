#include "io.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mtpsim {

namespace {

using nlohmann::json;

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ScenarioError(where + ": expected an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!ok.count(k)) throw ScenarioError(where + "." + k + ": unknown field");
}

template <typename T>
T field(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ScenarioError(where + "." + key + ": wrong type");
  }
}

std::string required_string(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ScenarioError(where + "." + key + ": required string");
  return j.at(key).get<std::string>();
}

Protocol protocol_from(const std::string& s, const std::string& where) {
  for (auto p : {Protocol::Auth, Protocol::SecretChat, Protocol::Rekey, Protocol::Composed})
    if (protocol_name(p) == s) return p;
  throw ScenarioError(where + ": unknown protocol " + s);
}

const char* kind_text(PrincipalKind k) {
  switch (k) {
    case PrincipalKind::Client: return "client";
    case PrincipalKind::Server: return "server";
    case PrincipalKind::Rogue: return "rogue";
  }
  return "?";
}

MsgRef msg_ref_from(const json& j, const std::string& where) {
  allow_keys(j, where, {"from", "index"});
  return MsgRef{required_string(j, where, "from"), field<std::size_t>(j, where, "index", 0)};
}

json msg_ref_to(const MsgRef& r) { return {{"from", r.from}, {"index", r.index}}; }

json entry_to_json(const TraceEntry& e) {
  json j{{"step", e.step}, {"kind", entry_kind_name(e.kind)}, {"actor", e.actor}};
  if (e.term.valid()) j["term"] = e.term.to_json();
  if (e.event) j["event"] = e.event->to_json();
  if (e.source) j["source"] = msg_ref_to(*e.source);
  if (!e.recipe.is_null()) j["recipe"] = e.recipe;
  if (e.kind == EntryKind::Sent) j["index"] = e.index;
  if (!e.status.empty()) j["status"] = e.status;
  return j;
}

EntryKind entry_kind_from(const std::string& s) {
  for (auto k : {EntryKind::Sent, EntryKind::Delivered, EntryKind::Event, EntryKind::Compromised,
                 EntryKind::AttackerSynthesized})
    if (entry_kind_name(k) == s) return k;
  throw ScenarioError("trace: unknown entry kind " + s);
}

}  // namespace

nlohmann::json action_to_json(const Action& a) {
  switch (a.kind) {
    case Action::Kind::Deliver: return {{"op", "deliver"}, {"to", a.to}, {"recipe", a.recipe}};
    case Action::Kind::Forward: return {{"op", "forward"}, {"msg", msg_ref_to(a.ref)}};
    case Action::Kind::Replay: return {{"op", "replay"}, {"msg", msg_ref_to(a.ref)}, {"to", a.to}};
    case Action::Kind::Drop: return {{"op", "drop"}, {"msg", msg_ref_to(a.ref)}};
    case Action::Kind::Synthesize: return {{"op", "synthesize"}, {"recipe", a.recipe}};
    case Action::Kind::PhaseBoundary: return {{"op", "phase_boundary"}};
  }
  return nullptr;
}

Action action_from_json(const nlohmann::json& j) {
  const std::string where = "attacker.actions[]";
  if (!j.is_object()) throw ScenarioError(where + ": expected an object");
  const auto op = required_string(j, where, "op");
  Action a;
  if (op == "deliver") {
    allow_keys(j, where, {"op", "to", "recipe"});
    a.kind = Action::Kind::Deliver;
    a.to = required_string(j, where, "to");
    if (!j.contains("recipe")) throw ScenarioError(where + ".recipe: required");
    a.recipe = j.at("recipe");
  } else if (op == "forward" || op == "replay" || op == "drop") {
    if (op == "replay")
      allow_keys(j, where, {"op", "msg", "to"});
    else
      allow_keys(j, where, {"op", "msg"});
    a.kind = op == "forward" ? Action::Kind::Forward
             : op == "replay" ? Action::Kind::Replay
                              : Action::Kind::Drop;
    if (!j.contains("msg")) throw ScenarioError(where + ".msg: required");
    a.ref = msg_ref_from(j.at("msg"), where + ".msg");
    if (op == "replay") a.to = required_string(j, where, "to");
  } else if (op == "synthesize") {
    allow_keys(j, where, {"op", "recipe"});
    a.kind = Action::Kind::Synthesize;
    if (!j.contains("recipe")) throw ScenarioError(where + ".recipe: required");
    a.recipe = j.at("recipe");
  } else if (op == "phase_boundary") {
    allow_keys(j, where, {"op"});
    a.kind = Action::Kind::PhaseBoundary;
  } else {
    throw ScenarioError(where + ".op: unknown action " + op);
  }
  return a;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  allow_keys(j, "scenario",
             {"schema", "name", "protocol", "principals", "pairs", "sessions", "oob_mode",
              "oob_includes_chat_id", "compromise", "attacker", "bounds", "seed"});
  const auto schema = field<std::string>(j, "scenario", "schema", kScenarioSchema);
  if (schema != kScenarioSchema) throw ScenarioError("scenario.schema: unsupported " + schema);
  Scenario sc;
  sc.name = field<std::string>(j, "scenario", "name", "");
  sc.protocol = protocol_from(field<std::string>(j, "scenario", "protocol", "Auth"), "scenario.protocol");
  sc.sessions = field<int>(j, "scenario", "sessions", kDefaultSessions);
  sc.seed = field<std::uint64_t>(j, "scenario", "seed", 0);
  sc.oob_includes_chat_id = field<bool>(j, "scenario", "oob_includes_chat_id", false);
  const auto oob = field<std::string>(j, "scenario", "oob_mode", "Perform");
  if (oob == "Perform")
    sc.oob_mode = OobMode::Perform;
  else if (oob == "Skip")
    sc.oob_mode = OobMode::Skip;
  else
    throw ScenarioError("scenario.oob_mode: expected Perform or Skip");

  for (const auto& pj : j.value("principals", json::array())) {
    const std::string where = "principals[" + std::to_string(sc.principals.size()) + "]";
    allow_keys(pj, where, {"name", "kind", "flags"});
    PrincipalDecl p;
    p.name = required_string(pj, where, "name");
    const auto kind = field<std::string>(pj, where, "kind", "client");
    if (kind == "client")
      p.kind = PrincipalKind::Client;
    else if (kind == "server")
      p.kind = PrincipalKind::Server;
    else if (kind == "rogue")
      p.kind = PrincipalKind::Rogue;
    else
      throw ScenarioError(where + ".kind: expected client, server or rogue");
    if (pj.contains("flags")) {
      const auto& f = pj.at("flags");
      const auto fw = where + ".flags";
      allow_keys(f, fw, {"skip_dh_check", "reuse_ns", "serve_bad_dh", "verify_key_hash"});
      p.flags.skip_dh_check = field<bool>(f, fw, "skip_dh_check", false);
      p.flags.reuse_ns = field<bool>(f, fw, "reuse_ns", false);
      p.flags.serve_bad_dh = field<bool>(f, fw, "serve_bad_dh", false);
      p.flags.verify_key_hash = field<bool>(f, fw, "verify_key_hash", false);
    }
    sc.principals.push_back(std::move(p));
  }
  for (const auto& qj : j.value("pairs", json::array())) {
    const std::string where = "pairs[" + std::to_string(sc.pairs.size()) + "]";
    allow_keys(qj, where, {"initiator", "responder", "protocol", "sessions"});
    PairDecl q;
    q.initiator = required_string(qj, where, "initiator");
    q.responder = required_string(qj, where, "responder");
    q.protocol = qj.contains("protocol")
                     ? protocol_from(field<std::string>(qj, where, "protocol", ""), where + ".protocol")
                     : sc.protocol;
    q.sessions = field<int>(qj, where, "sessions", 0);
    if (q.sessions < 0) throw ScenarioError(where + ".sessions: must be positive");
    sc.pairs.push_back(std::move(q));
  }
  for (const auto& cj : j.value("compromise", json::array())) {
    const std::string where = "compromise[" + std::to_string(sc.compromise.size()) + "]";
    allow_keys(cj, where, {"kind", "target", "phase"});
    CompromiseDecl c;
    const auto kind = required_string(cj, where, "kind");
    auto k = kind_from_name(kind);
    if (!k) throw ScenarioError(where + ".kind: unknown compromise " + kind);
    c.kind = *k;
    c.target = required_string(cj, where, "target");
    const auto phase = field<std::string>(cj, where, "phase", is_post_kind(c.kind) ? "Post" : "During");
    if (phase == "During")
      c.phase = RunPhase::During;
    else if (phase == "Post")
      c.phase = RunPhase::Post;
    else
      throw ScenarioError(where + ".phase: expected During or Post");
    sc.compromise.push_back(c);
  }
  if (j.contains("attacker")) {
    const auto& aj = j.at("attacker");
    allow_keys(aj, "attacker", {"strategy", "actions"});
    const auto s = field<std::string>(aj, "attacker", "strategy", "Passive");
    if (s == "Passive")
      sc.strategy = Strategy::Passive;
    else if (s == "Scripted")
      sc.strategy = Strategy::Scripted;
    else if (s == "Explore")
      sc.strategy = Strategy::Explore;
    else
      throw ScenarioError("attacker.strategy: expected Passive, Scripted or Explore");
    for (const auto& a : aj.value("actions", json::array())) sc.actions.push_back(action_from_json(a));
  }
  if (j.contains("bounds")) {
    const auto& bj = j.at("bounds");
    allow_keys(bj, "bounds", {"max_steps", "synthesis_depth", "recipe_cap", "max_actions", "max_states"});
    auto& b = sc.bounds;
    b.max_steps = field<int>(bj, "bounds", "max_steps", b.max_steps);
    b.synthesis_depth = field<int>(bj, "bounds", "synthesis_depth", b.synthesis_depth);
    b.recipe_cap = field<std::size_t>(bj, "bounds", "recipe_cap", b.recipe_cap);
    b.max_actions = field<int>(bj, "bounds", "max_actions", b.max_actions);
    b.max_states = field<std::size_t>(bj, "bounds", "max_states", b.max_states);
    if (b.max_steps <= 0 || b.synthesis_depth <= 0 || b.recipe_cap == 0 || b.max_actions <= 0 ||
        b.max_states == 0)
      throw ScenarioError("bounds: every bound must be positive");
  }
  return sc;
}

nlohmann::json scenario_to_json(const Scenario& sc) {
  json principals = json::array();
  for (const auto& p : sc.principals) {
    principals.push_back({{"name", p.name},
                          {"kind", kind_text(p.kind)},
                          {"flags",
                           {{"skip_dh_check", p.flags.skip_dh_check},
                            {"reuse_ns", p.flags.reuse_ns},
                            {"serve_bad_dh", p.flags.serve_bad_dh},
                            {"verify_key_hash", p.flags.verify_key_hash}}}});
  }
  json pairs = json::array();
  for (const auto& q : sc.pairs) {
    json pj{{"initiator", q.initiator}, {"responder", q.responder}, {"protocol", protocol_name(q.protocol)}};
    if (q.sessions > 0) pj["sessions"] = q.sessions;
    pairs.push_back(std::move(pj));
  }
  json comp = json::array();
  for (const auto& c : sc.compromise)
    comp.push_back({{"kind", kind_name(c.kind)},
                    {"target", c.target},
                    {"phase", c.phase == RunPhase::Post ? "Post" : "During"}});
  json actions = json::array();
  for (const auto& a : sc.actions) actions.push_back(action_to_json(a));
  json attacker{{"strategy", strategy_name(sc.strategy)}};
  if (!sc.actions.empty()) attacker["actions"] = std::move(actions);
  return {{"schema", kScenarioSchema},
          {"name", sc.name},
          {"protocol", protocol_name(sc.protocol)},
          {"principals", std::move(principals)},
          {"pairs", std::move(pairs)},
          {"sessions", sc.sessions},
          {"oob_mode", sc.oob_mode == OobMode::Perform ? "Perform" : "Skip"},
          {"oob_includes_chat_id", sc.oob_includes_chat_id},
          {"compromise", std::move(comp)},
          {"attacker", std::move(attacker)},
          {"bounds",
           {{"max_steps", sc.bounds.max_steps},
            {"synthesis_depth", sc.bounds.synthesis_depth},
            {"recipe_cap", sc.bounds.recipe_cap},
            {"max_actions", sc.bounds.max_actions},
            {"max_states", sc.bounds.max_states}}},
          {"seed", sc.seed}};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write " + path);
  out << text;
  if (!out) throw ScenarioError("write failed for " + path);
}

Scenario load_scenario(const std::string& path) {
  const auto text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

std::string trace_to_jsonl(const Trace& t) {
  std::string out;
  json init = json::array();
  for (const auto& k : t.initial_knowledge) init.push_back(k.to_json());
  out += json{{"schema", kTraceSchema},
              {"scenario", t.scenario},
              {"seed", t.seed},
              {"initial_knowledge", std::move(init)}}
             .dump();
  out += '\n';
  for (const auto& e : t.entries) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  json fin = json::array();
  for (const auto& f : t.final_knowledge.facts()) fin.push_back(f.to_json());
  out += json{{"final_knowledge", std::move(fin)}}.dump();
  out += '\n';
  return out;
}

Trace trace_from_jsonl(const std::string& text) {
  Trace t;
  std::istringstream in(text);
  std::string line;
  bool header = false, final_seen = false;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!header) {
        if (j.value("schema", "") != kTraceSchema)
          throw ScenarioError("trace: missing or unsupported schema header");
        t.scenario = j.value("scenario", "");
        t.seed = j.value("seed", std::uint64_t{0});
        for (const auto& k : j.value("initial_knowledge", json::array()))
          t.initial_knowledge.push_back(term_from_json(k));
        header = true;
        continue;
      }
      if (final_seen) throw ScenarioError("trace: entries after final_knowledge");
      if (j.contains("final_knowledge")) {
        std::vector<Term> facts;
        for (const auto& f : j.at("final_knowledge")) facts.push_back(term_from_json(f));
        t.final_knowledge = close(Knowledge(facts));
        final_seen = true;
        continue;
      }
      TraceEntry e;
      e.step = j.at("step").get<std::size_t>();
      if (e.step != t.entries.size()) throw ScenarioError("trace: step indices must be consecutive");
      e.kind = entry_kind_from(j.at("kind").get<std::string>());
      e.actor = j.at("actor").get<std::string>();
      if (j.contains("term")) e.term = term_from_json(j.at("term"));
      if (j.contains("event")) e.event = event_from_json(j.at("event"));
      if (j.contains("source")) e.source = msg_ref_from(j.at("source"), "trace.source");
      if (j.contains("recipe")) e.recipe = j.at("recipe");
      e.index = j.value("index", std::size_t{0});
      e.status = j.value("status", "");
      t.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ScenarioError("trace line " + std::to_string(lineno) + ": " + e.what());
  } catch (const SortError& e) {
    throw ScenarioError("trace line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!header) throw ScenarioError("trace: empty file");
  if (!final_seen) throw ScenarioError("trace: missing final_knowledge line");
  return t;
}

Trace load_trace(const std::string& path) { return trace_from_jsonl(read_text(path)); }

Query load_query(const std::string& name_or_path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(name_or_path, ec)) return find_query(name_or_path);
  try {
    return query_from_json(json::parse(read_text(name_or_path)));
  } catch (const json::parse_error& e) {
    throw QueryError(name_or_path + ": " + e.what());
  }
}

std::string trace_summary(const Trace& t) {
  std::ostringstream out;
  std::size_t sent = 0, delivered = 0, synthesized = 0, compromised = 0;
  for (const auto& e : t.entries) {
    switch (e.kind) {
      case EntryKind::Sent: ++sent; break;
      case EntryKind::Delivered: ++delivered; break;
      case EntryKind::AttackerSynthesized: ++synthesized; break;
      case EntryKind::Compromised: ++compromised; break;
      case EntryKind::Event: break;
    }
  }
  out << "trace " << (t.scenario.empty() ? "<unnamed>" : t.scenario) << ": " << t.entries.size()
      << " entries (" << sent << " sent, " << delivered << " delivered, " << synthesized
      << " synthesized, " << compromised << " compromised)\n";
  for (const auto& e : t.entries)
    if (e.event) out << "  [" << e.step << "] " << e.actor << ": " << e.event->to_string() << "\n";
  return out.str();
}

}  // namespace mtpsim
