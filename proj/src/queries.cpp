#include "queries.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace mtpsim {

namespace {

using nlohmann::json;

// The built-in catalog, kept as data so it goes through the same loader as
// user query files.
const char* const kCatalog = R"JSON([
{
  "name": "auth.client_auth",
  "description": "a server that accepts a client in session (nc, ns) was contacted by that client",
  "kind": "correspondence",
  "premise": [{"event": "ServerAcceptsClient", "args": ["?nc", "?ns"]}],
  "disjuncts": [
    {"label": "main", "atoms": [{"event": "ClientRequestsDHParameters", "args": ["?nc", "?ns"]}]}
  ]
},
{
  "name": "auth.server_auth",
  "description": "DH parameters accepted by a client were sent by the server in that session",
  "kind": "correspondence",
  "premise": [{"event": "ClientReceivesDHParameters", "args": ["?nc", "?ns", "?nk", "?g", "?ga"], "inj": true}],
  "disjuncts": [
    {"label": "main", "atoms": [{"event": "ServerSendsDHParameters", "args": ["?nc", "?ns", "?nk", "?g", "?ga"], "inj": true}]},
    {"label": "rsa", "atoms": [{"event": "CompromisedRSAKey", "args": ["_"], "anywhere": true}]},
    {"label": "nonce", "atoms": [{"event": "CompromisedNonce", "args": ["?nk"], "anywhere": true}]},
    {"label": "forged", "atoms": [{"event": "ForgedServerIdentity", "args": ["_"], "anywhere": true}]}
  ]
},
{
  "name": "auth.secrecy",
  "description": "cloud messages under the authorization key stay secret",
  "kind": "secrecy",
  "target": {"sort": "Message", "origin": "client"},
  "disjuncts": [
    {"label": "rsa", "atoms": [{"event": "CompromisedRSAKey", "args": ["_"]}]},
    {"label": "forged", "atoms": [{"event": "ForgedServerIdentity", "args": ["_"]}]},
    {"label": "nonce", "atoms": [{"event": "CompromisedNonce", "args": ["_"]}]},
    {"label": "dhcheck", "atoms": [{"event": "ClientChecksDHParameters", "args": ["#bot"]}]},
    {"label": "postauth", "atoms": [{"event": "PostCompromisedAuthKey", "args": ["_"]}]}
  ]
},
{
  "name": "auth.key_agreement",
  "description": "client and server in the same session compute the same key",
  "kind": "agreement",
  "premise": [
    {"event": "ServerAcceptsAuthKey", "args": ["?nc", "?ns", "?k"]},
    {"event": "ClientAcceptsAuthKey", "args": ["?nc", "?ns", "?k2"]}
  ],
  "disjuncts": [
    {"label": "main", "equalities": [["?k", "?k2"]]},
    {"label": "dhcheck", "atoms": [{"event": "ClientChecksDHParameters", "args": ["#bot"]}]},
    {"label": "forged", "atoms": [{"event": "ForgedServerIdentity", "args": ["_"]}]},
    {"label": "nonce", "atoms": [{"event": "CompromisedNonce", "args": ["_"]}]},
    {"label": "rsa", "atoms": [{"event": "CompromisedRSAKey", "args": ["_"]}]}
  ]
},
{
  "name": "auth.session_match",
  "description": "client and server holding the same key ran the same session",
  "kind": "agreement",
  "premise": [
    {"event": "ServerAcceptsAuthKey", "args": ["?nc", "?ns", "?k"]},
    {"event": "ClientAcceptsAuthKey", "args": ["?nc2", "?ns2", "?k"]}
  ],
  "disjuncts": [
    {"label": "main", "equalities": [["?nc", "?nc2"], ["?ns", "?ns2"]]},
    {"label": "dhcheck", "atoms": [{"event": "ClientChecksDHParameters", "args": ["#bot"]}]}
  ]
},
{
  "name": "sc.secrecy",
  "description": "secret-chat messages stay secret",
  "kind": "secrecy",
  "target": {"sort": "Message", "origin": "sc"},
  "disjuncts": [
    {"label": "oob", "atoms": [{"event": "OutOfBandKeyComparisonSkipped", "args": ["_", "_"]}]},
    {"label": "dhcheck", "atoms": [{"event": "ClientChecksDHConfig", "args": ["_", "#bot"]}]}
  ]
},
{
  "name": "sc.integrity",
  "description": "a received secret-chat message was sent once with the same key, possibly in the swapped session",
  "kind": "correspondence",
  "premise": [{"event": "ReceivesSecretChatMsg", "args": ["?X", "?i", "?I", "?R", "?k", "?m"], "inj": true}],
  "disjuncts": [
    {"label": "main", "atoms": [{"event": "SendsSecretChatMsg", "args": ["?Y", "?i2", "?I", "?R", "?k", "?m"], "inj": true}]},
    {"label": "swapped", "atoms": [{"event": "SendsSecretChatMsg", "args": ["?Y", "?i2", "?R", "?I", "?k", "?m"], "inj": true}]},
    {"label": "oob", "atoms": [
      {"event": "OutOfBandKeyComparisonSkipped", "args": ["?X", "?k"], "anywhere": true},
      {"event": "OutOfBandKeyComparisonSkipped", "args": ["?Y", "?k"], "anywhere": true}]},
    {"label": "dhcheck", "atoms": [
      {"event": "ClientChecksDHConfig", "args": ["?X", "#bot"], "anywhere": true},
      {"event": "ClientChecksDHConfig", "args": ["?Y", "#bot"], "anywhere": true}]}
  ]
},
{
  "name": "sc.integrity_same_chat",
  "description": "sc.integrity additionally requiring the same chat id",
  "kind": "correspondence",
  "premise": [{"event": "ReceivesSecretChatMsg", "args": ["?X", "?i", "?I", "?R", "?k", "?m"], "inj": true}],
  "disjuncts": [
    {"label": "main", "atoms": [{"event": "SendsSecretChatMsg", "args": ["?Y", "?i", "?I", "?R", "?k", "?m"], "inj": true}]},
    {"label": "swapped", "atoms": [{"event": "SendsSecretChatMsg", "args": ["?Y", "?i", "?R", "?I", "?k", "?m"], "inj": true}]},
    {"label": "oob", "atoms": [
      {"event": "OutOfBandKeyComparisonSkipped", "args": ["?X", "?k"], "anywhere": true},
      {"event": "OutOfBandKeyComparisonSkipped", "args": ["?Y", "?k"], "anywhere": true}]},
    {"label": "dhcheck", "atoms": [
      {"event": "ClientChecksDHConfig", "args": ["?X", "#bot"], "anywhere": true},
      {"event": "ClientChecksDHConfig", "args": ["?Y", "#bot"], "anywhere": true}]}
  ]
},
{
  "name": "rk.secrecy",
  "description": "messages under a rekeyed session key stay secret",
  "kind": "secrecy",
  "target": {"sort": "Message", "origin": "rk"},
  "disjuncts": []
},
{
  "name": "rk.uks",
  "description": "initiator and responder sharing a rekeyed key have a principal in common",
  "kind": "agreement",
  "premise": [
    {"event": "InitiatorNegotiatesNewKey", "args": ["?i", "?I", "?R", "?k"]},
    {"event": "ResponderNegotiatesNewKey", "args": ["?i", "?I2", "?R2", "?k"]}
  ],
  "disjuncts": [
    {"label": "I=I'", "equalities": [["?I", "?I2"]]},
    {"label": "I=R'", "equalities": [["?I", "?R2"]]},
    {"label": "R=I'", "equalities": [["?R", "?I2"]]},
    {"label": "R=R'", "equalities": [["?R", "?R2"]]}
  ]
}
])JSON";

std::string_view kind_text(QueryKind k) {
  switch (k) {
    case QueryKind::Secrecy: return "secrecy";
    case QueryKind::Correspondence: return "correspondence";
    case QueryKind::Agreement: return "agreement";
  }
  return "?";
}

Atom atom_from_json(const json& j) {
  Atom a;
  a.event = j.at("event").get<std::string>();
  for (const auto& p : j.value("args", json::array())) a.args.push_back(Pattern::parse(p));
  a.inj = j.value("inj", false);
  a.anywhere = j.value("anywhere", false);
  return a;
}

json atom_to_json(const Atom& a) {
  json args = json::array();
  for (const auto& p : a.args) args.push_back(p.to_json());
  json j{{"event", a.event}, {"args", std::move(args)}};
  if (a.inj) j["inj"] = true;
  if (a.anywhere) j["anywhere"] = true;
  return j;
}

void collect_vars(const Pattern& p, std::set<std::string>& out) {
  if (p.kind == Pattern::Kind::Var) out.insert(p.name);
}

void validate(const Query& q) {
  const auto where = "query " + q.name + ": ";
  if (q.name.empty()) throw QueryError("query: missing name");
  switch (q.kind) {
    case QueryKind::Secrecy:
      if (!q.premise.empty()) throw QueryError(where + "secrecy queries have no premise");
      break;
    case QueryKind::Correspondence:
      if (q.premise.size() != 1) throw QueryError(where + "correspondence needs one premise atom");
      break;
    case QueryKind::Agreement:
      if (q.premise.size() != 2) throw QueryError(where + "agreement needs two premise atoms");
      break;
  }
  std::set<std::string> premise_vars;
  for (const auto& a : q.premise)
    for (const auto& p : a.args) collect_vars(p, premise_vars);
  std::set<std::string> labels;
  for (const auto& d : q.disjuncts) {
    if (!labels.insert(d.label).second) throw QueryError(where + "duplicate disjunct label " + d.label);
    if (d.atoms.empty() && d.equalities.empty())
      throw QueryError(where + "disjunct " + d.label + " is empty");
    std::set<std::string> bound = premise_vars;
    for (const auto& a : d.atoms)
      for (const auto& p : a.args) collect_vars(p, bound);
    for (const auto& [l, r] : d.equalities) {
      for (const Pattern* p : {&l, &r}) {
        if (p->kind == Pattern::Kind::Wild)
          throw QueryError(where + "wildcard in an equality of disjunct " + d.label);
        if (p->kind == Pattern::Kind::Var && !bound.count(p->name))
          throw QueryError(where + "variable ?" + p->name + " is never bound");
      }
    }
    const auto inj = std::count_if(d.atoms.begin(), d.atoms.end(), [](const Atom& a) { return a.inj; });
    if (inj > 1) throw QueryError(where + "disjunct " + d.label + " has more than one injective atom");
    if (inj && q.kind != QueryKind::Correspondence)
      throw QueryError(where + "injective atoms need a correspondence query");
  }
}

std::optional<Term> resolve(const Pattern& p, const Binding& b) {
  switch (p.kind) {
    case Pattern::Kind::Var: {
      auto it = b.find(p.name);
      if (it == b.end()) return std::nullopt;
      return it->second;
    }
    case Pattern::Kind::Wild:
      return std::nullopt;
    default:
      return p.term;
  }
}

bool match_atom(const Atom& a, const Event& e, Binding& b) {
  if (a.event != e.name || a.args.size() != e.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    const auto& p = a.args[i];
    switch (p.kind) {
      case Pattern::Kind::Wild:
        break;
      case Pattern::Kind::Var: {
        auto [it, fresh_var] = b.emplace(p.name, e.args[i]);
        if (!fresh_var && it->second != e.args[i]) return false;
        break;
      }
      default:
        if (p.term != e.args[i]) return false;
    }
  }
  return true;
}

bool equalities_hold(const Disjunct& d, const Binding& b) {
  for (const auto& [l, r] : d.equalities) {
    auto x = resolve(l, b), y = resolve(r, b);
    if (!x || !y || *x != *y) return false;
  }
  return true;
}

using EventList = std::vector<std::pair<std::size_t, const Event*>>;

// Depth-first search over assignments of the disjunct's atoms to events.
// `limit` bounds the positions of non-anywhere atoms (exclusive). The visitor
// receives the positions chosen for each atom and returns true to stop.
void satisfy(const Disjunct& d, const EventList& events, std::size_t limit, const Binding& b,
             std::vector<std::size_t>& chosen,
             const std::function<bool(const Binding&, const std::vector<std::size_t>&)>& visit,
             bool& stop) {
  if (stop) return;
  const std::size_t k = chosen.size();
  if (k == d.atoms.size()) {
    if (equalities_hold(d, b)) stop = visit(b, chosen);
    return;
  }
  const Atom& a = d.atoms[k];
  for (const auto& [pos, ev] : events) {
    if (!a.anywhere && pos >= limit) break;
    Binding nb = b;
    if (!match_atom(a, *ev, nb)) continue;
    chosen.push_back(pos);
    satisfy(d, events, limit, nb, chosen, visit, stop);
    chosen.pop_back();
    if (stop) return;
  }
}

// First satisfying assignment of `d`, if any.
std::optional<std::vector<std::size_t>> first_witness(const Disjunct& d, const EventList& events,
                                                      std::size_t limit, const Binding& b) {
  std::optional<std::vector<std::size_t>> out;
  std::vector<std::size_t> chosen;
  bool stop = false;
  satisfy(d, events, limit, b, chosen,
          [&](const Binding&, const std::vector<std::size_t>& c) {
            out = c;
            return true;
          },
          stop);
  return out;
}

std::string describe_binding(const Binding& b) {
  std::string out;
  for (const auto& [k, v] : b) {
    if (!out.empty()) out += ", ";
    out += "?" + k + " = " + v.pretty();
  }
  return out;
}

// Origin label "A/client#1" -> role kind "client".
std::string origin_kind(const std::string& origin) {
  const auto slash = origin.find('/');
  if (slash == std::string::npos) return {};
  const auto hash_pos = origin.find('#', slash);
  return origin.substr(slash + 1, hash_pos == std::string::npos ? std::string::npos : hash_pos - slash - 1);
}

bool origin_matches(const std::string& cls, const std::string& origin) {
  if (origin == "attacker") return false;
  const auto kind = origin_kind(origin);
  if (cls == "honest") return !kind.empty();
  return kind == cls || kind.rfind(cls + "-", 0) == 0;
}

void collect_fresh(const Term& t, Sort sort, const std::string& cls, std::set<Term>& out) {
  if (!t.valid()) return;
  if (t.ctor() == Ctor::Fresh) {
    if (t.sort() == sort && origin_matches(cls, t.origin())) out.insert(t);
    return;
  }
  for (const auto& a : t.args()) collect_fresh(a, sort, cls, out);
}

Verdict secrecy_impl(const Trace& t, const Query& q, const std::vector<Term>& instances) {
  Verdict v;
  v.query = q.name;
  const auto events = t.events();
  std::optional<DisjunctMatch> escape;
  for (const auto& d : q.disjuncts) {
    if (auto w = first_witness(d, events, t.entries.size(), {})) {
      escape = DisjunctMatch{{}, d.label, *w};
      break;
    }
  }
  for (const auto& m : instances) {
    if (!t.final_knowledge.contains(m) && !derivable(t.final_knowledge, m, 0)) continue;
    if (escape) {
      v.matches.push_back(*escape);
      continue;
    }
    Violation viol;
    // Positions where the secret first became attacker knowledge.
    for (const auto& e : t.entries) {
      if (e.kind != EntryKind::Sent && e.kind != EntryKind::Compromised) continue;
      std::set<Term> found;
      collect_fresh(e.term, m.sort(), "honest", found);
      if (found.count(m)) viol.positions.push_back(e.step);
    }
    viol.binding["secret"] = m;
    viol.detail = "attacker derives " + m.pretty();
    v.violations.push_back(std::move(viol));
  }
  v.holds = v.violations.empty();
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

Pattern Pattern::parse(const json& j) {
  Pattern p;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "_") return p;
    if (s.size() > 1 && s[0] == '?') {
      p.kind = Kind::Var;
      p.name = s.substr(1);
      return p;
    }
    if (s.size() > 1 && s[0] == '#') {
      auto t = pub::by_name(s.substr(1));
      if (!t) throw QueryError("unknown constant " + s);
      p.kind = Kind::Const;
      p.name = s.substr(1);
      p.term = *t;
      return p;
    }
    throw QueryError("pattern must be ?var, _, #const or a term: " + s);
  }
  try {
    p.kind = Kind::Literal;
    p.term = term_from_json(j);
  } catch (const std::exception& e) {
    throw QueryError(std::string("bad literal pattern: ") + e.what());
  }
  return p;
}

json Pattern::to_json() const {
  switch (kind) {
    case Kind::Var: return "?" + name;
    case Kind::Wild: return "_";
    case Kind::Const: return "#" + name;
    case Kind::Literal: return term.to_json();
  }
  return nullptr;
}

Query query_from_json(const json& j) {
  try {
    Query q;
    q.name = j.at("name").get<std::string>();
    q.description = j.value("description", "");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "secrecy") {
      q.kind = QueryKind::Secrecy;
      const auto& t = j.at("target");
      if (t.contains("term")) {
        q.target.term = term_from_json(t.at("term"));
      } else {
        auto s = sort_from_name(t.at("sort").get<std::string>());
        if (!s) throw QueryError("unknown sort in target");
        q.target.sort = *s;
        q.target.origin = t.value("origin", "honest");
      }
    } else if (kind == "correspondence") {
      q.kind = QueryKind::Correspondence;
    } else if (kind == "agreement") {
      q.kind = QueryKind::Agreement;
    } else {
      throw QueryError("unknown query kind " + kind);
    }
    for (const auto& a : j.value("premise", json::array())) q.premise.push_back(atom_from_json(a));
    for (const auto& dj : j.value("disjuncts", json::array())) {
      Disjunct d;
      d.label = dj.at("label").get<std::string>();
      for (const auto& a : dj.value("atoms", json::array())) d.atoms.push_back(atom_from_json(a));
      for (const auto& e : dj.value("equalities", json::array()))
        d.equalities.emplace_back(Pattern::parse(e.at(0)), Pattern::parse(e.at(1)));
      q.disjuncts.push_back(std::move(d));
    }
    validate(q);
    return q;
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed query: ") + e.what());
  } catch (const SortError& e) {
    throw QueryError(std::string("malformed query term: ") + e.what());
  }
}

json query_to_json(const Query& q) {
  json j{{"name", q.name}, {"description", q.description}, {"kind", kind_text(q.kind)}};
  if (q.kind == QueryKind::Secrecy) {
    if (q.target.term)
      j["target"] = {{"term", q.target.term->to_json()}};
    else
      j["target"] = {{"sort", sort_name(q.target.sort)}, {"origin", q.target.origin}};
  } else {
    json premise = json::array();
    for (const auto& a : q.premise) premise.push_back(atom_to_json(a));
    j["premise"] = std::move(premise);
  }
  json ds = json::array();
  for (const auto& d : q.disjuncts) {
    json dj{{"label", d.label}};
    if (!d.atoms.empty()) {
      json atoms = json::array();
      for (const auto& a : d.atoms) atoms.push_back(atom_to_json(a));
      dj["atoms"] = std::move(atoms);
    }
    if (!d.equalities.empty()) {
      json eqs = json::array();
      for (const auto& [l, r] : d.equalities) eqs.push_back({l.to_json(), r.to_json()});
      dj["equalities"] = std::move(eqs);
    }
    ds.push_back(std::move(dj));
  }
  j["disjuncts"] = std::move(ds);
  return j;
}

const std::vector<Query>& builtin_queries() {
  static const std::vector<Query> all = [] {
    std::vector<Query> out;
    for (const auto& j : json::parse(kCatalog)) out.push_back(query_from_json(j));
    return out;
  }();
  return all;
}

Query find_query(const std::string& spec) {
  const auto tilde = spec.find('~');
  const std::string name = spec.substr(0, tilde);
  for (const auto& q : builtin_queries()) {
    if (q.name != name) continue;
    if (tilde == std::string::npos) return q;
    Query out = q;
    const std::string label = spec.substr(tilde + 1);
    auto it = std::find_if(out.disjuncts.begin(), out.disjuncts.end(),
                           [&](const Disjunct& d) { return d.label == label; });
    if (it == out.disjuncts.end()) throw QueryError("query " + name + " has no disjunct " + label);
    out.disjuncts.erase(it);
    out.name = spec;
    return out;
  }
  throw QueryError("unknown query " + name);
}

// ---------------------------------------------------------------------------

std::vector<int> max_bipartite_matching(const std::vector<std::vector<int>>& adj, int right_count) {
  std::vector<int> left(adj.size(), -1), right(static_cast<std::size_t>(right_count), -1);
  std::vector<char> seen;
  std::function<bool(int)> augment = [&](int u) {
    for (int v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (right[v] < 0 || augment(right[v])) {
        left[u] = v;
        right[v] = u;
        return true;
      }
    }
    return false;
  };
  for (std::size_t u = 0; u < adj.size(); ++u) {
    seen.assign(static_cast<std::size_t>(right_count), 0);
    augment(static_cast<int>(u));
  }
  return left;
}

Verdict check_secrecy(const Trace& t, const Query& q) {
  if (q.kind != QueryKind::Secrecy) throw QueryError(q.name + " is not a secrecy query");
  std::vector<Term> instances;
  if (q.target.term) {
    instances.push_back(*q.target.term);
  } else {
    std::set<Term> found;
    for (const auto& e : t.entries) collect_fresh(e.term, q.target.sort, q.target.origin, found);
    instances.assign(found.begin(), found.end());
  }
  return secrecy_impl(t, q, instances);
}

Verdict check_secrecy(const Trace& t, const Term& target) {
  Query q;
  q.name = "secrecy(" + target.pretty() + ")";
  q.kind = QueryKind::Secrecy;
  q.target.term = target;
  return secrecy_impl(t, q, {target});
}

Verdict check_correspondence(const Trace& t, const Query& q) {
  if (q.kind != QueryKind::Correspondence) throw QueryError(q.name + " is not a correspondence query");
  Verdict v;
  v.query = q.name;
  const auto events = t.events();
  const Atom& premise = q.premise.front();

  struct Occurrence {
    std::size_t pos;
    Binding binding;
    std::optional<DisjunctMatch> free_match;  // satisfied without injectivity
    std::vector<std::pair<std::size_t, std::string>> inj_options;  // (witness, disjunct)
  };
  std::vector<Occurrence> occ;
  for (const auto& [pos, ev] : events) {
    Binding b;
    if (!match_atom(premise, *ev, b)) continue;
    Occurrence o{pos, b, std::nullopt, {}};
    for (const auto& d : q.disjuncts) {
      const auto inj_it = std::find_if(d.atoms.begin(), d.atoms.end(), [](const Atom& a) { return a.inj; });
      const bool injective = premise.inj && inj_it != d.atoms.end();
      if (!injective) {
        if (o.free_match) continue;
        if (auto w = first_witness(d, events, pos, b)) o.free_match = DisjunctMatch{{pos}, d.label, *w};
        continue;
      }
      const auto k = static_cast<std::size_t>(inj_it - d.atoms.begin());
      std::vector<std::size_t> chosen;
      bool stop = false;
      satisfy(d, events, pos, b, chosen,
              [&](const Binding&, const std::vector<std::size_t>& c) {
                const std::pair<std::size_t, std::string> opt{c[k], d.label};
                if (std::find(o.inj_options.begin(), o.inj_options.end(), opt) == o.inj_options.end())
                  o.inj_options.push_back(opt);
                return false;
              },
              stop);
    }
    occ.push_back(std::move(o));
  }

  // Injective occurrences compete for distinct witness events.
  std::vector<std::size_t> left_ids;
  std::map<std::size_t, int> right_ids;
  std::vector<std::vector<int>> adj;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (occ[i].free_match) continue;
    left_ids.push_back(i);
    std::vector<int> row;
    for (const auto& [w, label] : occ[i].inj_options) {
      auto [it, _] = right_ids.emplace(w, static_cast<int>(right_ids.size()));
      if (std::find(row.begin(), row.end(), it->second) == row.end()) row.push_back(it->second);
    }
    adj.push_back(std::move(row));
  }
  const auto matching = max_bipartite_matching(adj, static_cast<int>(right_ids.size()));
  std::vector<std::size_t> right_pos(right_ids.size());
  for (const auto& [pos, id] : right_ids) right_pos[id] = pos;

  std::vector<std::optional<DisjunctMatch>> result(occ.size());
  for (std::size_t i = 0; i < occ.size(); ++i)
    if (occ[i].free_match) result[i] = occ[i].free_match;
  for (std::size_t l = 0; l < left_ids.size(); ++l) {
    if (matching[l] < 0) continue;
    const auto& o = occ[left_ids[l]];
    const std::size_t w = right_pos[matching[l]];
    for (const auto& [pos, label] : o.inj_options) {
      if (pos != w) continue;
      result[left_ids[l]] = DisjunctMatch{{o.pos}, label, {w}};
      break;
    }
  }
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (result[i]) {
      v.matches.push_back(*result[i]);
      continue;
    }
    Violation viol;
    viol.positions = {occ[i].pos};
    viol.binding = occ[i].binding;
    const auto& ev = *t.entries[occ[i].pos].event;
    viol.detail = occ[i].inj_options.empty()
                      ? ev.to_string() + " has no matching earlier event"
                      : ev.to_string() + " shares its only witnesses with other occurrences";
    v.violations.push_back(std::move(viol));
  }
  v.holds = v.violations.empty();
  return v;
}

Verdict check_agreement(const Trace& t, const Query& q) {
  if (q.kind != QueryKind::Agreement) throw QueryError(q.name + " is not an agreement query");
  Verdict v;
  v.query = q.name;
  const auto events = t.events();
  for (const auto& [p1, e1] : events) {
    Binding b1;
    if (!match_atom(q.premise[0], *e1, b1)) continue;
    for (const auto& [p2, e2] : events) {
      Binding b = b1;
      if (!match_atom(q.premise[1], *e2, b)) continue;
      std::optional<DisjunctMatch> m;
      for (const auto& d : q.disjuncts) {
        // Escape events may occur anywhere in the trace.
        Disjunct anywhere = d;
        for (auto& a : anywhere.atoms) a.anywhere = true;
        if (auto w = first_witness(anywhere, events, t.entries.size(), b)) {
          m = DisjunctMatch{{p1, p2}, d.label, *w};
          break;
        }
      }
      if (m) {
        v.matches.push_back(*m);
        continue;
      }
      Violation viol;
      viol.positions = {p1, p2};
      viol.binding = b;
      viol.detail = e1->to_string() + " and " + e2->to_string() + " satisfy no disjunct";
      v.violations.push_back(std::move(viol));
    }
  }
  v.holds = v.violations.empty();
  return v;
}

Verdict check(const Trace& t, const Query& q) {
  switch (q.kind) {
    case QueryKind::Secrecy: return check_secrecy(t, q);
    case QueryKind::Correspondence: return check_correspondence(t, q);
    case QueryKind::Agreement: return check_agreement(t, q);
  }
  throw QueryError("unknown query kind");
}

std::set<std::string> order_sensitive_events(const Query& q) {
  std::set<std::string> out;
  if (q.kind != QueryKind::Correspondence) return out;
  for (const auto& a : q.premise) out.insert(a.event);
  for (const auto& d : q.disjuncts)
    for (const auto& a : d.atoms)
      if (!a.anywhere) out.insert(a.event);
  return out;
}

std::set<std::string> referenced_events(const Query& q) {
  std::set<std::string> out;
  for (const auto& a : q.premise) out.insert(a.event);
  for (const auto& d : q.disjuncts)
    for (const auto& a : d.atoms) out.insert(a.event);
  return out;
}

json Verdict::to_json() const {
  json viols = json::array();
  for (const auto& x : violations) {
    json b = json::object();
    for (const auto& [k, t] : x.binding) b[k] = t.to_json();
    viols.push_back({{"positions", x.positions}, {"binding", std::move(b)}, {"detail", x.detail}});
  }
  json ms = json::array();
  for (const auto& m : matches)
    ms.push_back({{"premise", m.premise}, {"disjunct", m.disjunct}, {"witnesses", m.witnesses}});
  return {{"query", query}, {"holds", holds}, {"violations", std::move(viols)}, {"matches", std::move(ms)}};
}

std::string Verdict::report() const {
  std::ostringstream out;
  out << "query " << query << ": " << (holds ? "HOLDS" : "VIOLATED") << "\n";
  for (const auto& x : violations) {
    out << "  violation at entries [";
    for (std::size_t i = 0; i < x.positions.size(); ++i) out << (i ? ", " : "") << x.positions[i];
    out << "]: " << x.detail << "\n";
    if (!x.binding.empty()) out << "    " << describe_binding(x.binding) << "\n";
  }
  std::map<std::string, int> by_disjunct;
  for (const auto& m : matches) ++by_disjunct[m.disjunct];
  for (const auto& [label, n] : by_disjunct) out << "  " << n << " satisfied via " << label << "\n";
  return out.str();
}

}  // namespace mtpsim
