#include "explore.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace mtpsim {

namespace {

struct HashKey {
  std::size_t operator()(const Hash128& h) const { return static_cast<std::size_t>(h.lo ^ (h.hi * 31)); }
};

bool attacker_can_mint(Sort s) {
  switch (s) {
    case Sort::Nonce:
    case Sort::PrivKey:
    case Sort::SharedKey:
    case Sort::SessionKey:
    case Sort::ChatID:
    case Sort::Message:
      return true;
    default:
      return false;
  }
}

class Candidates {
 public:
  Candidates(const Knowledge& k, int depth, std::size_t cap) : k_(k), depth_(depth), cap_(cap) {}

  std::vector<Term> of(const Shape& s) {
    std::vector<Term> out = raw(s);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.size() > cap_)
      throw BoundsExceeded("candidate set exceeds recipe_cap=" + std::to_string(cap_));
    return out;
  }

 private:
  bool ok(const Term& t) const { return derivable(k_, t, depth_); }

  std::vector<Term> elements() {
    std::vector<Term> out{pub::g(), bad_elem()};
    const Term mine = attacker_fresh(Sort::PrivKey);
    out.push_back(dh_combine(pub::g(), mine));
    for (const auto& f : k_.facts()) {
      if (f.sort() != Sort::Element || f.ctor() == Ctor::BadElem) continue;
      out.push_back(f);
      out.push_back(dh_combine(f, mine));
    }
    return out;
  }

  std::vector<Term> raw(const Shape& s) {
    std::vector<Term> out;
    switch (s.kind) {
      case Shape::Kind::Ignored:
        break;
      case Shape::Kind::Exact:
        if (ok(s.term)) out.push_back(s.term);
        break;
      case Shape::Kind::OneOf:
        for (const auto& t : s.options)
          if (ok(t)) out.push_back(t);
        break;
      case Shape::Kind::HashOf:
        if (ok(hash(s.term))) out.push_back(hash(s.term));
        break;
      case Shape::Kind::FingerprintOf:
        if (ok(fingerprint(s.term))) out.push_back(fingerprint(s.term));
        break;
      case Shape::Kind::AnyHash:
        out.push_back(hash(pub::bot()));
        for (const auto& f : k_.facts())
          if (f.ctor() == Ctor::Hash) out.push_back(f);
        for (const auto& e : elements()) out.push_back(hash(e));
        break;
      case Shape::Kind::Any:
        if (s.sort == Sort::Element) return elements();
        for (const auto& f : k_.facts())
          if (f.sort() == s.sort) out.push_back(f);
        for (const auto& c : public_signature())
          if (c.sort() == s.sort) out.push_back(c);
        if (attacker_can_mint(s.sort)) out.push_back(attacker_fresh(s.sort));
        break;
      case Shape::Kind::Tuple: {
        std::vector<std::vector<Term>> parts;
        std::size_t total = 1;
        for (const auto& item : s.items) {
          parts.push_back(of(item));
          total *= parts.back().size();
          if (total == 0) return out;
          if (total > cap_) throw BoundsExceeded("tuple candidates exceed recipe_cap=" + std::to_string(cap_));
        }
        std::vector<std::size_t> idx(parts.size(), 0);
        for (;;) {
          std::vector<Term> items;
          for (std::size_t i = 0; i < parts.size(); ++i) items.push_back(parts[i][idx[i]]);
          out.push_back(tuple(std::move(items)));
          std::size_t i = parts.size();
          while (i > 0) {
            --i;
            if (++idx[i] < parts[i].size()) break;
            idx[i] = 0;
            if (i == 0) return out;
          }
          if (parts.empty()) return out;
        }
      }
      case Shape::Kind::SEnc:
      case Shape::Kind::AEnc: {
        const Ctor c = s.kind == Shape::Kind::SEnc ? Ctor::SEnc : Ctor::AEnc;
        for (const auto& f : k_.facts())
          if (f.ctor() == c && shape_matches(s, f)) out.push_back(f);
        if (!ok(s.term)) break;
        for (const auto& p : of(s.items.front())) {
          out.push_back(c == Ctor::SEnc ? senc(p, s.term, attacker_fresh(Sort::Nonce))
                                        : aenc(p, s.term));
        }
        break;
      }
    }
    return out;
  }

  const Knowledge& k_;
  int depth_;
  std::size_t cap_;
};

using Path = std::vector<std::pair<int, Term>>;


constexpr int kNever = INT_MAX;

// Inputs an authorization role still needs before it can emit one of
// `names`, or kNever. Other roles report 0, which never prunes.
int inputs_until(const RoleInstance& ri, const std::set<std::string>& names) {
  auto first = [&](std::initializer_list<std::initializer_list<const char*>> ahead) {
    int d = 1;
    for (const auto& step : ahead) {
      for (const char* e : step)
        if (names.count(e)) return d;
      ++d;
    }
    return kNever;
  };
  if (const auto* c = std::get_if<AuthClientState>(&ri.state)) {
    switch (c->phase) {
      case AuthClientPhase::Init:
      case AuthClientPhase::AwaitResPQ:
        return first({{"ClientRequestsDHParameters"},
                      {"ClientReceivesDHParameters", "ClientChecksDHParameters"},
                      {"ClientAcceptsAuthKey"}});
      case AuthClientPhase::AwaitServerDH:
        return first({{"ClientReceivesDHParameters", "ClientChecksDHParameters"}, {"ClientAcceptsAuthKey"}});
      case AuthClientPhase::AwaitAck:
        return first({{"ClientAcceptsAuthKey"}});
      default:
        return kNever;
    }
  }
  if (const auto* s = std::get_if<AuthServerState>(&ri.state)) {
    switch (s->phase) {
      case AuthServerPhase::AwaitReqPQ:
        return first({{}, {"ServerSendsDHParameters"}, {"ServerAcceptsClient", "ServerAcceptsAuthKey"}});
      case AuthServerPhase::AwaitDHAnswer:
        return first({{"ServerSendsDHParameters"}, {"ServerAcceptsClient", "ServerAcceptsAuthKey"}});
      case AuthServerPhase::AwaitClientDH:
        return first({{"ServerAcceptsClient", "ServerAcceptsAuthKey"}});
      default:
        return kNever;
    }
  }
  return 0;
}

// What a delivery can change in an exploring world. Trace entries are only
// appended, so truncation restores them.
struct Undo {
  explicit Undo(const World& w)
      : roles(w.roles), oob(w.oob), knowledge(w.knowledge), entries(w.trace.entries.size()),
        phase(w.phase), stage(w.stage), deliveries(w.deliveries) {}

  void restore(World& w) const {
    w.roles = roles;
    w.oob = oob;
    w.knowledge = knowledge;
    w.trace.entries.resize(entries);
    w.phase = phase;
    w.stage = stage;
    w.deliveries = deliveries;
  }

  std::vector<RoleInstance> roles;
  OobState oob;
  Knowledge knowledge;
  std::size_t entries;
  RunPhase phase;
  int stage;
  int deliveries;
};

struct Shared {
  const Engine& engine;
  const Query& query;
  std::set<std::string> order_sensitive;
  std::set<std::string> referenced;
  bool post = false;
  bool secrecy = false;       // the verdict depends on knowledge, not only on events
  bool leaf_preview = false;  // leaves can be judged from the role step alone
  // Correspondence and agreement verdicts only turn false when a premise
  // event is appended; empty when that does not hold.
  std::set<std::string> premise = {};
  std::size_t max_states = 0;
  std::atomic<std::size_t> states{0};
  std::atomic<std::size_t> pruned{0};
  std::atomic<std::size_t> frontier{0};
  std::atomic<bool> cut{false};
  std::atomic<int> best{INT_MAX};  // lowest root branch with a counterexample
};

bool mentions(const std::vector<Event>& events, const std::set<std::string>& names) {
  return std::any_of(events.begin(), events.end(), [&](const Event& e) { return names.count(e.name) != 0; });
}

class Search {
 public:
  Search(Shared& sh, int branch) : sh_(sh), branch_(branch) {}

  bool violated(World& w) const {
    if (sh_.post) {
      World c = w;
      sh_.engine.publish_post(c);
      c.trace.final_knowledge = c.knowledge;
      return !check(c.trace, sh_.query).holds;
    }
    w.trace.final_knowledge = w.knowledge;
    return !check(w.trace, sh_.query).holds;
  }

  // With a budget, a role is offered only if some role can still emit a
  // premise event within it once the role has taken its input.
  Path successors(const World& w, int remaining = 0) const {
    const bool filter = remaining > 0 && !sh_.premise.empty();
    std::vector<int> need(w.roles.size(), kNever);
    int best = kNever, second = kNever;
    if (filter) {
      for (std::size_t r = 0; r < w.roles.size(); ++r) {
        if (!w.roles[r].active) continue;
        need[r] = inputs_until(w.roles[r], sh_.premise);
        if (need[r] < best) {
          second = best;
          best = need[r];
        } else if (need[r] < second) {
          second = need[r];
        }
      }
    }
    Path out;
    const auto& e = sh_.engine;
    Candidates cand(w.knowledge, e.depth(), e.scenario().bounds.recipe_cap);
    for (int r = 0; r < static_cast<int>(w.roles.size()); ++r) {
      const auto& ri = w.roles[r];
      if (!ri.active) continue;
      if (ri.pristine && symmetric_twin(w, r)) continue;
      if (filter) {
        const int others = need[r] == best ? second : best;
        const int self = need[r] == kNever ? kNever : need[r] - 1;
        const int reach = std::min(self, others);
        if (reach > remaining - 1) {
          if (reach != kNever) sh_.cut = true;
          continue;
        }
      }
      for (auto& t : cand.of(e.expects(w, r))) out.emplace_back(r, std::move(t));
    }
    return out;
  }

  // Returns true once a violation is found; the path is left in `path`.
  bool dfs(World& w, int remaining, bool check_now) {
    if (sh_.best.load() < branch_) return false;
    if (check_now && violated(w)) return true;
    if (remaining == 0) {
      sh_.cut = true;
      ++sh_.frontier;
      return false;
    }
    if (!sh_.premise.empty()) {
      const int need = premise_distance(w);
      if (need > remaining) {
        if (need != kNever) {
          sh_.cut = true;
          ++sh_.frontier;
        }
        return false;
      }
    }
    const Hash128 h = world_hash(w, sh_.order_sensitive, sh_.referenced);
    auto [it, inserted] = visited.emplace(h, remaining);
    if (!inserted) {
      if (it->second >= remaining) {
        ++sh_.pruned;
        return false;
      }
      it->second = remaining;
    }
    if (++sh_.states > sh_.max_states)
      throw BoundsExceeded("exploration exceeded max_states=" + std::to_string(sh_.max_states));
    const Undo undo(w);
    const bool leaves = remaining == 1 && sh_.leaf_preview;
    for (const auto& [r, t] : successors(w, remaining)) {
      if (leaves) {
        // A leaf matters only through the events it adds.
        const auto p = sh_.engine.preview(w, r, t);
        if (p.status == StepStatus::Discard) continue;
        if (!p.claims && !mentions(p.events, sh_.premise.empty() ? sh_.referenced : sh_.premise)) {
          sh_.cut = true;
          ++sh_.frontier;
          continue;
        }
      }
      const std::size_t known = w.knowledge.size();
      if (sh_.engine.deliver_term(w, r, t) == StepStatus::Discard) {
        undo.restore(w);
        continue;
      }
      path.emplace_back(r, t);
      if (dfs(w, remaining - 1, relevant(w, undo.entries, known))) return true;
      path.pop_back();
      undo.restore(w);
    }
    return false;
  }

  Path path;
  std::unordered_map<Hash128, int, HashKey> visited;

 private:
  // A pristine role behaves like an earlier pristine role of the same
  // principal, kind and pair up to renaming of its fresh names.
  static bool symmetric_twin(const World& w, int r) {
    const auto& a = w.roles[r];
    for (int s = 0; s < r; ++s) {
      const auto& b = w.roles[s];
      if (b.active && b.pristine && b.principal == a.principal && b.kind == a.kind &&
          b.peer == a.peer && b.pair == a.pair)
        return true;
    }
    return false;
  }

  int premise_distance(const World& w) const {
    int best = kNever;
    for (const auto& ri : w.roles)
      if (ri.active) best = std::min(best, inputs_until(ri, sh_.premise));
    return best;
  }

  bool relevant(const World& c, std::size_t entries, std::size_t known) const {
    if (sh_.post || (sh_.secrecy && c.knowledge.size() != known)) return true;
    for (std::size_t i = entries; i < c.trace.entries.size(); ++i) {
      const auto& e = c.trace.entries[i];
      if (e.event && sh_.referenced.count(e.event->name)) return true;
    }
    return false;
  }

  Shared& sh_;
  int branch_;
};

std::string label_of(const World& w, int r) { return w.roles[r].label; }

}  // namespace

nlohmann::json ExploreStats::to_json() const {
  return {{"states", states},   {"pruned", pruned},       {"frontier", frontier},
          {"depth_reached", depth_reached}, {"exhausted", exhausted}, {"seconds", seconds}};
}

std::vector<Term> shape_candidates(const Knowledge& k, const Shape& shape, int depth, std::size_t cap) {
  return Candidates(k, depth, cap).of(shape);
}

Hash128 world_hash(const World& w, const std::set<std::string>& order_sensitive,
                   const std::set<std::string>& referenced) {
  HashBuilder hb;
  for (const auto& ri : w.roles) {
    hb.add(std::uint64_t{ri.active});
    std::visit([&](const auto& s) { hb.add(state_hash(s)); }, ri.state);
  }
  hb.add(state_hash(w.oob));
  hb.add(w.knowledge.digest());
  hb.add(static_cast<std::uint64_t>(w.stage));
  hb.add(static_cast<std::uint64_t>(w.phase));
  // Order-sensitive events in sequence, the rest as a multiset.
  Hash128 multiset{0, 0};
  for (const auto& e : w.trace.entries) {
    if (!e.event || !referenced.count(e.event->name)) continue;
    const Hash128 eh = e.event->hash();
    if (order_sensitive.count(e.event->name)) {
      hb.add(eh);
    } else {
      multiset.lo += eh.lo;
      multiset.hi += eh.hi;
    }
  }
  hb.add(multiset);
  return hb.done();
}

ExploreResult explore(const Scenario& sc, const Query& q, const ExploreOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  Scenario scenario = sc;
  scenario.strategy = Strategy::Explore;
  const Engine engine(scenario);
  Shared sh{engine, q, order_sensitive_events(q), referenced_events(q)};
  sh.post = engine.has_post_compromises();
  sh.secrecy = q.kind == QueryKind::Secrecy;
  sh.leaf_preview = engine.step_local() && !sh.post && !sh.secrecy;
  sh.max_states = scenario.bounds.max_states;
  if (q.kind != QueryKind::Secrecy && !sh.post && engine.step_local()) {
    for (const auto& a : q.premise) sh.premise.insert(a.event);
  }
  const int budget = opts.max_actions >= 0 ? opts.max_actions : scenario.bounds.max_actions;
  const int jobs = std::max(1, opts.jobs);

  ExploreResult res;
  std::optional<Path> found;
  World root = engine.initial();
  root.exploring = true;
  {
    Search s(sh, 0);
    if (s.violated(root)) found = Path{};
  }
  for (int d = 1; d <= budget && !found; ++d) {
    sh.cut = false;
    const std::size_t before = sh.states;
    if (jobs == 1) {
      Search s(sh, 0);
      World w = root;
      if (s.dfs(w, d, false)) found = s.path;
    } else {
      Search probe(sh, 0);
      const Path roots = probe.successors(root, d);
      std::vector<std::optional<Path>> results(roots.size());
      std::atomic<std::size_t> next{0};
      std::mutex err_mu;
      std::exception_ptr err;
      auto worker = [&] {
        for (;;) {
          const std::size_t i = next++;
          if (i >= roots.size() || static_cast<int>(i) > sh.best.load()) return;
          try {
            Search s(sh, static_cast<int>(i));
            World c = root;
            const std::size_t entries = c.trace.entries.size(), known = c.knowledge.size();
            if (engine.deliver_term(c, roots[i].first, roots[i].second) == StepStatus::Discard) continue;
            const bool now = sh.post || c.knowledge.size() != known || c.trace.entries.size() != entries;
            if (s.dfs(c, d - 1, now)) {
              Path p{roots[i]};
              p.insert(p.end(), s.path.begin(), s.path.end());
              results[i] = std::move(p);
              int cur = sh.best.load();
              while (static_cast<int>(i) < cur && !sh.best.compare_exchange_weak(cur, static_cast<int>(i))) {
              }
            }
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
            sh.best = -1;
            return;
          }
        }
      };
      std::vector<std::thread> pool;
      for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
      if (err) std::rethrow_exception(err);
      for (auto& r : results)
        if (r) {
          found = std::move(r);
          break;
        }
    }
    res.stats.depth_reached = d;
    if (!found && !sh.cut) {
      res.stats.exhausted = true;
      break;
    }
    // Once an iteration is expensive, deepening step by step costs more than
    // it saves; the rest of the budget is searched in one go.
    if (opts.deepen_limit > 0 && sh.states - before > opts.deepen_limit) d = std::max(d, budget - 1);
  }

  res.stats.states = sh.states;
  res.stats.pruned = sh.pruned;
  res.stats.frontier = sh.frontier;
  if (found) {
    Scenario script = scenario;
    script.strategy = Strategy::Scripted;
    script.name = scenario.name + " counterexample";
    script.actions.clear();
    for (const auto& [r, t] : *found) {
      Action a;
      a.kind = Action::Kind::Deliver;
      a.to = label_of(root, r);
      a.recipe = {{"term", t.to_json()}};
      script.actions.push_back(std::move(a));
    }
    if (sh.post) {
      Action a;
      a.kind = Action::Kind::PhaseBoundary;
      script.actions.push_back(a);
    }
    res.trace = run(script);
    res.verdict = check(res.trace, q);
    if (res.verdict.holds) throw std::logic_error("counterexample did not reproduce under replay");
    res.violated = true;
    res.script = std::move(script);
  } else {
    World w = root;
    engine.publish_post(w);
    w.trace.final_knowledge = w.knowledge;
    res.trace = std::move(w.trace);
    res.verdict = check(res.trace, q);
  }
  res.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mtpsim
