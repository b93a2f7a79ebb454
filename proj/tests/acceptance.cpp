// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed
// below; the exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "explore.hpp"
#include "io.hpp"
#include "oracles.hpp"
#include "presets.hpp"

using namespace mtpsim;

namespace {

constexpr int kMaxActions = 12;
constexpr int kSynthesisDepth = 4;
constexpr double kClientAuthSeconds = 60;
constexpr double kServerAuthSeconds = 300;
constexpr int kKnowledgeBases = 200;
constexpr std::size_t kRewriteIdentities = 10000;

#ifndef MTPSIM_SCENARIO_DIR
#define MTPSIM_SCENARIO_DIR "scenarios"
#endif
std::string scenario_dir = MTPSIM_SCENARIO_DIR;

Scenario load(const std::string& name) {
  Scenario sc = load_scenario(scenario_dir + "/" + name + ".json");
  sc.bounds.max_actions = kMaxActions;
  sc.bounds.synthesis_depth = kSynthesisDepth;
  return sc;
}

struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

std::string stats(const ExploreResult& r) {
  std::ostringstream os;
  os.precision(3);
  os << r.stats.seconds << "s, " << r.stats.states << " states";
  return os.str();
}

ExploreResult explore_named(const std::string& scenario, const std::string& query) {
  return explore(load(scenario), find_query(query));
}

std::vector<const Event*> events_named(const Trace& t, const std::string& name) {
  std::vector<const Event*> out;
  for (const auto& [pos, e] : t.events())
    if (e->name == name) out.push_back(e);
  return out;
}

int failures = 0;

void criterion(int n, const std::string& title, const std::function<std::string()>& body) {
  std::string status = "PASS", detail;
  try {
    detail = body();
  } catch (const Failure& f) {
    status = "FAIL";
    detail = f.why;
  } catch (const std::exception& e) {
    status = "FAIL";
    detail = std::string("error: ") + e.what();
  }
  if (status == "FAIL") ++failures;
  std::printf("%s %d: %s (%s)\n", status.c_str(), n, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) scenario_dir = argv[1];

  criterion(1, "auth.client_auth has a counterexample within 12 actions", [] {
    const auto r = explore_named("explore_auth", "auth.client_auth");
    require(r.violated, "no counterexample");
    require(static_cast<int>(r.script.actions.size()) <= kMaxActions, "counterexample too long");
    require(r.stats.seconds < kClientAuthSeconds, "took " + stats(r));
    return std::to_string(r.script.actions.size()) + " actions, " + stats(r);
  });

  criterion(2, "auth.server_auth holds at the same bounds, also with reused server nonces", [] {
    std::string out;
    for (const char* name : {"explore_auth", "explore_auth_reuse_ns"}) {
      const auto r = explore_named(name, "auth.server_auth");
      require(!r.violated, std::string("counterexample in ") + name);
      require(r.stats.seconds < kServerAuthSeconds, std::string(name) + " took " + stats(r));
      out += std::string(out.empty() ? "" : "; ") + name + " " + stats(r);
    }
    return out;
  });

  criterion(3, "auth.secrecy holds; each compromise or weakening breaks it", [] {
    const auto base = explore_named("auth_secrecy", "auth.secrecy");
    require(!base.violated, "violated with no compromise");
    const std::pair<const char*, const char*> flips[] = {
        {"auth_forged_identity", "forged"}, {"auth_leak_rsa", "rsa"},         {"auth_leak_nonce", "nonce"},
        {"auth_weak_dh", "dhcheck"},        {"auth_post_auth_key", "postauth"},
    };
    std::string out = "base " + stats(base);
    for (const auto& [scenario, label] : flips) {
      // The matching escape must be what saves the full query.
      require(!explore_named(scenario, "auth.secrecy").violated,
              std::string("auth.secrecy violated in ") + scenario);
      const auto r = explore_named(scenario, std::string("auth.secrecy~") + label);
      require(r.violated, std::string("no counterexample for ") + label);
      out += std::string("; ") + label + " " + std::to_string(r.script.actions.size()) + " actions";
    }
    return out;
  });

  criterion(4, "key agreement and session matching hold; the DH escape is needed only with skipped checks", [] {
    for (const char* q : {"auth.key_agreement", "auth.session_match", "auth.session_match~dhcheck"}) {
      const auto r = explore_named("explore_auth", q);
      require(!r.violated, std::string(q) + " violated on the honest exploration");
    }
    require(!explore_named("session_match_weak_dh", "auth.session_match").violated,
            "auth.session_match violated with the escape in place");
    const auto weak = explore_named("session_match_weak_dh", "auth.session_match~dhcheck");
    require(weak.violated, "no session mismatch with skipped DH checks");
    require(!events_named(weak.trace, "ClientChecksDHParameters").empty(), "escape event missing");
    // Without the flag the escape event never occurs.
    auto checked = load("session_match_weak_dh");
    for (auto& p : checked.principals) p.flags.skip_dh_check = false;
    require(!explore(checked, find_query("auth.session_match~dhcheck")).violated,
            "session mismatch without skipped checks");
    return "mismatch in " + std::to_string(weak.script.actions.size()) + " actions";
  });

  criterion(5, "sc.secrecy holds with the comparison and DH checks on, and flips without either", [] {
    const auto ok = explore_named("sc_honest", "sc.secrecy");
    require(!ok.violated, "violated with checks on");
    const auto oob = explore_named("sc_skip_oob", "sc.secrecy~oob");
    require(oob.violated, "no leak with the comparison skipped");
    const auto dh = explore_named("sc_skip_dh_check", "sc.secrecy~dhcheck");
    require(dh.violated, "no leak with the DH check skipped");
    return "honest " + stats(ok) + "; skip " + std::to_string(oob.script.actions.size()) +
           " actions; dhcheck " + std::to_string(dh.script.actions.size()) + " actions";
  });

  criterion(6, "cross-session secret chat attack reproduces and needs the chat id to be unbound", [] {
    const auto sc = preset_attack("cross_session_sc");
    const Trace t = run(sc);
    require(trace_to_jsonl(t) == trace_to_jsonl(run(sc)), "not deterministic");
    require(!check(t, find_query("sc.integrity_same_chat")).holds, "same-chat integrity not violated");
    const auto v = check(t, find_query("sc.integrity"));
    require(v.holds, "sc.integrity violated");
    std::size_t receives = events_named(t, "ReceivesSecretChatMsg").size();
    require(receives > 0, "no message received");
    for (const auto& m : v.matches) require(m.disjunct == "swapped", "a receive matched by " + m.disjunct);
    require(v.matches.size() == receives, "unmatched receive");
    require(!check(t, find_query("sc.integrity~swapped")).holds, "a same-session send also matches");

    auto bound = sc;
    bound.oob_includes_chat_id = true;
    std::string outcome;
    try {
      const Trace b = run(bound);
      require(events_named(b, "ReceivesSecretChatMsg").empty(), "attack still delivers with the chat id bound");
      outcome = "script runs, nothing received";
    } catch (const ScriptError& e) {
      outcome = std::string("script fails: ") + e.what();
    }
    return std::to_string(receives) + " swapped receives; with chat id: " + outcome;
  });

  criterion(7, "rekeying unknown key share", [] {
    const Trace t = run(preset_attack("uks_rekey"));
    require(!check(t, find_query("rk.uks")).holds, "rk.uks holds");
    const auto ini = events_named(t, "InitiatorNegotiatesNewKey");
    const auto res = events_named(t, "ResponderNegotiatesNewKey");
    require(ini.size() == 1 && res.size() == 1, "expected one negotiation per side");
    require(term_equal(ini[0]->args.at(3), res[0]->args.at(3)), "keys differ");
    require(ini[0]->args.at(1) == pub::principal("A") && ini[0]->args.at(2) == pub::principal("E"),
            "A does not record peer E");
    require(res[0]->args.at(2) == pub::principal("B") && res[0]->args.at(1) == pub::principal("E'"),
            "B does not record peer E'");
    return "A thinks it talks to E, B to E', same key";
  });

  criterion(8, "rekeyed messages stay secret after both auth keys and the old session key leak", [] {
    const auto a = explore_named("rekey_forward_secrecy", "rk.secrecy");
    require(!a.violated, "secret lost with auth keys published");
    const auto b = explore_named("rekey_old_key_published", "rk.secrecy");
    require(!b.violated, "secret lost with the old session key published");
    // The honest run reaches the rekeyed message, so the query is not vacuous.
    auto passive = load("rekey_old_key_published");
    passive.strategy = Strategy::Passive;
    const Trace t = run(passive);
    require(!events_named(t, "PostCompromisedSessionKey").empty(), "old key not published");
    require(check(t, find_query("rk.secrecy")).holds, "passive run leaks");
    return stats(a) + "; " + stats(b);
  });

  criterion(9, "deduction and rewriting agree with independent oracles", [] {
    const auto d = oracle::derivability_oracle(kKnowledgeBases, 0xacce);
    require(d.failures.empty(), "derivable: " + (d.failures.empty() ? "" : d.failures.front()));
    const auto r = oracle::rewrite_identities(kRewriteIdentities, 0xacce);
    require(r.failures.empty(), "rewrite: " + (r.failures.empty() ? "" : r.failures.front()));
    require(r.checked >= kRewriteIdentities, "too few identities");
    return std::to_string(d.checked) + " derivability queries, " + std::to_string(r.checked) + " identities";
  });

  criterion(10, "every preset gives byte-identical traces on repeated runs", [] {
    for (const auto& p : presets()) {
      const auto sc = preset_attack(p.name);
      require(trace_to_jsonl(run(sc)) == trace_to_jsonl(run(sc)), p.name + " differs");
    }
    return std::to_string(presets().size()) + " presets";
  });

  return failures;
}
