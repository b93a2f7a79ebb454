#include "mtpsim/mtpsim.h"

#include <cstdlib>
#include <cstring>
#include <sstream>

#include "explore.hpp"
#include "io.hpp"
#include "presets.hpp"

struct mtp_scenario {
  mtpsim::Scenario sc;
};

struct mtp_trace {
  mtpsim::Trace t;
};

struct mtp_verdict {
  mtpsim::Verdict v;
  nlohmann::json extra;  // exploration statistics and script, if any
};

namespace {

thread_local std::string g_last_error;

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
mtp_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const mtpsim::BoundsExceeded& e) {
    g_last_error = e.what();
    return MTP_ERR_BOUNDS;
  } catch (const mtpsim::ScriptError& e) {
    g_last_error = e.what();
    return MTP_ERR_SCRIPT;
  } catch (const mtpsim::UnknownPreset& e) {
    g_last_error = e.what();
    return MTP_ERR_UNKNOWN;
  } catch (const mtpsim::QueryError& e) {
    g_last_error = e.what();
    return std::strncmp(e.what(), "unknown query", 13) == 0 ? MTP_ERR_UNKNOWN : MTP_ERR_INPUT;
  } catch (const mtpsim::ScenarioError& e) {
    g_last_error = e.what();
    return MTP_ERR_INPUT;
  } catch (const mtpsim::PhaseViolation& e) {
    g_last_error = e.what();
    return MTP_ERR_INPUT;
  } catch (const mtpsim::SortError& e) {
    g_last_error = e.what();
    return MTP_ERR_INPUT;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return MTP_ERR_INPUT;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return MTP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error";
    return MTP_ERR_INTERNAL;
  }
}

mtp_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return MTP_ERR_INPUT;
}

mtp_status give_string(const std::string& s, char** out) {
  *out = dup(s);
  if (!*out) {
    g_last_error = "out of memory";
    return MTP_ERR_INTERNAL;
  }
  return MTP_OK;
}

}  // namespace

extern "C" {

const char* mtp_version(void) { return "1.0.0"; }

const char* mtp_last_error(void) { return g_last_error.c_str(); }

void mtp_string_free(char* s) { std::free(s); }

void mtp_explore_options_init(mtp_explore_options* opts) {
  if (!opts) return;
  opts->max_actions = -1;
  opts->jobs = 1;
  opts->synthesis_depth = -1;
  opts->sessions = -1;
}

mtp_status mtp_scenario_load_file(const char* path, mtp_scenario** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] {
    *out = new mtp_scenario{mtpsim::load_scenario(path)};
    return MTP_OK;
  });
}

mtp_status mtp_scenario_load_json(const char* json, mtp_scenario** out) {
  if (!json || !out) return null_arg("json/out");
  return guarded([&] {
    *out = new mtp_scenario{mtpsim::scenario_from_json(nlohmann::json::parse(json))};
    return MTP_OK;
  });
}

mtp_status mtp_scenario_preset(const char* name, mtp_scenario** out) {
  if (!name || !out) return null_arg("name/out");
  return guarded([&] {
    *out = new mtp_scenario{mtpsim::preset_attack(name)};
    return MTP_OK;
  });
}

mtp_status mtp_scenario_to_json(const mtp_scenario* sc, char** out) {
  if (!sc || !out) return null_arg("scenario/out");
  return guarded([&] { return give_string(mtpsim::scenario_to_json(sc->sc).dump(2), out); });
}

mtp_status mtp_scenario_set_seed(mtp_scenario* sc, uint64_t seed) {
  if (!sc) return null_arg("scenario");
  sc->sc.seed = seed;
  return MTP_OK;
}

void mtp_scenario_free(mtp_scenario* sc) { delete sc; }

mtp_status mtp_run(const mtp_scenario* sc, mtp_trace** out) {
  if (!sc || !out) return null_arg("scenario/out");
  return guarded([&] {
    *out = new mtp_trace{mtpsim::run(sc->sc)};
    return MTP_OK;
  });
}

mtp_status mtp_trace_load_file(const char* path, mtp_trace** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] {
    *out = new mtp_trace{mtpsim::load_trace(path)};
    return MTP_OK;
  });
}

mtp_status mtp_trace_write_file(const mtp_trace* t, const char* path) {
  if (!t || !path) return null_arg("trace/path");
  return guarded([&] {
    mtpsim::write_text(path, mtpsim::trace_to_jsonl(t->t));
    return MTP_OK;
  });
}

mtp_status mtp_trace_to_jsonl(const mtp_trace* t, char** out) {
  if (!t || !out) return null_arg("trace/out");
  return guarded([&] { return give_string(mtpsim::trace_to_jsonl(t->t), out); });
}

mtp_status mtp_trace_summary(const mtp_trace* t, char** out) {
  if (!t || !out) return null_arg("trace/out");
  return guarded([&] { return give_string(mtpsim::trace_summary(t->t), out); });
}

mtp_status mtp_trace_check_soundness(const mtp_trace* t, int32_t depth) {
  if (!t) return null_arg("trace");
  return guarded([&] {
    const auto problem = mtpsim::check_attacker_soundness(t->t, depth);
    if (problem.empty()) return MTP_OK;
    g_last_error = problem;
    return MTP_VIOLATED;
  });
}

void mtp_trace_free(mtp_trace* t) { delete t; }

mtp_status mtp_check(const mtp_trace* t, const char* query, mtp_verdict** out) {
  if (!t || !query || !out) return null_arg("trace/query/out");
  return guarded([&] {
    auto v = mtpsim::check(t->t, mtpsim::load_query(query));
    const bool holds = v.holds;
    *out = new mtp_verdict{std::move(v), nullptr};
    return holds ? MTP_OK : MTP_VIOLATED;
  });
}

mtp_status mtp_explore(const mtp_scenario* sc, const char* query, const mtp_explore_options* opts,
                       mtp_verdict** out, mtp_trace** counterexample) {
  if (!sc || !query || !out) return null_arg("scenario/query/out");
  return guarded([&] {
    mtp_explore_options o;
    mtp_explore_options_init(&o);
    if (opts) o = *opts;
    mtpsim::Scenario s = sc->sc;
    if (o.synthesis_depth >= 0) s.bounds.synthesis_depth = o.synthesis_depth;
    if (o.sessions > 0) s.sessions = o.sessions;
    const auto q = mtpsim::load_query(query);
    auto r = mtpsim::explore(s, q, mtpsim::ExploreOptions{o.max_actions, o.jobs});
    nlohmann::json extra{{"explore", r.stats.to_json()}};
    if (r.violated) extra["script"] = mtpsim::scenario_to_json(r.script);
    const bool violated = r.violated;
    if (violated && counterexample) *counterexample = new mtp_trace{std::move(r.trace)};
    *out = new mtp_verdict{std::move(r.verdict), std::move(extra)};
    return violated ? MTP_VIOLATED : MTP_OK;
  });
}

int mtp_verdict_holds(const mtp_verdict* v) { return v && v->v.holds ? 1 : 0; }

mtp_status mtp_verdict_report(const mtp_verdict* v, char** out) {
  if (!v || !out) return null_arg("verdict/out");
  return guarded([&] {
    std::string text = v->v.report();
    if (v->extra.contains("explore")) {
      const auto& st = v->extra.at("explore");
      std::ostringstream s;
      s << "  explored " << st.at("states").get<std::size_t>() << " states up to "
        << st.at("depth_reached").get<int>() << " attacker actions"
        << (st.at("exhausted").get<bool>() ? " (space exhausted)" : "") << "\n";
      text += s.str();
    }
    return give_string(text, out);
  });
}

mtp_status mtp_verdict_json(const mtp_verdict* v, char** out) {
  if (!v || !out) return null_arg("verdict/out");
  return guarded([&] {
    auto j = v->v.to_json();
    if (v->extra.is_object())
      for (const auto& [k, x] : v->extra.items()) j[k] = x;
    return give_string(j.dump(2), out);
  });
}

void mtp_verdict_free(mtp_verdict* v) { delete v; }

mtp_status mtp_list_queries(char** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    std::string s;
    for (const auto& q : mtpsim::builtin_queries()) s += q.name + "\t" + q.description + "\n";
    return give_string(s, out);
  });
}

mtp_status mtp_list_presets(char** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    std::string s;
    for (const auto& p : mtpsim::presets()) s += p.name + "\t" + p.description + "\n";
    return give_string(s, out);
  });
}

mtp_status mtp_preset_query(const char* preset, char** out) {
  if (!preset || !out) return null_arg("preset/out");
  return guarded([&] { return give_string(mtpsim::preset_info(preset).query, out); });
}

}  // extern "C"
