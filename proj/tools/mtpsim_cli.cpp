// mtpsim command-line front end. Talks to the simulator only through the C
// interface.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "mtpsim/mtpsim.h"

namespace {

enum Exit { kHolds = 0, kViolated = 1, kInput = 2, kBounds = 3, kInternal = 4 };

int exit_code(mtp_status s) {
  switch (s) {
    case MTP_OK: return kHolds;
    case MTP_VIOLATED: return kViolated;
    case MTP_ERR_BOUNDS: return kBounds;
    case MTP_ERR_INPUT:
    case MTP_ERR_SCRIPT:
    case MTP_ERR_UNKNOWN: return kInput;
    default: return kInternal;
  }
}

int fail(mtp_status s) {
  std::cerr << "mtpsim: " << mtp_last_error() << "\n";
  return exit_code(s);
}

struct Str {
  char* p = nullptr;
  ~Str() { mtp_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <typename T, void (*F)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { F(p); }
};
using ScenarioH = Handle<mtp_scenario, mtp_scenario_free>;
using TraceH = Handle<mtp_trace, mtp_trace_free>;
using VerdictH = Handle<mtp_verdict, mtp_verdict_free>;

// MTPSIM_SEED overrides the seed recorded in the scenario.
mtp_status apply_seed(mtp_scenario* sc, const std::string& flag) {
  const char* env = std::getenv("MTPSIM_SEED");
  const std::string text = env && *env ? env : flag;
  if (text.empty()) return MTP_OK;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return mtp_scenario_set_seed(sc, v);
  } catch (const std::exception&) {
    std::cerr << "mtpsim: seed must be a non-negative integer, got '" << text << "'\n";
    return MTP_ERR_INPUT;
  }
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) std::cerr << "mtpsim: cannot write " << path << "\n";
  return static_cast<bool>(out);
}

int print_verdict(const mtp_verdict* v, bool json) {
  Str s;
  const mtp_status st = json ? mtp_verdict_json(v, &s.p) : mtp_verdict_report(v, &s.p);
  if (st != MTP_OK) return fail(st);
  std::cout << s.str();
  if (json) std::cout << "\n";
  return kHolds;
}

int cmd_run(const std::string& scenario, const std::string& out, const std::string& seed) {
  ScenarioH sc;
  if (auto st = mtp_scenario_load_file(scenario.c_str(), &sc.p); st != MTP_OK) return fail(st);
  if (auto st = apply_seed(sc.p, seed); st != MTP_OK) return exit_code(st);
  TraceH t;
  if (auto st = mtp_run(sc.p, &t.p); st != MTP_OK) return fail(st);
  if (!out.empty()) {
    if (auto st = mtp_trace_write_file(t.p, out.c_str()); st != MTP_OK) return fail(st);
  }
  Str summary;
  if (auto st = mtp_trace_summary(t.p, &summary.p); st != MTP_OK) return fail(st);
  std::cout << summary.str();
  return kHolds;
}

int cmd_check(const std::string& input, const std::string& query, bool json) {
  TraceH t;
  if (auto st = mtp_trace_load_file(input.c_str(), &t.p); st != MTP_OK) return fail(st);
  VerdictH v;
  const mtp_status st = mtp_check(t.p, query.c_str(), &v.p);
  if (st != MTP_OK && st != MTP_VIOLATED) return fail(st);
  if (int rc = print_verdict(v.p, json); rc != kHolds) return rc;
  return exit_code(st);
}

int cmd_explore(const std::string& scenario, const std::string& query, mtp_explore_options opts,
                const std::string& out, bool json) {
  ScenarioH sc;
  if (auto st = mtp_scenario_load_file(scenario.c_str(), &sc.p); st != MTP_OK) return fail(st);
  if (auto st = apply_seed(sc.p, ""); st != MTP_OK) return exit_code(st);
  VerdictH v;
  TraceH cex;
  const mtp_status st = mtp_explore(sc.p, query.c_str(), &opts, &v.p, &cex.p);
  if (st != MTP_OK && st != MTP_VIOLATED) return fail(st);
  if (int rc = print_verdict(v.p, json); rc != kHolds) return rc;
  if (st == MTP_VIOLATED && !out.empty()) {
    if (auto w = mtp_trace_write_file(cex.p, out.c_str()); w != MTP_OK) return fail(w);
  }
  return exit_code(st);
}

int cmd_attack(const std::string& preset, const std::string& out_dir) {
  ScenarioH sc;
  if (auto st = mtp_scenario_preset(preset.c_str(), &sc.p); st != MTP_OK) return fail(st);
  if (auto st = apply_seed(sc.p, ""); st != MTP_OK) return exit_code(st);
  Str query;
  if (auto st = mtp_preset_query(preset.c_str(), &query.p); st != MTP_OK) return fail(st);
  TraceH t;
  if (auto st = mtp_run(sc.p, &t.p); st != MTP_OK) return fail(st);
  VerdictH v;
  const mtp_status st = mtp_check(t.p, query.p, &v.p);
  if (st != MTP_OK && st != MTP_VIOLATED) return fail(st);
  Str report;
  if (auto r = mtp_verdict_report(v.p, &report.p); r != MTP_OK) return fail(r);
  Str summary;
  if (auto r = mtp_trace_summary(t.p, &summary.p); r != MTP_OK) return fail(r);
  std::cout << summary.str() << report.str();
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
      std::cerr << "mtpsim: cannot create " << out_dir << ": " << ec.message() << "\n";
      return kInput;
    }
    const auto base = std::filesystem::path(out_dir) / preset;
    Str scenario_json;
    if (auto r = mtp_scenario_to_json(sc.p, &scenario_json.p); r != MTP_OK) return fail(r);
    if (!write_file(base.string() + ".scenario.json", scenario_json.str() + "\n")) return kInput;
    if (auto r = mtp_trace_write_file(t.p, (base.string() + ".trace.jsonl").c_str()); r != MTP_OK)
      return fail(r);
    if (!write_file(base.string() + ".report.txt", report.str())) return kInput;
  }
  return exit_code(st);
}

int cmd_list(mtp_status (*list)(char**)) {
  Str s;
  if (auto st = list(&s.p); st != MTP_OK) return fail(st);
  std::cout << s.str();
  return kHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic MTProto 2.0 simulator under a Dolev-Yao attacker"};
  app.require_subcommand(1);

  std::string scenario, trace_out, seed;
  auto* run = app.add_subcommand("run", "run a Passive or Scripted scenario");
  run->add_option("scenario", scenario, "scenario file (schema mtpsim/1)")->required();
  run->add_option("-o,--out", trace_out, "write the trace (JSON lines) here");
  run->add_option("--seed", seed, "override the recorded seed (MTPSIM_SEED takes precedence)");

  std::string input, query, cex_out;
  bool explore = false, json = false;
  mtp_explore_options opts;
  mtp_explore_options_init(&opts);
  auto* check = app.add_subcommand("check", "check a query on a trace, or explore a scenario");
  check->add_option("input", input, "trace file, or scenario file with --explore")->required();
  check->add_option("query", query, "built-in query name (name or name~label) or query file")->required();
  check->add_flag("--explore", explore, "bounded exploration of the scenario instead");
  check->add_option("--max-actions", opts.max_actions, "attacker action budget")->check(CLI::NonNegativeNumber);
  check->add_option("--depth", opts.synthesis_depth, "synthesis depth")->check(CLI::NonNegativeNumber);
  check->add_option("--sessions", opts.sessions, "sessions per pair")->check(CLI::PositiveNumber);
  check->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
  check->add_option("-o,--out", cex_out, "write the counterexample trace here");
  check->add_flag("--json", json, "machine-readable verdict");

  std::string preset, out_dir;
  auto* attack = app.add_subcommand("attack", "reproduce a named attack and check its query");
  attack->add_option("preset", preset, "preset name")->required();
  attack->add_option("--out-dir", out_dir, "write scenario, trace and report here");

  auto* queries = app.add_subcommand("queries", "list built-in queries");
  auto* list_presets = app.add_subcommand("presets", "list attack presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  if (run->parsed()) return cmd_run(scenario, trace_out, seed);
  if (check->parsed()) {
    if (explore) return cmd_explore(input, query, opts, cex_out, json);
    return cmd_check(input, query, json);
  }
  if (attack->parsed()) return cmd_attack(preset, out_dir);
  if (queries->parsed()) return cmd_list(mtp_list_queries);
  if (list_presets->parsed()) return cmd_list(mtp_list_presets);
  return kInput;
}
