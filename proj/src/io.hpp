#pragma once

// Scenario files (JSON, schema "mtpsim/1") and trace files (JSON lines,
// schema "mtpsim-trace/1").

#include <string>

#include "queries.hpp"
#include "scheduler.hpp"

namespace mtpsim {

inline constexpr const char* kScenarioSchema = "mtpsim/1";
inline constexpr const char* kTraceSchema = "mtpsim-trace/1";

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& sc);
Scenario load_scenario(const std::string& path);

nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

std::string trace_to_jsonl(const Trace& t);
Trace trace_from_jsonl(const std::string& text);
Trace load_trace(const std::string& path);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// A built-in query name ("name" or "name~label") or a path to a query file.
Query load_query(const std::string& name_or_path);

/// A few lines describing who did what, for terminals.
std::string trace_summary(const Trace& t);

}  // namespace mtpsim
