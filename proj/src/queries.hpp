#pragma once

// Security queries over traces: secrecy, correspondence (optionally
// injective) and agreement, each with escape disjuncts.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scheduler.hpp"

namespace mtpsim {

class QueryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument pattern: "?x" variable, "_" wildcard, "#label" public constant,
/// or a literal term.
struct Pattern {
  enum class Kind { Var, Wild, Const, Literal };
  Kind kind = Kind::Wild;
  std::string name;  // variable name or constant label
  Term term;

  static Pattern parse(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Atom {
  std::string event;
  std::vector<Pattern> args;
  bool inj = false;
  bool anywhere = false;  // may occur after the premise
};

struct Disjunct {
  std::string label;
  std::vector<Atom> atoms;  // conjunction
  std::vector<std::pair<Pattern, Pattern>> equalities;
};

enum class QueryKind { Secrecy, Correspondence, Agreement };

struct SecrecyTarget {
  std::optional<Term> term;
  Sort sort = Sort::Message;
  std::string origin;  // role kind prefix ("client", "sc", "rk") or "honest"
};

struct Query {
  std::string name;
  std::string description;
  QueryKind kind = QueryKind::Correspondence;
  SecrecyTarget target;
  std::vector<Atom> premise;  // one atom, or two for Agreement
  std::vector<Disjunct> disjuncts;
};

using Binding = std::map<std::string, Term>;

struct Violation {
  std::vector<std::size_t> positions;  // trace positions that falsify the query
  Binding binding;
  std::string detail;
};

struct DisjunctMatch {
  std::vector<std::size_t> premise;  // premise occurrence positions
  std::string disjunct;
  std::vector<std::size_t> witnesses;
};

struct Verdict {
  std::string query;
  bool holds = true;
  std::vector<Violation> violations;
  std::vector<DisjunctMatch> matches;

  nlohmann::json to_json() const;
  std::string report() const;
};

Query query_from_json(const nlohmann::json& j);
nlohmann::json query_to_json(const Query& q);

const std::vector<Query>& builtin_queries();

/// Looks up a built-in by name. "name~label" drops the disjunct `label`.
/// Throws QueryError for unknown names or labels.
Query find_query(const std::string& spec);

/// Secrecy of every instance of the target, escaped by any disjunct.
Verdict check_secrecy(const Trace& t, const Query& q);
/// Secrecy of a single term with no escapes.
Verdict check_secrecy(const Trace& t, const Term& target);
Verdict check_correspondence(const Trace& t, const Query& q);
Verdict check_agreement(const Trace& t, const Query& q);
Verdict check(const Trace& t, const Query& q);

/// Event names whose relative order can affect the verdict.
std::set<std::string> order_sensitive_events(const Query& q);
/// Event names the verdict depends on at all.
std::set<std::string> referenced_events(const Query& q);

// Exposed for the injective-matching oracle tests: left vertex i may use any
// right vertex in adj[i]. Returns the match of each left vertex or -1.
std::vector<int> max_bipartite_matching(const std::vector<std::vector<int>>& adj, int right_count);

}  // namespace mtpsim
