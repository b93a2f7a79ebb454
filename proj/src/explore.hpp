#pragma once

// Bounded-exhaustive attacker: iterative deepening over the number of
// deliveries, with candidate messages drawn from the receiving role's shape.
// Counterexamples are shortest unless deepening stopped early (see
// ExploreOptions::deepen_limit).

#include <cstddef>
#include <string>
#include <vector>

#include "queries.hpp"
#include "scheduler.hpp"

namespace mtpsim {

struct ExploreOptions {
  int max_actions = -1;  // < 0: use the scenario bound
  int jobs = 1;          // worker threads over root branches
  // Iterations expanding more states than this end the deepening: the next
  // one uses the whole budget. 0 deepens one action at a time throughout.
  std::size_t deepen_limit = 200'000;
};

struct ExploreStats {
  std::size_t states = 0;        // expanded states over all iterations
  std::size_t pruned = 0;        // revisits cut by the visited table
  std::size_t frontier = 0;      // states left unexpanded at the depth limit
  int depth_reached = 0;         // last completed action budget
  bool exhausted = false;        // the space closed before the budget did
  double seconds = 0;

  nlohmann::json to_json() const;
};

struct ExploreResult {
  bool violated = false;
  Trace trace;       // counterexample, replayed as a scripted run
  Verdict verdict;
  Scenario script;   // the counterexample as a Scripted scenario
  ExploreStats stats;
};

ExploreResult explore(const Scenario& sc, const Query& q, const ExploreOptions& opts = {});

/// Derivable messages matching `shape`, deduplicated and sorted. The attacker
/// uses one representative fresh name per sort and, for group elements, its
/// own exponent applied to known elements.
std::vector<Term> shape_candidates(const Knowledge& k, const Shape& shape, int depth,
                                   std::size_t cap = kDefaultRecipeCap);

/// Digest of everything the future of a world and the verdict of `q` depend on.
Hash128 world_hash(const World& w, const std::set<std::string>& order_sensitive,
                   const std::set<std::string>& referenced);

}  // namespace mtpsim
