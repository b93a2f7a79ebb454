#pragma once

// Dolev-Yao attacker knowledge: decomposition closure and bounded synthesis.

#include <cstddef>
#include <stdexcept>
#include <memory>
#include <vector>

#include "term.hpp"

namespace mtpsim {

inline constexpr int kDefaultSynthesisDepth = 4;
inline constexpr std::size_t kDefaultRecipeCap = 100000;

class BoundsExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The attacker's representative fresh name for a sort. There is exactly one
/// per sort; honest roles can never tell two attacker names apart.
Term attacker_fresh(Sort s);

class Knowledge {
 public:
  Knowledge();
  explicit Knowledge(const std::vector<Term>& facts);

  // Returns an unanalyzed union. If this knowledge is closed, the next
  // close() only analyzes what was added.
  Knowledge with(const std::vector<Term>& more) const;

  const std::vector<Term>& facts() const { return d_->facts; }
  bool contains(const Term& t) const;
  bool analyzed() const { return d_->analyzed; }
  std::size_t size() const { return d_->facts.size(); }
  Hash128 digest() const;

 private:
  friend Knowledge close(const Knowledge& k, int depth);

  // Shared and immutable once published; copies are cheap.
  struct Data {
    std::vector<Term> facts;                       // sorted by compare(), unique
    std::vector<std::pair<Hash128, Term>> by_hash;  // same facts, sorted by hash
    std::vector<Term> sealed;  // encryptions not yet opened (closed knowledge)
    std::vector<Term> added;   // inserted since the last close
    bool analyzed = false;
    bool incremental = false;  // facts minus `added` are closed
  };
  Data& mut();
  bool insert(const Term& t);

  std::shared_ptr<const Data> d_;
};

/// Least superset closed under projection, DHConfig unpacking, symmetric
/// decryption with a derivable key and asymmetric decryption with a derivable
/// private key.
Knowledge close(const Knowledge& k, int depth = kDefaultSynthesisDepth);

/// True iff `target` is in the closure, public, attacker-fresh, or obtained by
/// at most `depth` nested constructor applications over those.
bool derivable(const Knowledge& k, const Term& target, int depth);

/// A recipe showing how `target` is obtained, or null if it is not derivable.
nlohmann::json explain(const Knowledge& k, const Term& target, int depth);

/// Every derivable term of `sort` up to `depth`, deduplicated, in
/// lexicographic order of canonical serialization.
std::vector<Term> enumerate_recipes(const Knowledge& k, Sort sort, int depth,
                                    std::size_t cap = kDefaultRecipeCap);

/// Public constants of the signature (always derivable).
const std::vector<Term>& public_signature();

}  // namespace mtpsim
