#pragma once

// Symbolic message algebra: sorts, constructors, destructor rules and a
// canonical normal form.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mtpsim {

enum class Sort : std::uint8_t {
  Nonce,
  PrivKey,
  PubKey,
  SharedKey,
  SessionKey,
  TmpKey,
  Element,
  Principal,
  ChatID,
  Message,
  Fingerprint,
  Bitstring,
};

enum class Ctor : std::uint8_t {
  Fresh,
  Const,
  Tuple,
  PK,
  AEnc,
  SEnc,
  DH,
  BadElem,
  Hash,
  Fingerprint,
  TmpKey,
  DHConfig,
};

enum class DhQuality : std::uint8_t { Good, Bad };

std::string_view sort_name(Sort s);
std::optional<Sort> sort_from_name(std::string_view name);
std::string_view ctor_name(Ctor c);

class SortError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Term;

namespace detail {
struct Node;
}

struct Hash128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  friend bool operator==(const Hash128&, const Hash128&) = default;
};

/// Immutable symbolic term. Copies share structure.
class Term {
 public:
  Term() = default;

  Ctor ctor() const;
  Sort sort() const;
  bool valid() const { return static_cast<bool>(node_); }

  // Fresh names.
  std::uint64_t fresh_id() const;
  const std::string& origin() const;
  // Public constants.
  const std::string& label() const;
  // DHConfig.
  DhQuality quality() const;

  // Children in constructor order. For DH: base followed by the sorted
  // exponent multiset.
  const std::vector<Term>& args() const;
  const Term& arg(std::size_t i) const { return args().at(i); }
  std::size_t arity() const { return args().size(); }

  const Hash128& hash() const;
  bool is_atom() const {
    return ctor() == Ctor::Fresh || ctor() == Ctor::Const || ctor() == Ctor::BadElem;
  }
  bool is_attacker_fresh() const;
  bool is_normal() const;

  // DH accessors; only valid when ctor() == Ctor::DH.
  const Term& dh_base() const { return arg(0); }
  std::vector<Term> dh_exponents() const;

  friend bool operator==(const Term& a, const Term& b);
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }
  // Deterministic structural total order.
  friend int compare(const Term& a, const Term& b);
  friend bool operator<(const Term& a, const Term& b) { return compare(a, b) < 0; }

  /// Canonical JSON text; equal normal forms give identical text.
  std::string to_string() const;
  nlohmann::json to_json() const;
  // Compact human-readable rendering for reports.
  std::string pretty() const;

 private:
  explicit Term(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const detail::Node> node_;

  friend Term make_node(Ctor, Sort, std::uint64_t, std::string, DhQuality, std::vector<Term>);
  friend Term dh_raw(const Term& base, std::vector<Term> exps);
};

struct TermHasher {
  std::size_t operator()(const Term& t) const { return static_cast<std::size_t>(t.hash().lo); }
};

Term make_node(Ctor c, Sort s, std::uint64_t id, std::string label, DhQuality q,
               std::vector<Term> args);

// Smart constructors. All return terms in normal form and throw SortError on
// ill-sorted arguments.
Term fresh(std::uint64_t id, Sort sort, std::string origin);
Term constant(std::string label, Sort sort);
Term tuple(std::vector<Term> items);
Term pk(const Term& sk);
Term aenc(const Term& plain, const Term& key);
Term senc(const Term& plain, const Term& key, const Term& nonce);
Term bad_elem();
Term hash(const Term& arg);
Term fingerprint(const Term& arg);
Term tmp_key(const Term& ns, const Term& nk);
Term dh_config(const Term& g, const Term& p);
Term dh_combine(const Term& base, const Term& exp);

// Raw DH node exactly as given (unsorted exponents, BadElem base allowed).
// Only normalize() should be expected to accept these.
Term dh_raw(const Term& base, std::vector<Term> exps);

Term normalize(const Term& t);
bool term_equal(const Term& s, const Term& t);

bool is_key_sort(Sort s);
bool is_exponent_sort(Sort s);

enum class DecryptError { None, KeyMismatch, NotACiphertext };

struct Decrypted {
  Term plain;
  DecryptError error = DecryptError::None;
  bool ok() const { return error == DecryptError::None; }
};

Decrypted decrypt_sym(const Term& c, const Term& k);
Decrypted decrypt_asym(const Term& c, const Term& sk);

/// Parses the canonical JSON form back into a normalized term.
Term term_from_json(const nlohmann::json& j);

/// Applies a non-atomic constructor by its JSON name ("Tuple", "SEnc", ...).
Term apply_ctor(const std::string& name, std::vector<Term> args);

namespace pub {
// Public constants shared by every protocol model.
Term g();
Term p_good();
Term p_bad();
Term qr();
Term q();
Term r();
Term bot();
Term dh_good();
Term dh_bad();
Term principal(const std::string& name);
// Looks up a constant of the signature by label ("g", "bot", "dh_good", ...).
std::optional<Term> by_name(std::string_view label);
}  // namespace pub

}  // namespace mtpsim

template <>
struct std::hash<mtpsim::Term> {
  std::size_t operator()(const mtpsim::Term& t) const { return mtpsim::TermHasher{}(t); }
};
