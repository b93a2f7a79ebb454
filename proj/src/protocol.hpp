#pragma once

// Types shared by the role state machines: events, inputs, step results,
// input shapes for the explorer and deterministic name allocation.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "term.hpp"

namespace mtpsim {

struct Event {
  std::string name;
  std::vector<Term> args;

  nlohmann::json to_json() const;
  std::string to_string() const;
  Hash128 hash() const;
  friend bool operator==(const Event& a, const Event& b) {
    return a.name == b.name && a.args == b.args;
  }
};

Event event_from_json(const nlohmann::json& j);

// Claim submitted on the private out-of-band channel.
struct QrClaim {
  Term x, y, k;
  std::optional<Term> chat_id;
  friend bool operator==(const QrClaim&, const QrClaim&) = default;
};

// Confirmation returned by the out-of-band channel.
struct QrOk {
  Term x, y, k;
  std::optional<Term> chat_id;
  friend bool operator==(const QrOk&, const QrOk&) = default;
};

struct Start {};

using Input = std::variant<Start, Term, QrOk>;

enum class StepStatus { Ok, Discard, Failed, UniquenessFailure };

std::string_view status_name(StepStatus s);

template <typename State>
struct Step {
  State state;
  StepStatus status = StepStatus::Ok;
  std::vector<Term> outputs;
  std::vector<Event> events;
  std::vector<QrClaim> claims;
};

template <typename State>
Step<State> discard(const State& s) {
  return Step<State>{s, StepStatus::Discard, {}, {}, {}};
}

/// Deterministic fresh-name allocation: a name is identified by its owner's
/// base id and a slot number, so it does not depend on scheduling order.
struct NameSpace {
  std::uint64_t base = 0;
  std::string origin;

  Term make(std::uint64_t slot, Sort sort) const { return fresh(base + slot, sort, origin); }
};

/// Description of the inputs a role accepts in its current phase. The
/// explorer turns shapes into concrete candidate messages.
struct Shape {
  enum class Kind { Ignored, Exact, Any, OneOf, Tuple, SEnc, AEnc, HashOf, AnyHash, FingerprintOf };

  Kind kind = Kind::Ignored;
  Sort sort = Sort::Bitstring;
  Term term;                  // Exact / key of SEnc / public key of AEnc / argument of HashOf
  std::vector<Term> options;  // OneOf
  std::vector<Shape> items;   // Tuple items, or the single plaintext shape

  static Shape ignored() { return {}; }
  static Shape exact(Term t) {
    Shape s;
    s.kind = Kind::Exact;
    s.term = std::move(t);
    return s;
  }
  static Shape any(Sort sort) {
    Shape s;
    s.kind = Kind::Any;
    s.sort = sort;
    return s;
  }
  static Shape one_of(std::vector<Term> opts) {
    Shape s;
    s.kind = Kind::OneOf;
    s.options = std::move(opts);
    return s;
  }
  static Shape tuple(std::vector<Shape> items) {
    Shape s;
    s.kind = Kind::Tuple;
    s.items = std::move(items);
    return s;
  }
  static Shape senc(Shape plain, Term key) {
    Shape s;
    s.kind = Kind::SEnc;
    s.term = std::move(key);
    s.items = {std::move(plain)};
    return s;
  }
  static Shape aenc(Shape plain, Term pubkey) {
    Shape s;
    s.kind = Kind::AEnc;
    s.term = std::move(pubkey);
    s.items = {std::move(plain)};
    return s;
  }
  static Shape hash_of(Term t) {
    Shape s;
    s.kind = Kind::HashOf;
    s.term = std::move(t);
    return s;
  }
  // Any Hash(.) value; used where the receiver does not inspect the digest.
  static Shape any_hash() {
    Shape s;
    s.kind = Kind::AnyHash;
    return s;
  }
  static Shape fingerprint_of(Term t) {
    Shape s;
    s.kind = Kind::FingerprintOf;
    s.term = std::move(t);
    return s;
  }
};

bool shape_matches(const Shape& s, const Term& t);

// Helpers for destructuring received messages.
bool is_tuple(const Term& t, std::size_t arity);
bool is_elem(const Term& t);

struct HashBuilder {
  std::uint64_t lo = 0x243f6a8885a308d3ULL;
  std::uint64_t hi = 0x13198a2e03707344ULL;
  void add(std::uint64_t v);
  void add(const Hash128& h) {
    add(h.lo);
    add(h.hi);
  }
  void add(const Term& t) { t.valid() ? add(t.hash()) : add(std::uint64_t{0}); }
  void add(const std::string& s);
  Hash128 done() const { return {lo, hi}; }
};

}  // namespace mtpsim
