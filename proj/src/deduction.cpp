#include "deduction.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

namespace mtpsim {

namespace {

constexpr std::uint64_t kAttackerIdBase = 1;

bool exponent_less(const Term& a, const Term& b) {
  if (a.fresh_id() != b.fresh_id()) return a.fresh_id() < b.fresh_id();
  return compare(a, b) < 0;
}

bool atom_known(const Knowledge& k, const Term& t) {
  if (k.contains(t)) return true;
  switch (t.ctor()) {
    case Ctor::Const:
    case Ctor::BadElem:
      return true;
    case Ctor::Fresh:
      return t.is_attacker_fresh();
    default:
      return false;
  }
}

// Exponents of `whole` not covered by `part`, or nullopt when `part` is not a
// sub-multiset of `whole`. Both inputs are canonically sorted.
std::optional<std::vector<Term>> multiset_rest(const std::vector<Term>& whole,
                                               const std::vector<Term>& part) {
  if (!std::includes(whole.begin(), whole.end(), part.begin(), part.end(), exponent_less))
    return std::nullopt;
  std::vector<Term> rest;
  std::set_difference(whole.begin(), whole.end(), part.begin(), part.end(),
                      std::back_inserter(rest), exponent_less);
  return rest;
}

struct DhSource {
  Term from;  // base or known DH fact
  std::vector<Term> rest;
};

std::optional<DhSource> dh_source(const Knowledge& k, const Term& t, int depth) {
  if (depth <= 0) return std::nullopt;
  const auto exps = t.dh_exponents();
  auto all_known = [&](const std::vector<Term>& rest) {
    return std::all_of(rest.begin(), rest.end(), [&](const Term& e) { return atom_known(k, e); });
  };
  if (atom_known(k, t.dh_base()) && static_cast<int>(exps.size()) <= depth && all_known(exps))
    return DhSource{t.dh_base(), exps};
  for (const auto& f : k.facts()) {
    if (f.ctor() != Ctor::DH || f.dh_base() != t.dh_base()) continue;
    auto rest = multiset_rest(exps, f.dh_exponents());
    if (!rest || rest->empty() || static_cast<int>(rest->size()) > depth) continue;
    if (all_known(*rest)) return DhSource{f, std::move(*rest)};
  }
  return std::nullopt;
}

}  // namespace

Term attacker_fresh(Sort s) {
  return fresh(kAttackerIdBase + static_cast<std::uint64_t>(s), s, "attacker");
}

const std::vector<Term>& public_signature() {
  static const std::vector<Term> sig = {pub::g(),  bad_elem(), pub::p_good(), pub::p_bad(),
                                        pub::qr(), pub::q(),   pub::r(),      pub::bot()};
  return sig;
}

namespace {

bool hash_less(const Hash128& a, const Hash128& b) { return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi; }

}  // namespace

Knowledge::Knowledge() : d_(std::make_shared<const Data>()) {}

Knowledge::Knowledge(const std::vector<Term>& facts) : Knowledge() {
  for (const auto& f : facts) insert(f);
  mut().added.clear();
}

Knowledge::Data& Knowledge::mut() {
  if (d_.use_count() != 1) d_ = std::make_shared<const Data>(*d_);
  return const_cast<Data&>(*d_);
}

bool Knowledge::contains(const Term& t) const {
  const auto& v = d_->by_hash;
  auto it = std::lower_bound(v.begin(), v.end(), t.hash(),
                             [](const auto& e, const Hash128& h) { return hash_less(e.first, h); });
  for (; it != v.end() && it->first == t.hash(); ++it)
    if (it->second == t) return true;
  return false;
}

bool Knowledge::insert(const Term& t) {
  Term n = normalize(t);
  if (contains(n)) return false;
  Data& d = mut();
  auto pos = std::lower_bound(d.facts.begin(), d.facts.end(), n,
                              [](const Term& a, const Term& b) { return compare(a, b) < 0; });
  d.facts.insert(pos, n);
  auto hpos = std::upper_bound(d.by_hash.begin(), d.by_hash.end(), n.hash(),
                               [](const Hash128& h, const auto& e) { return hash_less(h, e.first); });
  d.by_hash.insert(hpos, {n.hash(), n});
  d.added.push_back(std::move(n));
  d.analyzed = false;
  return true;
}

Knowledge Knowledge::with(const std::vector<Term>& more) const {
  Knowledge out = *this;
  const bool was_closed = d_->analyzed || d_->incremental;
  bool any = false;
  for (const auto& t : more) any = out.insert(t) || any;
  if (any) {
    Data& d = out.mut();
    d.incremental = was_closed;
    d.analyzed = false;
  }
  return out;
}

Hash128 Knowledge::digest() const {
  std::uint64_t lo = 0x6a09e667f3bcc908ULL, hi = 0xbb67ae8584caa73bULL;
  for (const auto& f : d_->facts) {
    lo = (lo ^ f.hash().lo) * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL;
    hi = (hi + f.hash().hi) * 0xff51afd7ed558ccdULL ^ (hi >> 29);
  }
  return {lo, hi};
}

// Worklist closure: components of new facts are added directly; encryptions
// wait in `sealed` until their key becomes derivable.
Knowledge close(const Knowledge& k, int depth) {
  if (k.analyzed()) return k;
  Knowledge out = k;
  Knowledge::Data& d = out.mut();
  std::vector<Term> work;
  std::vector<Term> sealed;
  if (d.incremental) {
    work = d.added;
    sealed = d.sealed;
  } else {
    work = d.facts;
  }
  d.added.clear();
  for (;;) {
    while (!work.empty()) {
      const Term f = std::move(work.back());
      work.pop_back();
      switch (f.ctor()) {
        case Ctor::Tuple:
        case Ctor::DHConfig:
          for (const auto& a : f.args())
            if (out.insert(a)) work.push_back(a);
          break;
        case Ctor::SEnc:
        case Ctor::AEnc:
          sealed.push_back(f);
          break;
        default:
          break;
      }
    }
    bool opened = false;
    for (std::size_t i = 0; i < sealed.size();) {
      const Term& f = sealed[i];
      const bool key = f.ctor() == Ctor::SEnc
                           ? derivable(out, f.arg(1), depth)
                           : f.arg(1).ctor() == Ctor::PK && derivable(out, f.arg(1).arg(0), depth);
      if (!key) {
        ++i;
        continue;
      }
      if (out.insert(f.arg(0))) work.push_back(f.arg(0));
      sealed.erase(sealed.begin() + static_cast<std::ptrdiff_t>(i));
      opened = true;
    }
    if (!opened && work.empty()) break;
  }
  Knowledge::Data& fin = out.mut();
  std::sort(sealed.begin(), sealed.end());
  fin.sealed = std::move(sealed);
  fin.added.clear();
  fin.analyzed = true;
  fin.incremental = false;
  return out;
}

bool derivable(const Knowledge& k, const Term& target, int depth) {
  if (k.contains(target)) return true;
  switch (target.ctor()) {
    case Ctor::Const:
    case Ctor::BadElem:
      return true;
    case Ctor::Fresh:
      return target.is_attacker_fresh();
    case Ctor::DH:
      return dh_source(k, target, depth).has_value();
    default:
      break;
  }
  if (depth <= 0) return false;
  return std::all_of(target.args().begin(), target.args().end(),
                     [&](const Term& a) { return derivable(k, a, depth - 1); });
}

nlohmann::json explain(const Knowledge& k, const Term& target, int depth) {
  using nlohmann::json;
  if (k.contains(target)) return json{{"known", target.to_json()}};
  switch (target.ctor()) {
    case Ctor::Const:
    case Ctor::BadElem:
      return json{{"public", target.to_json()}};
    case Ctor::Fresh:
      return target.is_attacker_fresh() ? json{{"attacker_fresh", target.to_json()}} : json();
    case Ctor::DH: {
      auto src = dh_source(k, target, depth);
      if (!src) return json();
      json by = json::array();
      for (const auto& e : src->rest) by.push_back(explain(k, e, 0));
      return json{{"exp", {{"from", explain(k, src->from, 0)}, {"by", std::move(by)}}}};
    }
    default:
      break;
  }
  if (depth <= 0) return json();
  json args = json::array();
  for (const auto& a : target.args()) {
    auto r = explain(k, a, depth - 1);
    if (r.is_null()) return json();
    args.push_back(std::move(r));
  }
  return json{{"apply", ctor_name(target.ctor())}, {"args", std::move(args)}};
}

namespace {

constexpr Sort kAllSorts[] = {Sort::Nonce,      Sort::PrivKey, Sort::PubKey,    Sort::SharedKey,
                              Sort::SessionKey, Sort::TmpKey,  Sort::Element,   Sort::Principal,
                              Sort::ChatID,     Sort::Message, Sort::Fingerprint, Sort::Bitstring};

class RecipeEnumerator {
 public:
  RecipeEnumerator(const Knowledge& k, std::size_t cap) : k_(k), cap_(cap) {}

  const std::vector<Term>& level(Sort s, int d) {
    auto key = std::make_pair(s, d);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Bucket b;
    if (d == 0) {
      for (const auto& f : k_.facts())
        if (f.sort() == s) b.add(f, cap_);
      for (const auto& c : public_signature())
        if (c.sort() == s) b.add(c, cap_);
      b.add(attacker_fresh(s), cap_);
    } else {
      for (const auto& t : level(s, d - 1)) b.add(t, cap_);
      apply_constructors(s, d, b);
    }
    return memo_.emplace(key, std::move(b.items)).first->second;
  }

 private:
  struct Bucket {
    std::vector<Term> items;
    std::unordered_set<Term, TermHasher> seen;
    void add(const Term& t, std::size_t cap) {
      if (seen.insert(t).second) {
        if (items.size() >= cap)
          throw BoundsExceeded("recipe enumeration exceeded cap of " + std::to_string(cap));
        items.push_back(t);
      }
    }
  };

  std::vector<Term> all(int d) {
    std::vector<Term> out;
    for (Sort s : kAllSorts) {
      const auto& l = level(s, d);
      out.insert(out.end(), l.begin(), l.end());
    }
    return out;
  }

  std::vector<Term> exponents() {
    std::vector<Term> out;
    for (Sort s : {Sort::PrivKey, Sort::SharedKey, Sort::SessionKey}) {
      for (const auto& t : level(s, 0))
        if (t.ctor() == Ctor::Fresh) out.push_back(t);
    }
    return out;
  }

  void apply_constructors(Sort s, int d, Bucket& b) {
    switch (s) {
      case Sort::Element: {
        const auto exps = exponents();
        for (const auto& e : level(Sort::Element, d - 1)) {
          if (e.ctor() == Ctor::BadElem) continue;
          for (const auto& x : exps) b.add(dh_combine(e, x), cap_);
        }
        break;
      }
      case Sort::PubKey:
        for (const auto& sk : level(Sort::PrivKey, d - 1)) b.add(pk(sk), cap_);
        break;
      case Sort::TmpKey: {
        const auto& ns = level(Sort::Nonce, d - 1);
        for (const auto& a : ns)
          for (const auto& c : ns) b.add(tmp_key(a, c), cap_);
        break;
      }
      case Sort::Fingerprint:
        for (const auto& x : all(d - 1)) b.add(fingerprint(x), cap_);
        break;
      case Sort::Bitstring: {
        const auto any = all(d - 1);
        for (const auto& x : any) b.add(hash(x), cap_);
        for (const auto& x : any)
          for (const auto& y : any) b.add(tuple({x, y}), cap_);
        std::vector<Term> keys;
        for (Sort ks : {Sort::SharedKey, Sort::SessionKey, Sort::TmpKey, Sort::Element}) {
          const auto& l = level(ks, d - 1);
          keys.insert(keys.end(), l.begin(), l.end());
        }
        const auto& nonces = level(Sort::Nonce, d - 1);
        for (const auto& m : any)
          for (const auto& key : keys)
            for (const auto& n : nonces) b.add(senc(m, key, n), cap_);
        for (const auto& pubkey : level(Sort::PubKey, d - 1))
          for (const auto& m : any) b.add(aenc(m, pubkey), cap_);
        for (const auto& gen : level(Sort::Element, d - 1))
          for (const auto& p : level(Sort::Bitstring, 0))
            if (p.ctor() == Ctor::Const) b.add(dh_config(gen, p), cap_);
        break;
      }
      default:
        break;
    }
  }

  const Knowledge& k_;
  std::size_t cap_;
  std::map<std::pair<Sort, int>, std::vector<Term>> memo_;
};

}  // namespace

std::vector<Term> enumerate_recipes(const Knowledge& k, Sort sort, int depth, std::size_t cap) {
  RecipeEnumerator en(k, cap);
  std::vector<Term> out = en.level(sort, std::max(depth, 0));
  std::vector<std::pair<std::string, Term>> keyed;
  keyed.reserve(out.size());
  for (auto& t : out) keyed.emplace_back(t.to_string(), std::move(t));
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out.clear();
  for (auto& kv : keyed) out.push_back(std::move(kv.second));
  return out;
}

}  // namespace mtpsim
