#include "term.hpp"

#include <algorithm>
#include <array>

namespace mtpsim {

namespace detail {

struct Node {
  Ctor ctor;
  Sort sort;
  std::uint64_t id = 0;
  std::string label;  // constant label or fresh-name origin
  DhQuality quality = DhQuality::Good;
  std::vector<Term> args;
  Hash128 hash;
  bool normal = true;  // built by smart constructors from normal arguments
};

}  // namespace detail

namespace {

constexpr std::array<std::string_view, 12> kSortNames = {
    "Nonce",   "PrivKey", "PubKey", "SharedKey",   "SessionKey", "TmpKey",
    "Element", "Principal", "ChatID", "Message", "Fingerprint", "Bitstring"};

constexpr std::array<std::string_view, 12> kCtorNames = {
    "Fresh", "Const", "Tuple", "PK",     "AEnc",   "SEnc",
    "DH",    "BadElem", "Hash", "Fingerprint", "TmpKey", "DHConfig"};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct HashBuilder {
  std::uint64_t lo, hi;
  explicit HashBuilder(std::uint64_t tag)
      : lo(splitmix(tag ^ 0x51ed270b2a3c1f17ULL)), hi(splitmix(tag ^ 0x2545f4914f6cdd1dULL)) {}
  void add(std::uint64_t v) {
    lo = splitmix(lo ^ (v + 0x9e3779b97f4a7c15ULL + (lo << 6) + (lo >> 2)));
    hi = splitmix(hi + (v ^ 0xc2b2ae3d27d4eb4fULL) * 0x165667b19e3779f9ULL);
  }
  void add(const Hash128& h) {
    add(h.lo);
    add(h.hi);
  }
  void add(std::string_view s) {
    add(fnv1a(s, 17));
    add(fnv1a(s, 91));
  }
  Hash128 done() const { return {lo, hi}; }
};

bool is_generator_sort(const Term& t) { return t.sort() == Sort::Element; }

}  // namespace

std::string_view sort_name(Sort s) { return kSortNames.at(static_cast<std::size_t>(s)); }

std::optional<Sort> sort_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kSortNames.size(); ++i) {
    if (kSortNames[i] == name) return static_cast<Sort>(i);
  }
  return std::nullopt;
}

std::string_view ctor_name(Ctor c) { return kCtorNames.at(static_cast<std::size_t>(c)); }

bool is_key_sort(Sort s) {
  return s == Sort::SharedKey || s == Sort::SessionKey || s == Sort::TmpKey || s == Sort::Element;
}

bool is_exponent_sort(Sort s) {
  return s == Sort::PrivKey || s == Sort::SharedKey || s == Sort::SessionKey;
}

Term make_node(Ctor c, Sort s, std::uint64_t id, std::string label, DhQuality q,
               std::vector<Term> args) {
  auto n = std::make_shared<detail::Node>();
  n->ctor = c;
  n->sort = s;
  n->id = id;
  n->label = std::move(label);
  n->quality = q;
  n->args = std::move(args);
  HashBuilder hb(static_cast<std::uint64_t>(c) * 131 + static_cast<std::uint64_t>(s));
  hb.add(id);
  hb.add(n->label);
  hb.add(static_cast<std::uint64_t>(q));
  hb.add(static_cast<std::uint64_t>(n->args.size()));
  for (const auto& a : n->args) {
    hb.add(a.hash());
    n->normal = n->normal && a.node_->normal;
  }
  n->hash = hb.done();
  return Term(std::move(n));
}

Ctor Term::ctor() const { return node_->ctor; }
Sort Term::sort() const { return node_->sort; }
std::uint64_t Term::fresh_id() const { return node_->id; }
const std::string& Term::origin() const { return node_->label; }
const std::string& Term::label() const { return node_->label; }
DhQuality Term::quality() const { return node_->quality; }
const std::vector<Term>& Term::args() const { return node_->args; }
bool Term::is_normal() const { return !node_ || node_->normal; }
const Hash128& Term::hash() const { return node_->hash; }

bool Term::is_attacker_fresh() const {
  return ctor() == Ctor::Fresh && origin() == "attacker";
}

std::vector<Term> Term::dh_exponents() const {
  return std::vector<Term>(args().begin() + 1, args().end());
}

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  if (!(a.node_->hash == b.node_->hash)) return false;
  return compare(a, b) == 0;
}

int compare(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return 0;
  if (!a.node_) return -1;
  if (!b.node_) return 1;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.ctor != y.ctor) return x.ctor < y.ctor ? -1 : 1;
  if (x.sort != y.sort) return x.sort < y.sort ? -1 : 1;
  if (x.id != y.id) return x.id < y.id ? -1 : 1;
  if (int c = x.label.compare(y.label); c != 0) return c < 0 ? -1 : 1;
  if (x.quality != y.quality) return x.quality < y.quality ? -1 : 1;
  if (x.args.size() != y.args.size()) return x.args.size() < y.args.size() ? -1 : 1;
  for (std::size_t i = 0; i < x.args.size(); ++i) {
    if (int c = compare(x.args[i], y.args[i]); c != 0) return c;
  }
  return 0;
}

nlohmann::json Term::to_json() const {
  using nlohmann::json;
  const auto& n = *node_;
  switch (n.ctor) {
    case Ctor::Fresh:
      return json{{"fresh", n.id}, {"sort", sort_name(n.sort)}, {"origin", n.label}};
    case Ctor::Const:
      return json{{"ctor", "Const"}, {"label", n.label}, {"sort", sort_name(n.sort)}};
    default:
      break;
  }
  json args = json::array();
  for (const auto& a : n.args) args.push_back(a.to_json());
  json j{{"ctor", ctor_name(n.ctor)}, {"args", std::move(args)}};
  if (n.ctor == Ctor::DHConfig) j["quality"] = n.quality == DhQuality::Good ? "Good" : "Bad";
  return j;
}

std::string Term::to_string() const { return to_json().dump(); }

std::string Term::pretty() const {
  if (!node_) return "<none>";
  const auto& n = *node_;
  switch (n.ctor) {
    case Ctor::Fresh:
      return std::string(sort_name(n.sort)) + "#" + std::to_string(n.id) + "@" + n.label;
    case Ctor::Const:
      return n.label;
    case Ctor::BadElem:
      return "BadElem";
    case Ctor::DH: {
      std::string out = n.args[0].pretty();
      for (std::size_t i = 1; i < n.args.size(); ++i) out += "^" + n.args[i].pretty();
      return out;
    }
    default:
      break;
  }
  std::string out = std::string(ctor_name(n.ctor)) + "(";
  for (std::size_t i = 0; i < n.args.size(); ++i) out += (i ? ", " : "") + n.args[i].pretty();
  return out + ")";
}

// ---------------------------------------------------------------------------

Term fresh(std::uint64_t id, Sort sort, std::string origin) {
  return make_node(Ctor::Fresh, sort, id, std::move(origin), DhQuality::Good, {});
}

Term constant(std::string label, Sort sort) {
  return make_node(Ctor::Const, sort, 0, std::move(label), DhQuality::Good, {});
}

Term tuple(std::vector<Term> items) {
  return make_node(Ctor::Tuple, Sort::Bitstring, 0, {}, DhQuality::Good, std::move(items));
}

Term pk(const Term& sk) {
  if (sk.sort() != Sort::PrivKey) throw SortError("PK expects a PrivKey");
  return make_node(Ctor::PK, Sort::PubKey, 0, {}, DhQuality::Good, {sk});
}

Term aenc(const Term& plain, const Term& key) {
  if (key.sort() != Sort::PubKey) throw SortError("AEnc expects a PubKey");
  return make_node(Ctor::AEnc, Sort::Bitstring, 0, {}, DhQuality::Good, {plain, key});
}

Term senc(const Term& plain, const Term& key, const Term& nonce) {
  if (!is_key_sort(key.sort())) throw SortError("SEnc key has a non-key sort");
  if (nonce.sort() != Sort::Nonce) throw SortError("SEnc expects a Nonce");
  return make_node(Ctor::SEnc, Sort::Bitstring, 0, {}, DhQuality::Good, {plain, key, nonce});
}

Term bad_elem() {
  static const Term t = make_node(Ctor::BadElem, Sort::Element, 0, {}, DhQuality::Bad, {});
  return t;
}

Term hash(const Term& arg) {
  return make_node(Ctor::Hash, Sort::Bitstring, 0, {}, DhQuality::Good, {arg});
}

Term fingerprint(const Term& arg) {
  return make_node(Ctor::Fingerprint, Sort::Fingerprint, 0, {}, DhQuality::Good, {arg});
}

Term tmp_key(const Term& ns, const Term& nk) {
  if (ns.sort() != Sort::Nonce || nk.sort() != Sort::Nonce) throw SortError("TmpKey expects Nonces");
  return make_node(Ctor::TmpKey, Sort::TmpKey, 0, {}, DhQuality::Good, {ns, nk});
}

Term dh_config(const Term& g, const Term& p) {
  if (g.sort() != Sort::Element) throw SortError("DHConfig generator must be an Element");
  if (p.ctor() != Ctor::Const) throw SortError("DHConfig modulus must be a public constant");
  const bool bad = g.ctor() == Ctor::BadElem || p == pub::p_bad();
  return make_node(Ctor::DHConfig, Sort::Bitstring, 0, {}, bad ? DhQuality::Bad : DhQuality::Good,
                   {g, p});
}

namespace {

void check_exponent(const Term& e) {
  if (e.ctor() != Ctor::Fresh || !is_exponent_sort(e.sort()))
    throw SortError("DH exponent must be a fresh key-material name");
}

Term dh_canonical(const Term& base, std::vector<Term> exps) {
  if (base.ctor() == Ctor::BadElem) return bad_elem();
  std::sort(exps.begin(), exps.end(), [](const Term& a, const Term& b) {
    if (a.fresh_id() != b.fresh_id()) return a.fresh_id() < b.fresh_id();
    return compare(a, b) < 0;
  });
  std::vector<Term> args;
  args.reserve(exps.size() + 1);
  args.push_back(base);
  for (auto& e : exps) args.push_back(std::move(e));
  return make_node(Ctor::DH, Sort::Element, 0, {}, DhQuality::Good, std::move(args));
}

}  // namespace

Term dh_combine(const Term& base, const Term& exp) {
  check_exponent(exp);
  if (!is_generator_sort(base)) throw SortError("DH base must be an Element");
  if (base.ctor() == Ctor::BadElem) return bad_elem();
  if (base.ctor() == Ctor::DH) {
    auto exps = base.dh_exponents();
    exps.push_back(exp);
    return dh_canonical(base.dh_base(), std::move(exps));
  }
  return dh_canonical(base, {exp});
}

Term dh_raw(const Term& base, std::vector<Term> exps) {
  if (!is_generator_sort(base)) throw SortError("DH base must be an Element");
  for (const auto& e : exps) check_exponent(e);
  std::vector<Term> args;
  args.push_back(base);
  for (auto& e : exps) args.push_back(std::move(e));
  Term raw = make_node(Ctor::DH, Sort::Element, 0, {}, DhQuality::Good, std::move(args));
  const_cast<detail::Node&>(*raw.node_).normal = false;
  return raw;
}

Term normalize(const Term& t) {
  if (t.is_normal()) return t;
  switch (t.ctor()) {
    case Ctor::Fresh:
    case Ctor::Const:
    case Ctor::BadElem:
      return t;
    case Ctor::Tuple: {
      std::vector<Term> items;
      items.reserve(t.arity());
      for (const auto& a : t.args()) items.push_back(normalize(a));
      return tuple(std::move(items));
    }
    case Ctor::PK:
      return pk(normalize(t.arg(0)));
    case Ctor::AEnc:
      return aenc(normalize(t.arg(0)), normalize(t.arg(1)));
    case Ctor::SEnc:
      return senc(normalize(t.arg(0)), normalize(t.arg(1)), normalize(t.arg(2)));
    case Ctor::Hash:
      return hash(normalize(t.arg(0)));
    case Ctor::Fingerprint:
      return fingerprint(normalize(t.arg(0)));
    case Ctor::TmpKey:
      return tmp_key(normalize(t.arg(0)), normalize(t.arg(1)));
    case Ctor::DHConfig:
      return dh_config(normalize(t.arg(0)), normalize(t.arg(1)));
    case Ctor::DH: {
      Term acc = normalize(t.dh_base());
      for (const auto& e : t.dh_exponents()) acc = dh_combine(acc, e);
      return acc;
    }
  }
  return t;
}

bool term_equal(const Term& s, const Term& t) { return normalize(s) == normalize(t); }

Decrypted decrypt_sym(const Term& c, const Term& k) {
  if (c.ctor() != Ctor::SEnc) return {Term{}, DecryptError::NotACiphertext};
  if (!term_equal(c.arg(1), k)) return {Term{}, DecryptError::KeyMismatch};
  return {c.arg(0), DecryptError::None};
}

Decrypted decrypt_asym(const Term& c, const Term& sk) {
  if (c.ctor() != Ctor::AEnc) return {Term{}, DecryptError::NotACiphertext};
  const Term& key = c.arg(1);
  if (key.ctor() != Ctor::PK || !term_equal(key.arg(0), sk)) return {Term{}, DecryptError::KeyMismatch};
  return {c.arg(0), DecryptError::None};
}

Term term_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SortError("term JSON must be an object");
  auto sort_of = [](const nlohmann::json& v) {
    auto s = sort_from_name(v.get<std::string>());
    if (!s) throw SortError("unknown sort " + v.get<std::string>());
    return *s;
  };
  if (j.contains("fresh")) {
    return fresh(j.at("fresh").get<std::uint64_t>(), sort_of(j.at("sort")),
                 j.at("origin").get<std::string>());
  }
  const auto name = j.at("ctor").get<std::string>();
  if (name == "Const") return constant(j.at("label").get<std::string>(), sort_of(j.at("sort")));
  std::vector<Term> args;
  if (j.contains("args")) {
    for (const auto& a : j.at("args")) args.push_back(term_from_json(a));
  }
  return apply_ctor(name, std::move(args));
}

Term apply_ctor(const std::string& name, std::vector<Term> args) {
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw SortError(name + " expects " + std::to_string(n) + " arguments");
  };
  if (name == "Tuple") return tuple(std::move(args));
  if (name == "PK") {
    need(1);
    return pk(args[0]);
  }
  if (name == "AEnc") {
    need(2);
    return aenc(args[0], args[1]);
  }
  if (name == "SEnc") {
    need(3);
    return senc(args[0], args[1], args[2]);
  }
  if (name == "BadElem") return bad_elem();
  if (name == "Hash") {
    need(1);
    return hash(args[0]);
  }
  if (name == "Fingerprint") {
    need(1);
    return fingerprint(args[0]);
  }
  if (name == "TmpKey") {
    need(2);
    return tmp_key(args[0], args[1]);
  }
  if (name == "DHConfig") {
    need(2);
    return dh_config(args[0], args[1]);
  }
  if (name == "DH") {
    if (args.empty()) throw SortError("DH needs a base");
    Term base = args[0];
    args.erase(args.begin());
    return normalize(dh_raw(base, std::move(args)));
  }
  throw SortError("unknown constructor " + name);
}

namespace pub {

Term g() {
  static const Term t = constant("g", Sort::Element);
  return t;
}
Term p_good() {
  static const Term t = constant("p", Sort::Bitstring);
  return t;
}
Term p_bad() {
  static const Term t = constant("p_bad", Sort::Bitstring);
  return t;
}
Term qr() {
  static const Term t = constant("qr", Sort::Bitstring);
  return t;
}
Term q() {
  static const Term t = constant("q", Sort::Bitstring);
  return t;
}
Term r() {
  static const Term t = constant("r", Sort::Bitstring);
  return t;
}
Term bot() {
  static const Term t = constant("bot", Sort::Bitstring);
  return t;
}
Term dh_good() {
  static const Term t = dh_config(g(), p_good());
  return t;
}
Term dh_bad() {
  static const Term t = dh_config(bad_elem(), p_bad());
  return t;
}
Term principal(const std::string& name) { return constant(name, Sort::Principal); }

std::optional<Term> by_name(std::string_view label) {
  if (label == "g") return g();
  if (label == "p") return p_good();
  if (label == "p_bad") return p_bad();
  if (label == "qr") return qr();
  if (label == "q") return q();
  if (label == "r") return r();
  if (label == "bot") return bot();
  if (label == "dh_good") return dh_good();
  if (label == "dh_bad") return dh_bad();
  if (label == "BadElem") return bad_elem();
  return std::nullopt;
}

}  // namespace pub

}  // namespace mtpsim
