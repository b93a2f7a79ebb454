#include "protocol.hpp"

namespace mtpsim {

nlohmann::json Event::to_json() const {
  nlohmann::json args_json = nlohmann::json::array();
  for (const auto& a : args) args_json.push_back(a.to_json());
  return {{"event", name}, {"args", std::move(args_json)}};
}

std::string Event::to_string() const {
  std::string out = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i].pretty();
  }
  return out + ")";
}

Hash128 Event::hash() const {
  HashBuilder hb;
  hb.add(name);
  for (const auto& a : args) hb.add(a);
  return hb.done();
}

Event event_from_json(const nlohmann::json& j) {
  Event e;
  e.name = j.at("event").get<std::string>();
  for (const auto& a : j.at("args")) e.args.push_back(term_from_json(a));
  return e;
}

std::string_view status_name(StepStatus s) {
  switch (s) {
    case StepStatus::Ok:
      return "Ok";
    case StepStatus::Discard:
      return "Discard";
    case StepStatus::Failed:
      return "Failed";
    case StepStatus::UniquenessFailure:
      return "UniquenessFailure";
  }
  return "?";
}

bool is_tuple(const Term& t, std::size_t arity) {
  return t.ctor() == Ctor::Tuple && t.arity() == arity;
}

bool is_elem(const Term& t) { return t.sort() == Sort::Element; }

bool shape_matches(const Shape& s, const Term& t) {
  switch (s.kind) {
    case Shape::Kind::Ignored:
      return false;
    case Shape::Kind::Exact:
      return t == s.term;
    case Shape::Kind::Any:
      return t.sort() == s.sort;
    case Shape::Kind::OneOf:
      for (const auto& o : s.options)
        if (o == t) return true;
      return false;
    case Shape::Kind::Tuple:
      if (!is_tuple(t, s.items.size())) return false;
      for (std::size_t i = 0; i < s.items.size(); ++i)
        if (!shape_matches(s.items[i], t.arg(i))) return false;
      return true;
    case Shape::Kind::SEnc:
      return t.ctor() == Ctor::SEnc && t.arg(1) == s.term && shape_matches(s.items[0], t.arg(0));
    case Shape::Kind::AEnc:
      return t.ctor() == Ctor::AEnc && t.arg(1) == s.term && shape_matches(s.items[0], t.arg(0));
    case Shape::Kind::HashOf:
      return t == hash(s.term);
    case Shape::Kind::AnyHash:
      return t.ctor() == Ctor::Hash;
    case Shape::Kind::FingerprintOf:
      return t == fingerprint(s.term);
  }
  return false;
}

void HashBuilder::add(std::uint64_t v) {
  lo ^= v + 0x9e3779b97f4a7c15ULL + (lo << 6) + (lo >> 2);
  lo *= 0xff51afd7ed558ccdULL;
  hi = (hi ^ v) * 0x100000001b3ULL;
  hi ^= hi >> 31;
}

void HashBuilder::add(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  add(h);
  add(static_cast<std::uint64_t>(s.size()));
}

}  // namespace mtpsim
