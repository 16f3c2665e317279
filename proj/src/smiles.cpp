//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/smiles.hpp"

#include <cctype>
#include <map>

namespace aromma {

namespace {

bool is_bond_char(char c) {
  return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\';
}

bool is_aromatic_organic(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

// Scans one bracket atom starting at the '[' in s[pos]; returns the position
// one past the closing ']'.
std::size_t scan_bracket_atom(std::string_view s, std::size_t pos) {
  const std::size_t open = pos;
  ++pos;  // '['
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;  // isotope
  if (pos >= s.size()) throw ParseError(ParseError::Kind::UnbalancedBracket, open, "unterminated bracket atom");
  // Element symbol: uppercase + optional lowercase, or a lone aromatic atom.
  if (std::isupper(static_cast<unsigned char>(s[pos]))) {
    ++pos;
    if (pos < s.size() && std::islower(static_cast<unsigned char>(s[pos]))) ++pos;
  } else if (is_aromatic_organic(s[pos])) {
    ++pos;
  } else {
    throw ParseError(ParseError::Kind::UnknownSymbol, pos, "expected element symbol in bracket atom");
  }
  while (pos < s.size() && s[pos] == '@') ++pos;  // chirality, stripped later
  if (pos < s.size() && s[pos] == 'H') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const char sign = s[pos];
    ++pos;
    if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    } else {
      while (pos < s.size() && s[pos] == sign) ++pos;
    }
  }
  if (pos < s.size() && s[pos] == ':') {
    ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  if (pos >= s.size() || s[pos] != ']')
    throw ParseError(pos >= s.size() ? ParseError::Kind::UnbalancedBracket
                                     : ParseError::Kind::UnknownSymbol,
                     pos >= s.size() ? open : pos,
                     pos >= s.size() ? "unterminated bracket atom"
                                     : "unexpected character in bracket atom");
  return pos + 1;
}

// Single scanning pass shared by validate, strip_stereo, and tokenize so all
// three agree on exactly one acceptance predicate.
std::vector<Token> scan(std::string_view s) {
  std::vector<Token> tokens;
  std::size_t paren_depth = 0;
  std::size_t last_open_paren = 0;
  std::map<int, std::size_t> open_rings;  // ring number -> opener position

  std::size_t pos = 0;
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == '[') {
      const std::size_t end = scan_bracket_atom(s, pos);
      tokens.push_back({Token::Kind::BracketAtom, std::string(s.substr(pos, end - pos)), pos});
      pos = end;
    } else if (c == 'C' && pos + 1 < s.size() && s[pos + 1] == 'l') {
      tokens.push_back({Token::Kind::OrganicAtom, "Cl", pos});
      pos += 2;
    } else if (c == 'B' && pos + 1 < s.size() && s[pos + 1] == 'r') {
      tokens.push_back({Token::Kind::OrganicAtom, "Br", pos});
      pos += 2;
    } else if (c == 'B' || c == 'C' || c == 'N' || c == 'O' || c == 'P' || c == 'S' ||
               c == 'F' || c == 'I') {
      tokens.push_back({Token::Kind::OrganicAtom, std::string(1, c), pos});
      ++pos;
    } else if (is_aromatic_organic(c)) {
      tokens.push_back({Token::Kind::AromaticAtom, std::string(1, c), pos});
      ++pos;
    } else if (is_bond_char(c)) {
      tokens.push_back({Token::Kind::Bond, std::string(1, c), pos});
      ++pos;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      const int ring = c - '0';
      auto it = open_rings.find(ring);
      if (it == open_rings.end())
        open_rings.emplace(ring, pos);
      else
        open_rings.erase(it);
      tokens.push_back({Token::Kind::RingClosure, std::string(1, c), pos});
      ++pos;
    } else if (c == '%') {
      if (pos + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[pos + 2])))
        throw ParseError(ParseError::Kind::UnknownSymbol, pos, "'%' must be followed by two digits");
      const int ring = (s[pos + 1] - '0') * 10 + (s[pos + 2] - '0');
      auto it = open_rings.find(ring);
      if (it == open_rings.end())
        open_rings.emplace(ring, pos);
      else
        open_rings.erase(it);
      tokens.push_back({Token::Kind::RingClosure, std::string(s.substr(pos, 3)), pos});
      pos += 3;
    } else if (c == '(') {
      ++paren_depth;
      last_open_paren = pos;
      tokens.push_back({Token::Kind::BranchOpen, "(", pos});
      ++pos;
    } else if (c == ')') {
      if (paren_depth == 0)
        throw ParseError(ParseError::Kind::UnbalancedBracket, pos, "unmatched ')'");
      --paren_depth;
      tokens.push_back({Token::Kind::BranchClose, ")", pos});
      ++pos;
    } else if (c == '.') {
      tokens.push_back({Token::Kind::Dot, ".", pos});
      ++pos;
    } else if (c == ']') {
      throw ParseError(ParseError::Kind::UnbalancedBracket, pos, "unmatched ']'");
    } else {
      throw ParseError(ParseError::Kind::UnknownSymbol, pos, "unknown symbol");
    }
  }
  if (paren_depth != 0)
    throw ParseError(ParseError::Kind::UnbalancedBracket, last_open_paren, "unmatched '('");
  if (!open_rings.empty())
    throw ParseError(ParseError::Kind::UnpairedRingBond, open_rings.begin()->second,
                     "ring bond never closes");
  return tokens;
}

std::string_view trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string TokenStream::joined() const {
  std::string out;
  for (const Token& t : tokens) out += t.text;
  return out;
}

Smiles strip_stereo(std::string_view raw) {
  const std::string_view s = trimmed(raw);
  const std::vector<Token> tokens = scan(s);
  std::string out;
  out.reserve(s.size());
  for (const Token& t : tokens) {
    if (t.kind == Token::Kind::Bond && (t.text == "/" || t.text == "\\"))
      continue;  // directional bond -> implicit single
    if (t.kind == Token::Kind::BracketAtom) {
      for (char c : t.text)
        if (c != '@') out += c;
      continue;
    }
    out += t.text;
  }
  return Smiles(std::move(out));
}

TokenStream tokenize(const Smiles& s) { return TokenStream{scan(s.text())}; }

std::optional<ParseError> validate(std::string_view raw) {
  try {
    scan(trimmed(raw));
    return std::nullopt;
  } catch (const ParseError& e) {
    return e;
  }
}

}  // namespace aromma
