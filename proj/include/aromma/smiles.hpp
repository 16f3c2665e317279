//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aromma/errors.hpp"

namespace aromma {

// Grammar subset accepted here: organic-subset atoms (B C N O P S F Cl Br I),
// aromatic b c n o p s, bracket atoms with optional isotope/H-count/charge,
// bonds - = # : / \, branches, ring closures (digits and %nn), and '.' as a
// fragment separator kept inside one molecule record. No reactions, no
// wildcards.

struct Token {
  enum class Kind {
    OrganicAtom,
    AromaticAtom,
    BracketAtom,
    Bond,
    RingClosure,
    BranchOpen,
    BranchClose,
    Dot,
  };
  Kind kind;
  std::string text;
  std::size_t pos = 0;
};

struct TokenStream {
  std::vector<Token> tokens;

  std::string joined() const;
};

// A normalized (stereo-stripped, whitespace-trimmed) SMILES string. Molecule
// identity throughout the project is equality of this text.
class Smiles {
public:
  Smiles() = default;

  const std::string& text() const { return text_; }
  bool empty() const { return text_.empty(); }

  friend bool operator==(const Smiles& a, const Smiles& b) { return a.text_ == b.text_; }
  friend bool operator<(const Smiles& a, const Smiles& b) { return a.text_ < b.text_; }

private:
  friend Smiles strip_stereo(std::string_view raw);
  explicit Smiles(std::string normalized) : text_(std::move(normalized)) {}

  std::string text_;
};

// Validates `raw` against the grammar subset, then removes directional bonds
// ('/' and '\' become implicit single bonds) and '@'/'@@' chirality marks
// inside bracket atoms, keeping the bracket (e.g. "[C@H]" -> "[CH]").
// Idempotent. Throws ParseError.
Smiles strip_stereo(std::string_view raw);

// Deterministic token list. Concatenating token texts reproduces the input.
TokenStream tokenize(const Smiles& s);

// Non-throwing validity check; the acceptance predicate is identical to the
// one strip_stereo/tokenize use.
std::optional<ParseError> validate(std::string_view raw);

}  // namespace aromma
