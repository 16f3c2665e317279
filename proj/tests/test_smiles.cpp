//
// Project Aromma - Copyright 2026 The Aromma Authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "aromma/smiles.hpp"

#include <doctest.h>

using namespace aromma;

TEST_CASE("strip_stereo leaves plain strings alone") {
  CHECK(strip_stereo("CCO").text() == "CCO");
  CHECK(strip_stereo("  CCO \n").text() == "CCO");
}

TEST_CASE("strip_stereo removes chirality marks but keeps the bracket") {
  CHECK(strip_stereo("C[C@H](N)O").text() == "C[CH](N)O");
  CHECK(strip_stereo("C[C@@H](N)O").text() == "C[CH](N)O");
  CHECK(strip_stereo("[C@]").text() == "[C]");
}

TEST_CASE("strip_stereo turns directional bonds into implicit singles") {
  CHECK(strip_stereo("C/C=C/C").text() == "CC=CC");
  CHECK(strip_stereo("C/C=C\\C").text() == "CC=CC");
}

TEST_CASE("strip_stereo is idempotent") {
  for (const char* raw : {"C[C@H](N)O", "C/C=C/C", "OCc1ccccc1", "c1ccccc1.[Na+]", "CC(=O)O"}) {
    const Smiles once = strip_stereo(raw);
    const Smiles twice = strip_stereo(once.text());
    CHECK(once.text() == twice.text());
  }
}

TEST_CASE("tokenize produces the documented token streams") {
  const TokenStream benzyl = tokenize(strip_stereo("OCc1ccccc1"));
  REQUIRE(benzyl.tokens.size() == 10);
  CHECK(benzyl.tokens[0].text == "O");
  CHECK(benzyl.tokens[1].text == "C");
  CHECK(benzyl.tokens[2].text == "c");
  CHECK(benzyl.tokens[3].text == "1");
  CHECK(benzyl.tokens[9].text == "1");
  CHECK(benzyl.tokens[2].kind == Token::Kind::AromaticAtom);
  CHECK(benzyl.tokens[3].kind == Token::Kind::RingClosure);

  const TokenStream chloro = tokenize(strip_stereo("CCl"));
  REQUIRE(chloro.tokens.size() == 2);
  CHECK(chloro.tokens[0].text == "C");
  CHECK(chloro.tokens[1].text == "Cl");
  CHECK(chloro.tokens[1].kind == Token::Kind::OrganicAtom);

  // Hand-tokenized: O C 1 C O C ( C c 2 c c c c c 2 ) O C 1
  const TokenStream acetal = tokenize(strip_stereo("OC1COC(Cc2ccccc2)OC1"));
  REQUIRE(acetal.tokens.size() == 20);
  const char* prefix[] = {"O", "C", "1", "C", "O", "C", "("};
  for (std::size_t i = 0; i < 7; ++i) CHECK(acetal.tokens[i].text == prefix[i]);
}

TEST_CASE("tokenize round-trips every valid normalized string") {
  for (const char* raw :
       {"CCO", "OCc1ccccc1", "OC1COC(Cc2ccccc2)OC1", "C[CH](N)O", "CC(=O)Oc1ccccc1C(=O)O",
        "[13CH4]", "C%11CC%11", "CC.CC", "N#Cc1ccccc1", "S=C=S", "[NH4+].[Cl-]"}) {
    const Smiles s = strip_stereo(raw);
    CHECK(tokenize(s).joined() == s.text());
  }
}

TEST_CASE("validate accepts the grammar subset") {
  CHECK_FALSE(validate("c1ccccc1"));
  CHECK_FALSE(validate("CC(C)(C)Br"));
  CHECK_FALSE(validate("[O-]S(=O)(=O)[O-]"));
  CHECK_FALSE(validate(""));
  CHECK_FALSE(validate("C1CC1C1CC1"));  // digit reuse opens a second pair
}

TEST_CASE("validate pinpoints grammar violations") {
  const auto ring = validate("C1CC");
  REQUIRE(ring.has_value());
  CHECK(ring->kind() == ParseError::Kind::UnpairedRingBond);
  CHECK(ring->pos() == 1);

  const auto paren = validate("C(");
  REQUIRE(paren.has_value());
  CHECK(paren->kind() == ParseError::Kind::UnbalancedBracket);

  const auto unknown = validate("CXO");
  REQUIRE(unknown.has_value());
  CHECK(unknown->kind() == ParseError::Kind::UnknownSymbol);
  CHECK(unknown->pos() == 1);

  CHECK(validate("C[")->kind() == ParseError::Kind::UnbalancedBracket);
  CHECK(validate("C]")->kind() == ParseError::Kind::UnbalancedBracket);
  CHECK(validate("C%1C")->kind() == ParseError::Kind::UnknownSymbol);
  CHECK(validate("C@C")->kind() == ParseError::Kind::UnknownSymbol);
}

TEST_CASE("validate and tokenize share one predicate") {
  const char* cases[] = {"CCO", "C1CC", "C(",     "OCc1ccccc1", "[CH4",  "c1ccccc1C(N)=O",
                         "%12", "C%12", "C%12C%12", "((", ")",  "[Zn+2]"};
  for (const char* raw : cases) {
    const bool ok = !validate(raw).has_value();
    bool tokenized = true;
    try {
      (void)strip_stereo(raw);
    } catch (const ParseError&) {
      tokenized = false;
    }
    CHECK(ok == tokenized);
  }
}

TEST_CASE("dots split salts inside a single record") {
  const TokenStream ts = tokenize(strip_stereo("CC.O"));
  REQUIRE(ts.tokens.size() == 4);
  CHECK(ts.tokens[2].kind == Token::Kind::Dot);
}
