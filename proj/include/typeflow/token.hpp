#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "typeflow/errors.hpp"

namespace typeflow {

enum class TokenKind {
    Identifier,
    StringLit,
    NumberLit,
    BoolLit,
    NullLit,
    RegexLit,
    Keyword,
    Punct,
};

struct Token {
    TokenKind kind;
    std::string text;  // exact source slice
    size_t begin = 0;  // byte offset, inclusive
    size_t end = 0;    // byte offset, exclusive
};

// Lexes a source file of the supported language subset. Whitespace and
// comments (// and /* */) are skipped; token spans index into the original
// text. Throws LexError on unterminated literals/comments or stray bytes.
std::vector<Token> tokenize(const std::string& source);

// Feature string used when a token is embedded by kind: literals map to their
// literal-kind name, keywords and punctuators to their text. Identifiers are
// embedded by name instead and are not valid inputs here.
std::string token_feature(const Token& tok);

bool is_keyword(const std::string& word);

}  // namespace typeflow
