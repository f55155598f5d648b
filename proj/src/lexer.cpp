#include "typeflow/token.hpp"

#include <array>
#include <cctype>

namespace typeflow {

namespace {

const std::array<std::string, 7> kKeywords = {
    "function", "let", "var", "const", "if", "else", "return",
};

// Multi-character punctuators, longest first so greedy matching works.
const std::array<std::string, 8> kLongPuncts = {
    "===", "!==", "==", "!=", "<=", ">=", "&&", "||",
};

const std::string kSinglePuncts = "(){};,.=<>+-*/%!:";

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool ident_part(char c) {
    return ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

// A '/' starts a regex literal only where an operand cannot end. After an
// identifier, literal, or ')' it is a division operator.
bool regex_allowed(const std::vector<Token>& toks) {
    if (toks.empty()) return true;
    const Token& t = toks.back();
    switch (t.kind) {
        case TokenKind::Identifier:
        case TokenKind::StringLit:
        case TokenKind::NumberLit:
        case TokenKind::BoolLit:
        case TokenKind::NullLit:
        case TokenKind::RegexLit:
            return false;
        case TokenKind::Keyword:
            return true;
        case TokenKind::Punct:
            return t.text != ")";
    }
    return true;
}

}  // namespace

bool is_keyword(const std::string& word) {
    for (const auto& k : kKeywords)
        if (k == word) return true;
    return false;
}

std::vector<Token> tokenize(const std::string& src) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = src.size();

    auto push = [&](TokenKind kind, size_t begin, size_t end) {
        out.push_back({kind, src.substr(begin, end - begin), begin, end});
    };

    while (i < n) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            size_t start = i;
            i += 2;
            while (i + 1 < n && !(src[i] == '*' && src[i + 1] == '/')) ++i;
            if (i + 1 >= n) throw LexError("unterminated block comment", start);
            i += 2;
            continue;
        }
        if (ident_start(c)) {
            size_t start = i;
            while (i < n && ident_part(src[i])) ++i;
            std::string word = src.substr(start, i - start);
            if (word == "true" || word == "false")
                push(TokenKind::BoolLit, start, i);
            else if (word == "null")
                push(TokenKind::NullLit, start, i);
            else if (is_keyword(word))
                push(TokenKind::Keyword, start, i);
            else
                push(TokenKind::Identifier, start, i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            size_t start = i;
            while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            if (i < n && src[i] == '.') {
                ++i;
                while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            }
            if (i < n && (src[i] == 'e' || src[i] == 'E')) {
                size_t mark = i;
                ++i;
                if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
                if (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) {
                    while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
                } else {
                    i = mark;  // bare 'e' belongs to the next token
                }
            }
            if (i < n && ident_start(src[i])) throw LexError("malformed number literal", start);
            push(TokenKind::NumberLit, start, i);
            continue;
        }
        if (c == '"' || c == '\'') {
            size_t start = i;
            char quote = c;
            ++i;
            while (i < n && src[i] != quote) {
                if (src[i] == '\\')
                    i += 2;
                else if (src[i] == '\n')
                    throw LexError("unterminated string literal", start);
                else
                    ++i;
            }
            if (i >= n) throw LexError("unterminated string literal", start);
            ++i;
            push(TokenKind::StringLit, start, i);
            continue;
        }
        if (c == '/' && regex_allowed(out)) {
            size_t start = i;
            ++i;
            bool in_class = false;
            bool closed = false;
            while (i < n) {
                char r = src[i];
                if (r == '\\') {
                    i += 2;
                    continue;
                }
                if (r == '\n') break;
                if (r == '[')
                    in_class = true;
                else if (r == ']')
                    in_class = false;
                else if (r == '/' && !in_class) {
                    ++i;
                    closed = true;
                    break;
                }
                ++i;
            }
            if (!closed) throw LexError("unterminated regex literal", start);
            while (i < n && std::isalpha(static_cast<unsigned char>(src[i]))) ++i;
            push(TokenKind::RegexLit, start, i);
            continue;
        }
        bool matched = false;
        for (const auto& p : kLongPuncts) {
            if (src.compare(i, p.size(), p) == 0) {
                push(TokenKind::Punct, i, i + p.size());
                i += p.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (kSinglePuncts.find(c) != std::string::npos) {
            push(TokenKind::Punct, i, i + 1);
            ++i;
            continue;
        }
        throw LexError(std::string("unexpected character '") + c + "'", i);
    }
    return out;
}

std::string token_feature(const Token& tok) {
    switch (tok.kind) {
        case TokenKind::StringLit:
            return "string-lit";
        case TokenKind::NumberLit:
            return "number-lit";
        case TokenKind::BoolLit:
            return "bool-lit";
        case TokenKind::NullLit:
            return "null-lit";
        case TokenKind::RegexLit:
            return "regex-lit";
        case TokenKind::Keyword:
        case TokenKind::Punct:
            return tok.text;
        case TokenKind::Identifier:
            throw InternalError("identifier tokens are embedded by name, not by kind");
    }
    throw InternalError("unknown token kind");
}

}  // namespace typeflow
