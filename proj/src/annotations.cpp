#include <algorithm>
#include <cctype>

#include "typeflow/annotations.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

namespace {

struct Removal {
    size_t begin;
    size_t end;
};

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Scans a type reference starting at `i` (first non-space char must begin a
// type name): Identifier optionally followed by a balanced <...> group.
// Returns one past the last character of the type.
size_t scan_type(const std::string& src, size_t i) {
    while (i < src.size() && std::isspace(static_cast<unsigned char>(src[i]))) ++i;
    size_t start = i;
    while (i < src.size() && ident_char(src[i])) ++i;
    if (i == start) throw ParseError("expected a type name in annotation", start, start);
    if (i < src.size() && src[i] == '<') {
        int depth = 0;
        do {
            if (src[i] == '<') ++depth;
            if (src[i] == '>') --depth;
            ++i;
        } while (i < src.size() && depth > 0);
        if (depth != 0) throw ParseError("unbalanced '<' in annotation", start, i);
    }
    return i;
}

}  // namespace

StripResult strip_annotations(const std::string& source) {
    std::vector<Token> toks = tokenize(source);
    std::vector<Removal> removals;
    // (annotated identifier token index, raw type text)
    std::vector<std::pair<size_t, std::string>> keyed;

    // Paren contexts; for a function parameter list we remember the header's
    // name token so a return annotation after ')' can be keyed to it.
    struct Paren {
        bool is_params;
        size_t name_tok;
    };
    std::vector<Paren> parens;

    auto record = [&](size_t key_tok, size_t colon_begin) {
        size_t end = scan_type(source, colon_begin + 1);
        size_t tb = colon_begin + 1;
        while (tb < end && std::isspace(static_cast<unsigned char>(source[tb]))) ++tb;
        removals.push_back({colon_begin, end});
        keyed.emplace_back(key_tok, source.substr(tb, end - tb));
        return end;
    };

    size_t i = 0;
    size_t resume_at = 0;  // char offset before which tokens belong to a stripped annotation
    size_t pending_close = SIZE_MAX;  // token index of `)` that ended a param list
    while (i < toks.size()) {
        const Token& t = toks[i];
        if (t.begin < resume_at) {  // token inside an already-consumed annotation
            ++i;
            continue;
        }
        if (t.kind == TokenKind::Punct && t.text == "(") {
            bool header = i >= 2 && toks[i - 1].kind == TokenKind::Identifier &&
                          toks[i - 2].kind == TokenKind::Keyword &&
                          toks[i - 2].text == "function";
            parens.push_back({header, header ? i - 1 : SIZE_MAX});
            pending_close = SIZE_MAX;
            ++i;
            continue;
        }
        if (t.kind == TokenKind::Punct && t.text == ")") {
            pending_close = SIZE_MAX;
            if (!parens.empty()) {
                if (parens.back().is_params) pending_close = i;
                parens.pop_back();
            }
            ++i;
            continue;
        }
        if (t.kind == TokenKind::Punct && t.text == ":") {
            // Return-type annotation: ')' of a parameter list directly before.
            if (pending_close != SIZE_MAX && i == pending_close + 1) {
                size_t name_tok = SIZE_MAX;
                // The params context was popped; recover the name token from
                // the header shape: name ( ... ) :
                for (size_t j = pending_close; j-- > 0;) {
                    if (toks[j].kind == TokenKind::Punct && toks[j].text == "(") {
                        name_tok = j - 1;
                        break;
                    }
                    // Nested parens cannot occur inside a parameter list.
                }
                if (name_tok == SIZE_MAX)
                    throw ParseError("return annotation without function header", t.begin, t.end);
                resume_at = record(name_tok, t.begin);
                pending_close = SIZE_MAX;
                ++i;
                continue;
            }
            bool after_ident = i >= 1 && toks[i - 1].kind == TokenKind::Identifier;
            bool decl_name = after_ident && i >= 2 && toks[i - 2].kind == TokenKind::Keyword &&
                             (toks[i - 2].text == "let" || toks[i - 2].text == "var" ||
                              toks[i - 2].text == "const");
            bool param_name = after_ident && !parens.empty() && parens.back().is_params &&
                              i >= 2 && toks[i - 2].kind == TokenKind::Punct &&
                              (toks[i - 2].text == "(" || toks[i - 2].text == ",");
            if (decl_name || param_name) {
                resume_at = record(i - 1, t.begin);
                ++i;
                continue;
            }
            throw ParseError("':' outside an annotation position", t.begin, t.end);
        }
        ++i;
    }

    std::sort(removals.begin(), removals.end(),
              [](const Removal& a, const Removal& b) { return a.begin < b.begin; });

    std::string out;
    out.reserve(source.size());
    size_t cursor = 0;
    for (const auto& r : removals) {
        out.append(source, cursor, r.begin - cursor);
        cursor = r.end;
    }
    out.append(source, cursor, source.size() - cursor);

    auto shifted = [&](size_t off) {
        size_t shift = 0;
        for (const auto& r : removals) {
            if (r.end <= off)
                shift += r.end - r.begin;
            else
                break;
        }
        return off - shift;
    };

    StripResult res;
    res.source = std::move(out);
    for (const auto& [tok_idx, type] : keyed) {
        const Token& key = toks[tok_idx];
        res.annotations.push_back(
            {shifted(key.begin), shifted(key.end), key.text, type});
    }
    std::sort(res.annotations.begin(), res.annotations.end(),
              [](const Annotation& a, const Annotation& b) { return a.begin < b.begin; });
    return res;
}

}  // namespace typeflow
