#include <doctest.h>

#include "typeflow/annotations.hpp"
#include "typeflow/ast.hpp"
#include "typeflow/errors.hpp"
#include "typeflow/token.hpp"

using namespace typeflow;

TEST_CASE("tokenizer classifies the subset's token kinds") {
    const auto toks = tokenize("let x = 5; s = 'hi'; ok = true; n = null; r = /a+b/;");
    REQUIRE(!toks.empty());
    CHECK(toks[0].kind == TokenKind::Keyword);
    CHECK(toks[0].text == "let");
    CHECK(toks[1].kind == TokenKind::Identifier);
    CHECK(toks[3].kind == TokenKind::NumberLit);

    int strings = 0, bools = 0, nulls = 0, regexes = 0;
    for (const Token& t : toks) {
        strings += t.kind == TokenKind::StringLit;
        bools += t.kind == TokenKind::BoolLit;
        nulls += t.kind == TokenKind::NullLit;
        regexes += t.kind == TokenKind::RegexLit;
    }
    CHECK(strings == 1);
    CHECK(bools == 1);
    CHECK(nulls == 1);
    CHECK(regexes == 1);
}

TEST_CASE("token spans slice the source exactly") {
    const std::string src = "foo(bar, 12.5);";
    for (const Token& t : tokenize(src)) {
        REQUIRE(t.end <= src.size());
        CHECK(src.substr(t.begin, t.end - t.begin) == t.text);
    }
}

TEST_CASE("tokenizer skips comments and rejects stray bytes") {
    CHECK(tokenize("a; // trailing\n/* block */ b;").size() == 4);
    CHECK_THROWS_AS(tokenize("let x = @;"), LexError);
    CHECK_THROWS_AS(tokenize("'unterminated"), LexError);
    CHECK_THROWS_AS(tokenize("/* open"), LexError);
}

TEST_CASE("token_feature names literal kinds, keywords keep their text") {
    const auto toks = tokenize("return 5");
    CHECK(token_feature(toks[0]) == "return");
    CHECK(token_feature(toks[1]) == "number-lit");
    CHECK(is_keyword("function"));
    CHECK(!is_keyword("fn"));
}

TEST_CASE("annotation stripping removes types and records spans") {
    const StripResult r = strip_annotations("let count: number = 1;\nfunction f(s: string) { return s; }");
    CHECK(r.source == "let count = 1;\nfunction f(s) { return s; }");
    REQUIRE(r.annotations.size() == 2);
    CHECK(r.annotations[0].name == "count");
    CHECK(r.annotations[0].type == "number");
    CHECK(r.annotations[1].name == "s");
    CHECK(r.annotations[1].type == "string");
    // spans index the stripped text
    CHECK(r.source.substr(r.annotations[0].begin,
                          r.annotations[0].end - r.annotations[0].begin) == "count");
    CHECK(r.source.substr(r.annotations[1].begin,
                          r.annotations[1].end - r.annotations[1].begin) == "s");
}

TEST_CASE("annotation stripping accepts generics and is idempotent") {
    const StripResult r = strip_annotations("let xs: Array<Map<string, number>> = make();");
    REQUIRE(r.annotations.size() == 1);
    CHECK(r.annotations[0].type == "Array<Map<string, number>>");
    CHECK(r.source == "let xs = make();");

    const std::string plain = "let a = 1; function g(b) { return b; }";
    CHECK(strip_annotations(plain).source == plain);
    CHECK(strip_annotations(plain).annotations.empty());

    CHECK_THROWS_AS(strip_annotations("let a: = 5;"), ParseError);
}

TEST_CASE("parser produces spanning program nodes") {
    const std::string src = "let a = 1 + 2;\nfoo(a);";
    const Ast ast = parse_source(src);
    const AstNode& root = ast.at(ast.root);
    CHECK(root.kind == NodeKind::Program);
    CHECK(root.children.size() == 2);
    CHECK(root.begin == 0);
    CHECK(root.end == src.size());

    // first statement: a VarDecl whose declarator holds Identifier + BinaryExpr
    const AstNode& decl = ast.at(root.children[0].node);
    CHECK(decl.kind == NodeKind::VarDecl);
    CHECK(decl.value == "let");
    const AstNode& call_stmt = ast.at(root.children[1].node);
    CHECK(call_stmt.kind == NodeKind::ExprStmt);

    CHECK_THROWS_AS(parse_source("let = 5;"), ParseError);
    CHECK_THROWS_AS(parse_source("function () {}"), ParseError);
    CHECK_THROWS_AS(parse_source("if (x"), ParseError);
}

TEST_CASE("AST JSON round-trips") {
    const Ast ast = parse_source(
        "function add(a, b) { return a + b; }\nlet r = add(1, 2);\nif (r) { r = 0; }");
    const std::string j = ast_to_json(ast);
    const Ast back = ast_from_json(j);
    CHECK(ast_to_json(back) == j);

    CHECK_THROWS_AS(ast_from_json("{"), DataError);
    CHECK_THROWS_AS(ast_from_json("{\"kind\": \"NoSuchKind\", \"span\": [0, 0], \"children\": []}"),
                    SchemaError);
}
