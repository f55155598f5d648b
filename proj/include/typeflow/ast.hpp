#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "typeflow/errors.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

enum class NodeKind {
    Program,
    FunctionDecl,
    Param,
    VarDecl,
    IfStmt,
    ReturnStmt,
    ExprStmt,
    BlockStmt,
    AssignExpr,
    BinaryExpr,
    UnaryExpr,
    CallExpr,
    MemberExpr,
    Identifier,
    Literal,
};

const char* node_kind_name(NodeKind kind);
// Returns false and leaves `out` untouched when `name` is not a kind.
bool node_kind_from_name(const std::string& name, NodeKind& out);

struct AstChild {
    std::string tag;  // role of the child, e.g. "condition", "params[0]"
    int node = -1;    // index into Ast::nodes
};

// Field usage by kind:
//   Identifier: name = identifier text
//   Literal:    name = literal kind ("number-lit", ...), value = raw text
//   BinaryExpr/UnaryExpr: value = operator text
//   VarDecl:    value = declaration keyword ("let" | "var" | "const")
struct AstNode {
    NodeKind kind;
    std::string name;
    std::string value;
    size_t begin = 0;
    size_t end = 0;
    std::vector<AstChild> children;
};

// Flat node pool; `root` indexes the Program node. Child links are indices,
// which double as stable node references for downstream graph building.
struct Ast {
    std::vector<AstNode> nodes;
    int root = -1;

    const AstNode& at(int id) const { return nodes.at(size_t(id)); }
};

// Recursive-descent parser over the supported subset: function declarations
// (including nested), var/let/const with single declarators, if/else, return,
// expression and block statements; assignment, binary, unary, call, and
// dot-member expressions; identifier/string/number/boolean/null/regex leaves.
// Anything else throws ParseError.
Ast parse(const std::vector<Token>& tokens);
Ast parse_source(const std::string& source);

// JSON interchange for ASTs, so external full-language frontends can feed the
// pipeline. Schema per node:
//   {"kind": str, "name"?: str, "value"?: str, "span": [int, int],
//    "children": [{"tag": str, "node": {...}}]}
std::string ast_to_json(const Ast& ast);
Ast ast_from_json(const std::string& json_text);

// Structural equality ignoring node-pool layout.
bool ast_equal(const Ast& a, const Ast& b);

}  // namespace typeflow
