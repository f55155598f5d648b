#pragma once

#include <map>
#include <string>
#include <vector>

#include "typeflow/ast.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

enum class TfgNodeKind {
    IdentNode,
    TokNode,
    ExprNode,
    VarSymNode,
    ObjPropNode,
    CtxNode,
};

const char* tfg_node_kind_name(TfgNodeKind kind);
bool tfg_node_kind_from_name(const std::string& name, TfgNodeKind& out);

// Only nodes whose type the model predicts carry a true flag: identifier
// occurrences and expression nodes.
bool tfg_kind_predictable(TfgNodeKind kind);

struct TfgNode {
    TfgNodeKind kind;
    // IdentNode: identifier name. TokNode: token kind ("number-lit", ...).
    // ExprNode: AST kind string ("CallExpr", ...) or "ExprWrapper"/"Param".
    // VarSymNode/ObjPropNode: the kind name itself. CtxNode: "(Stmt,child)".
    std::string feature;
    bool predictable = false;
    int ast_ref = -1;  // originating AST node index; -1 for hubs/ctx/wrappers
};

struct TfgEdge {
    int src = -1;
    int dst = -1;
    // "(AssignExpr,left,f)" for expression edges;
    // "(VarSymEdge,f)", "(CallEdge,b)", ... for the other families.
    std::string feature;
};

// One entry of the file's token sequence, kept in the graph so models that
// read token context can run without the original source. Identifier tokens
// carry the identifier name and the id of their IdentNode; all other tokens
// carry their token-kind feature string and -1.
struct TfgToken {
    std::string feature;
    int ident_node = -1;
};

struct Tfg {
    std::string file_id;
    std::vector<TfgNode> nodes;
    std::vector<TfgEdge> edges;
    // Full token sequence in source order.
    std::vector<TfgToken> tokens;
    // node id -> canonical type string; keys must be predictable nodes.
    std::map<int, std::string> labels;
};

// Per-file function declaration index used for call wiring. When several
// declarations share a name, the lexically last one wins.
struct FuncDeclInfo {
    int decl_ast = -1;               // FunctionDecl AST index
    std::vector<int> param_asts;     // Param AST indices, in order
    int param_count = 0;
};

using FuncDeclTable = std::map<std::string, FuncDeclInfo>;

FuncDeclTable collect_function_decls(const Ast& ast);

// Extracts the type flow graph of one file: identifier/token/expression
// nodes in AST traversal order, variable and property hubs appended after,
// and the six bidirectional edge families. Every forward edge is immediately
// followed by its backward dual. `tokens` must be the token sequence the AST
// was parsed from; it is recorded in the graph with each identifier token
// linked to its IdentNode. Labels start empty.
Tfg build_tfg(const Ast& ast, const std::vector<Token>& tokens,
              const std::string& file_id);

// Structural audit. Returns human-readable findings, empty when the graph is
// well formed: edge endpoints in range, exact forward/backward pairing,
// predictable flags consistent with node kinds, labels only on predictable
// nodes.
std::vector<std::string> validate_tfg(const Tfg& g);

std::string tfg_to_json(const Tfg& g);
Tfg tfg_from_json(const std::string& json_text);

}  // namespace typeflow
