#include <algorithm>
#include <iterator>
#include <json.hpp>
#include <set>
#include <tuple>

#include "typeflow/tfg.hpp"

namespace typeflow {

namespace {

std::string strip_index(const std::string& tag) {
    size_t p = tag.find('[');
    return p == std::string::npos ? tag : tag.substr(0, p);
}

const AstChild* find_child(const AstNode& n, const std::string& tag) {
    for (const auto& c : n.children)
        if (c.tag == tag) return &c;
    return nullptr;
}

const AstChild& require_child(const AstNode& n, const std::string& tag) {
    const AstChild* c = find_child(n, tag);
    if (!c)
        throw ExtractError(std::string(node_kind_name(n.kind)) + " is missing its \"" + tag +
                           "\" child");
    return *c;
}

void collect_decls(const Ast& ast, int id, FuncDeclTable& table) {
    const AstNode& n = ast.at(id);
    if (n.kind == NodeKind::FunctionDecl) {
        const AstChild* name = &require_child(n, "name");
        FuncDeclInfo info;
        info.decl_ast = id;
        for (const auto& c : n.children) {
            if (ast.at(c.node).kind == NodeKind::Param) info.param_asts.push_back(c.node);
        }
        info.param_count = int(info.param_asts.size());
        table[ast.at(name->node).name] = info;  // later declarations overwrite
    }
    for (const auto& c : n.children) collect_decls(ast, c.node, table);
}

// Lexical scope resolution. Scopes exist at Program, FunctionDecl, and
// BlockStmt. let/const bind in the nearest scope; var, params, and function
// names bind in the nearest function (or program) scope. Unresolved names
// share one file-level symbol per name.
class Scopes {
  public:
    explicit Scopes(const Ast& ast) : ast_(ast) {
        root_ = new_scope(-1, true);
        declare_pass(ast_.root, root_);
    }

    // Symbol id for the identifier occurrence at `ident_ast` inside `scope`.
    int resolve(const std::string& name, int scope) {
        for (int s = scope; s != -1; s = scopes_[size_t(s)].parent) {
            auto it = scopes_[size_t(s)].decls.find(name);
            if (it != scopes_[size_t(s)].decls.end()) return it->second;
        }
        auto it = free_.find(name);
        if (it != free_.end()) return it->second;
        int sym = next_symbol_++;
        free_[name] = sym;
        return sym;
    }

    int scope_of(int ast_id) const { return scope_of_.at(ast_id); }

  private:
    struct Scope {
        int parent;
        bool is_function;  // Program counts as a function scope
        std::map<std::string, int> decls;
    };

    const Ast& ast_;
    std::vector<Scope> scopes_;
    std::map<int, int> scope_of_;  // AST id -> enclosing scope (for identifiers)
    std::map<std::string, int> free_;
    int next_symbol_ = 0;
    int root_;

    int new_scope(int parent, bool is_function) {
        scopes_.push_back({parent, is_function, {}});
        return int(scopes_.size()) - 1;
    }

    int function_scope(int scope) const {
        int s = scope;
        while (!scopes_[size_t(s)].is_function) s = scopes_[size_t(s)].parent;
        return s;
    }

    void declare(const std::string& name, int scope) {
        auto& decls = scopes_[size_t(scope)].decls;
        if (!decls.count(name)) decls[name] = next_symbol_++;
    }

    void declare_pass(int id, int scope) {
        const AstNode& n = ast_.at(id);
        scope_of_[id] = scope;
        switch (n.kind) {
            case NodeKind::FunctionDecl: {
                const AstChild* name = &require_child(n, "name");
                declare(ast_.at(name->node).name, function_scope(scope));
                int inner = new_scope(scope, true);
                for (const auto& c : n.children) {
                    if (c.tag == "name") {
                        scope_of_[c.node] = scope;
                    } else {
                        declare_pass(c.node, inner);
                    }
                }
                return;
            }
            case NodeKind::Param: {
                const AstChild* name = &require_child(n, "name");
                declare(ast_.at(name->node).name, function_scope(scope));
                scope_of_[name->node] = scope;
                return;
            }
            case NodeKind::VarDecl: {
                const AstChild* name = &require_child(n, "name");
                int target = (n.value == "var") ? function_scope(scope) : scope;
                declare(ast_.at(name->node).name, target);
                for (const auto& c : n.children) declare_pass(c.node, scope);
                return;
            }
            case NodeKind::BlockStmt: {
                int inner = new_scope(scope, false);
                for (const auto& c : n.children) declare_pass(c.node, inner);
                return;
            }
            default:
                for (const auto& c : n.children) declare_pass(c.node, scope);
                return;
        }
    }
};

class Builder {
  public:
    Builder(const Ast& ast, const std::string& file_id)
        : ast_(ast), scopes_(ast), table_(collect_function_decls(ast)) {
        g_.file_id = file_id;
    }

    Tfg run() {
        visit(ast_.root);
        append_hubs_and_edges();
        return std::move(g_);
    }

  private:
    const Ast& ast_;
    Scopes scopes_;
    FuncDeclTable table_;
    Tfg g_;

    std::map<int, int> ast_to_tfg_;           // expression-bearing AST id -> node id
    std::vector<std::pair<int, int>> var_occ_;   // (IdentNode id, symbol id)
    std::vector<std::pair<int, std::string>> prop_occ_;  // (IdentNode id, property name)
    std::map<int, std::vector<int>> returns_of_;  // FunctionDecl AST id -> return expr nodes
    std::vector<int> func_stack_;                 // enclosing FunctionDecl AST ids
    struct CallSite {
        int call_node;
        std::string callee;
        std::vector<int> arg_nodes;
    };
    std::vector<CallSite> calls_;

    int add_node(TfgNodeKind kind, const std::string& feature, int ast_ref) {
        g_.nodes.push_back({kind, feature, tfg_kind_predictable(kind), ast_ref});
        return int(g_.nodes.size()) - 1;
    }

    void add_pair(int src, int dst, const std::string& stem) {
        g_.edges.push_back({src, dst, "(" + stem + ",f)"});
        g_.edges.push_back({dst, src, "(" + stem + ",b)"});
    }

    void exp_edge(int child, int parent, const std::string& parent_feature,
                  const std::string& tag) {
        add_pair(child, parent, parent_feature + "," + strip_index(tag));
    }

    // Wraps a bare identifier/literal appearing in a statement's expression
    // slot so the slot is always represented by an ExprNode.
    int wrap_if_bare(int node) {
        if (g_.nodes[size_t(node)].kind == TfgNodeKind::ExprNode) return node;
        int w = add_node(TfgNodeKind::ExprNode, "ExprWrapper", -1);
        exp_edge(node, w, "ExprWrapper", "expression");
        return w;
    }

    int ctx_node(int expr_node, const std::string& stmt_kind, const std::string& tag) {
        int ctx = add_node(TfgNodeKind::CtxNode, "(" + stmt_kind + "," + tag + ")", -1);
        add_pair(ctx, expr_node, "CtxEdge");
        return ctx;
    }

    int visit_ident(int id, bool is_property) {
        const AstNode& n = ast_.at(id);
        int node = add_node(TfgNodeKind::IdentNode, n.name, id);
        if (is_property)
            prop_occ_.emplace_back(node, n.name);
        else
            var_occ_.emplace_back(node, scopes_.resolve(n.name, scopes_.scope_of(id)));
        ast_to_tfg_[id] = node;
        return node;
    }

    // Returns the TFG node representing an expression-position AST node.
    int visit_expr(int id) {
        const AstNode& n = ast_.at(id);
        switch (n.kind) {
            case NodeKind::Identifier:
                return visit_ident(id, false);
            case NodeKind::Literal: {
                int node = add_node(TfgNodeKind::TokNode, n.name, id);
                ast_to_tfg_[id] = node;
                return node;
            }
            case NodeKind::MemberExpr: {
                int obj = visit_expr(require_child(n, "object").node);
                int prop = visit_ident(require_child(n, "property").node, true);
                int node = add_node(TfgNodeKind::ExprNode, "MemberExpr", id);
                exp_edge(obj, node, "MemberExpr", "object");
                exp_edge(prop, node, "MemberExpr", "property");
                ast_to_tfg_[id] = node;
                return node;
            }
            case NodeKind::CallExpr: {
                CallSite site;
                int callee = visit_expr(require_child(n, "callee").node);
                std::vector<std::pair<int, std::string>> args;
                for (const auto& c : n.children) {
                    if (c.tag == "callee") continue;
                    args.emplace_back(visit_expr(c.node), c.tag);
                    site.arg_nodes.push_back(args.back().first);
                }
                int node = add_node(TfgNodeKind::ExprNode, "CallExpr", id);
                exp_edge(callee, node, "CallExpr", "callee");
                for (const auto& [arg, tag] : args) exp_edge(arg, node, "CallExpr", tag);
                ast_to_tfg_[id] = node;
                const AstNode& calleeAst = ast_.at(require_child(n, "callee").node);
                if (calleeAst.kind == NodeKind::Identifier) {
                    site.call_node = node;
                    site.callee = calleeAst.name;
                    calls_.push_back(std::move(site));
                }
                return node;
            }
            case NodeKind::AssignExpr:
            case NodeKind::BinaryExpr: {
                int lhs = visit_expr(require_child(n, "left").node);
                int rhs = visit_expr(require_child(n, "right").node);
                const char* kindName = node_kind_name(n.kind);
                int node = add_node(TfgNodeKind::ExprNode, kindName, id);
                exp_edge(lhs, node, kindName, "left");
                exp_edge(rhs, node, kindName, "right");
                ast_to_tfg_[id] = node;
                return node;
            }
            case NodeKind::UnaryExpr: {
                int arg = visit_expr(require_child(n, "argument").node);
                int node = add_node(TfgNodeKind::ExprNode, "UnaryExpr", id);
                exp_edge(arg, node, "UnaryExpr", "argument");
                ast_to_tfg_[id] = node;
                return node;
            }
            default:
                throw ExtractError(std::string("unexpected ") + node_kind_name(n.kind) +
                                   " in expression position");
        }
    }

    // Visits a statement's expression child: builds the expression subtree,
    // wraps bare leaves, and attaches the context node.
    int stmt_expr(int ast_id, const std::string& stmt_kind, const std::string& tag) {
        int node = wrap_if_bare(visit_expr(ast_id));
        ctx_node(node, stmt_kind, tag);
        return node;
    }

    void visit(int id) {
        const AstNode& n = ast_.at(id);
        switch (n.kind) {
            case NodeKind::Program:
            case NodeKind::BlockStmt:
                for (const auto& c : n.children) visit(c.node);
                return;
            case NodeKind::FunctionDecl: {
                int name = visit_ident(require_child(n, "name").node, false);
                std::vector<int> params;
                for (const auto& c : n.children) {
                    if (ast_.at(c.node).kind != NodeKind::Param) continue;
                    const AstNode& p = ast_.at(c.node);
                    int pname = visit_ident(require_child(p, "name").node, false);
                    int pnode = add_node(TfgNodeKind::ExprNode, "Param", c.node);
                    exp_edge(pname, pnode, "Param", "name");
                    ast_to_tfg_[c.node] = pnode;
                    params.push_back(pnode);
                }
                func_stack_.push_back(id);
                visit(require_child(n, "body").node);
                func_stack_.pop_back();
                int fn = add_node(TfgNodeKind::ExprNode, "FunctionDecl", id);
                exp_edge(name, fn, "FunctionDecl", "name");
                for (int p : params) exp_edge(p, fn, "FunctionDecl", "params");
                ast_to_tfg_[id] = fn;
                for (int ret : returns_of_[id]) add_pair(ret, fn, "RetEdge");
                return;
            }
            case NodeKind::VarDecl: {
                int name = visit_ident(require_child(n, "name").node, false);
                const AstChild* init = find_child(n, "init");
                int initNode = -1;
                if (init) initNode = stmt_expr(init->node, "VarDecl", "init");
                int decl = add_node(TfgNodeKind::ExprNode, "VarDecl", id);
                exp_edge(name, decl, "VarDecl", "name");
                if (initNode != -1) exp_edge(initNode, decl, "VarDecl", "init");
                ast_to_tfg_[id] = decl;
                return;
            }
            case NodeKind::ExprStmt:
                stmt_expr(require_child(n, "expression").node, "ExprStmt", "expression");
                return;
            case NodeKind::IfStmt: {
                stmt_expr(require_child(n, "condition").node, "IfStmt", "condition");
                visit(require_child(n, "consequent").node);
                const AstChild* alt = find_child(n, "alternate");
                if (alt) visit(alt->node);
                return;
            }
            case NodeKind::ReturnStmt: {
                const AstChild* arg = find_child(n, "argument");
                if (arg) {
                    int node = stmt_expr(arg->node, "ReturnStmt", "argument");
                    if (!func_stack_.empty()) returns_of_[func_stack_.back()].push_back(node);
                }
                return;
            }
            default:
                throw ExtractError(std::string("unexpected ") + node_kind_name(n.kind) +
                                   " in statement position");
        }
    }

    void append_hubs_and_edges() {
        // Hubs in first-occurrence order.
        std::map<int, int> sym_hub;
        std::vector<int> sym_order;
        for (const auto& [node, sym] : var_occ_) {
            if (!sym_hub.count(sym)) {
                sym_hub[sym] = -1;
                sym_order.push_back(sym);
            }
        }
        for (int sym : sym_order)
            sym_hub[sym] = add_node(TfgNodeKind::VarSymNode, "VarSymNode", -1);

        std::map<std::string, int> prop_hub;
        std::vector<std::string> prop_order;
        for (const auto& [node, name] : prop_occ_) {
            if (!prop_hub.count(name)) {
                prop_hub[name] = -1;
                prop_order.push_back(name);
            }
        }
        for (const auto& name : prop_order)
            prop_hub[name] = add_node(TfgNodeKind::ObjPropNode, "ObjPropNode", -1);

        for (const auto& [node, sym] : var_occ_) add_pair(node, sym_hub[sym], "VarSymEdge");
        for (const auto& [node, name] : prop_occ_) add_pair(node, prop_hub[name], "ObjPropEdge");

        // Call wiring: by callee name against the declaration table.
        for (const auto& site : calls_) {
            auto it = table_.find(site.callee);
            if (it == table_.end()) continue;
            const FuncDeclInfo& fn = it->second;
            size_t n = std::min(site.arg_nodes.size(), fn.param_asts.size());
            for (size_t i = 0; i < n; ++i)
                add_pair(site.arg_nodes[i], ast_to_tfg_.at(fn.param_asts[i]), "CallEdge");
            auto rit = returns_of_.find(fn.decl_ast);
            if (rit != returns_of_.end())
                for (int ret : rit->second) add_pair(ret, site.call_node, "CallEdge");
        }
    }
};

}  // namespace

const char* tfg_node_kind_name(TfgNodeKind kind) {
    switch (kind) {
        case TfgNodeKind::IdentNode: return "IdentNode";
        case TfgNodeKind::TokNode: return "TokNode";
        case TfgNodeKind::ExprNode: return "ExprNode";
        case TfgNodeKind::VarSymNode: return "VarSymNode";
        case TfgNodeKind::ObjPropNode: return "ObjPropNode";
        case TfgNodeKind::CtxNode: return "CtxNode";
    }
    throw InternalError("unknown tfg node kind");
}

bool tfg_node_kind_from_name(const std::string& name, TfgNodeKind& out) {
    for (TfgNodeKind k : {TfgNodeKind::IdentNode, TfgNodeKind::TokNode, TfgNodeKind::ExprNode,
                          TfgNodeKind::VarSymNode, TfgNodeKind::ObjPropNode, TfgNodeKind::CtxNode}) {
        if (name == tfg_node_kind_name(k)) {
            out = k;
            return true;
        }
    }
    return false;
}

bool tfg_kind_predictable(TfgNodeKind kind) {
    return kind == TfgNodeKind::IdentNode || kind == TfgNodeKind::ExprNode;
}

FuncDeclTable collect_function_decls(const Ast& ast) {
    FuncDeclTable table;
    if (ast.root >= 0) collect_decls(ast, ast.root, table);
    return table;
}

Tfg build_tfg(const Ast& ast, const std::vector<Token>& tokens,
              const std::string& file_id) {
    if (ast.root < 0) throw ExtractError("cannot build a graph from an empty Ast");
    Tfg g = Builder(ast, file_id).run();
    std::map<size_t, int> ident_at;  // identifier begin offset -> IdentNode id
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const TfgNode& node = g.nodes[i];
        if (node.kind == TfgNodeKind::IdentNode && node.ast_ref >= 0)
            ident_at[ast.at(node.ast_ref).begin] = int(i);
    }
    g.tokens.reserve(tokens.size());
    for (const Token& tok : tokens) {
        if (tok.kind == TokenKind::Identifier) {
            auto it = ident_at.find(tok.begin);
            if (it == ident_at.end())
                throw ExtractError("identifier token '" + tok.text +
                                   "' has no graph node");
            g.tokens.push_back({tok.text, it->second});
        } else {
            g.tokens.push_back({token_feature(tok), -1});
        }
    }
    return g;
}

std::vector<std::string> validate_tfg(const Tfg& g) {
    std::vector<std::string> findings;
    const int n = int(g.nodes.size());

    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const TfgNode& node = g.nodes[i];
        if (node.predictable != tfg_kind_predictable(node.kind))
            findings.push_back("node " + std::to_string(i) + " (" +
                               tfg_node_kind_name(node.kind) + ") has predictable=" +
                               (node.predictable ? "true" : "false"));
    }

    std::multiset<std::tuple<int, int, std::string>> fwd, bwd;
    for (size_t i = 0; i < g.edges.size(); ++i) {
        const TfgEdge& e = g.edges[i];
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
            findings.push_back("edge " + std::to_string(i) + " has out-of-range endpoint");
            continue;
        }
        if (e.feature.size() > 3 && e.feature.compare(e.feature.size() - 3, 3, ",f)") == 0) {
            fwd.insert({e.src, e.dst, e.feature.substr(0, e.feature.size() - 3)});
        } else if (e.feature.size() > 3 && e.feature.compare(e.feature.size() - 3, 3, ",b)") == 0) {
            bwd.insert({e.dst, e.src, e.feature.substr(0, e.feature.size() - 3)});
        } else {
            findings.push_back("edge " + std::to_string(i) + " feature '" + e.feature +
                               "' lacks a direction suffix");
        }
    }
    if (fwd != bwd) {
        auto report = [&](const auto& only, const char* which) {
            for (const auto& t : only)
                findings.push_back(std::string("unpaired ") + which + " edge (" +
                                   std::to_string(std::get<0>(t)) + "->" +
                                   std::to_string(std::get<1>(t)) + ", " + std::get<2>(t) + ")");
        };
        std::multiset<std::tuple<int, int, std::string>> fonly, bonly;
        std::set_difference(fwd.begin(), fwd.end(), bwd.begin(), bwd.end(),
                            std::inserter(fonly, fonly.begin()));
        std::set_difference(bwd.begin(), bwd.end(), fwd.begin(), fwd.end(),
                            std::inserter(bonly, bonly.begin()));
        report(fonly, "forward");
        report(bonly, "backward");
    }

    for (const auto& [id, type] : g.labels) {
        if (id < 0 || id >= n)
            findings.push_back("label on missing node " + std::to_string(id));
        else if (!g.nodes[size_t(id)].predictable)
            findings.push_back("label on non-predictable node " + std::to_string(id) + " (" +
                               tfg_node_kind_name(g.nodes[size_t(id)].kind) + ")");
    }

    if (!g.tokens.empty()) {
        std::map<int, int> refs;  // IdentNode id -> referencing token count
        for (size_t i = 0; i < g.tokens.size(); ++i) {
            const int ref = g.tokens[i].ident_node;
            if (ref == -1) continue;
            if (ref < 0 || ref >= n)
                findings.push_back("token " + std::to_string(i) +
                                   " references missing node " + std::to_string(ref));
            else if (g.nodes[size_t(ref)].kind != TfgNodeKind::IdentNode)
                findings.push_back("token " + std::to_string(i) +
                                   " references a non-identifier node " + std::to_string(ref));
            else
                ++refs[ref];
        }
        for (size_t i = 0; i < g.nodes.size(); ++i) {
            if (g.nodes[i].kind != TfgNodeKind::IdentNode) continue;
            const int count = refs.count(int(i)) ? refs[int(i)] : 0;
            if (count != 1)
                findings.push_back("identifier node " + std::to_string(i) + " referenced by " +
                                   std::to_string(count) + " tokens (want 1)");
        }
    }
    return findings;
}

std::string tfg_to_json(const Tfg& g) {
    nlohmann::ordered_json j;
    j["file"] = g.file_id;
    auto nodes = nlohmann::ordered_json::array();
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const TfgNode& node = g.nodes[i];
        nodes.push_back({{"id", i},
                         {"kind", tfg_node_kind_name(node.kind)},
                         {"feature", node.feature},
                         {"predictable", node.predictable}});
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"feature", e.feature}});
    j["edges"] = std::move(edges);
    auto tokens = nlohmann::ordered_json::array();
    for (const auto& t : g.tokens)
        tokens.push_back(nlohmann::ordered_json::array({t.feature, t.ident_node}));
    j["tokens"] = std::move(tokens);
    auto labels = nlohmann::ordered_json::object();
    for (const auto& [id, type] : g.labels) labels[std::to_string(id)] = type;
    j["labels"] = std::move(labels);
    return j.dump(2);
}

Tfg tfg_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what(), "$");
    }
    Tfg g;
    if (!j.is_object() || !j.contains("nodes") || !j.contains("edges"))
        throw SchemaError("expected {file, nodes, edges, labels}", "$");
    g.file_id = j.value("file", "");
    size_t idx = 0;
    for (const auto& nj : j["nodes"]) {
        std::string path = "$.nodes[" + std::to_string(idx) + "]";
        if (!nj.is_object() || !nj.contains("kind") || !nj.contains("feature"))
            throw SchemaError("node must be {id, kind, feature, predictable}", path);
        if (nj.contains("id") && nj["id"].get<size_t>() != idx)
            throw SchemaError("node ids must be dense and ordered", path + ".id");
        TfgNodeKind kind;
        if (!tfg_node_kind_from_name(nj["kind"].get<std::string>(), kind))
            throw SchemaError("unknown node kind", path + ".kind");
        g.nodes.push_back({kind, nj["feature"].get<std::string>(),
                           nj.value("predictable", tfg_kind_predictable(kind)), -1});
        ++idx;
    }
    idx = 0;
    for (const auto& ej : j["edges"]) {
        std::string path = "$.edges[" + std::to_string(idx++) + "]";
        if (!ej.is_object() || !ej.contains("src") || !ej.contains("dst") ||
            !ej.contains("feature"))
            throw SchemaError("edge must be {src, dst, feature}", path);
        g.edges.push_back(
            {ej["src"].get<int>(), ej["dst"].get<int>(), ej["feature"].get<std::string>()});
    }
    if (j.contains("tokens")) {
        idx = 0;
        for (const auto& tj : j["tokens"]) {
            std::string path = "$.tokens[" + std::to_string(idx++) + "]";
            if (!tj.is_array() || tj.size() != 2 || !tj[0].is_string() ||
                !tj[1].is_number_integer())
                throw SchemaError("token must be [feature, ident_node]", path);
            g.tokens.push_back({tj[0].get<std::string>(), tj[1].get<int>()});
        }
    }
    if (j.contains("labels")) {
        for (const auto& [key, val] : j["labels"].items())
            g.labels[std::stoi(key)] = val.get<std::string>();
    }
    return g;
}

}  // namespace typeflow
