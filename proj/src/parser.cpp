#include <utility>

#include "typeflow/ast.hpp"

namespace typeflow {

namespace {

struct KindName {
    NodeKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {NodeKind::Program, "Program"},       {NodeKind::FunctionDecl, "FunctionDecl"},
    {NodeKind::Param, "Param"},           {NodeKind::VarDecl, "VarDecl"},
    {NodeKind::IfStmt, "IfStmt"},         {NodeKind::ReturnStmt, "ReturnStmt"},
    {NodeKind::ExprStmt, "ExprStmt"},     {NodeKind::BlockStmt, "BlockStmt"},
    {NodeKind::AssignExpr, "AssignExpr"}, {NodeKind::BinaryExpr, "BinaryExpr"},
    {NodeKind::UnaryExpr, "UnaryExpr"},   {NodeKind::CallExpr, "CallExpr"},
    {NodeKind::MemberExpr, "MemberExpr"}, {NodeKind::Identifier, "Identifier"},
    {NodeKind::Literal, "Literal"},
};

int binary_precedence(const std::string& op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=" || op == "===" || op == "!==") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 0;
}

class Parser {
  public:
    explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

    Ast run() {
        int root = make(NodeKind::Program, 0, 0);
        size_t i = 0;
        while (!at_end()) {
            int stmt = parse_statement();
            ast_.nodes[root].children.push_back({"body[" + std::to_string(i++) + "]", stmt});
        }
        ast_.nodes[root].begin = 0;
        ast_.nodes[root].end = toks_.empty() ? 0 : toks_.back().end;
        ast_.root = root;
        return std::move(ast_);
    }

  private:
    const std::vector<Token>& toks_;
    Ast ast_;
    size_t pos_ = 0;
    int func_depth_ = 0;

    bool at_end() const { return pos_ >= toks_.size(); }

    const Token& peek() const {
        if (at_end()) throw ParseError("unexpected end of input", last_end(), last_end());
        return toks_[pos_];
    }

    size_t last_end() const { return toks_.empty() ? 0 : toks_.back().end; }

    bool peek_punct(const std::string& text) const {
        return !at_end() && toks_[pos_].kind == TokenKind::Punct && toks_[pos_].text == text;
    }

    bool peek_keyword(const std::string& text) const {
        return !at_end() && toks_[pos_].kind == TokenKind::Keyword && toks_[pos_].text == text;
    }

    const Token& advance() {
        const Token& t = peek();
        ++pos_;
        return t;
    }

    const Token& expect_punct(const std::string& text) {
        if (!peek_punct(text))
            throw ParseError("expected '" + text + "'", peek().begin, peek().end);
        return advance();
    }

    int make(NodeKind kind, size_t begin, size_t end) {
        ast_.nodes.push_back(AstNode{kind, "", "", begin, end, {}});
        return int(ast_.nodes.size()) - 1;
    }

    void add_child(int parent, const std::string& tag, int child) {
        ast_.nodes[parent].children.push_back({tag, child});
    }

    void close(int node, size_t end) { ast_.nodes[node].end = end; }

    int parse_statement() {
        const Token& t = peek();
        if (t.kind == TokenKind::Keyword) {
            if (t.text == "function") return parse_function_decl();
            if (t.text == "let" || t.text == "var" || t.text == "const") return parse_var_decl();
            if (t.text == "if") return parse_if();
            if (t.text == "return") return parse_return();
            throw ParseError("unexpected keyword '" + t.text + "'", t.begin, t.end);
        }
        if (peek_punct("{")) return parse_block();
        return parse_expr_statement();
    }

    int parse_identifier() {
        const Token& t = peek();
        if (t.kind != TokenKind::Identifier)
            throw ParseError("expected identifier", t.begin, t.end);
        advance();
        int id = make(NodeKind::Identifier, t.begin, t.end);
        ast_.nodes[id].name = t.text;
        return id;
    }

    int parse_function_decl() {
        const Token& kw = advance();  // 'function'
        int fn = make(NodeKind::FunctionDecl, kw.begin, kw.end);
        add_child(fn, "name", parse_identifier());
        expect_punct("(");
        size_t idx = 0;
        while (!peek_punct(")")) {
            if (idx > 0) expect_punct(",");
            int name = parse_identifier();
            int param = make(NodeKind::Param, ast_.nodes[name].begin, ast_.nodes[name].end);
            add_child(param, "name", name);
            add_child(fn, "params[" + std::to_string(idx++) + "]", param);
        }
        expect_punct(")");
        ++func_depth_;
        int body = parse_block();
        --func_depth_;
        add_child(fn, "body", body);
        close(fn, ast_.nodes[body].end);
        return fn;
    }

    int parse_var_decl() {
        const Token& kw = advance();  // 'let' | 'var' | 'const'
        int decl = make(NodeKind::VarDecl, kw.begin, kw.end);
        ast_.nodes[decl].value = kw.text;
        add_child(decl, "name", parse_identifier());
        if (peek_punct("=")) {
            advance();
            add_child(decl, "init", parse_expression());
        }
        const Token& semi = expect_punct(";");
        close(decl, semi.end);
        return decl;
    }

    int parse_if() {
        const Token& kw = advance();  // 'if'
        int node = make(NodeKind::IfStmt, kw.begin, kw.end);
        expect_punct("(");
        add_child(node, "condition", parse_expression());
        expect_punct(")");
        int cons = parse_statement();
        add_child(node, "consequent", cons);
        close(node, ast_.nodes[cons].end);
        if (peek_keyword("else")) {
            advance();
            int alt = parse_statement();
            add_child(node, "alternate", alt);
            close(node, ast_.nodes[alt].end);
        }
        return node;
    }

    int parse_return() {
        const Token& kw = advance();  // 'return'
        if (func_depth_ == 0)
            throw ParseError("'return' outside a function", kw.begin, kw.end);
        int node = make(NodeKind::ReturnStmt, kw.begin, kw.end);
        if (!peek_punct(";")) add_child(node, "argument", parse_expression());
        const Token& semi = expect_punct(";");
        close(node, semi.end);
        return node;
    }

    int parse_block() {
        const Token& open = expect_punct("{");
        int node = make(NodeKind::BlockStmt, open.begin, open.end);
        size_t i = 0;
        while (!peek_punct("}")) {
            int stmt = parse_statement();
            add_child(node, "body[" + std::to_string(i++) + "]", stmt);
        }
        const Token& closeTok = expect_punct("}");
        close(node, closeTok.end);
        return node;
    }

    int parse_expr_statement() {
        int expr = parse_expression();
        int node = make(NodeKind::ExprStmt, ast_.nodes[expr].begin, ast_.nodes[expr].end);
        add_child(node, "expression", expr);
        const Token& semi = expect_punct(";");
        close(node, semi.end);
        return node;
    }

    int parse_expression() { return parse_assignment(); }

    int parse_assignment() {
        int left = parse_binary(1);
        if (peek_punct("=")) {
            NodeKind k = ast_.nodes[left].kind;
            if (k != NodeKind::Identifier && k != NodeKind::MemberExpr)
                throw ParseError("invalid assignment target", ast_.nodes[left].begin,
                                 ast_.nodes[left].end);
            advance();
            int right = parse_assignment();
            int node = make(NodeKind::AssignExpr, ast_.nodes[left].begin, ast_.nodes[right].end);
            add_child(node, "left", left);
            add_child(node, "right", right);
            return node;
        }
        return left;
    }

    int parse_binary(int min_prec) {
        int left = parse_unary();
        while (!at_end() && peek().kind == TokenKind::Punct) {
            int prec = binary_precedence(peek().text);
            if (prec < min_prec || prec == 0) break;
            std::string op = advance().text;
            int right = parse_binary(prec + 1);
            int node = make(NodeKind::BinaryExpr, ast_.nodes[left].begin, ast_.nodes[right].end);
            ast_.nodes[node].value = op;
            add_child(node, "left", left);
            add_child(node, "right", right);
            left = node;
        }
        return left;
    }

    int parse_unary() {
        if (!at_end() && peek().kind == TokenKind::Punct &&
            (peek().text == "!" || peek().text == "-" || peek().text == "+")) {
            const Token& op = advance();
            int arg = parse_unary();
            int node = make(NodeKind::UnaryExpr, op.begin, ast_.nodes[arg].end);
            ast_.nodes[node].value = op.text;
            add_child(node, "argument", arg);
            return node;
        }
        return parse_postfix();
    }

    int parse_postfix() {
        int expr = parse_primary();
        while (!at_end()) {
            if (peek_punct(".")) {
                advance();
                int prop = parse_identifier();
                int node = make(NodeKind::MemberExpr, ast_.nodes[expr].begin,
                                ast_.nodes[prop].end);
                add_child(node, "object", expr);
                add_child(node, "property", prop);
                expr = node;
            } else if (peek_punct("(")) {
                advance();
                int node = make(NodeKind::CallExpr, ast_.nodes[expr].begin, 0);
                add_child(node, "callee", expr);
                size_t idx = 0;
                while (!peek_punct(")")) {
                    if (idx > 0) expect_punct(",");
                    add_child(node, "arguments[" + std::to_string(idx++) + "]",
                              parse_expression());
                }
                const Token& closeTok = expect_punct(")");
                close(node, closeTok.end);
                expr = node;
            } else {
                break;
            }
        }
        return expr;
    }

    int parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
            case TokenKind::Identifier:
                return parse_identifier();
            case TokenKind::StringLit:
            case TokenKind::NumberLit:
            case TokenKind::BoolLit:
            case TokenKind::NullLit:
            case TokenKind::RegexLit: {
                advance();
                int node = make(NodeKind::Literal, t.begin, t.end);
                ast_.nodes[node].name = token_feature(t);
                ast_.nodes[node].value = t.text;
                return node;
            }
            case TokenKind::Punct:
                if (t.text == "(") {
                    advance();
                    int inner = parse_expression();
                    expect_punct(")");
                    return inner;
                }
                break;
            case TokenKind::Keyword:
                break;
        }
        throw ParseError("unexpected token '" + t.text + "'", t.begin, t.end);
    }
};

bool node_equal(const Ast& a, int ai, const Ast& b, int bi) {
    const AstNode& x = a.at(ai);
    const AstNode& y = b.at(bi);
    if (x.kind != y.kind || x.name != y.name || x.value != y.value || x.begin != y.begin ||
        x.end != y.end || x.children.size() != y.children.size())
        return false;
    for (size_t i = 0; i < x.children.size(); ++i) {
        if (x.children[i].tag != y.children[i].tag) return false;
        if (!node_equal(a, x.children[i].node, b, y.children[i].node)) return false;
    }
    return true;
}

}  // namespace

const char* node_kind_name(NodeKind kind) {
    for (const auto& kn : kKindNames)
        if (kn.kind == kind) return kn.name;
    throw InternalError("unknown node kind");
}

bool node_kind_from_name(const std::string& name, NodeKind& out) {
    for (const auto& kn : kKindNames) {
        if (name == kn.name) {
            out = kn.kind;
            return true;
        }
    }
    return false;
}

Ast parse(const std::vector<Token>& tokens) { return Parser(tokens).run(); }

Ast parse_source(const std::string& source) { return parse(tokenize(source)); }

bool ast_equal(const Ast& a, const Ast& b) {
    if (a.root < 0 || b.root < 0) return a.root == b.root;
    return node_equal(a, a.root, b, b.root);
}

}  // namespace typeflow
