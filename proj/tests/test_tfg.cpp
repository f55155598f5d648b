#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "typeflow/pipeline.hpp"
#include "typeflow/tfg.hpp"

using namespace typeflow;

namespace {

// Rich enough to exercise every edge family: declarations, a call with
// arguments, a return, property read/write, and an if statement.
const char* kRichSource =
    "function scale(v, k) {\n"
    "  if (k) { return v * k; }\n"
    "  return v;\n"
    "}\n"
    "let box = makeBox();\n"
    "box.size = 3;\n"
    "let big = scale(box.size, 2);\n";

std::vector<int> ident_node_ids(const Tfg& g) {
    std::vector<int> ids;
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].kind == TfgNodeKind::IdentNode) ids.push_back(int(i));
    return ids;
}

int count_edges_with_stem(const Tfg& g, const std::string& stem) {
    int n = 0;
    for (const auto& e : g.edges)
        if (e.feature.find(stem) != std::string::npos) ++n;
    return n;
}

}  // namespace

TEST_CASE("only identifier and expression nodes are predictable") {
    CHECK(tfg_kind_predictable(TfgNodeKind::IdentNode));
    CHECK(tfg_kind_predictable(TfgNodeKind::ExprNode));
    CHECK_FALSE(tfg_kind_predictable(TfgNodeKind::TokNode));
    CHECK_FALSE(tfg_kind_predictable(TfgNodeKind::VarSymNode));
    CHECK_FALSE(tfg_kind_predictable(TfgNodeKind::ObjPropNode));
    CHECK_FALSE(tfg_kind_predictable(TfgNodeKind::CtxNode));
}

TEST_CASE("node kind names round-trip") {
    for (TfgNodeKind k : {TfgNodeKind::IdentNode, TfgNodeKind::TokNode, TfgNodeKind::ExprNode,
                          TfgNodeKind::VarSymNode, TfgNodeKind::ObjPropNode, TfgNodeKind::CtxNode}) {
        TfgNodeKind back;
        REQUIRE(tfg_node_kind_from_name(tfg_node_kind_name(k), back));
        CHECK(back == k);
    }
    TfgNodeKind out;
    CHECK_FALSE(tfg_node_kind_from_name("NoSuchKind", out));
}

TEST_CASE("extraction validates cleanly and interleaves edge duals") {
    const Tfg g = extract_file(kRichSource, "rich.js");
    CHECK(validate_tfg(g).empty());
    CHECK(g.file_id == "rich.js");

    // Edges come in adjacent forward/backward pairs with mirrored endpoints.
    REQUIRE(g.edges.size() % 2 == 0);
    for (size_t i = 0; i < g.edges.size(); i += 2) {
        const TfgEdge& f = g.edges[i];
        const TfgEdge& b = g.edges[i + 1];
        REQUIRE(f.feature.size() > 3);
        CHECK(f.feature.substr(f.feature.size() - 3) == ",f)");
        CHECK(b.feature.substr(b.feature.size() - 3) == ",b)");
        CHECK(f.feature.substr(0, f.feature.size() - 3) ==
              b.feature.substr(0, b.feature.size() - 3));
        CHECK(f.src == b.dst);
        CHECK(f.dst == b.src);
    }

    // Every edge family except the degenerate ones shows up in this source.
    CHECK(count_edges_with_stem(g, "VarSymEdge") > 0);
    CHECK(count_edges_with_stem(g, "ObjPropEdge") > 0);
    CHECK(count_edges_with_stem(g, "CallEdge") > 0);
    CHECK(count_edges_with_stem(g, "RetEdge") > 0);
    CHECK(count_edges_with_stem(g, "CtxEdge") > 0);

    // Predictable flags agree with kinds everywhere.
    for (const TfgNode& n : g.nodes) CHECK(n.predictable == tfg_kind_predictable(n.kind));
}

TEST_CASE("token sequence links the i-th identifier token to the i-th identifier node") {
    const Tfg g = extract_file(kRichSource, "rich.js");
    REQUIRE_FALSE(g.tokens.empty());

    std::vector<int> linked;
    for (const TfgToken& t : g.tokens)
        if (t.ident_node != -1) linked.push_back(t.ident_node);
    CHECK(linked == ident_node_ids(g));

    for (const TfgToken& t : g.tokens) {
        if (t.ident_node == -1) continue;
        REQUIRE(t.ident_node < int(g.nodes.size()));
        const TfgNode& n = g.nodes[size_t(t.ident_node)];
        CHECK(n.kind == TfgNodeKind::IdentNode);
        // Identifier tokens carry the identifier text itself.
        CHECK(t.feature == n.feature);
    }
}

TEST_CASE("bare identifier and literal statements grow an expression wrapper") {
    // One wrapper for the bare literal initializer, one for the bare
    // identifier statement.
    const Tfg ident_g = extract_file("let a = 1;\na;", "w1.js");
    int wrappers = 0;
    for (const TfgNode& n : ident_g.nodes)
        if (n.kind == TfgNodeKind::ExprNode && n.feature == "ExprWrapper") ++wrappers;
    CHECK(wrappers == 2);

    const Tfg lit_g = extract_file("let a = 1;", "w2.js");
    wrappers = 0;
    for (const TfgNode& n : lit_g.nodes)
        if (n.kind == TfgNodeKind::ExprNode && n.feature == "ExprWrapper") ++wrappers;
    CHECK(wrappers == 1);

    // A compound initializer is its own expression node; no wrapper appears.
    const Tfg bin_g = extract_file("let a = 1 + 2;", "w3.js");
    for (const TfgNode& n : bin_g.nodes) CHECK(n.feature != "ExprWrapper");
}

TEST_CASE("shadowed names get one variable hub per scope") {
    const Tfg g = extract_file(
        "let n = 1;\nfunction f() { let n = 2; return n; }\nlet m = n;", "shadow.js");
    CHECK(validate_tfg(g).empty());
    int hubs = 0;
    for (const TfgNode& n : g.nodes)
        if (n.kind == TfgNodeKind::VarSymNode) ++hubs;
    // n (outer), n (inner), m, and the function name f each get a hub.
    CHECK(hubs == 4);
}

TEST_CASE("calls to unknown callees add no call wiring") {
    const Tfg g = extract_file("let a = mystery(1);", "unk.js");
    CHECK(validate_tfg(g).empty());
    CHECK(count_edges_with_stem(g, "CallEdge") == 0);
}

TEST_CASE("call sites wire arguments to parameters and returns to the site") {
    const Tfg g = extract_file(
        "function id(x) { return x; }\nlet a = id(5);", "call.js");
    CHECK(validate_tfg(g).empty());
    // arg->param pair plus return->site pair, each with its dual.
    CHECK(count_edges_with_stem(g, "CallEdge") == 4);
    CHECK(count_edges_with_stem(g, "RetEdge") == 2);
}

TEST_CASE("function declaration table keeps the lexically last duplicate") {
    const Ast ast = parse_source(
        "function f(a) { return a; }\nfunction f(x, y) { return x; }");
    const FuncDeclTable table = collect_function_decls(ast);
    REQUIRE(table.count("f") == 1);
    CHECK(table.at("f").param_count == 2);
    CHECK(table.at("f").param_asts.size() == 2);
}

TEST_CASE("structural audit flags specific defects") {
    Tfg g = extract_file("let a = 1;", "audit.js");
    REQUIRE(validate_tfg(g).empty());

    SUBCASE("out-of-range endpoint") {
        g.edges[0].dst = int(g.nodes.size()) + 7;
        const auto findings = validate_tfg(g);
        REQUIRE_FALSE(findings.empty());
        CHECK(findings[0].find("out-of-range") != std::string::npos);
    }
    SUBCASE("unpaired forward edge") {
        g.edges.pop_back();  // drop one backward dual
        bool unpaired = false;
        for (const auto& f : validate_tfg(g))
            if (f.find("unpaired") != std::string::npos) unpaired = true;
        CHECK(unpaired);
    }
    SUBCASE("missing direction suffix") {
        g.edges[0].feature = "(VarSymEdge)";
        bool flagged = false;
        for (const auto& f : validate_tfg(g))
            if (f.find("direction suffix") != std::string::npos) flagged = true;
        CHECK(flagged);
    }
    SUBCASE("flipped predictable flag") {
        g.nodes[0].predictable = !g.nodes[0].predictable;
        bool flagged = false;
        for (const auto& f : validate_tfg(g))
            if (f.find("predictable") != std::string::npos) flagged = true;
        CHECK(flagged);
    }
    SUBCASE("label on a non-predictable node") {
        int tok = -1;
        for (size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i].kind == TfgNodeKind::TokNode) tok = int(i);
        REQUIRE(tok >= 0);
        g.labels[tok] = "number";
        bool flagged = false;
        for (const auto& f : validate_tfg(g))
            if (f.find("non-predictable") != std::string::npos) flagged = true;
        CHECK(flagged);
    }
    SUBCASE("token pointing at a non-identifier node") {
        int tok = -1;
        for (size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i].kind == TfgNodeKind::TokNode) tok = int(i);
        REQUIRE(tok >= 0);
        for (auto& t : g.tokens)
            if (t.ident_node != -1) t.ident_node = tok;
        bool flagged = false;
        for (const auto& f : validate_tfg(g))
            if (f.find("non-identifier") != std::string::npos) flagged = true;
        CHECK(flagged);
    }
}

TEST_CASE("graph JSON round-trips and rejects malformed documents") {
    Tfg g = extract_file("let s: string = 'x';\nlet a = s;", "j.js");
    REQUIRE_FALSE(g.labels.empty());

    const std::string j = tfg_to_json(g);
    const Tfg back = tfg_from_json(j);
    CHECK(tfg_to_json(back) == j);
    CHECK(back.labels == g.labels);
    CHECK(back.tokens.size() == g.tokens.size());

    CHECK_THROWS_AS(tfg_from_json("not json"), SchemaError);
    CHECK_THROWS_AS(tfg_from_json("{\"file\": \"x\"}"), SchemaError);
    // Node ids must stay dense and ordered.
    nlohmann::json doc = nlohmann::json::parse(j);
    doc["nodes"][0]["id"] = 3;
    CHECK_THROWS_AS(tfg_from_json(doc.dump()), SchemaError);
}

TEST_CASE("annotations become labels on the matching identifier nodes") {
    const Tfg g = extract_file("let count: number = 1;\nlet tag: string = 'a';", "lab.js");
    REQUIRE(g.labels.size() == 2);
    for (const auto& [id, type] : g.labels) {
        const TfgNode& n = g.nodes[size_t(id)];
        CHECK(n.kind == TfgNodeKind::IdentNode);
        if (n.feature == "count") CHECK(type == "number");
        if (n.feature == "tag") CHECK(type == "string");
    }
}
