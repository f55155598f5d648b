#include <json.hpp>

#include "typeflow/ast.hpp"

namespace typeflow {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

ordered dump_node(const Ast& ast, int id) {
    const AstNode& n = ast.at(id);
    ordered j;
    j["kind"] = node_kind_name(n.kind);
    if (!n.name.empty()) j["name"] = n.name;
    if (!n.value.empty()) j["value"] = n.value;
    j["span"] = {n.begin, n.end};
    ordered kids = ordered::array();
    for (const auto& c : n.children) {
        ordered entry;
        entry["tag"] = c.tag;
        entry["node"] = dump_node(ast, c.node);
        kids.push_back(std::move(entry));
    }
    j["children"] = std::move(kids);
    return j;
}

int load_node(const json& j, const std::string& path, Ast& ast) {
    if (!j.is_object()) throw SchemaError("node must be an object", path);
    if (!j.contains("kind") || !j["kind"].is_string())
        throw SchemaError("missing or non-string \"kind\"", path + ".kind");
    NodeKind kind;
    if (!node_kind_from_name(j["kind"].get<std::string>(), kind))
        throw SchemaError("unknown node kind \"" + j["kind"].get<std::string>() + "\"",
                          path + ".kind");
    AstNode node;
    node.kind = kind;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw SchemaError("\"name\" must be a string", path + ".name");
        node.name = j["name"].get<std::string>();
    }
    if (j.contains("value")) {
        if (!j["value"].is_string())
            throw SchemaError("\"value\" must be a string", path + ".value");
        node.value = j["value"].get<std::string>();
    }
    if (!j.contains("span") || !j["span"].is_array() || j["span"].size() != 2 ||
        !j["span"][0].is_number_unsigned() || !j["span"][1].is_number_unsigned())
        throw SchemaError("\"span\" must be [begin, end]", path + ".span");
    node.begin = j["span"][0].get<size_t>();
    node.end = j["span"][1].get<size_t>();
    if (node.begin > node.end) throw SchemaError("span begin exceeds end", path + ".span");

    int id = int(ast.nodes.size());
    ast.nodes.push_back(std::move(node));

    if (j.contains("children")) {
        if (!j["children"].is_array())
            throw SchemaError("\"children\" must be an array", path + ".children");
        size_t idx = 0;
        for (const auto& c : j["children"]) {
            std::string cpath = path + ".children[" + std::to_string(idx++) + "]";
            if (!c.is_object() || !c.contains("tag") || !c["tag"].is_string() ||
                !c.contains("node"))
                throw SchemaError("child must be {\"tag\": str, \"node\": {...}}", cpath);
            int child = load_node(c["node"], cpath + ".node", ast);
            ast.nodes[id].children.push_back({c["tag"].get<std::string>(), child});
        }
    }
    if (kind == NodeKind::Identifier) {
        if (ast.nodes[id].name.empty())
            throw SchemaError("Identifier requires \"name\"", path + ".name");
        if (!ast.nodes[id].children.empty())
            throw SchemaError("Identifier must be a leaf", path + ".children");
    }
    if (kind == NodeKind::Literal && !ast.nodes[id].children.empty())
        throw SchemaError("Literal must be a leaf", path + ".children");
    return id;
}

}  // namespace

std::string ast_to_json(const Ast& ast) {
    if (ast.root < 0) throw InternalError("cannot serialize an empty Ast");
    return dump_node(ast, ast.root).dump(2);
}

Ast ast_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what(), "$");
    }
    Ast ast;
    ast.root = load_node(j, "$", ast);
    if (ast.at(ast.root).kind != NodeKind::Program)
        throw SchemaError("root node must be a Program", "$.kind");
    return ast;
}

}  // namespace typeflow
