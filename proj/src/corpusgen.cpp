#include "typeflow/corpusgen.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "typeflow/annotations.hpp"
#include "typeflow/errors.hpp"
#include "typeflow/pipeline.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/tfg.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& gen_type_palette() {
    static const std::vector<std::string> palette = {
        // literal-groundable
        "number", "string", "boolean", "RegExp",
        // name-hint only
        "Array", "Promise", "Map", "Set", "Date", "Error", "Object", "Buffer",
        "Request", "Response"};
    return palette;
}

namespace {

const std::map<std::string, std::vector<std::string>>& hint_stems() {
    static const std::map<std::string, std::vector<std::string>> stems = {
        {"number", {"count", "total", "index", "size", "len", "num"}},
        {"string", {"name", "text", "label", "message", "title", "str"}},
        {"boolean", {"flag", "enabled", "done", "valid", "active"}},
        {"RegExp", {"pattern", "regex", "matcher"}},
        {"Array", {"items", "list", "elements", "entries"}},
        {"Promise", {"promise", "future", "pending"}},
        {"Map", {"lookup", "mapping", "registry"}},
        {"Set", {"unique", "pool", "seen"}},
        {"Date", {"date", "time", "when", "timestamp"}},
        {"Error", {"error", "err", "failure"}},
        {"Object", {"config", "options", "props", "settings"}},
        {"Buffer", {"buffer", "buf", "bytes", "chunk"}},
        {"Request", {"request", "req", "query"}},
        {"Response", {"response", "reply", "result"}},
    };
    return stems;
}

const std::vector<std::string>& other_stems() {
    static const std::vector<std::string> stems = {
        "user", "item", "page", "node", "file", "row",  "line", "word", "task", "job",
        "key",  "box",  "cell", "slot", "card", "link", "tag",  "shop", "game", "book"};
    return stems;
}

const std::vector<std::string>& string_words() {
    static const std::vector<std::string> words = {"alpha", "beta",  "gamma", "delta",
                                                   "omega", "north", "south", "east"};
    return words;
}

const std::vector<std::string>& regex_bodies() {
    static const std::vector<std::string> bodies = {"ab+c", "[a-z]+", "xy*", "a|b",
                                                    "[0-9]", "qz?"};
    return bodies;
}

struct FileGen {
    const GenSpec& spec;
    Rng rng;
    std::vector<std::string> funcs;      // complete function declaration texts
    std::vector<std::string> top_stmts;  // top-level statement lines
    std::map<std::string, std::pair<std::string, std::string>> planted;  // name -> type, class
    std::set<std::string> used_names;
    int next_v = 0, next_o = 0, next_p = 0, next_fn = 0;

    explicit FileGen(const GenSpec& s, int index)
        : spec(s), rng(Rng::derive(s.seed, static_cast<std::uint64_t>(index))) {}

    int rand_range(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(rng.below(v.size()))];
    }

    std::string fresh_v() { return "v" + std::to_string(next_v++); }
    std::string fresh_o() { return "o" + std::to_string(next_o++); }
    std::string fresh_p() { return "p" + std::to_string(next_p++); }
    std::string fresh_fn() { return "fn" + std::to_string(next_fn++); }
    std::string free_u() { return "u" + std::to_string(rng.below(4)); }

    std::string literal_for(const std::string& ty) {
        if (ty == "number") return std::to_string(rng.below(1000));
        if (ty == "string") return "'" + pick(string_words()) + "'";
        if (ty == "boolean") return rng.below(2) ? "true" : "false";
        if (ty == "RegExp") return "/" + pick(regex_bodies()) + "/";
        throw InternalError("no literal form for type '" + ty + "'");
    }

    std::string groundable_type() {
        static const std::vector<std::string> g = {"number", "string", "boolean", "RegExp"};
        return pick(g);
    }

    void plant(const std::string& name, const std::string& ty, const std::string& cls) {
        if (!planted.emplace(name, std::make_pair(ty, cls)).second)
            throw InternalError("generator reused annotated name '" + name + "'");
    }

    std::string hint_name(const std::string& ty) {
        const std::vector<std::string>& stems = hint_stems().at(ty);
        for (int attempt = 0; attempt < 20; ++attempt) {
            const std::string& stem = pick(stems);
            const std::string& other = pick(other_stems());
            std::string name;
            switch (rng.below(3)) {
                case 0:  // camelCase, hint last
                    name = other + static_cast<char>(std::toupper(stem[0])) + stem.substr(1);
                    break;
                case 1:  // snake_case, hint last
                    name = other + "_" + stem;
                    break;
                default:  // bare stem with a digit
                    name = stem + std::to_string(rng.below(10));
                    break;
            }
            if (used_names.insert(name).second) return name;
        }
        throw InternalError("could not allocate a fresh hinted name");
    }

    void emit_literal(std::vector<std::string>& body) {
        const std::string ty = groundable_type();
        const std::string name = fresh_v();
        body.push_back("let " + name + ": " + ty + " = " + literal_for(ty) + ";");
        plant(name, ty, "literal");
    }

    void emit_property(std::vector<std::string>& body) {
        const std::string ty = groundable_type();
        const std::string obj = fresh_o(), prop = fresh_p(), name = fresh_v();
        body.push_back(obj + "." + prop + " = " + literal_for(ty) + ";");
        body.push_back("let " + name + ": " + ty + " = " + obj + "." + prop + ";");
        plant(name, ty, "property_flow");
    }

    void emit_call(std::vector<std::string>& body) {
        const std::string ty = groundable_type();
        const std::string fn = fresh_fn(), name = fresh_v();
        std::string helper = "function " + fn + "() {\n";
        if (rng.below(2)) helper += "  " + free_u() + " = " + free_u() + ";\n";
        helper += "  return " + literal_for(ty) + ";\n}";
        funcs.push_back(std::move(helper));
        body.push_back("let " + name + ": " + ty + " = " + fn + "();");
        plant(name, ty, "call_return");
    }

    void emit_name_hint(std::vector<std::string>& body) {
        const std::string ty = pick(gen_type_palette());
        const std::string name = hint_name(ty);
        body.push_back("let " + name + ": " + ty + ";");
        plant(name, ty, "name_hint");
    }

    void emit_filler(std::vector<std::string>& body) {
        switch (rng.below(5)) {
            case 0:
                body.push_back(free_u() + " = " + free_u() + ";");
                break;
            case 1:
                body.push_back("if (" + free_u() + ") { " + free_u() + " = " +
                               std::to_string(rng.below(100)) + "; }");
                break;
            case 2:
                body.push_back(free_u() + " = " + free_u() + " + " + free_u() + ";");
                break;
            case 3:
                body.push_back("g" + std::to_string(rng.below(3)) + "(" + free_u() + ");");
                break;
            default:
                body.push_back("let " + fresh_v() + " = " + free_u() + ";");
                break;
        }
    }

    // -1 = filler, otherwise index into {literal, property, call, name_hint}
    int sample_class() {
        const double w[4] = {spec.w_literal, spec.w_property, spec.w_call,
                             spec.w_name_hint};
        double sum = 0.0;
        for (double x : w) sum += x;
        if (sum <= 0.0) throw DataError("all signal-class weights are zero");
        const double filler = 0.8 * sum;
        double r = rng.uniform(0.0, sum + filler);
        for (int i = 0; i < 4; ++i) {
            if (r < w[i]) return i;
            r -= w[i];
        }
        return -1;
    }

    void emit_slot(std::vector<std::string>& body) {
        switch (sample_class()) {
            case 0: emit_literal(body); break;
            case 1: emit_property(body); break;
            case 2: emit_call(body); break;
            case 3: emit_name_hint(body); break;
            default: emit_filler(body); break;
        }
    }

    void force_one_label(std::vector<std::string>& body) {
        if (spec.w_literal > 0)
            emit_literal(body);
        else if (spec.w_property > 0)
            emit_property(body);
        else if (spec.w_call > 0)
            emit_call(body);
        else
            emit_name_hint(body);
    }

    std::string make_function() {
        const std::string fn = fresh_fn();
        std::string param;
        bool hinted_param = false;
        if (spec.w_name_hint > 0 && rng.below(2)) {
            const std::string ty = pick(gen_type_palette());
            param = hint_name(ty);
            plant(param, ty, "name_hint");
            hinted_param = true;
        } else if (rng.below(2)) {
            param = "q" + std::to_string(rng.below(4));
        }
        std::vector<std::string> body;
        const int slots = rand_range(spec.min_stmts, spec.max_stmts);
        for (int i = 0; i < slots; ++i) emit_slot(body);
        if (!param.empty() && rng.below(2))
            body.push_back(free_u() + " = " + param + ";");
        if (rng.below(2)) body.push_back("return " + free_u() + ";");

        std::string text = "function " + fn + "(";
        if (!param.empty()) {
            text += param;
            if (hinted_param) text += ": " + planted.at(param).first;
        }
        text += ") {\n";
        for (const std::string& s : body) text += "  " + s + "\n";
        text += "}";
        return text;
    }

    GenFile build(int index) {
        const int nfuncs = rand_range(spec.min_funcs, spec.max_funcs);
        for (int i = 0; i < nfuncs; ++i) funcs.push_back(make_function());
        const int slots = rand_range(spec.min_stmts, spec.max_stmts);
        for (int i = 0; i < slots; ++i) emit_slot(top_stmts);
        if (planted.empty()) force_one_label(top_stmts);

        std::string source;
        for (const std::string& f : funcs) source += f + "\n";
        for (const std::string& s : top_stmts) source += s + "\n";

        GenFile out;
        char buf[32];
        std::snprintf(buf, sizeof buf, "f%04d.js", index);
        out.file_name = buf;
        out.source = std::move(source);

        // bind spans: annotations come back sorted by position, names unique
        const StripResult sr = strip_annotations(out.source);
        if (sr.annotations.size() != planted.size())
            throw InternalError("generator planted " + std::to_string(planted.size()) +
                                " labels but stripped " +
                                std::to_string(sr.annotations.size()));
        for (const Annotation& a : sr.annotations) {
            const auto it = planted.find(a.name);
            if (it == planted.end())
                throw InternalError("stripped annotation names unknown identifier '" +
                                    a.name + "'");
            out.labels.push_back(
                {a.begin, a.end, a.name, it->second.first, it->second.second});
        }
        return out;
    }
};

void self_check(const GenFile& f) {
    const Tfg g = extract_file(f.source, f.file_name);
    const std::vector<std::string> findings = validate_tfg(g);
    if (!findings.empty())
        throw InternalError("generated '" + f.file_name +
                            "' fails validation: " + findings.front());
    if (g.labels.size() != f.labels.size())
        throw InternalError("generated '" + f.file_name + "' bound " +
                            std::to_string(g.labels.size()) + " of " +
                            std::to_string(f.labels.size()) + " labels");
    // every planted span must land on an identifier token labeled as intended
    std::map<std::size_t, int> tok_at;
    const std::vector<Token> toks = tokenize(strip_annotations(f.source).source);
    for (std::size_t i = 0; i < toks.size(); ++i)
        tok_at[toks[i].begin] = static_cast<int>(i);
    for (const GenLabel& l : f.labels) {
        const auto it = tok_at.find(l.begin);
        if (it == tok_at.end())
            throw InternalError("planted span in '" + f.file_name +
                                "' does not start a token");
        const int node = g.tokens[static_cast<std::size_t>(it->second)].ident_node;
        if (node < 0 || !g.labels.count(node) || g.labels.at(node) != l.type)
            throw InternalError("planted label '" + l.name + "' in '" + f.file_name +
                                "' did not bind to type " + l.type);
    }
}

}  // namespace

GenFile generate_file(const GenSpec& spec, int index) {
    FileGen gen(spec, index);
    GenFile f = gen.build(index);
    self_check(f);
    return f;
}

GenSpec gen_spec_from_json(const std::string& text) {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw DataError("corpus spec is not a JSON object");
    GenSpec s;
    const auto num = [](const json& v, const std::string& key) {
        if (!v.is_number()) throw DataError("corpus spec: '" + key + "' must be a number");
        return v.get<double>();
    };
    for (const auto& [key, val] : j.items()) {
        if (key == "seed")
            s.seed = static_cast<std::uint64_t>(num(val, key));
        else if (key == "file_count")
            s.file_count = static_cast<int>(num(val, key));
        else if (key == "min_funcs")
            s.min_funcs = static_cast<int>(num(val, key));
        else if (key == "max_funcs")
            s.max_funcs = static_cast<int>(num(val, key));
        else if (key == "min_stmts")
            s.min_stmts = static_cast<int>(num(val, key));
        else if (key == "max_stmts")
            s.max_stmts = static_cast<int>(num(val, key));
        else if (key == "weights") {
            if (!val.is_object())
                throw DataError("corpus spec: 'weights' must be an object");
            for (const auto& [wk, wv] : val.items()) {
                if (wk == "literal")
                    s.w_literal = num(wv, wk);
                else if (wk == "property_flow")
                    s.w_property = num(wv, wk);
                else if (wk == "call_return")
                    s.w_call = num(wv, wk);
                else if (wk == "name_hint")
                    s.w_name_hint = num(wv, wk);
                else
                    throw DataError("corpus spec: unknown weight '" + wk + "'");
            }
        } else {
            throw DataError("corpus spec: unknown key '" + key + "'");
        }
    }
    if (s.min_funcs < 0 || s.max_funcs < s.min_funcs)
        throw DataError("corpus spec: function count range is invalid");
    if (s.min_stmts < 0 || s.max_stmts < s.min_stmts)
        throw DataError("corpus spec: statement count range is invalid");
    return s;
}

std::string gen_spec_to_json(const GenSpec& spec) {
    json j;
    j["seed"] = spec.seed;
    j["file_count"] = spec.file_count;
    j["min_funcs"] = spec.min_funcs;
    j["max_funcs"] = spec.max_funcs;
    j["min_stmts"] = spec.min_stmts;
    j["max_stmts"] = spec.max_stmts;
    j["weights"] = {{"literal", spec.w_literal},
                    {"property_flow", spec.w_property},
                    {"call_return", spec.w_call},
                    {"name_hint", spec.w_name_hint}};
    return j.dump(2) + "\n";
}

std::string manifest_json(const GenSpec& spec, const std::vector<GenFile>& files) {
    json j;
    j["seed"] = spec.seed;
    j["file_count"] = spec.file_count;
    j["weights"] = {{"literal", spec.w_literal},
                    {"property_flow", spec.w_property},
                    {"call_return", spec.w_call},
                    {"name_hint", spec.w_name_hint}};
    json jfiles = json::array();
    for (const GenFile& f : files) {
        json labels = json::array();
        for (const GenLabel& l : f.labels) {
            labels.push_back({{"begin", l.begin},
                              {"end", l.end},
                              {"name", l.name},
                              {"type", l.type},
                              {"signal_class", l.signal_class}});
        }
        jfiles.push_back({{"file", f.file_name}, {"labels", std::move(labels)}});
    }
    j["files"] = std::move(jfiles);
    return j.dump(2);
}

void write_corpus(const GenSpec& spec, const std::string& out_dir) {
    if (spec.file_count < 0) throw DataError("file count must be non-negative");
    fs::create_directories(out_dir);
    std::vector<GenFile> files;
    files.reserve(static_cast<std::size_t>(spec.file_count));
    for (int i = 0; i < spec.file_count; ++i) files.push_back(generate_file(spec, i));
    for (const GenFile& f : files) {
        std::ofstream out(fs::path(out_dir) / f.file_name, std::ios::trunc);
        if (!out) throw DataError("cannot write '" + f.file_name + "' under " + out_dir);
        out << f.source;
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    if (!mf) throw DataError("cannot write manifest.json under " + out_dir);
    mf << manifest_json(spec, files) << "\n";
}

}  // namespace typeflow
