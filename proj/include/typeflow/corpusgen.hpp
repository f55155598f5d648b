#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace typeflow {

// Synthetic corpus generator. Every label is planted with exactly one kind of
// recoverable evidence ("signal class"):
//   literal        let v3: number = 42;            (direct initializer)
//   property_flow  o1.p2 = 42; let v4: number = o1.p2;
//   call_return    function f1() { return 42; }  let v5: number = f1();
//   name_hint      let itemCount: number;          (the name is the evidence)
// Flow-grounded classes use literal-groundable types and deliberately neutral
// names; value flow never crosses an operator expression, whose result type
// the graph cannot see. Name-hint labels draw from the full type palette.
struct GenSpec {
    std::uint64_t seed = 1;
    int file_count = 100;
    int min_funcs = 1;
    int max_funcs = 3;
    int min_stmts = 2;   // statement slots per function body / top level
    int max_stmts = 5;
    // relative sampling weights of the signal classes (0 disables a class)
    double w_literal = 1.0;
    double w_property = 1.0;
    double w_call = 1.0;
    double w_name_hint = 0.0;
};

struct GenLabel {
    std::size_t begin = 0;  // identifier span in the annotation-free source
    std::size_t end = 0;
    std::string name;
    std::string type;
    std::string signal_class;
};

struct GenFile {
    std::string file_name;   // "f0000.js", numbered by index
    std::string source;      // annotated source text
    std::vector<GenLabel> labels;
};

// The 14 types labels draw from; the first four are literal-groundable.
const std::vector<std::string>& gen_type_palette();

// Spec <-> JSON: {"seed", "file_count", "min_funcs", "max_funcs", "min_stmts",
// "max_stmts", "weights": {"literal", "property_flow", "call_return",
// "name_hint"}}. Every key is optional; unknown keys are rejected.
GenSpec gen_spec_from_json(const std::string& text);
std::string gen_spec_to_json(const GenSpec& spec);

// Generates one file deterministically from (spec.seed, index) and verifies
// its own output: the file must extract cleanly, validate with no findings,
// and bind every planted annotation to the intended node and type.
GenFile generate_file(const GenSpec& spec, int index);

// Writes file_count sources plus manifest.json under out_dir.
void write_corpus(const GenSpec& spec, const std::string& out_dir);

std::string manifest_json(const GenSpec& spec, const std::vector<GenFile>& files);

}  // namespace typeflow
