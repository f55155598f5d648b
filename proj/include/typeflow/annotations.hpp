#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace typeflow {

// One stripped annotation. `begin`/`end` are the byte span of the annotated
// identifier in the *stripped* source (suitable for matching parse() spans of
// the stripped text): the declared variable name, the parameter name, or the
// function name for a return-type annotation.
struct Annotation {
    size_t begin = 0;
    size_t end = 0;
    std::string name;  // identifier text, for diagnostics
    std::string type;  // raw annotation text, e.g. "Array<number>"
};

struct StripResult {
    std::string source;                  // annotation-free source
    std::vector<Annotation> annotations; // sorted by begin
};

// Removes `: Type` annotations from variable declarations, parameters, and
// function return positions. Accepted annotation forms are a type name or a
// generic `Name<...>` with balanced brackets; the raw text is kept verbatim.
// Unannotated sources pass through byte-identical. Throws ParseError when a
// ':' appears outside an annotation position or the annotation is malformed.
StripResult strip_annotations(const std::string& source);

}  // namespace typeflow
