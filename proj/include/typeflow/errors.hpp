#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace typeflow {

// Base class for all recoverable errors raised by this library. The CLI maps
// subclasses onto exit codes: data/format problems -> 2, internal faults -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (bad source text, bad JSON, bad checkpoint bytes, ...).
struct DataError : Error {
    using Error::Error;
};

// Broken internal invariant or unusable request (shape mismatch, missing
// vocabulary coverage for training data, ...).
struct InternalError : Error {
    using Error::Error;
};

struct LexError : DataError {
    LexError(const std::string& msg, size_t offset)
        : DataError(msg + " at offset " + std::to_string(offset)), offset(offset) {}
    size_t offset;
};

struct ParseError : DataError {
    ParseError(const std::string& msg, size_t begin, size_t end)
        : DataError(msg + " at [" + std::to_string(begin) + "," + std::to_string(end) + ")"),
          begin(begin),
          end(end) {}
    size_t begin = 0;
    size_t end = 0;
};

// JSON document does not match the expected schema; `path` is a JSON-pointer
// style location such as "$.children[0].node.kind".
struct SchemaError : DataError {
    SchemaError(const std::string& msg, const std::string& path)
        : DataError(msg + " (at " + path + ")"), path(path) {}
    std::string path;
};

// Tensor shape/arity violation in the numeric core.
struct ShapeError : InternalError {
    using InternalError::InternalError;
};

// Structural fault found while building or consuming a type flow graph.
struct ExtractError : InternalError {
    using InternalError::InternalError;
};

// Vocabulary construction asked for from an empty item stream.
struct EmptyCorpus : DataError {
    using DataError::DataError;
};

// A feature string required at embedding time is absent from a vocabulary
// that carries no UNKNOWN entry.
struct MissingVocabEntry : InternalError {
    using InternalError::InternalError;
};

// An IdentNode has no matching token in the token sequence passed to the
// contextual encoder.
struct MissingToken : InternalError {
    using InternalError::InternalError;
};

// Checkpoint bytes are not a valid container (magic/version/truncation).
struct FormatError : DataError {
    using DataError::DataError;
};

// Checkpoint container parses but its contents contradict its own config
// (tensor set mismatch, shape mismatch, missing vocabulary).
struct IntegrityError : DataError {
    using DataError::DataError;
};

// Training loss became non-finite.
struct DivergenceError : InternalError {
    using InternalError::InternalError;
};

// Evaluation input lacks a prediction for a labeled node.
struct MissingPrediction : InternalError {
    using InternalError::InternalError;
};

}  // namespace typeflow
