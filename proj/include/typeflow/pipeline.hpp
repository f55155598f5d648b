#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "typeflow/model.hpp"
#include "typeflow/tfg.hpp"

namespace typeflow {

// ---- single-file extraction --------------------------------------------------

// Canonicalizes one raw annotation into a trainable type label:
//   - function types "(...) => T" collapse to their (canonicalized) return type
//   - generic applications "Name<...>" collapse to "Name"
//   - literal types collapse to their base ("'a'" -> string, "42" -> number,
//     "true"/"false" -> boolean)
//   - single-character names (type variables) and "any" are rejected.
std::optional<std::string> preprocess_type_label(const std::string& raw);

// Strips annotations, tokenizes, parses, builds the graph, and binds each
// annotation's canonicalized type to the identifier node at its span.
// With max_tokens > 0, longer files raise DataError instead of parsing.
Tfg extract_file(const std::string& source, const std::string& file_id,
                 int max_tokens = 0);

// ---- datasets -----------------------------------------------------------------

struct DataFile {
    std::string path;     // absolute or dataset-relative on-disk path
    std::string file_id;  // stable id (path relative to the dataset root)
    std::string source;   // annotation-free source text
    Tfg graph;
};

struct DataSet {
    std::vector<DataFile> train;
    std::vector<DataFile> valid;
    std::vector<DataFile> test;
};

struct DatasetOptions {
    std::uint64_t seed = 1;      // drives the ratio split only
    double train_frac = 0.8;
    double valid_frac = 0.1;     // remainder after train+valid is test
    int max_tokens = 5000;       // longer files are skipped
};

struct SkippedFile {
    std::string path;
    std::string reason;
};

// Loads every *.js / *.ts under `dir`. When train/valid/test subdirectories
// exist they define the split; otherwise file ids are sorted, shuffled by the
// seed, and split by the fractions. Unparseable and over-long files are
// skipped (recorded in `skipped` when given), never fatal.
DataSet load_dataset(const std::string& dir, const DatasetOptions& opt,
                     std::vector<SkippedFile>* skipped = nullptr);

// ---- vocabulary construction ---------------------------------------------------

struct VocabBuildOptions {
    std::size_t max_names = 10000;
    std::size_t max_node_features = 184;
    std::size_t max_edge_features = 210;
    std::size_t max_types = 100;
    int bpe_merges = 10000;
};

// Counts features over the training split and freezes every table. Name,
// segment, and node-feature tables carry an unknown entry; edge-feature and
// type tables are exact. Node features count both non-identifier node
// features and non-identifier token kinds, since token sequences are embedded
// through the same table.
Vocabularies build_vocabularies(const std::vector<DataFile>& train,
                                const VocabBuildOptions& opt);

// Drops edges whose feature the vocabulary does not contain (applied to
// valid/test graphs so unseen edge kinds cannot reach the model).
void remove_oov_edges(Tfg& g, const Vocabulary& edge_vocab);

// Drops labels whose type the vocabulary does not contain.
void filter_labels(Tfg& g, const Vocabulary& types);

// ---- training -------------------------------------------------------------------

struct TrainOptions {
    std::string preset = "rgnn";
    std::optional<ModelConfig> config;  // overrides `preset` when set
    int epochs = 60;
    int batch_size = 64;
    std::uint64_t seed = 1;
    AdamW<float>::Options optimizer{};
    VocabBuildOptions vocab{};
    std::string checkpoint_path;  // best-validation weights; empty = don't save
    std::string log_path;         // JSONL epoch log; empty = don't write
};

struct EpochStats {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double top1 = 0.0;
    double top5 = 0.0;
    long long labels = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ModelMeta best;                     // epoch/loss of the kept weights
    std::vector<EpochStats> history;    // one train + one valid row per epoch
};

// Builds vocabularies from the training split, filters labels everywhere and
// out-of-vocabulary edges in valid/test, then runs the optimization loop.
// Per-epoch shuffling derives from (seed, epoch), so runs are repeatable.
// The checkpoint with the best validation loss is kept; with zero epochs the
// freshly initialized model is saved as-is.
TrainResult train_model(DataSet data, const TrainOptions& opt,
                        std::ostream* progress = nullptr);

// Rank of the correct class in one logits row: the number of classes that
// score strictly higher, plus earlier-indexed ties. Top-k correct iff < k.
int label_rank(const float* row, int n_classes, int label);

std::string epoch_stats_json(const EpochStats& s);

}  // namespace typeflow
