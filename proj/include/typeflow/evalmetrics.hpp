#pragma once

#include <string>
#include <vector>

#include "typeflow/model.hpp"
#include "typeflow/pipeline.hpp"

namespace typeflow {

// ---- accuracy ---------------------------------------------------------------

struct EvalCategory {
    std::string name;  // "all", "top10", "rest"
    long long labels = 0;
    double top1 = 0.0;
    double top5 = 0.0;
};

struct EvalReport {
    long long files = 0;
    long long labels = 0;
    double loss = 0.0;  // mean cross entropy over all labels
    std::vector<EvalCategory> categories;
};

// Scores the model on labeled files. Graphs are preprocessed against the
// model's vocabularies first (out-of-vocabulary edges dropped, labels outside
// the type table dropped). The "top10" category covers labels whose type is
// among the ten most frequent training types (by the checkpoint's counts);
// "rest" covers the remainder.
EvalReport evaluate(const Model& m, const std::vector<DataFile>& files, int batch_size);

std::string eval_report_json(const EvalReport& r);

// Ranked type predictions for every identifier occurrence in one source file:
// {"file": ..., "predictions": [{"name", "begin", "end", "node",
//  "ranking": [{"type", "prob"}, ...]}, ...]} with spans into the
// annotation-free text. Edges outside the model's edge vocabulary are dropped
// before inference, mirroring evaluation.
std::string predictions_json(const Model& m, const std::string& source,
                             const std::string& file_id, int topk);

// Type ids of the ten most frequent training types (count desc, vocab order
// on ties).
std::vector<int> top10_type_ids(const Vocabularies& v);

// ---- throughput -------------------------------------------------------------

struct BenchResult {
    int files = 0;
    int repeats = 0;
    int batch_size = 0;
    // files/second over every predictable node, graphs extracted up front
    double exclusive_mean = 0.0;
    double exclusive_std = 0.0;
    // files/second with per-file graph extraction included in the timing
    double inclusive_mean = 0.0;
    double inclusive_std = 0.0;
};

// One untimed warm-up pass, then `repeats` timed passes over the whole file
// list for both modes. Reported as mean and sample standard deviation.
BenchResult bench_model(const Model& m, const std::vector<DataFile>& files,
                        int batch_size, int repeats);

std::string bench_result_json(const BenchResult& r);

// ---- plotting ---------------------------------------------------------------

// Self-contained SVG bar chart; `values[i]` is labeled `labels[i]`, the axis
// captioned with `unit`.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& unit);

}  // namespace typeflow
