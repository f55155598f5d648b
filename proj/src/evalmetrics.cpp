#include "typeflow/evalmetrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "typeflow/annotations.hpp"
#include "typeflow/errors.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

using nlohmann::json;

std::vector<int> top10_type_ids(const Vocabularies& v) {
    std::vector<int> ids(static_cast<std::size_t>(v.types.size()));
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return v.type_counts[static_cast<std::size_t>(a)] >
               v.type_counts[static_cast<std::size_t>(b)];
    });
    if (ids.size() > 10) ids.resize(10);
    return ids;
}

namespace {

std::vector<Tfg> preprocess_graphs(const Model& m, const std::vector<DataFile>& files) {
    std::vector<Tfg> out;
    out.reserve(files.size());
    for (const DataFile& f : files) {
        Tfg g = f.graph;
        remove_oov_edges(g, *m.vocabs.edge_features);
        filter_labels(g, m.vocabs.types);
        out.push_back(std::move(g));
    }
    return out;
}

double row_cross_entropy(const float* row, int n, int label) {
    double mx = row[0];
    for (int c = 1; c < n; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double sum = 0.0;
    for (int c = 0; c < n; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
    return std::log(sum) + mx - static_cast<double>(row[label]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

EvalReport evaluate(const Model& m, const std::vector<DataFile>& files, int batch_size) {
    if (batch_size <= 0) throw DataError("batch size must be positive");
    const std::vector<Tfg> graphs = preprocess_graphs(m, files);
    std::vector<const Tfg*> labeled;
    for (const Tfg& g : graphs)
        if (!g.labels.empty()) labeled.push_back(&g);

    const std::vector<int> top_ids = top10_type_ids(m.vocabs);
    const std::set<int> top(top_ids.begin(), top_ids.end());

    EvalReport r;
    r.files = static_cast<long long>(files.size());
    const int n_types = m.vocabs.types.size();
    long long t1_all = 0, t5_all = 0, t1_top = 0, t5_top = 0, n_top = 0;
    double loss_sum = 0.0;

    for (std::size_t at = 0; at < labeled.size(); at += static_cast<std::size_t>(batch_size)) {
        std::vector<const Tfg*> gs(labeled.begin() + static_cast<std::ptrdiff_t>(at),
                                   labeled.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(
                                           labeled.size(),
                                           at + static_cast<std::size_t>(batch_size))));
        const GraphBatch b = make_batch(gs, m.config, m.vocabs);
        const Tensor<float> logits = label_logits(m, b);
        for (int i = 0; i < logits.rows(); ++i) {
            const float* row = &logits.data[static_cast<std::size_t>(i) *
                                            static_cast<std::size_t>(n_types)];
            const int label = b.label_types[static_cast<std::size_t>(i)];
            const int rank = label_rank(row, n_types, label);
            loss_sum += row_cross_entropy(row, n_types, label);
            ++r.labels;
            t1_all += rank < 1;
            t5_all += rank < 5;
            if (top.count(label)) {
                ++n_top;
                t1_top += rank < 1;
                t5_top += rank < 5;
            }
        }
    }

    if (r.labels > 0) r.loss = loss_sum / static_cast<double>(r.labels);
    auto frac = [](long long a, long long b) {
        return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
    };
    const long long n_rest = r.labels - n_top;
    r.categories = {
        {"all", r.labels, frac(t1_all, r.labels), frac(t5_all, r.labels)},
        {"top10", n_top, frac(t1_top, n_top), frac(t5_top, n_top)},
        {"rest", n_rest, frac(t1_all - t1_top, n_rest), frac(t5_all - t5_top, n_rest)},
    };
    return r;
}

std::string eval_report_json(const EvalReport& r) {
    json j;
    j["files"] = r.files;
    j["labels"] = r.labels;
    j["loss"] = r.loss;
    json cats = json::array();
    for (const EvalCategory& c : r.categories) {
        cats.push_back(
            {{"name", c.name}, {"labels", c.labels}, {"top1", c.top1}, {"top5", c.top5}});
    }
    j["categories"] = std::move(cats);
    return j.dump();
}

std::string predictions_json(const Model& m, const std::string& source,
                             const std::string& file_id, int topk) {
    Tfg g = extract_file(source, file_id);
    remove_oov_edges(g, *m.vocabs.edge_features);
    const std::vector<Token> toks = tokenize(strip_annotations(source).source);

    std::vector<int> nodes;
    std::vector<std::size_t> tok_idx;
    for (std::size_t i = 0; i < g.tokens.size(); ++i) {
        if (g.tokens[i].ident_node >= 0) {
            nodes.push_back(g.tokens[i].ident_node);
            tok_idx.push_back(i);
        }
    }

    json preds = json::array();
    if (!nodes.empty()) {
        const Tensor<float> probs = predict_probs(m, g, nodes);
        const int n_types = m.vocabs.types.size();
        const int k = std::clamp(topk, 1, n_types);
        for (std::size_t r = 0; r < nodes.size(); ++r) {
            const float* row = probs.data.data() + static_cast<std::ptrdiff_t>(r) * n_types;
            std::vector<int> order(static_cast<std::size_t>(n_types));
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int x, int y) { return row[x] > row[y]; });
            json ranking = json::array();
            for (int i = 0; i < k; ++i) {
                const int ty = order[static_cast<std::size_t>(i)];
                ranking.push_back({{"type", m.vocabs.types.at(ty)}, {"prob", row[ty]}});
            }
            const Token& t = toks[tok_idx[r]];
            preds.push_back({{"name", t.text},
                             {"begin", t.begin},
                             {"end", t.end},
                             {"node", nodes[r]},
                             {"ranking", std::move(ranking)}});
        }
    }
    json out = {{"file", file_id}, {"predictions", std::move(preds)}};
    return out.dump(2) + "\n";
}

// ---- throughput ---------------------------------------------------------------

namespace {

// Logits for every predictable node; the work a deployment would do.
void forward_all_predictable(const Model& m, const std::vector<const Tfg*>& gs) {
    const GraphBatch b = make_batch(gs, m.config, m.vocabs);
    std::vector<int> rows;
    int off = 0;
    for (const Tfg* g : gs) {
        for (std::size_t i = 0; i < g->nodes.size(); ++i)
            if (g->nodes[i].predictable) rows.push_back(off + static_cast<int>(i));
        off += static_cast<int>(g->nodes.size());
    }
    Tape<float> t(false);
    TapeParams<float> P(t, m.params, false);
    const int logits = forward_logits(t, P, m.config, b, rows);
    (void)t.value(logits);
}

template <typename F>
void run_batched(const std::vector<const Tfg*>& graphs, int batch_size, F&& fn) {
    for (std::size_t at = 0; at < graphs.size(); at += static_cast<std::size_t>(batch_size)) {
        std::vector<const Tfg*> gs(graphs.begin() + static_cast<std::ptrdiff_t>(at),
                                   graphs.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(
                                           graphs.size(),
                                           at + static_cast<std::size_t>(batch_size))));
        fn(gs);
    }
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

BenchResult bench_model(const Model& m, const std::vector<DataFile>& files,
                        int batch_size, int repeats) {
    if (batch_size <= 0) throw DataError("batch size must be positive");
    if (repeats <= 0) throw DataError("repeat count must be positive");
    if (files.empty()) throw DataError("nothing to benchmark");

    const std::vector<Tfg> pre = preprocess_graphs(m, files);
    std::vector<const Tfg*> pre_ptrs;
    for (const Tfg& g : pre) pre_ptrs.push_back(&g);

    BenchResult r;
    r.files = static_cast<int>(files.size());
    r.repeats = repeats;
    r.batch_size = batch_size;

    // warm-up, untimed
    run_batched(pre_ptrs, batch_size,
                [&](const std::vector<const Tfg*>& gs) { forward_all_predictable(m, gs); });

    std::vector<double> excl, incl;
    for (int rep = 0; rep < repeats; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        run_batched(pre_ptrs, batch_size, [&](const std::vector<const Tfg*>& gs) {
            forward_all_predictable(m, gs);
        });
        excl.push_back(static_cast<double>(r.files) / seconds_since(t0));
    }
    for (int rep = 0; rep < repeats; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<Tfg> fresh;
        fresh.reserve(files.size());
        for (const DataFile& f : files) {
            Tfg g = extract_file(f.source, f.file_id);
            remove_oov_edges(g, *m.vocabs.edge_features);
            fresh.push_back(std::move(g));
        }
        std::vector<const Tfg*> ptrs;
        for (const Tfg& g : fresh) ptrs.push_back(&g);
        run_batched(ptrs, batch_size, [&](const std::vector<const Tfg*>& gs) {
            forward_all_predictable(m, gs);
        });
        incl.push_back(static_cast<double>(r.files) / seconds_since(t0));
    }
    mean_std(excl, r.exclusive_mean, r.exclusive_std);
    mean_std(incl, r.inclusive_mean, r.inclusive_std);
    return r;
}

std::string bench_result_json(const BenchResult& r) {
    json j;
    j["files"] = r.files;
    j["repeats"] = r.repeats;
    j["batch_size"] = r.batch_size;
    j["exclusive_files_per_sec"] = {{"mean", r.exclusive_mean}, {"std", r.exclusive_std}};
    j["inclusive_files_per_sec"] = {{"mean", r.inclusive_mean}, {"std", r.inclusive_std}};
    return j.dump();
}

// ---- plotting -------------------------------------------------------------------

namespace {

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream ss;
    if (v != 0 && (std::abs(v) < 0.01 || std::abs(v) >= 10000))
        ss.precision(2), ss << std::scientific << v;
    else
        ss.precision(v < 10 ? 3 : 1), ss << std::fixed << v;
    return ss.str();
}

}  // namespace

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& unit) {
    if (labels.size() != values.size())
        throw InternalError("chart labels and values differ in length");
    const int W = 640, H = 360;
    const int ml = 70, mr = 20, mt = 48, mb = 64;
    const int pw = W - ml - mr, ph = H - mt - mb;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    vmax *= 1.1;

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
      << " font-size=\"16\" font-weight=\"bold\">" << esc(title) << "</text>\n";

    for (int i = 0; i <= 4; ++i) {
        const double v = vmax * i / 4.0;
        const double y = mt + ph - ph * i / 4.0;
        s << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
          << "\" stroke=\"#ddd\"/>\n"
          << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
          << "</text>\n";
    }
    s << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\""
      << "rotate(-90 16 " << mt + ph / 2 << ")\">" << esc(unit) << "</text>\n";

    const std::size_t n = values.size();
    if (n > 0) {
        const double slot = static_cast<double>(pw) / static_cast<double>(n);
        const double bw = slot * 0.6;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = ph * values[i] / vmax;
            const double x = ml + slot * static_cast<double>(i) + (slot - bw) / 2.0;
            const double y = mt + ph - h;
            s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bw << "\" height=\""
              << h << "\" fill=\"#4878a8\"/>\n"
              << "<text x=\"" << x + bw / 2 << "\" y=\"" << y - 5
              << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
              << fmt(values[i]) << "</text>\n"
              << "<text x=\"" << x + bw / 2 << "\" y=\"" << mt + ph + 16
              << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
              << esc(labels[i]) << "</text>\n";
        }
    }
    s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"#333\"/>\n</svg>\n";
    return s.str();
}

}  // namespace typeflow
