#include "typeflow/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "typeflow/annotations.hpp"
#include "typeflow/ast.hpp"
#include "typeflow/errors.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/token.hpp"

namespace typeflow {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- label preprocessing ------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::optional<std::string> preprocess_type_label(const std::string& raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;

    // function type: take the (canonicalized) return type
    if (s[0] == '(') {
        int depth = 0;
        std::size_t i = 0;
        for (; i < s.size(); ++i) {
            if (s[i] == '(') ++depth;
            if (s[i] == ')' && --depth == 0) break;
        }
        if (depth == 0 && i < s.size()) {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j + 1 < s.size() && s[j] == '=' && s[j + 1] == '>')
                return preprocess_type_label(s.substr(j + 2));
        }
    }

    // generic application: keep the head name
    const std::size_t lt = s.find('<');
    if (lt != std::string::npos && s.back() == '>') s = trim(s.substr(0, lt));
    if (s.empty()) return std::nullopt;

    // literal types
    if (s[0] == '\'' || s[0] == '"' || s[0] == '`') return "string";
    if (std::isdigit(static_cast<unsigned char>(s[0])) ||
        (s[0] == '-' && s.size() > 1 && std::isdigit(static_cast<unsigned char>(s[1]))))
        return "number";
    if (s == "true" || s == "false") return "boolean";

    if (s == "any") return std::nullopt;
    if (s.size() <= 1) return std::nullopt;
    return s;
}

// ---- extraction -----------------------------------------------------------------

Tfg extract_file(const std::string& source, const std::string& file_id, int max_tokens) {
    const StripResult sr = strip_annotations(source);
    const std::vector<Token> toks = tokenize(sr.source);
    if (max_tokens > 0 && static_cast<int>(toks.size()) > max_tokens)
        throw DataError("file '" + file_id + "' has " + std::to_string(toks.size()) +
                        " tokens, over the " + std::to_string(max_tokens) + " limit");
    const Ast ast = parse(toks);
    Tfg g = build_tfg(ast, toks, file_id);

    for (const Annotation& a : sr.annotations) {
        // spans are sorted, as are token offsets
        const auto it = std::lower_bound(
            toks.begin(), toks.end(), a.begin,
            [](const Token& t, std::size_t begin) { return t.begin < begin; });
        if (it == toks.end() || it->begin != a.begin || it->end != a.end)
            throw ExtractError("annotation span for '" + a.name + "' in '" + file_id +
                               "' does not land on a token");
        const int tok_idx = static_cast<int>(it - toks.begin());
        const int node = g.tokens[static_cast<std::size_t>(tok_idx)].ident_node;
        if (node < 0)
            throw ExtractError("annotation for '" + a.name + "' in '" + file_id +
                               "' does not name an identifier");
        if (const auto label = preprocess_type_label(a.type)) g.labels[node] = *label;
    }
    return g;
}

// ---- dataset loading --------------------------------------------------------------

namespace {

bool is_source_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".js" || ext == ".ts";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Source files under root, sorted by their root-relative id for determinism.
std::vector<std::pair<std::string, fs::path>> list_sources(const fs::path& root) {
    std::vector<std::pair<std::string, fs::path>> out;
    if (!fs::exists(root)) return out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && is_source_file(entry.path()))
            out.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void load_split(const fs::path& root, const DatasetOptions& opt,
                std::vector<DataFile>& dst, std::vector<SkippedFile>* skipped) {
    for (const auto& [id, path] : list_sources(root)) {
        try {
            const std::string source = read_file(path);
            DataFile f;
            f.path = path.string();
            f.file_id = id;
            f.graph = extract_file(source, id, opt.max_tokens);
            f.source = strip_annotations(source).source;
            dst.push_back(std::move(f));
        } catch (const DataError& e) {
            if (skipped) skipped->push_back({path.string(), e.what()});
        }
    }
}

}  // namespace

DataSet load_dataset(const std::string& dir, const DatasetOptions& opt,
                     std::vector<SkippedFile>* skipped) {
    const fs::path root(dir);
    if (!fs::exists(root)) throw DataError("dataset directory '" + dir + "' does not exist");
    DataSet ds;

    const bool has_subdirs = fs::is_directory(root / "train") ||
                             fs::is_directory(root / "valid") ||
                             fs::is_directory(root / "test");
    if (has_subdirs) {
        load_split(root / "train", opt, ds.train, skipped);
        load_split(root / "valid", opt, ds.valid, skipped);
        load_split(root / "test", opt, ds.test, skipped);
        return ds;
    }

    std::vector<DataFile> all;
    load_split(root, opt, all, skipped);
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::derive(opt.seed, 0x73706c6974ull));  // independent split stream
    rng.shuffle(order);
    const std::size_t n = all.size();
    const auto n_train = static_cast<std::size_t>(opt.train_frac * static_cast<double>(n));
    const auto n_valid = static_cast<std::size_t>(opt.valid_frac * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        DataFile& f = all[order[i]];
        if (i < n_train)
            ds.train.push_back(std::move(f));
        else if (i < n_train + n_valid)
            ds.valid.push_back(std::move(f));
        else
            ds.test.push_back(std::move(f));
    }
    return ds;
}

// ---- vocabulary construction --------------------------------------------------------

Vocabularies build_vocabularies(const std::vector<DataFile>& train,
                                const VocabBuildOptions& opt) {
    std::map<std::string, long long> names, nfeat, efeat, types, words;
    for (const DataFile& f : train) {
        for (const TfgNode& n : f.graph.nodes) {
            if (n.kind == TfgNodeKind::IdentNode) {
                ++names[n.feature];
                for (const std::string& w : split_subtokens(n.feature)) ++words[w];
            } else {
                ++nfeat[n.feature];
            }
        }
        for (const TfgToken& t : f.graph.tokens)
            if (t.ident_node < 0) ++nfeat[t.feature];
        for (const TfgEdge& e : f.graph.edges) ++efeat[e.feature];
        for (const auto& [node, ty] : f.graph.labels) ++types[ty];
    }
    if (types.empty()) throw DataError("training split carries no type labels");

    Vocabularies v;
    v.names = build_vocab(names, opt.max_names, true);
    v.node_features = build_vocab(nfeat, opt.max_node_features, true);
    v.edge_features = build_vocab(efeat, opt.max_edge_features, false);
    v.types = build_vocab(types, opt.max_types, false);
    v.type_counts.reserve(static_cast<std::size_t>(v.types.size()));
    for (const std::string& t : v.types.entries()) v.type_counts.push_back(types.at(t));

    v.bpe = bpe_train(words, opt.bpe_merges);
    std::map<std::string, long long> segs;
    for (const auto& [word, count] : words)
        for (const std::string& sym : bpe_encode(*v.bpe, word)) segs[sym] += count;
    v.segments = build_vocab(segs, 0, true);
    return v;
}

void remove_oov_edges(Tfg& g, const Vocabulary& edge_vocab) {
    std::erase_if(g.edges,
                  [&](const TfgEdge& e) { return !edge_vocab.contains(e.feature); });
}

void filter_labels(Tfg& g, const Vocabulary& types) {
    for (auto it = g.labels.begin(); it != g.labels.end();) {
        if (!types.contains(it->second))
            it = g.labels.erase(it);
        else
            ++it;
    }
}

// ---- training -------------------------------------------------------------------------

int label_rank(const float* row, int n_classes, int label) {
    int rank = 0;
    const float ref = row[label];
    for (int c = 0; c < n_classes; ++c)
        if (row[c] > ref || (row[c] == ref && c < label)) ++rank;
    return rank;
}

std::string epoch_stats_json(const EpochStats& s) {
    json j;
    j["epoch"] = s.epoch;
    j["split"] = s.split;
    j["loss"] = s.loss;
    j["top1"] = s.top1;
    j["top5"] = s.top5;
    j["labels"] = s.labels;
    j["wall_seconds"] = s.wall_seconds;
    return j.dump();
}

namespace {

struct PassAccum {
    double loss_weighted = 0.0;
    long long top1 = 0, top5 = 0, labels = 0;

    void add(double batch_loss_mean, const Tensor<float>& logits,
             const std::vector<int>& label_types) {
        const int n = logits.rows(), k = logits.cols();
        for (int r = 0; r < n; ++r) {
            const int rank = label_rank(&logits.data[static_cast<std::size_t>(r) *
                                                     static_cast<std::size_t>(k)],
                                        k, label_types[static_cast<std::size_t>(r)]);
            top1 += rank < 1;
            top5 += rank < 5;
        }
        loss_weighted += batch_loss_mean * n;
        labels += n;
    }

    EpochStats stats(int epoch, const std::string& split, double wall) const {
        EpochStats s;
        s.epoch = epoch;
        s.split = split;
        s.labels = labels;
        s.wall_seconds = wall;
        if (labels > 0) {
            s.loss = loss_weighted / static_cast<double>(labels);
            s.top1 = static_cast<double>(top1) / static_cast<double>(labels);
            s.top5 = static_cast<double>(top5) / static_cast<double>(labels);
        }
        return s;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainResult train_model(DataSet data, const TrainOptions& opt, std::ostream* progress) {
    const ModelConfig cfg = opt.config ? *opt.config : preset_config(opt.preset);
    if (opt.batch_size <= 0) throw DataError("batch size must be positive");
    if (opt.epochs < 0) throw DataError("epoch count must be non-negative");

    Vocabularies vocabs = build_vocabularies(data.train, opt.vocab);
    for (DataFile& f : data.train) filter_labels(f.graph, vocabs.types);
    for (auto* split : {&data.valid, &data.test}) {
        for (DataFile& f : *split) {
            remove_oov_edges(f.graph, *vocabs.edge_features);
            filter_labels(f.graph, vocabs.types);
        }
    }

    Model m = build_model<float>(cfg, vocabs, opt.seed);

    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        if (!data.train[i].graph.labels.empty()) train_idx.push_back(i);
    if (train_idx.empty() && opt.epochs > 0)
        throw DataError("training split has no labeled graphs");
    std::vector<std::size_t> valid_idx;
    for (std::size_t i = 0; i < data.valid.size(); ++i)
        if (!data.valid[i].graph.labels.empty()) valid_idx.push_back(i);

    std::ofstream log;
    if (!opt.log_path.empty()) {
        log.open(opt.log_path, std::ios::trunc);
        if (!log) throw DataError("cannot open log '" + opt.log_path + "' for writing");
    }

    TrainResult res;
    res.best.seed = opt.seed;
    AdamW<float> optimizer(opt.optimizer);
    double best_loss = std::numeric_limits<double>::infinity();
    bool saved = false;

    auto run_valid = [&](int epoch) -> EpochStats {
        const auto t0 = std::chrono::steady_clock::now();
        PassAccum acc;
        for (std::size_t at = 0; at < valid_idx.size();
             at += static_cast<std::size_t>(opt.batch_size)) {
            std::vector<const Tfg*> gs;
            for (std::size_t j = at;
                 j < std::min(valid_idx.size(), at + static_cast<std::size_t>(opt.batch_size));
                 ++j)
                gs.push_back(&data.valid[valid_idx[j]].graph);
            const GraphBatch b = make_batch(gs, cfg, m.vocabs);
            Tape<float> t(false);
            TapeParams<float> P(t, m.params, false);
            const int logits = forward_logits(t, P, cfg, b, b.label_nodes);
            const int loss = t.cross_entropy_mean(logits, b.label_types);
            acc.add(t.value(loss).data[0], t.value(logits), b.label_types);
        }
        return acc.stats(epoch, "valid", seconds_since(t0));
    };

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(Rng::derive(opt.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(train_idx);
        PassAccum acc;
        for (std::size_t at = 0; at < train_idx.size();
             at += static_cast<std::size_t>(opt.batch_size)) {
            std::vector<const Tfg*> gs;
            for (std::size_t j = at;
                 j < std::min(train_idx.size(), at + static_cast<std::size_t>(opt.batch_size));
                 ++j)
                gs.push_back(&data.train[train_idx[j]].graph);
            const GraphBatch b = make_batch(gs, cfg, m.vocabs);
            Tape<float> t(true);
            TapeParams<float> P(t, m.params);
            const int logits = forward_logits(t, P, cfg, b, b.label_nodes);
            const int loss = t.cross_entropy_mean(logits, b.label_types);
            acc.add(t.value(loss).data[0], t.value(logits), b.label_types);
            t.backward(loss);
            optimizer.step(m.params, P.collect_grads());
        }
        const EpochStats tr = acc.stats(epoch, "train", seconds_since(t0));
        res.history.push_back(tr);
        if (log) log << epoch_stats_json(tr) << "\n" << std::flush;

        const EpochStats va = run_valid(epoch);
        res.history.push_back(va);
        if (log) log << epoch_stats_json(va) << "\n" << std::flush;
        if (progress)
            *progress << "epoch " << epoch << "/" << opt.epochs << "  train loss "
                      << tr.loss << " top1 " << tr.top1 << "  valid loss " << va.loss
                      << " top1 " << va.top1 << "  (" << tr.wall_seconds + va.wall_seconds
                      << "s)\n"
                      << std::flush;

        if (va.labels > 0 && va.loss < best_loss) {
            best_loss = va.loss;
            m.meta.epoch = epoch;
            m.meta.validation_loss = va.loss;
            res.best = m.meta;
            if (!opt.checkpoint_path.empty()) {
                save_checkpoint(m, opt.checkpoint_path);
                saved = true;
            }
        }
    }

    // Nothing picked a checkpoint: keep the final weights (fresh ones for a
    // zero-epoch run, so downstream tools always get a loadable model).
    if (!opt.checkpoint_path.empty() && !saved) {
        m.meta.epoch = opt.epochs;
        m.meta.validation_loss = 0.0;
        res.best = m.meta;
        save_checkpoint(m, opt.checkpoint_path);
    }
    return res;
}

}  // namespace typeflow
