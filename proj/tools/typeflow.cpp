// Command-line frontend: every pipeline stage as a subcommand writing
// inspectable artifacts (graphs, vocabularies, checkpoints, reports).
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "typeflow/annotations.hpp"
#include "typeflow/ast.hpp"
#include "typeflow/corpusgen.hpp"
#include "typeflow/errors.hpp"
#include "typeflow/evalmetrics.hpp"
#include "typeflow/model.hpp"
#include "typeflow/nn.hpp"
#include "typeflow/pipeline.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/tfg.hpp"
#include "typeflow/token.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace typeflow;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

bool is_source_file(const fs::path& p) {
    return p.extension() == ".js" || p.extension() == ".ts";
}

std::vector<fs::path> source_files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && is_source_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(dir).generic_string() <
               b.lexically_relative(dir).generic_string();
    });
    return out;
}

void report_skipped(const std::vector<SkippedFile>& skipped) {
    for (const SkippedFile& s : skipped)
        std::cerr << "warning: skipped " << s.path << ": " << s.reason << "\n";
}

DataSet load_reported(const std::string& dir, const DatasetOptions& opt) {
    std::vector<SkippedFile> skipped;
    DataSet ds = load_dataset(dir, opt, &skipped);
    report_skipped(skipped);
    std::cerr << "loaded " << ds.train.size() << " train / " << ds.valid.size()
              << " valid / " << ds.test.size() << " test files from " << dir << "\n";
    return ds;
}

std::vector<DataFile>& split_of(DataSet& ds, const std::string& name,
                                std::vector<DataFile>& all) {
    if (name == "train") return ds.train;
    if (name == "valid") return ds.valid;
    if (name == "test") return ds.test;
    all = ds.train;
    all.insert(all.end(), ds.valid.begin(), ds.valid.end());
    all.insert(all.end(), ds.test.begin(), ds.test.end());
    return all;
}

// ---- gen-corpus --------------------------------------------------------------

struct GenCorpusArgs {
    std::string spec_path, out_dir;
    std::int64_t seed = -1;
    int count = -1;
};

int run_gen_corpus(const GenCorpusArgs& a) {
    GenSpec spec;
    if (!a.spec_path.empty()) spec = gen_spec_from_json(read_file(a.spec_path));
    if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
    if (a.count >= 0) spec.file_count = a.count;
    write_corpus(spec, a.out_dir);
    std::cout << "wrote " << spec.file_count << " files and manifest.json to "
              << a.out_dir << "\n";
    return 0;
}

// ---- extract -----------------------------------------------------------------

struct ExtractArgs {
    std::string in, out;
    bool ast_json = false;
    int max_tokens = 0;
};

std::string extract_one(const std::string& source, const std::string& file_id,
                        const ExtractArgs& a) {
    if (a.ast_json) {
        const std::string stripped = strip_annotations(source).source;
        return ast_to_json(parse_source(stripped));
    }
    return tfg_to_json(extract_file(source, file_id, a.max_tokens));
}

int run_extract(const ExtractArgs& a) {
    if (fs::is_directory(a.in)) {
        const std::vector<fs::path> files = source_files_under(a.in);
        if (files.empty()) throw DataError("no .js/.ts files under '" + a.in + "'");
        const char* suffix = a.ast_json ? ".ast.json" : ".tfg.json";
        for (const fs::path& f : files) {
            const std::string rel = f.lexically_relative(a.in).generic_string();
            fs::path out = fs::path(a.out) / rel;
            out.replace_extension();  // drop .js/.ts
            write_file(out.string() + suffix, extract_one(read_file(f.string()), rel, a));
        }
        std::cout << "extracted " << files.size() << " files to " << a.out << "\n";
        return 0;
    }
    write_file(a.out, extract_one(read_file(a.in), a.in, a));
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---- vocab build ---------------------------------------------------------------

struct VocabArgs {
    std::string train_dir, out_dir;
    VocabBuildOptions caps;
    int max_tokens = 5000;
};

int run_vocab_build(const VocabArgs& a) {
    DatasetOptions dopt;
    dopt.train_frac = 1.0;  // every file feeds the tables
    dopt.valid_frac = 0.0;
    dopt.max_tokens = a.max_tokens;
    std::vector<SkippedFile> skipped;
    DataSet ds = load_dataset(a.train_dir, dopt, &skipped);
    report_skipped(skipped);
    std::vector<DataFile> files = std::move(ds.train);
    for (auto* split : {&ds.valid, &ds.test})
        files.insert(files.end(), split->begin(), split->end());

    const Vocabularies v = build_vocabularies(files, a.caps);
    write_file((fs::path(a.out_dir) / "names.json").string(), vocab_to_json(*v.names));
    write_file((fs::path(a.out_dir) / "segments.json").string(),
               vocab_to_json(*v.segments));
    write_file((fs::path(a.out_dir) / "node_features.json").string(),
               vocab_to_json(v.node_features));
    write_file((fs::path(a.out_dir) / "edge_features.json").string(),
               vocab_to_json(*v.edge_features));
    write_file((fs::path(a.out_dir) / "types.json").string(), vocab_to_json(v.types));
    write_file((fs::path(a.out_dir) / "bpe.json").string(), bpe_to_json(*v.bpe));
    json counts = json::array();
    for (int i = 0; i < v.types.size(); ++i)
        counts.push_back({{"type", v.types.at(i)},
                          {"count", v.type_counts[static_cast<std::size_t>(i)]}});
    write_file((fs::path(a.out_dir) / "type_counts.json").string(), counts.dump(2) + "\n");

    std::printf("%-14s %6d entries\n", "names", v.names->size());
    std::printf("%-14s %6d entries\n", "segments", v.segments->size());
    std::printf("%-14s %6d entries\n", "node_features", v.node_features.size());
    std::printf("%-14s %6d entries\n", "edge_features", v.edge_features->size());
    std::printf("%-14s %6d entries\n", "types", v.types.size());
    std::printf("%-14s %6zu merges\n", "bpe", v.bpe->merges.size());
    return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
    std::string config, data_dir, out_path, log_path;
    int K = -1;
    int batch = 64;
    int epochs = 60;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 1;
    VocabBuildOptions caps;
    DatasetOptions data;
};

int run_train(const TrainArgs& a) {
    DataSet ds = load_reported(a.data_dir, a.data);

    TrainOptions topt;
    topt.preset = a.config;
    ModelConfig cfg = preset_config(a.config);
    if (a.K >= 0) cfg.K = a.K;
    topt.config = cfg;
    topt.epochs = a.epochs;
    topt.batch_size = a.batch;
    topt.seed = a.seed;
    topt.optimizer.lr = static_cast<float>(a.lr);
    topt.optimizer.weight_decay = static_cast<float>(a.weight_decay);
    topt.vocab = a.caps;
    topt.checkpoint_path = a.out_path;
    topt.log_path = a.log_path;

    const TrainResult r = train_model(std::move(ds), topt, &std::cout);
    std::cout << "best checkpoint: epoch " << r.best.epoch << ", validation loss "
              << r.best.validation_loss << " -> " << a.out_path << "\n";
    return 0;
}

// ---- predict -----------------------------------------------------------------

struct PredictArgs {
    std::string model_path, in_path, out_path;
    int topk = 5;
};

int run_predict(const PredictArgs& a) {
    const Model m = load_checkpoint(a.model_path);
    const std::string text = predictions_json(m, read_file(a.in_path), a.in_path, a.topk);
    if (a.out_path.empty())
        std::cout << text;
    else
        write_file(a.out_path, text);
    return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string model_path, data_dir, split = "test", json_path, plot_path;
    int batch = 64;
    DatasetOptions data;
};

int run_eval(const EvalArgs& a) {
    const Model m = load_checkpoint(a.model_path);
    DataSet ds = load_reported(a.data_dir, a.data);
    std::vector<DataFile> all;
    const std::vector<DataFile>& files = split_of(ds, a.split, all);
    if (files.empty()) throw DataError("split '" + a.split + "' has no files");

    const EvalReport rep = evaluate(m, files, a.batch);
    std::printf("%-8s %8s %8s %8s\n", "category", "labels", "top1", "top5");
    for (const EvalCategory& c : rep.categories)
        std::printf("%-8s %8lld %8.4f %8.4f\n", c.name.c_str(), c.labels, c.top1, c.top5);
    std::printf("files %lld   labels %lld   mean loss %.4f\n", rep.files, rep.labels,
                rep.loss);

    if (!a.json_path.empty()) write_file(a.json_path, eval_report_json(rep));
    if (!a.plot_path.empty()) {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const EvalCategory& c : rep.categories) {
            labels.push_back(c.name);
            values.push_back(c.top1);
        }
        write_file(a.plot_path, svg_bar_chart("top-1 accuracy", labels, values, "top-1"));
    }
    return 0;
}

// ---- bench -------------------------------------------------------------------

struct BenchArgs {
    std::string model_path, data_dir, split = "test", json_path;
    int batch = 64;
    int repeats = 6;
    DatasetOptions data;
};

int run_bench(const BenchArgs& a) {
    const Model m = load_checkpoint(a.model_path);
    DataSet ds = load_reported(a.data_dir, a.data);
    std::vector<DataFile> all;
    const std::vector<DataFile>& files = split_of(ds, a.split, all);
    if (files.empty()) throw DataError("split '" + a.split + "' has no files");

    const BenchResult r = bench_model(m, files, a.batch, a.repeats);
    std::printf("%d files, %d repeats, batch %d\n", r.files, r.repeats, r.batch_size);
    std::printf("inference only:       %9.2f +/- %.2f files/s\n", r.exclusive_mean,
                r.exclusive_std);
    std::printf("extraction included:  %9.2f +/- %.2f files/s\n", r.inclusive_mean,
                r.inclusive_std);
    if (!a.json_path.empty()) write_file(a.json_path, bench_result_json(r));
    return 0;
}

// ---- grad-check ----------------------------------------------------------------

struct GradCheckArgs {
    std::string config;
    std::uint64_t seed = 1;
    double eps = 1e-4;
    double tol = 1e-5;
    int samples = 200;
};

int run_grad_check(const GradCheckArgs& a) {
    GenSpec spec;
    spec.seed = a.seed;
    spec.file_count = 4;
    spec.max_funcs = 1;
    spec.min_stmts = 2;
    spec.max_stmts = 3;
    spec.w_name_hint = 0.5;
    std::vector<DataFile> files;
    for (int i = 0; i < spec.file_count; ++i) {
        const GenFile f = generate_file(spec, i);
        DataFile d;
        d.path = f.file_name;
        d.file_id = f.file_name;
        d.source = strip_annotations(f.source).source;
        d.graph = extract_file(f.source, f.file_name);
        files.push_back(std::move(d));
    }
    const Vocabularies vocabs = build_vocabularies(files, VocabBuildOptions{});

    ModelConfig c = preset_config(a.config);
    c.K = 3;  // narrow model: finite differences need the loss cheap
    c.d_h = 16;
    c.d_name = 16;
    c.d_e = 12;
    c.d_seg = 8;
    c.d_seg_rnn = 8;
    c.d_ctx_rnn = 16;
    ModelT<double> m = build_model<double>(c, vocabs, a.seed);

    std::vector<const Tfg*> gs;
    for (const DataFile& f : files) gs.push_back(&f.graph);
    const GraphBatch batch = make_batch(gs, c, m.vocabs);

    Rng rng(Rng::derive(a.seed, 0x67726164ull));
    const GradCheckResult res = grad_check<double>(
        m.params,
        [&](Tape<double>& t, TapeParams<double>& P) {
            return batch_loss(t, P, c, batch);
        },
        a.samples, a.eps, rng);

    const bool ok = res.max_rel_err <= a.tol;
    std::printf("%s: %s  max_rel_err %.3e over %d coordinates (worst %s, eps %.1e)\n",
                a.config.c_str(), ok ? "PASS" : "FAIL", res.max_rel_err, res.checked,
                res.worst.c_str(), a.eps);
    if (!ok)
        throw InternalError("gradient check failed for '" + a.config +
                            "': max relative error " + std::to_string(res.max_rel_err));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"type flow graph toolkit: extract graphs, train and run type predictors"};
    app.require_subcommand(1);
    std::function<int()> action;

    const std::vector<std::string> presets = preset_names();

    GenCorpusArgs gen;
    CLI::App* c_gen = app.add_subcommand("gen-corpus", "generate a labeled synthetic corpus");
    c_gen->add_option("--spec", gen.spec_path, "corpus spec JSON (defaults apply if omitted)");
    c_gen->add_option("--out", gen.out_dir, "output directory")->required();
    c_gen->add_option("--seed", gen.seed, "override the spec seed");
    c_gen->add_option("--count", gen.count, "override the spec file count");
    c_gen->callback([&] { action = [&] { return run_gen_corpus(gen); }; });

    ExtractArgs ex;
    CLI::App* c_ex = app.add_subcommand("extract", "build graphs (or ASTs) from source files");
    c_ex->add_option("--in", ex.in, "source file or directory")->required();
    c_ex->add_option("--out", ex.out, "output file (file input) or directory")->required();
    c_ex->add_flag("--ast-json", ex.ast_json, "emit the AST instead of the graph");
    c_ex->add_option("--max-tokens", ex.max_tokens, "reject files longer than this (0 = no limit)");
    c_ex->callback([&] { action = [&] { return run_extract(ex); }; });

    VocabArgs vo;
    CLI::App* c_vocab = app.add_subcommand("vocab", "vocabulary tools");
    c_vocab->require_subcommand(1);
    CLI::App* c_vb = c_vocab->add_subcommand("build", "build vocabularies from a training corpus");
    c_vb->add_option("--train", vo.train_dir, "training corpus directory")->required();
    c_vb->add_option("--out", vo.out_dir, "output directory")->required();
    c_vb->add_option("--names", vo.caps.max_names, "name vocabulary cap");
    c_vb->add_option("--merges", vo.caps.bpe_merges, "BPE merge count");
    c_vb->add_option("--types", vo.caps.max_types, "type vocabulary cap");
    c_vb->add_option("--node-features", vo.caps.max_node_features, "node feature cap");
    c_vb->add_option("--edge-features", vo.caps.max_edge_features, "edge feature cap");
    c_vb->add_option("--max-tokens", vo.max_tokens, "skip files longer than this");
    c_vb->callback([&] { action = [&] { return run_vocab_build(vo); }; });

    TrainArgs tr;
    CLI::App* c_tr = app.add_subcommand("train", "train a model and save the best checkpoint");
    c_tr->add_option("--config", tr.config, "model preset")
        ->required()
        ->check(CLI::IsMember(presets));
    c_tr->add_option("--data", tr.data_dir, "dataset directory")->required();
    c_tr->add_option("--out", tr.out_path, "checkpoint output path")->required();
    c_tr->add_option("--K", tr.K, "propagation steps (preset default if omitted)");
    c_tr->add_option("--batch", tr.batch, "files per batch");
    c_tr->add_option("--epochs", tr.epochs, "training epochs");
    c_tr->add_option("--lr", tr.lr, "learning rate");
    c_tr->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
    c_tr->add_option("--seed", tr.seed, "run seed");
    c_tr->add_option("--log", tr.log_path, "JSONL metrics log path");
    c_tr->add_option("--names", tr.caps.max_names, "name vocabulary cap");
    c_tr->add_option("--merges", tr.caps.bpe_merges, "BPE merge count");
    c_tr->add_option("--types", tr.caps.max_types, "type vocabulary cap");
    c_tr->add_option("--train-frac", tr.data.train_frac, "training fraction (flat datasets)");
    c_tr->add_option("--valid-frac", tr.data.valid_frac, "validation fraction (flat datasets)");
    c_tr->add_option("--split-seed", tr.data.seed, "shuffle seed for flat dataset splits");
    c_tr->add_option("--max-tokens", tr.data.max_tokens, "skip files longer than this");
    c_tr->callback([&] { action = [&] { return run_train(tr); }; });

    PredictArgs pr;
    CLI::App* c_pr = app.add_subcommand("predict", "rank types for every identifier in a file");
    c_pr->add_option("--model", pr.model_path, "checkpoint path")->required();
    c_pr->add_option("--in", pr.in_path, "source file")->required();
    c_pr->add_option("--topk", pr.topk, "ranked types per identifier");
    c_pr->add_option("--out", pr.out_path, "write JSON here instead of stdout");
    c_pr->callback([&] { action = [&] { return run_predict(pr); }; });

    EvalArgs ev;
    CLI::App* c_ev = app.add_subcommand("eval", "score a checkpoint on a dataset split");
    c_ev->add_option("--model", ev.model_path, "checkpoint path")->required();
    c_ev->add_option("--data", ev.data_dir, "dataset directory")->required();
    c_ev->add_option("--split", ev.split, "train, valid, test, or all")
        ->check(CLI::IsMember({"train", "valid", "test", "all"}));
    c_ev->add_option("--json", ev.json_path, "write the report as JSON");
    c_ev->add_option("--plot", ev.plot_path, "write a per-category SVG bar chart");
    c_ev->add_option("--batch", ev.batch, "files per batch");
    c_ev->add_option("--split-seed", ev.data.seed, "shuffle seed for flat dataset splits");
    c_ev->callback([&] { action = [&] { return run_eval(ev); }; });

    BenchArgs be;
    CLI::App* c_be = app.add_subcommand("bench", "measure prediction throughput");
    c_be->add_option("--model", be.model_path, "checkpoint path")->required();
    c_be->add_option("--data", be.data_dir, "dataset directory")->required();
    c_be->add_option("--split", be.split, "train, valid, test, or all")
        ->check(CLI::IsMember({"train", "valid", "test", "all"}));
    c_be->add_option("--repeats", be.repeats, "timed passes per mode");
    c_be->add_option("--batch", be.batch, "files per batch");
    c_be->add_option("--json", be.json_path, "write the result as JSON");
    c_be->callback([&] { action = [&] { return run_bench(be); }; });

    GradCheckArgs gc;
    CLI::App* c_gc = app.add_subcommand("grad-check",
                                        "compare gradients against finite differences");
    c_gc->add_option("--config", gc.config, "model preset")
        ->required()
        ->check(CLI::IsMember(presets));
    c_gc->add_option("--seed", gc.seed, "run seed");
    c_gc->add_option("--eps", gc.eps, "finite difference step");
    c_gc->add_option("--tol", gc.tol, "maximum allowed relative error");
    c_gc->add_option("--samples", gc.samples, "parameter coordinates to probe");
    c_gc->callback([&] { action = [&] { return run_grad_check(gc); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }

    try {
        return action ? action() : 1;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
