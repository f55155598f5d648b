#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "typeflow/annotations.hpp"
#include "typeflow/corpusgen.hpp"
#include "typeflow/model.hpp"
#include "typeflow/pipeline.hpp"

using namespace typeflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("typeflow_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small literal-heavy corpus split for training smoke tests.
DataSet tiny_dataset(int n_train, int n_valid, int n_test, uint64_t seed) {
    GenSpec spec;
    spec.seed = seed;
    spec.file_count = n_train + n_valid + n_test;
    spec.min_funcs = 1;
    spec.max_funcs = 1;
    spec.min_stmts = 2;
    spec.max_stmts = 3;
    DataSet ds;
    for (int i = 0; i < spec.file_count; ++i) {
        const GenFile f = generate_file(spec, i);
        DataFile df;
        df.path = f.file_name;
        df.file_id = f.file_name;
        df.graph = extract_file(f.source, f.file_name);
        df.source = strip_annotations(f.source).source;
        auto& dst = i < n_train ? ds.train : (i < n_train + n_valid ? ds.valid : ds.test);
        dst.push_back(std::move(df));
    }
    return ds;
}

ModelConfig tiny_train_config(const std::string& preset) {
    ModelConfig c = preset_config(preset);
    c.K = 2;
    c.d_h = 16;
    c.d_name = 16;
    c.d_e = 8;
    c.d_seg = 8;
    c.d_seg_rnn = 8;
    c.d_ctx_rnn = 16;
    return c;
}

}  // namespace

TEST_CASE("type labels canonicalize by the preprocessing rules") {
    auto pp = [](const std::string& s) { return preprocess_type_label(s); };
    CHECK(pp("number") == std::optional<std::string>("number"));
    CHECK(pp("  Promise<number>  ") == std::optional<std::string>("Promise"));
    CHECK(pp("Array<Map<string, number>>") == std::optional<std::string>("Array"));
    CHECK(pp("'lit'") == std::optional<std::string>("string"));
    CHECK(pp("\"x\"") == std::optional<std::string>("string"));
    CHECK(pp("`tpl`") == std::optional<std::string>("string"));
    CHECK(pp("42") == std::optional<std::string>("number"));
    CHECK(pp("-3") == std::optional<std::string>("number"));
    CHECK(pp("true") == std::optional<std::string>("boolean"));
    CHECK(pp("false") == std::optional<std::string>("boolean"));
    CHECK(pp("(a: string, b: number) => boolean") == std::optional<std::string>("boolean"));
    CHECK(pp("() => Array<string>") == std::optional<std::string>("Array"));
    CHECK(pp("() => () => string") == std::optional<std::string>("string"));
    CHECK(pp("any") == std::nullopt);
    CHECK(pp("T") == std::nullopt);
    CHECK(pp("") == std::nullopt);
    CHECK(pp("   ") == std::nullopt);
}

TEST_CASE("extraction binds canonicalized labels and enforces the token budget") {
    const Tfg g = extract_file(
        "let xs: Array<number> = make();\n"
        "let skip: any = misc();\n"
        "let tv: T = generic();\n"
        "function f(n: number) { return n; }\n",
        "bind.js");
    std::set<std::string> bound;
    for (const auto& [node, ty] : g.labels) {
        CHECK(g.nodes[size_t(node)].kind == TfgNodeKind::IdentNode);
        bound.insert(g.nodes[size_t(node)].feature + ":" + ty);
    }
    // "any" and single-character types never become labels
    CHECK(bound == std::set<std::string>{"xs:Array", "n:number"});

    CHECK_THROWS_AS(extract_file("let a = 1;\nlet b = 2;", "cap.js", 3), DataError);
}

TEST_CASE("dataset loading splits, skips, and stays deterministic") {
    TempDir tmp("load");
    write(tmp.path / "a.js", "let a: number = 1;");
    write(tmp.path / "b.js", "let b: string = 's';");
    write(tmp.path / "sub/c.js", "let c: boolean = true;");
    write(tmp.path / "d.js", "let d: number = 4;");
    write(tmp.path / "bad.js", "let = broken ;;;(");
    write(tmp.path / "huge.js", "let h = 1 + 2 + 3 + 4 + 5 + 6 + 7;");
    write(tmp.path / "notes.txt", "not a source file");

    DatasetOptions opt;
    opt.seed = 3;
    opt.train_frac = 0.5;
    opt.valid_frac = 0.25;
    opt.max_tokens = 12;  // huge.js tokenizes over this

    std::vector<SkippedFile> skipped;
    const DataSet ds = load_dataset(tmp.path.string(), opt, &skipped);
    CHECK(ds.train.size() == 2);
    CHECK(ds.valid.size() == 1);
    CHECK(ds.test.size() == 1);
    REQUIRE(skipped.size() == 2);
    std::set<std::string> why;
    for (const auto& s : skipped) why.insert(fs::path(s.path).filename().string());
    CHECK(why == std::set<std::string>{"bad.js", "huge.js"});

    // same seed, same assignment; the file ids are subdir-relative
    const DataSet again = load_dataset(tmp.path.string(), opt, nullptr);
    REQUIRE(again.train.size() == ds.train.size());
    for (size_t i = 0; i < ds.train.size(); ++i)
        CHECK(again.train[i].file_id == ds.train[i].file_id);
    std::set<std::string> ids;
    for (const auto& f : ds.train) ids.insert(f.file_id);
    for (const auto& f : ds.valid) ids.insert(f.file_id);
    for (const auto& f : ds.test) ids.insert(f.file_id);
    CHECK(ids.count("sub/c.js") + ids.count("a.js") == 2);

    CHECK_THROWS_AS(load_dataset((tmp.path / "missing").string(), opt, nullptr), DataError);
}

TEST_CASE("split subdirectories override the ratio split") {
    TempDir tmp("split");
    write(tmp.path / "train/t1.js", "let a: number = 1;");
    write(tmp.path / "train/t2.js", "let b: number = 2;");
    write(tmp.path / "valid/v1.js", "let c: string = 'x';");
    write(tmp.path / "test/x1.js", "let d: boolean = true;");

    const DataSet ds = load_dataset(tmp.path.string(), DatasetOptions{}, nullptr);
    CHECK(ds.train.size() == 2);
    CHECK(ds.valid.size() == 1);
    CHECK(ds.test.size() == 1);
    CHECK(ds.valid[0].file_id == "v1.js");
    CHECK(ds.test[0].file_id == "x1.js");
}

TEST_CASE("vocabulary building counts the right streams") {
    DataSet ds;
    for (const char* src : {"let count: number = 1;\nlet count2: number = 2;",
                            "let tag: string = 'a';\ncount(tag);"}) {
        DataFile f;
        f.file_id = "v.js";
        f.graph = extract_file(src, f.file_id);
        ds.train.push_back(std::move(f));
    }

    VocabBuildOptions opt;
    const Vocabularies v = build_vocabularies(ds.train, opt);

    // types: exact table, counts aligned by entry order
    CHECK(v.types.entries() == std::vector<std::string>{"number", "string"});
    CHECK(v.type_counts == std::vector<long long>{2, 1});
    CHECK_FALSE(v.types.has_unknown());

    // names carry the unknown entry last
    REQUIRE(v.names.has_value());
    CHECK(v.names->has_unknown());
    CHECK(v.names->contains("count"));
    CHECK(v.names->contains("tag"));

    // node features include non-identifier token kinds
    CHECK(v.node_features.contains("let"));
    CHECK(v.node_features.contains("="));
    CHECK(v.node_features.contains("number-lit"));
    CHECK(v.node_features.contains("ExprWrapper"));
    CHECK(v.node_features.has_unknown());

    // edge features are exact (no unknown)
    REQUIRE(v.edge_features.has_value());
    CHECK(v.edge_features->contains("(VarSymEdge,f)"));
    CHECK_FALSE(v.edge_features->has_unknown());

    // segment table and merges exist
    CHECK(v.bpe.has_value());
    REQUIRE(v.segments.has_value());
    CHECK(v.segments->has_unknown());

    // name cap keeps the most frequent name plus the unknown entry
    VocabBuildOptions capped;
    capped.max_names = 1;
    const Vocabularies vc = build_vocabularies(ds.train, capped);
    CHECK(vc.names->size() == 2);
    CHECK(vc.names->at(vc.names->size() - 1) == kUnknownToken);

    // a split without labels cannot seed a type table
    DataSet empty;
    DataFile f;
    f.file_id = "none.js";
    f.graph = extract_file("let a = 1;", f.file_id);
    empty.train.push_back(std::move(f));
    CHECK_THROWS_AS(build_vocabularies(empty.train, opt), DataError);
}

TEST_CASE("out-of-vocabulary filtering drops edges and labels in place") {
    Tfg g = extract_file("let a: number = 1;\na.prop = 2;", "f.js");
    const size_t edges_before = g.edges.size();
    REQUIRE(edges_before > 0);
    REQUIRE(g.labels.size() == 1);

    const Vocabulary edge_vocab({"(VarSymEdge,f)", "(VarSymEdge,b)"}, false);
    remove_oov_edges(g, edge_vocab);
    CHECK(g.edges.size() < edges_before);
    for (const TfgEdge& e : g.edges)
        CHECK((e.feature == "(VarSymEdge,f)" || e.feature == "(VarSymEdge,b)"));

    filter_labels(g, Vocabulary({"string"}, false));
    CHECK(g.labels.empty());
}

TEST_CASE("label rank counts strictly-better classes and earlier ties") {
    const float row[] = {1.0f, 3.0f, 3.0f, 0.5f};
    CHECK(label_rank(row, 4, 1) == 0);
    CHECK(label_rank(row, 4, 2) == 1);  // ties break toward the earlier index
    CHECK(label_rank(row, 4, 0) == 2);
    CHECK(label_rank(row, 4, 3) == 3);
}

TEST_CASE("epoch log rows serialize their fields") {
    EpochStats s;
    s.epoch = 3;
    s.split = "valid";
    s.loss = 0.25;
    s.top1 = 0.75;
    s.top5 = 0.9;
    s.labels = 40;
    s.wall_seconds = 1.5;
    const nlohmann::json j = nlohmann::json::parse(epoch_stats_json(s));
    CHECK(j["epoch"] == 3);
    CHECK(j["split"] == "valid");
    CHECK(j["loss"] == doctest::Approx(0.25));
    CHECK(j["top1"] == doctest::Approx(0.75));
    CHECK(j["labels"] == 40);
}

TEST_CASE("training runs, checkpoints the best epoch, and repeats bit-for-bit") {
    TempDir tmp("train");
    const fs::path ckpt1 = tmp.path / "m1.tfgm";
    const fs::path ckpt2 = tmp.path / "m2.tfgm";
    const fs::path log1 = tmp.path / "m1.log";

    TrainOptions topt;
    topt.preset = "rgnn";
    topt.config = tiny_train_config("rgnn");
    topt.epochs = 2;
    topt.batch_size = 4;
    topt.seed = 11;
    topt.checkpoint_path = ckpt1.string();
    topt.log_path = log1.string();

    const TrainResult r1 = train_model(tiny_dataset(6, 2, 2, 21), topt);
    REQUIRE(r1.history.size() == 4);  // one train + one valid row per epoch
    CHECK(r1.history[0].split == "train");
    CHECK(r1.history[1].split == "valid");
    CHECK(r1.history[1].labels > 0);
    CHECK(r1.best.epoch >= 1);
    CHECK(r1.best.epoch <= 2);
    CHECK(r1.best.seed == 11);

    // the checkpoint reloads into a usable model
    const Model m = load_checkpoint(ckpt1.string());
    CHECK(m.config.preset == "rgnn");
    CHECK(m.meta.epoch == r1.best.epoch);
    CHECK(m.meta.validation_loss == doctest::Approx(r1.best.validation_loss));
    CHECK(m.vocabs.types.size() > 0);

    // the epoch log holds one JSON object per history row
    std::ifstream log(log1);
    int lines = 0;
    for (std::string line; std::getline(log, line);) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("epoch"));
        ++lines;
    }
    CHECK(lines == 4);

    // determinism: identical seed and data give a byte-identical checkpoint
    topt.checkpoint_path = ckpt2.string();
    topt.log_path.clear();
    const TrainResult r2 = train_model(tiny_dataset(6, 2, 2, 21), topt);
    CHECK(r2.best.epoch == r1.best.epoch);
    CHECK(r2.best.validation_loss == r1.best.validation_loss);
    CHECK(slurp(ckpt1) == slurp(ckpt2));
}

TEST_CASE("zero-epoch training saves the freshly initialized model") {
    TempDir tmp("train0");
    const fs::path ckpt = tmp.path / "init.tfgm";
    TrainOptions topt;
    topt.preset = "cgnn";
    topt.config = tiny_train_config("cgnn");
    topt.epochs = 0;
    topt.seed = 7;
    topt.checkpoint_path = ckpt.string();
    const TrainResult r = train_model(tiny_dataset(4, 1, 1, 33), topt);
    CHECK(r.history.empty());
    const Model m = load_checkpoint(ckpt.string());
    CHECK(m.meta.epoch == 0);
    CHECK(m.config.gnn_type == GnnType::Convolutional);
}
