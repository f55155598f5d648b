// Python extension: the pipeline's main operations behind a thin JSON-string
// interface. The typeflow package wraps these in dict-returning helpers.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>
#include <sstream>

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

namespace py = pybind11;
using namespace typeflow;
using nlohmann::json;

namespace {

std::string train_json(const std::string& data_dir, const std::string& config,
                       const std::string& out_path, int epochs, int batch,
                       std::uint64_t seed, int K, double lr, double weight_decay,
                       const std::string& log_path, bool progress) {
    DataSet ds = load_dataset(data_dir, DatasetOptions{}, nullptr);
    TrainOptions topt;
    topt.preset = config;
    ModelConfig cfg = preset_config(config);
    if (K >= 0) cfg.K = K;
    topt.config = cfg;
    topt.epochs = epochs;
    topt.batch_size = batch;
    topt.seed = seed;
    topt.optimizer.lr = static_cast<float>(lr);
    topt.optimizer.weight_decay = static_cast<float>(weight_decay);
    topt.checkpoint_path = out_path;
    topt.log_path = log_path;

    std::ostringstream sink;
    const TrainResult r =
        train_model(std::move(ds), topt, progress ? &std::cout : &sink);

    json j;
    j["best"] = {{"epoch", r.best.epoch},
                 {"validation_loss", r.best.validation_loss},
                 {"seed", r.best.seed}};
    json hist = json::array();
    for (const EpochStats& s : r.history) hist.push_back(json::parse(epoch_stats_json(s)));
    j["history"] = std::move(hist);
    return j.dump();
}

std::string grad_check_json(const std::string& config, std::uint64_t seed, double eps,
                            int samples) {
    GenSpec spec;
    spec.seed = seed;
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

    ModelConfig c = preset_config(config);
    c.K = 3;
    c.d_h = 16;
    c.d_name = 16;
    c.d_e = 12;
    c.d_seg = 8;
    c.d_seg_rnn = 8;
    c.d_ctx_rnn = 16;
    ModelT<double> m = build_model<double>(c, vocabs, seed);

    std::vector<const Tfg*> gs;
    for (const DataFile& f : files) gs.push_back(&f.graph);
    const GraphBatch batch = make_batch(gs, c, m.vocabs);

    Rng rng(Rng::derive(seed, 0x67726164ull));
    const GradCheckResult res = grad_check<double>(
        m.params,
        [&](Tape<double>& t, TapeParams<double>& P) { return batch_loss(t, P, c, batch); },
        samples, eps, rng);

    json j = {{"config", config},
              {"max_rel_err", res.max_rel_err},
              {"checked", res.checked},
              {"worst", res.worst},
              {"eps", eps}};
    return j.dump();
}

std::vector<DataFile> pick_split(DataSet& ds, const std::string& split) {
    if (split == "train") return std::move(ds.train);
    if (split == "valid") return std::move(ds.valid);
    if (split == "test") return std::move(ds.test);
    if (split == "all") {
        std::vector<DataFile> all = std::move(ds.train);
        all.insert(all.end(), std::make_move_iterator(ds.valid.begin()),
                   std::make_move_iterator(ds.valid.end()));
        all.insert(all.end(), std::make_move_iterator(ds.test.begin()),
                   std::make_move_iterator(ds.test.end()));
        return all;
    }
    throw DataError("unknown split '" + split + "' (train, valid, test, all)");
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "probabilistic type inference over type flow graphs";

    py::register_exception<DataError>(mod, "DataError", PyExc_ValueError);
    py::register_exception<InternalError>(mod, "InternalError", PyExc_RuntimeError);

    mod.def("presets", [] { return preset_names(); }, "model preset names");
    mod.def(
        "preset_display_name", [](const std::string& p) { return preset_display_name(p); },
        py::arg("preset"));

    mod.def(
        "ast_json",
        [](const std::string& source) {
            return ast_to_json(parse_source(strip_annotations(source).source));
        },
        py::arg("source"), "parse a source file and return its AST as JSON");

    mod.def(
        "tfg_json",
        [](const std::string& source, const std::string& file_id, int max_tokens) {
            return tfg_to_json(extract_file(source, file_id, max_tokens));
        },
        py::arg("source"), py::arg("file_id") = "<memory>", py::arg("max_tokens") = 0,
        "extract the type flow graph of one source file as JSON");

    mod.def(
        "validate_source",
        [](const std::string& source, const std::string& file_id) {
            return validate_tfg(extract_file(source, file_id));
        },
        py::arg("source"), py::arg("file_id") = "<memory>",
        "extract a graph and return its structural findings (empty = sound)");

    mod.def(
        "gen_corpus",
        [](const std::string& spec_json, const std::string& out_dir) {
            const GenSpec spec = gen_spec_from_json(spec_json);
            write_corpus(spec, out_dir);
            return spec.file_count;
        },
        py::arg("spec_json"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>(),
        "write a synthetic labeled corpus plus manifest.json; returns the file count");

    mod.def("train_json", &train_json, py::arg("data_dir"), py::arg("config"),
            py::arg("out"), py::arg("epochs") = 60, py::arg("batch") = 64,
            py::arg("seed") = 1, py::arg("K") = -1, py::arg("lr") = 1e-3,
            py::arg("weight_decay") = 0.01, py::arg("log") = "",
            py::arg("progress") = false, py::call_guard<py::gil_scoped_release>(),
            "train a preset on a dataset directory; returns best-epoch JSON");

    mod.def("grad_check_json", &grad_check_json, py::arg("config"), py::arg("seed") = 1,
            py::arg("eps") = 1e-4, py::arg("samples") = 200,
            py::call_guard<py::gil_scoped_release>(),
            "compare gradients against finite differences on a small model");

    py::class_<Model>(mod, "Model")
        .def_static(
            "load", [](const std::string& path) { return load_checkpoint(path); },
            py::arg("path"), py::call_guard<py::gil_scoped_release>())
        .def(
            "save", [](const Model& m, const std::string& path) { save_checkpoint(m, path); },
            py::arg("path"), py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("preset",
                               [](const Model& m) { return m.config.preset; })
        .def_property_readonly("config_json",
                               [](const Model& m) { return config_to_json(m.config); })
        .def_property_readonly("types",
                               [](const Model& m) { return m.vocabs.types.entries(); })
        .def_property_readonly("epoch", [](const Model& m) { return m.meta.epoch; })
        .def_property_readonly(
            "validation_loss", [](const Model& m) { return m.meta.validation_loss; })
        .def(
            "predict_json",
            [](const Model& m, const std::string& source, const std::string& file_id,
               int topk) { return predictions_json(m, source, file_id, topk); },
            py::arg("source"), py::arg("file_id") = "<memory>", py::arg("topk") = 5,
            py::call_guard<py::gil_scoped_release>(),
            "ranked types for every identifier in one source file, as JSON")
        .def(
            "eval_json",
            [](const Model& m, const std::string& data_dir, const std::string& split,
               int batch) {
                DataSet ds = load_dataset(data_dir, DatasetOptions{}, nullptr);
                const std::vector<DataFile> files = pick_split(ds, split);
                if (files.empty()) throw DataError("split '" + split + "' has no files");
                return eval_report_json(evaluate(m, files, batch));
            },
            py::arg("data_dir"), py::arg("split") = "test", py::arg("batch") = 64,
            py::call_guard<py::gil_scoped_release>(),
            "score this model on a dataset split, as JSON")
        .def(
            "bench_json",
            [](const Model& m, const std::string& data_dir, const std::string& split,
               int batch, int repeats) {
                DataSet ds = load_dataset(data_dir, DatasetOptions{}, nullptr);
                const std::vector<DataFile> files = pick_split(ds, split);
                if (files.empty()) throw DataError("split '" + split + "' has no files");
                return bench_result_json(bench_model(m, files, batch, repeats));
            },
            py::arg("data_dir"), py::arg("split") = "test", py::arg("batch") = 64,
            py::arg("repeats") = 6, py::call_guard<py::gil_scoped_release>(),
            "measure prediction throughput on a dataset split, as JSON");
}
