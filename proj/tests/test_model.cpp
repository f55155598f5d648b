#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "oracle_gnn.hpp"
#include "typeflow/model.hpp"
#include "typeflow/tfg.hpp"

using namespace typeflow;

namespace {

double max_abs_diff(const Tensor<double>& got, const gnn_oracle::Mat& want) {
    REQUIRE(got.rows() == int(want.size()));
    REQUIRE(got.cols() == int(want.empty() ? 0 : want[0].size()));
    double worst = 0.0;
    for (int i = 0; i < got.rows(); ++i)
        for (int j = 0; j < got.cols(); ++j)
            worst = std::max(worst, std::abs(got.at(i, j) - want[size_t(i)][size_t(j)]));
    return worst;
}

double oracle_nll_mean(const gnn_oracle::Mat& logits, const std::vector<int>& labels) {
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double mx = logits[i][0];
        for (double v : logits[i]) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits[i]) z += std::exp(v - mx);
        total += -(logits[i][size_t(labels[i])] - mx - std::log(z));
    }
    return total / double(logits.size());
}

}  // namespace

TEST_CASE("tiny fixture graphs are structurally sound") {
    for (const Tfg& g : {gnn_oracle::tiny::graph_decl(), gnn_oracle::tiny::graph_assign(),
                         gnn_oracle::tiny::graph_isolated()}) {
        CAPTURE(g.file_id);
        CHECK(validate_tfg(g).empty());
        CHECK(g.nodes.size() <= 5);
    }
}

TEST_CASE("every preset matches the straight-line oracle") {
    const Tfg g1 = gnn_oracle::tiny::graph_decl();
    const Tfg g2 = gnn_oracle::tiny::graph_assign();
    const Tfg g3 = gnn_oracle::tiny::graph_isolated();

    uint64_t seed = 77;
    for (const std::string& preset : preset_names()) {
        CAPTURE(preset);
        const ModelConfig c = gnn_oracle::tiny::small_config(preset);
        ModelT<double> m = build_model<double>(c, gnn_oracle::tiny::vocabs(), seed++);
        const GraphBatch b = make_batch({&g1, &g2, &g3}, c, m.vocabs);
        REQUIRE(b.label_nodes.size() == 3);

        Tape<double> t;
        TapeParams<double> P(t, m.params, false);
        const int logits = forward_logits(t, P, c, b, b.label_nodes);
        const gnn_oracle::Mat want =
            gnn_oracle::logits_for_rows(m.params, c, b, b.label_nodes);
        CHECK(max_abs_diff(t.value(logits), want) <= 1e-10);

        Tape<double> t2;
        TapeParams<double> P2(t2, m.params, false);
        const int loss = batch_loss(t2, P2, c, b);
        CHECK(std::abs(t2.value(loss).data[0] - oracle_nll_mean(want, b.label_types)) <=
              1e-10);
    }
}

TEST_CASE("a graph without edges still matches the oracle") {
    const Tfg g = gnn_oracle::tiny::graph_isolated();
    for (const std::string& preset : {std::string("rgnn"), std::string("cgnn")}) {
        CAPTURE(preset);
        const ModelConfig c = gnn_oracle::tiny::small_config(preset);
        ModelT<double> m = build_model<double>(c, gnn_oracle::tiny::vocabs(), 5);
        const GraphBatch b = make_batch({&g}, c, m.vocabs);
        REQUIRE(b.e_src.empty());
        Tape<double> t;
        TapeParams<double> P(t, m.params, false);
        const int logits = forward_logits(t, P, c, b, b.label_nodes);
        CHECK(max_abs_diff(t.value(logits),
                           gnn_oracle::logits_for_rows(m.params, c, b, b.label_nodes)) <=
              1e-10);
    }
}

TEST_CASE("zero propagation steps return the initialized states") {
    const Tfg g = gnn_oracle::tiny::graph_decl();
    ModelConfig c = gnn_oracle::tiny::small_config("rgnn");
    c.K = 0;
    ModelT<double> m = build_model<double>(c, gnn_oracle::tiny::vocabs(), 9);
    const GraphBatch b = make_batch({&g}, c, m.vocabs);

    Tape<double> t;
    TapeParams<double> P(t, m.params, false);
    const int H = forward_states(t, P, c, b);
    // Non-identifier rows must still equal their feature embeddings.
    const Tensor<double>& embed = m.params.at("embed.node_feature");
    const Tensor<double>& states = t.value(H);
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].kind == TfgNodeKind::IdentNode) continue;
        const int fid = b.node_feature_ids[i];
        for (int jc = 0; jc < states.cols(); ++jc)
            CHECK(states.at(int(i), jc) == doctest::Approx(embed.at(fid, jc)));
    }
}

TEST_CASE("preset table sets the advertised switches") {
    CHECK(preset_names().size() == 8);
    CHECK(preset_config("cgnn").gnn_type == GnnType::Convolutional);
    CHECK(preset_config("rgnn").gnn_type == GnnType::Recurrent);
    CHECK(preset_config("rgat").attention);
    CHECK(preset_config("rgnn-ns").name_segmentation);
    CHECK(preset_config("rgnn-ctx").contextual_layer);
    CHECK(preset_config("rgnn-ns-ctx").name_segmentation);
    CHECK(preset_config("rgnn-ns-ctx").contextual_layer);
    CHECK(preset_config("rgnn-nef").edge_features);
    CHECK(preset_config("rgat-nef").attention);
    CHECK(preset_config("rgat-nef").edge_features);
    CHECK_THROWS_AS(preset_config("nope"), DataError);
    CHECK(preset_display_name("rgnn-ns-ctx") == "R-GNN_NS-CTX");
    CHECK(preset_display_name("cgnn") == "C-GNN");
}

TEST_CASE("config JSONround-trips every preset") {
    for (const std::string& preset : preset_names()) {
        const ModelConfig c = preset_config(preset);
        const ModelConfig back = config_from_json(config_to_json(c));
        CHECK(back.preset == c.preset);
        CHECK(back.gnn_type == c.gnn_type);
        CHECK(back.attention == c.attention);
        CHECK(back.name_segmentation == c.name_segmentation);
        CHECK(back.contextual_layer == c.contextual_layer);
        CHECK(back.edge_features == c.edge_features);
        CHECK(back.K == c.K);
        CHECK(back.d_h == c.d_h);
        CHECK(back.d_e == c.d_e);
    }
    CHECK_THROWS_AS(config_from_json("[]"), DataError);
    CHECK_THROWS_AS(config_from_json("{\"gnn_type\": \"maybe\"}"), DataError);
}

TEST_CASE("tensor creation order is pinned per scheme") {
    const Vocabularies v = gnn_oracle::tiny::vocabs();

    auto names_of = [&](const std::string& preset) {
        std::vector<std::string> out;
        for (const auto& [n, dims] : expected_tensors(gnn_oracle::tiny::small_config(preset), v))
            out.push_back(n);
        return out;
    };

    CHECK(names_of("rgnn") ==
          std::vector<std::string>{"embed.node_feature", "embed.name", "upd.gru.Wz",
                                   "upd.gru.Uz", "upd.gru.bz", "upd.gru.Wr", "upd.gru.Ur",
                                   "upd.gru.br", "upd.gru.Wc", "upd.gru.Uc", "upd.gru.bc",
                                   "head.W", "head.b"});
    CHECK(names_of("cgnn") ==
          std::vector<std::string>{"embed.node_feature", "embed.name", "upd.k1.W_h",
                                   "upd.k1.b", "upd.k2.W_h", "upd.k2.b", "upd.k3.W_h",
                                   "upd.k3.b", "head.W", "head.b"});

    const std::vector<std::string> nsctx = names_of("rgnn-ns-ctx");
    REQUIRE(nsctx.size() > 4);
    CHECK(nsctx[0] == "embed.node_feature");
    CHECK(nsctx[1] == "embed.segment");
    CHECK(nsctx[2] == "seg_rnn.fwd.Wz");
    // segment stack, then context stack, then the update cell, then the head
    CHECK(std::find(nsctx.begin(), nsctx.end(), "seg_proj.W") != nsctx.end());
    CHECK(std::find(nsctx.begin(), nsctx.end(), "ctx_rnn.fwd.Wz") != nsctx.end());
    CHECK(std::find(nsctx.begin(), nsctx.end(), "ctx_proj.W") != nsctx.end());
    CHECK(nsctx.back() == "head.b");

    const std::vector<std::string> nef = names_of("rgat-nef");
    CHECK(std::find(nef.begin(), nef.end(), "embed.edge") != nef.end());
    CHECK(std::find(nef.begin(), nef.end(), "msg.W_MI") != nef.end());
    CHECK(std::find(nef.begin(), nef.end(), "attn.W_QK") != nef.end());
    CHECK(std::find(nef.begin(), nef.end(), "attn.w") != nef.end());
}

TEST_CASE("model building prunes the unused naming scheme but keeps edges") {
    const ModelConfig base = gnn_oracle::tiny::small_config("rgnn");
    ModelT<double> m = build_model<double>(base, gnn_oracle::tiny::vocabs(), 1);
    CHECK(m.vocabs.names.has_value());
    CHECK_FALSE(m.vocabs.segments.has_value());
    CHECK_FALSE(m.vocabs.bpe.has_value());
    CHECK(m.vocabs.edge_features.has_value());

    ModelT<double> ns =
        build_model<double>(gnn_oracle::tiny::small_config("rgnn-ns"), gnn_oracle::tiny::vocabs(), 1);
    CHECK_FALSE(ns.vocabs.names.has_value());
    CHECK(ns.vocabs.segments.has_value());
    CHECK(ns.vocabs.bpe.has_value());
    CHECK(ns.vocabs.edge_features.has_value());

    ModelConfig bad = base;
    bad.d_name = bad.d_h + 1;
    CHECK_THROWS_AS(build_model<double>(bad, gnn_oracle::tiny::vocabs(), 1), DataError);
}

TEST_CASE("identical seeds build identical parameters") {
    const ModelConfig c = gnn_oracle::tiny::small_config("rgat-nef");
    ModelT<double> a = build_model<double>(c, gnn_oracle::tiny::vocabs(), 123);
    ModelT<double> b = build_model<double>(c, gnn_oracle::tiny::vocabs(), 123);
    ModelT<double> other = build_model<double>(c, gnn_oracle::tiny::vocabs(), 124);
    REQUIRE(a.params.order() == b.params.order());
    bool all_equal = true, any_diff_other = false;
    for (const std::string& n : a.params.order()) {
        if (a.params.at(n).data != b.params.at(n).data) all_equal = false;
        if (a.params.at(n).data != other.params.at(n).data) any_diff_other = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_other);
}

TEST_CASE("batch packing resolves names, activity, and labels") {
    const Tfg g1 = gnn_oracle::tiny::graph_decl();
    const Tfg g2 = gnn_oracle::tiny::graph_assign();
    const Tfg g3 = gnn_oracle::tiny::graph_isolated();
    const Vocabularies v = gnn_oracle::tiny::vocabs();

    const ModelConfig c = gnn_oracle::tiny::small_config("rgnn");
    ModelT<double> m = build_model<double>(c, v, 2);
    const GraphBatch b = make_batch({&g1, &g2, &g3}, c, m.vocabs);

    CHECK(b.n_files == 3);
    CHECK(b.n_nodes == 11);
    // distinct names in first-occurrence order: a, bVal, solo
    REQUIRE(b.distinct_name_ids.size() == 3);
    CHECK(b.distinct_name_ids[0] == m.vocabs.names->id_of("a"));
    CHECK(b.distinct_name_ids[1] == m.vocabs.names->id_of("bVal"));
    CHECK(b.distinct_name_ids[2] == m.vocabs.names->id_of("solo"));
    CHECK(b.ident_name_ref == std::vector<int>{0, 1, 0, 2});
    CHECK(b.ident_nodes == std::vector<int>{0, 5, 6, 10});

    // token and context nodes stay frozen
    for (int active : b.active_nodes) {
        const TfgNodeKind k = active < 5   ? g1.nodes[size_t(active)].kind
                              : active < 10 ? g2.nodes[size_t(active - 5)].kind
                                            : g3.nodes[size_t(active - 10)].kind;
        CHECK(k != TfgNodeKind::TokNode);
        CHECK(k != TfgNodeKind::CtxNode);
    }
    // every edge's segment points at its destination's slot
    for (size_t e = 0; e < b.e_src.size(); ++e)
        CHECK(b.active_nodes[size_t(b.e_seg[e])] == b.e_dst[e]);

    // labels: decl node 0 -> number, assign node 5+1 -> string, isolated -> number
    REQUIRE(b.label_nodes.size() == 3);
    CHECK(b.label_nodes == std::vector<int>{0, 6, 10});
    CHECK(b.label_types ==
          std::vector<int>{v.types.id_of("number"), v.types.id_of("string"),
                           v.types.id_of("number")});

    // name segmentation fills segment id lists instead
    const ModelConfig cns = gnn_oracle::tiny::small_config("rgnn-ns");
    ModelT<double> mns = build_model<double>(cns, v, 2);
    const GraphBatch bns = make_batch({&g1, &g2}, cns, mns.vocabs);
    CHECK(bns.distinct_name_ids.empty());
    REQUIRE(bns.distinct_name_segments.size() == 2);
    for (const auto& segs : bns.distinct_name_segments) CHECK_FALSE(segs.empty());
}

TEST_CASE("batching rejects inputs the vocabularies cannot express") {
    const Vocabularies v = gnn_oracle::tiny::vocabs();
    Tfg g = gnn_oracle::tiny::graph_decl();

    // unknown type label
    g.labels = {{0, "Widget"}};
    const ModelConfig c = gnn_oracle::tiny::small_config("rgnn");
    ModelT<double> m = build_model<double>(c, v, 3);
    CHECK_THROWS_AS(make_batch({&g}, c, m.vocabs), DataError);

    // unknown edge feature under edge-featured messages
    Tfg g2 = gnn_oracle::tiny::graph_decl();
    g2.edges[0].feature = "(NewFamily,f)";
    g2.edges[1].feature = "(NewFamily,b)";
    const ModelConfig cn = gnn_oracle::tiny::small_config("rgnn-nef");
    ModelT<double> mn = build_model<double>(cn, v, 3);
    CHECK_THROWS_AS(make_batch({&g2}, cn, mn.vocabs), DataError);

    // contextual layer needs the token sequence
    Tfg g3 = gnn_oracle::tiny::graph_decl();
    g3.tokens.clear();
    const ModelConfig cc = gnn_oracle::tiny::small_config("rgnn-ctx");
    ModelT<double> mc = build_model<double>(cc, v, 3);
    CHECK_THROWS_AS(make_batch({&g3}, cc, mc.vocabs), DataError);
}

TEST_CASE("probability prediction is normalized and deterministic") {
    const Tfg g = gnn_oracle::tiny::graph_decl();
    Model m = build_model<float>(gnn_oracle::tiny::small_config("rgnn"), gnn_oracle::tiny::vocabs(), 4);
    const std::vector<int> nodes{0, 2};
    const Tensor<float> p1 = predict_probs(m, g, nodes);
    const Tensor<float> p2 = predict_probs(m, g, nodes);
    CHECK(p1.rows() == 2);
    CHECK(p1.cols() == m.vocabs.types.size());
    CHECK(p1.data == p2.data);
    for (int i = 0; i < p1.rows(); ++i) {
        float sum = 0.f;
        for (int j = 0; j < p1.cols(); ++j) {
            CHECK(p1.at(i, j) >= 0.f);
            sum += p1.at(i, j);
        }
        CHECK(sum == doctest::Approx(1.0f).epsilon(1e-4));
    }
}
