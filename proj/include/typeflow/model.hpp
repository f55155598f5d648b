#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "typeflow/nn.hpp"
#include "typeflow/tfg.hpp"
#include "typeflow/vocab.hpp"

namespace typeflow {

enum class GnnType { Recurrent, Convolutional };

struct ModelConfig {
    std::string preset;  // informational; empty for hand-built configs
    GnnType gnn_type = GnnType::Recurrent;
    bool attention = false;
    bool name_segmentation = false;
    bool contextual_layer = false;
    bool edge_features = false;
    int K = 8;
    int d_h = 128;      // node state width
    int d_e = 256;      // edge embedding width
    int d_seg = 32;     // name segment embedding width
    int d_seg_rnn = 32; // segment RNN hidden width per direction
    int d_ctx_rnn = 128;  // contextual RNN hidden width per direction
    int d_name = 128;   // name embedding width (must equal d_h)
};

// The eight named configurations, by CLI name: cgnn, rgnn, rgat, rgnn-ns,
// rgnn-ctx, rgnn-ns-ctx, rgnn-nef, rgat-nef.
ModelConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();
std::string preset_display_name(const std::string& preset);

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& json_text);

// Everything a trained model needs besides parameters.
struct Vocabularies {
    std::optional<Vocabulary> names;          // base name embedding scheme
    std::optional<Vocabulary> segments;       // name segmentation scheme
    std::optional<BpeModel> bpe;              // with segments
    Vocabulary node_features;
    std::optional<Vocabulary> edge_features;  // with edge-feature messages
    Vocabulary types;
    std::vector<long long> type_counts;       // training label counts, aligned with types
};

struct ModelMeta {
    int epoch = 0;
    double validation_loss = 0.0;
    std::uint64_t seed = 0;
};

template <typename T>
struct ModelT {
    ModelConfig config;
    Vocabularies vocabs;
    ParamStore<T> params;
    ModelMeta meta;
};
using Model = ModelT<float>;

// Tensor names and shapes the config requires, in creation order.
std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(
    const ModelConfig& c, const Vocabularies& v);

// A batch of graphs packed as one disjoint union, with every vocabulary
// lookup already resolved so the forward pass touches no strings.
struct GraphBatch {
    int n_nodes = 0;
    int n_files = 0;

    // Initial-state features. Identifier rows hold placeholder id 0 and are
    // overwritten by the name or context representation.
    std::vector<int> node_feature_ids;  // [n_nodes]

    // Identifier nodes per file in node order, concatenated in file order.
    std::vector<int> ident_nodes;
    std::vector<int> ident_name_ref;  // [n_ident] -> index into distinct names

    // Distinct identifier names across the batch, first-occurrence order.
    std::vector<int> distinct_name_ids;                 // base scheme
    std::vector<std::vector<int>> distinct_name_segments;  // segmentation scheme

    // Token sequences for the contextual layer, one per file.
    struct FileSeq {
        int length = 0;
        std::vector<int> ident_positions;      // token positions, ascending
        std::vector<int> ident_name_refs;      // aligned -> distinct name index
        std::vector<int> ident_node_rows;      // aligned -> node index
        std::vector<int> nonident_positions;
        std::vector<int> nonident_feature_ids;
    };
    std::vector<FileSeq> files;

    // Propagation structure: edges whose destination state updates.
    std::vector<int> active_nodes;  // node indices, ascending
    std::vector<int> e_src;         // [E] source node index
    std::vector<int> e_dst;         // [E] destination node index
    std::vector<int> e_seg;         // [E] position of destination in active_nodes
    std::vector<int> e_feat;        // [E] edge feature ids; empty without them

    // Supervision.
    std::vector<int> label_nodes;
    std::vector<int> label_types;
};

GraphBatch make_batch(const std::vector<const Tfg*>& graphs, const ModelConfig& c,
                      const Vocabularies& v);

// ---- forward pass ----------------------------------------------------------

namespace detail {

// Representations of the batch's distinct names, [n_distinct, d_h].
template <typename T>
int name_rows(Tape<T>& t, TapeParams<T>& P, const ModelConfig& c, const GraphBatch& b) {
    if (!c.name_segmentation) return t.gather_rows(P["embed.name"], b.distinct_name_ids);
    GruParamIds fwd = bind_gru(P, "seg_rnn.fwd");
    GruParamIds bwd = bind_gru(P, "seg_rnn.bwd");
    std::vector<int> rows;
    rows.reserve(b.distinct_name_segments.size());
    for (const std::vector<int>& segs : b.distinct_name_segments) {
        const int X = t.gather_rows(P["embed.segment"], segs);
        const int fin = bi_gru_final(t, fwd, bwd, X, c.d_seg_rnn);
        rows.push_back(linear(t, fin, P["seg_proj.W"], P["seg_proj.b"]));
    }
    return rows.size() == 1 ? rows[0] : t.concat_rows(rows);
}

}  // namespace detail

// Runs initialization and K propagation steps; returns the tape id of the
// final node states [n_nodes, d_h].
template <typename T>
int forward_states(Tape<T>& t, TapeParams<T>& P, const ModelConfig& c,
                   const GraphBatch& b) {
    int H = t.gather_rows(P["embed.node_feature"], b.node_feature_ids);

    if (!b.ident_nodes.empty()) {
        const int nrows = detail::name_rows(t, P, c, b);
        if (!c.contextual_layer) {
            H = t.overwrite_rows(H, t.gather_rows(nrows, b.ident_name_ref), b.ident_nodes);
        } else {
            GruParamIds fwd = bind_gru(P, "ctx_rnn.fwd");
            GruParamIds bwd = bind_gru(P, "ctx_rnn.bwd");
            std::vector<int> rows;
            std::vector<int> node_rows;
            for (const GraphBatch::FileSeq& fs : b.files) {
                if (fs.length == 0) continue;
                int X = t.constant(Tensor<T>::zeros({fs.length, c.d_h}));
                if (!fs.ident_positions.empty())
                    X = t.overwrite_rows(X, t.gather_rows(nrows, fs.ident_name_refs),
                                         fs.ident_positions);
                if (!fs.nonident_positions.empty())
                    X = t.overwrite_rows(X,
                                         t.gather_rows(P["embed.node_feature"],
                                                       fs.nonident_feature_ids),
                                         fs.nonident_positions);
                const int out = bi_gru_outputs(t, fwd, bwd, X, c.d_ctx_rnn);
                const int proj = linear(t, out, P["ctx_proj.W"], P["ctx_proj.b"]);
                if (!fs.ident_positions.empty()) {
                    rows.push_back(t.gather_rows(proj, fs.ident_positions));
                    node_rows.insert(node_rows.end(), fs.ident_node_rows.begin(),
                                     fs.ident_node_rows.end());
                }
            }
            if (!rows.empty()) {
                const int stacked = rows.size() == 1 ? rows[0] : t.concat_rows(rows);
                H = t.overwrite_rows(H, stacked, node_rows);
            }
        }
    }

    const int n_active = static_cast<int>(b.active_nodes.size());
    if (n_active == 0 || c.K == 0) return H;

    GruParamIds upd{};
    if (c.gnn_type == GnnType::Recurrent) upd = bind_gru(P, "upd.gru");

    for (int k = 1; k <= c.K; ++k) {
        int A;
        if (b.e_src.empty()) {
            A = t.constant(Tensor<T>::zeros({n_active, c.d_h}));
        } else {
            const int Hsrc = t.gather_rows(H, b.e_src);
            int M;
            if (c.edge_features) {
                const int pre = linear(t, Hsrc, P["msg.W_MI"], P["msg.b_MI"]);
                const int ee = t.gather_rows(P["embed.edge"], b.e_feat);
                M = linear(t, t.mul(pre, ee), P["msg.W_MO"], P["msg.b_MO"]);
            } else {
                M = Hsrc;
            }
            if (!c.attention) {
                A = t.segment_mean(M, b.e_seg, n_active);
            } else {
                const int q = t.matmul_nt(t.gather_rows(H, b.e_dst), P["attn.W_QK"]);
                const int km = t.matmul_nt(M, P["attn.W_QK"]);
                const int s =
                    t.leaky_relu(t.matmul_nt(t.concat_cols(q, km), P["attn.w"]),
                                 static_cast<T>(0.2));
                const int alpha = t.segment_softmax(s, b.e_seg, n_active);
                A = t.segment_sum(t.scale_rows(t.matmul_nt(M, P["attn.W_V"]), alpha),
                                  b.e_seg, n_active);
            }
        }
        int hnew;
        if (c.gnn_type == GnnType::Recurrent) {
            hnew = gru_step(t, upd, A, t.gather_rows(H, b.active_nodes));
        } else {
            const std::string p = "upd.k" + std::to_string(k);
            hnew = t.relu(linear(t, A, P[p + ".W_h"], P[p + ".b"]));
        }
        H = t.overwrite_rows(H, hnew, b.active_nodes);
    }
    return H;
}

// Type logits [|rows|, n_types] for the given node rows.
template <typename T>
int forward_logits(Tape<T>& t, TapeParams<T>& P, const ModelConfig& c,
                   const GraphBatch& b, const std::vector<int>& rows) {
    const int H = forward_states(t, P, c, b);
    return linear(t, t.gather_rows(H, rows), P["head.W"], P["head.b"]);
}

// Mean cross entropy over the batch's labeled nodes.
template <typename T>
int batch_loss(Tape<T>& t, TapeParams<T>& P, const ModelConfig& c, const GraphBatch& b) {
    if (b.label_nodes.empty()) throw InternalError("loss over a batch without labels");
    const int logits = forward_logits(t, P, c, b, b.label_nodes);
    return t.cross_entropy_mean(logits, b.label_types);
}

// Creates every tensor the config requires (see expected_tensors), seeding
// initial values deterministically in creation order.
template <typename T>
ModelT<T> build_model(const ModelConfig& c, Vocabularies vocabs, std::uint64_t seed) {
    if (c.d_name != c.d_h)
        throw DataError("name embedding width must equal node state width");
    ModelT<T> m;
    m.config = c;
    m.vocabs = std::move(vocabs);
    if (c.name_segmentation) {
        m.vocabs.names.reset();
    } else {
        m.vocabs.segments.reset();
        m.vocabs.bpe.reset();
    }
    // The edge vocabulary always stays: evaluation-time preprocessing drops
    // edges it does not contain, whatever the message scheme.
    m.meta.seed = seed;
    Rng rng(seed);
    for (const auto& [name, dims] : expected_tensors(c, m.vocabs)) {
        const bool is_bias = dims.size() == 1;
        const bool is_embedding = name.rfind("embed.", 0) == 0;
        if (is_bias) {
            m.params.add(name, Tensor<T>::zeros(dims));
        } else if (is_embedding) {
            m.params.add(name, init_embedding<T>(rng, dims[0], dims[1]));
        } else {
            m.params.add(name, init_matrix<T>(rng, dims, dims[1]));
        }
    }
    return m;
}

// ---- checkpoints ------------------------------------------------------------

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

// ---- inference helpers ------------------------------------------------------

// Softmax probabilities over types for the given nodes of one graph,
// gradient-free. Rows align with `nodes`.
Tensor<float> predict_probs(const Model& m, const Tfg& g, const std::vector<int>& nodes);

// Logits for the labeled nodes of a prebuilt batch, gradient-free.
Tensor<float> label_logits(const Model& m, const GraphBatch& b);

}  // namespace typeflow
