#include "typeflow/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "typeflow/errors.hpp"

namespace typeflow {

using nlohmann::json;

// ---- presets ----------------------------------------------------------------

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "cgnn", "rgnn", "rgat", "rgnn-ns", "rgnn-ctx", "rgnn-ns-ctx",
        "rgnn-nef", "rgat-nef"};
    return names;
}

ModelConfig preset_config(const std::string& name) {
    ModelConfig c;
    c.preset = name;
    if (name == "cgnn") {
        c.gnn_type = GnnType::Convolutional;
    } else if (name == "rgnn") {
        // baseline: all defaults
    } else if (name == "rgat") {
        c.attention = true;
    } else if (name == "rgnn-ns") {
        c.name_segmentation = true;
    } else if (name == "rgnn-ctx") {
        c.contextual_layer = true;
    } else if (name == "rgnn-ns-ctx") {
        c.name_segmentation = true;
        c.contextual_layer = true;
    } else if (name == "rgnn-nef") {
        c.edge_features = true;
    } else if (name == "rgat-nef") {
        c.attention = true;
        c.edge_features = true;
    } else {
        std::string all;
        for (const std::string& p : preset_names()) all += (all.empty() ? "" : ", ") + p;
        throw DataError("unknown model preset '" + name + "' (expected one of: " + all + ")");
    }
    return c;
}

std::string preset_display_name(const std::string& preset) {
    if (preset == "cgnn") return "C-GNN";
    if (preset == "rgnn") return "R-GNN";
    if (preset == "rgat") return "R-GAT";
    if (preset == "rgnn-ns") return "R-GNN_NS";
    if (preset == "rgnn-ctx") return "R-GNN_CTX";
    if (preset == "rgnn-ns-ctx") return "R-GNN_NS-CTX";
    if (preset == "rgnn-nef") return "R-GNN_NEF";
    if (preset == "rgat-nef") return "R-GAT_NEF";
    return preset.empty() ? "custom" : preset;
}

// ---- config serialization ---------------------------------------------------

std::string config_to_json(const ModelConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["gnn_type"] = c.gnn_type == GnnType::Recurrent ? "recurrent" : "convolutional";
    j["attention"] = c.attention;
    j["name_segmentation"] = c.name_segmentation;
    j["contextual_layer"] = c.contextual_layer;
    j["edge_features"] = c.edge_features;
    j["K"] = c.K;
    j["d_h"] = c.d_h;
    j["d_e"] = c.d_e;
    j["d_seg"] = c.d_seg;
    j["d_seg_rnn"] = c.d_seg_rnn;
    j["d_ctx_rnn"] = c.d_ctx_rnn;
    j["d_name"] = c.d_name;
    return j.dump();
}

namespace {

int require_pos_int(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<int>() <= 0)
        throw DataError(std::string("model config: '") + key + "' must be a positive integer");
    return j[key].get<int>();
}

bool require_bool(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_boolean())
        throw DataError(std::string("model config: '") + key + "' must be a boolean");
    return j[key].get<bool>();
}

}  // namespace

ModelConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw DataError("model config is not a JSON object");
    ModelConfig c;
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) throw DataError("model config: 'preset' must be a string");
        c.preset = j["preset"].get<std::string>();
    }
    if (!j.contains("gnn_type") || !j["gnn_type"].is_string())
        throw DataError("model config: 'gnn_type' must be a string");
    const std::string gt = j["gnn_type"].get<std::string>();
    if (gt == "recurrent")
        c.gnn_type = GnnType::Recurrent;
    else if (gt == "convolutional")
        c.gnn_type = GnnType::Convolutional;
    else
        throw DataError("model config: gnn_type '" + gt +
                        "' is not 'recurrent' or 'convolutional'");
    c.attention = require_bool(j, "attention");
    c.name_segmentation = require_bool(j, "name_segmentation");
    c.contextual_layer = require_bool(j, "contextual_layer");
    c.edge_features = require_bool(j, "edge_features");
    c.K = require_pos_int(j, "K");
    c.d_h = require_pos_int(j, "d_h");
    c.d_e = require_pos_int(j, "d_e");
    c.d_seg = require_pos_int(j, "d_seg");
    c.d_seg_rnn = require_pos_int(j, "d_seg_rnn");
    c.d_ctx_rnn = require_pos_int(j, "d_ctx_rnn");
    c.d_name = require_pos_int(j, "d_name");
    return c;
}

// ---- expected tensor set ----------------------------------------------------

std::vector<std::pair<std::string, std::vector<int>>> expected_tensors(
    const ModelConfig& c, const Vocabularies& v) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    auto add_gru = [&](const std::string& prefix, int in, int h) {
        out.emplace_back(prefix + ".Wz", std::vector<int>{h, in});
        out.emplace_back(prefix + ".Uz", std::vector<int>{h, h});
        out.emplace_back(prefix + ".bz", std::vector<int>{h});
        out.emplace_back(prefix + ".Wr", std::vector<int>{h, in});
        out.emplace_back(prefix + ".Ur", std::vector<int>{h, h});
        out.emplace_back(prefix + ".br", std::vector<int>{h});
        out.emplace_back(prefix + ".Wc", std::vector<int>{h, in});
        out.emplace_back(prefix + ".Uc", std::vector<int>{h, h});
        out.emplace_back(prefix + ".bc", std::vector<int>{h});
    };

    out.emplace_back("embed.node_feature", std::vector<int>{v.node_features.size(), c.d_h});
    if (!c.name_segmentation) {
        if (!v.names) throw IntegrityError("model requires a name vocabulary");
        out.emplace_back("embed.name", std::vector<int>{v.names->size(), c.d_name});
    } else {
        if (!v.segments || !v.bpe)
            throw IntegrityError("model requires a segment vocabulary and a merge table");
        out.emplace_back("embed.segment", std::vector<int>{v.segments->size(), c.d_seg});
        add_gru("seg_rnn.fwd", c.d_seg, c.d_seg_rnn);
        add_gru("seg_rnn.bwd", c.d_seg, c.d_seg_rnn);
        out.emplace_back("seg_proj.W", std::vector<int>{c.d_h, 2 * c.d_seg_rnn});
        out.emplace_back("seg_proj.b", std::vector<int>{c.d_h});
    }
    if (c.contextual_layer) {
        add_gru("ctx_rnn.fwd", c.d_h, c.d_ctx_rnn);
        add_gru("ctx_rnn.bwd", c.d_h, c.d_ctx_rnn);
        out.emplace_back("ctx_proj.W", std::vector<int>{c.d_h, 2 * c.d_ctx_rnn});
        out.emplace_back("ctx_proj.b", std::vector<int>{c.d_h});
    }
    if (c.edge_features) {
        if (!v.edge_features) throw IntegrityError("model requires an edge feature vocabulary");
        out.emplace_back("embed.edge", std::vector<int>{v.edge_features->size(), c.d_e});
        out.emplace_back("msg.W_MI", std::vector<int>{c.d_e, c.d_h});
        out.emplace_back("msg.b_MI", std::vector<int>{c.d_e});
        out.emplace_back("msg.W_MO", std::vector<int>{c.d_h, c.d_e});
        out.emplace_back("msg.b_MO", std::vector<int>{c.d_h});
    }
    if (c.attention) {
        out.emplace_back("attn.W_QK", std::vector<int>{c.d_h, c.d_h});
        out.emplace_back("attn.W_V", std::vector<int>{c.d_h, c.d_h});
        out.emplace_back("attn.w", std::vector<int>{1, 2 * c.d_h});
    }
    if (c.gnn_type == GnnType::Recurrent) {
        add_gru("upd.gru", c.d_h, c.d_h);
    } else {
        for (int k = 1; k <= c.K; ++k) {
            out.emplace_back("upd.k" + std::to_string(k) + ".W_h",
                             std::vector<int>{c.d_h, c.d_h});
            out.emplace_back("upd.k" + std::to_string(k) + ".b", std::vector<int>{c.d_h});
        }
    }
    out.emplace_back("head.W", std::vector<int>{v.types.size(), c.d_h});
    out.emplace_back("head.b", std::vector<int>{v.types.size()});
    return out;
}

// ---- batching ---------------------------------------------------------------

GraphBatch make_batch(const std::vector<const Tfg*>& graphs, const ModelConfig& c,
                      const Vocabularies& v) {
    if (!c.name_segmentation && !v.names)
        throw InternalError("batching without a name vocabulary");
    if (c.name_segmentation && (!v.segments || !v.bpe))
        throw InternalError("batching without a segment vocabulary and merge table");
    if (c.edge_features && !v.edge_features)
        throw InternalError("batching without an edge feature vocabulary");

    GraphBatch b;
    b.n_files = static_cast<int>(graphs.size());

    std::unordered_map<std::string, int> name_idx;
    std::vector<std::string> distinct;
    auto name_ref = [&](const std::string& n) {
        auto it = name_idx.find(n);
        if (it != name_idx.end()) return it->second;
        const int id = static_cast<int>(distinct.size());
        name_idx.emplace(n, id);
        distinct.push_back(n);
        return id;
    };
    std::vector<int> active_pos;  // node row -> position in active_nodes, -1 frozen

    for (const Tfg* gp : graphs) {
        const Tfg& g = *gp;
        const int off = b.n_nodes;
        if (c.contextual_layer && g.tokens.empty() && !g.nodes.empty())
            throw DataError("graph '" + g.file_id +
                            "' lacks the token sequence the contextual layer reads");

        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const TfgNode& n = g.nodes[i];
            const int row = off + static_cast<int>(i);
            if (n.kind == TfgNodeKind::IdentNode) {
                b.node_feature_ids.push_back(0);  // placeholder, overwritten
                b.ident_nodes.push_back(row);
                b.ident_name_ref.push_back(name_ref(n.feature));
            } else {
                b.node_feature_ids.push_back(v.node_features.id_or_unknown(n.feature));
            }
            if (n.kind == TfgNodeKind::TokNode || n.kind == TfgNodeKind::CtxNode) {
                active_pos.push_back(-1);
            } else {
                active_pos.push_back(static_cast<int>(b.active_nodes.size()));
                b.active_nodes.push_back(row);
            }
        }
        b.n_nodes += static_cast<int>(g.nodes.size());

        if (c.contextual_layer) {
            GraphBatch::FileSeq fs;
            fs.length = static_cast<int>(g.tokens.size());
            for (int p = 0; p < fs.length; ++p) {
                const TfgToken& tk = g.tokens[static_cast<std::size_t>(p)];
                if (tk.ident_node >= 0) {
                    if (tk.ident_node >= static_cast<int>(g.nodes.size()))
                        throw DataError("graph '" + g.file_id +
                                        "' token references a node out of range");
                    fs.ident_positions.push_back(p);
                    fs.ident_name_refs.push_back(
                        name_ref(g.nodes[static_cast<std::size_t>(tk.ident_node)].feature));
                    fs.ident_node_rows.push_back(off + tk.ident_node);
                } else {
                    fs.nonident_positions.push_back(p);
                    fs.nonident_feature_ids.push_back(
                        v.node_features.id_or_unknown(tk.feature));
                }
            }
            b.files.push_back(std::move(fs));
        }

        for (const TfgEdge& e : g.edges) {
            const int dst_row = off + e.dst;
            if (active_pos[static_cast<std::size_t>(dst_row)] < 0) continue;
            b.e_src.push_back(off + e.src);
            b.e_dst.push_back(dst_row);
            b.e_seg.push_back(active_pos[static_cast<std::size_t>(dst_row)]);
            if (c.edge_features) {
                try {
                    b.e_feat.push_back(v.edge_features->id_of(e.feature));
                } catch (const MissingVocabEntry&) {
                    throw DataError("edge feature '" + e.feature + "' in '" + g.file_id +
                                    "' is outside the edge vocabulary; filter such edges "
                                    "before batching");
                }
            }
        }

        for (const auto& [nid, ty] : g.labels) {
            try {
                b.label_nodes.push_back(off + nid);
                b.label_types.push_back(v.types.id_of(ty));
            } catch (const MissingVocabEntry&) {
                throw DataError("type label '" + ty + "' in '" + g.file_id +
                                "' is outside the type vocabulary; filter labels before "
                                "batching");
            }
        }
    }

    if (!c.name_segmentation) {
        b.distinct_name_ids.reserve(distinct.size());
        for (const std::string& nm : distinct)
            b.distinct_name_ids.push_back(v.names->id_or_unknown(nm));
    } else {
        b.distinct_name_segments.reserve(distinct.size());
        for (const std::string& nm : distinct) {
            std::vector<int> ids;
            for (const std::string& sub : split_subtokens(nm))
                for (const std::string& sym : bpe_encode(*v.bpe, sub))
                    ids.push_back(v.segments->id_or_unknown(sym));
            b.distinct_name_segments.push_back(std::move(ids));
        }
    }
    return b;
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'F', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t x) {
    unsigned char buf[4] = {static_cast<unsigned char>(x & 0xff),
                            static_cast<unsigned char>((x >> 8) & 0xff),
                            static_cast<unsigned char>((x >> 16) & 0xff),
                            static_cast<unsigned char>((x >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& os, std::uint64_t x) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

void write_f32_data(std::ostream& os, const std::vector<float>& data) {
    static_assert(sizeof(float) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * 4));
    } else {
        for (float f : data) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(os, bits);
        }
    }
}

struct Reader {
    std::ifstream in;
    std::string path;

    void read_exact(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError("checkpoint '" + path + "' is truncated");
    }
    std::uint32_t u32() {
        unsigned char buf[4];
        read_exact(buf, 4);
        return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
               (static_cast<std::uint32_t>(buf[2]) << 16) |
               (static_cast<std::uint32_t>(buf[3]) << 24);
    }
    std::uint64_t u64() {
        unsigned char buf[8];
        read_exact(buf, 8);
        std::uint64_t x = 0;
        for (int i = 7; i >= 0; --i) x = (x << 8) | buf[i];
        return x;
    }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        if (n) read_exact(s.data(), n);
        return s;
    }
    void f32_data(std::vector<float>& out) {
        static_assert(sizeof(float) == 4);
        if constexpr (std::endian::native == std::endian::little) {
            read_exact(out.data(), out.size() * 4);
        } else {
            for (float& f : out) {
                const std::uint32_t bits = u32();
                std::memcpy(&f, &bits, 4);
            }
        }
    }
};

json vocab_json(const Vocabulary& v) { return json::parse(vocab_to_json(v)); }

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
    json meta;
    meta["config"] = json::parse(config_to_json(m.config));
    json vocabs = json::object();
    if (m.vocabs.names) vocabs["names"] = vocab_json(*m.vocabs.names);
    if (m.vocabs.segments) vocabs["segments"] = vocab_json(*m.vocabs.segments);
    vocabs["node_features"] = vocab_json(m.vocabs.node_features);
    if (m.vocabs.edge_features) vocabs["edge_features"] = vocab_json(*m.vocabs.edge_features);
    vocabs["types"] = vocab_json(m.vocabs.types);
    vocabs["type_counts"] = m.vocabs.type_counts;
    meta["vocabularies"] = std::move(vocabs);
    if (m.vocabs.bpe) meta["bpe"] = json::parse(bpe_to_json(*m.vocabs.bpe));
    meta["metadata"] = {{"epoch", m.meta.epoch},
                        {"validation_loss", m.meta.validation_loss},
                        {"seed", m.meta.seed}};
    const std::string meta_text = meta.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u64(os, meta_text.size());
    os.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    write_u32(os, static_cast<std::uint32_t>(m.params.size()));
    for (const std::string& name : m.params.order()) {
        const Tensor<float>& t = m.params.at(name);
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
        for (int d : t.dims) write_u32(os, static_cast<std::uint32_t>(d));
        write_f32_data(os, t.data);
    }
    os.flush();
    if (!os) throw DataError("failed writing checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.in.open(path, std::ios::binary);
    if (!r.in) throw DataError("cannot open checkpoint '" + path + "'");

    char magic[4];
    r.read_exact(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("'" + path + "' is not a model checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError("checkpoint '" + path + "' has unsupported version " +
                          std::to_string(version));
    const std::uint64_t meta_len = r.u64();
    if (meta_len > (1ull << 30))
        throw FormatError("checkpoint '" + path + "' declares an implausible header size");
    const std::string meta_text = r.bytes(static_cast<std::size_t>(meta_len));
    json meta = json::parse(meta_text, nullptr, false);
    if (meta.is_discarded() || !meta.is_object())
        throw FormatError("checkpoint '" + path + "' header is not valid JSON");

    Model m;
    try {
        if (!meta.contains("config")) throw DataError("missing 'config'");
        m.config = config_from_json(meta["config"].dump());
        if (!meta.contains("vocabularies") || !meta["vocabularies"].is_object())
            throw DataError("missing 'vocabularies'");
        const json& vs = meta["vocabularies"];
        auto get_vocab = [&](const char* key) {
            if (!vs.contains(key))
                throw DataError(std::string("missing vocabulary '") + key + "'");
            return vocab_from_json(vs[key].dump());
        };
        if (vs.contains("names")) m.vocabs.names = get_vocab("names");
        if (vs.contains("segments")) m.vocabs.segments = get_vocab("segments");
        m.vocabs.node_features = get_vocab("node_features");
        if (vs.contains("edge_features")) m.vocabs.edge_features = get_vocab("edge_features");
        m.vocabs.types = get_vocab("types");
        if (!vs.contains("type_counts") || !vs["type_counts"].is_array())
            throw DataError("missing 'type_counts'");
        m.vocabs.type_counts = vs["type_counts"].get<std::vector<long long>>();
        if (meta.contains("bpe")) m.vocabs.bpe = bpe_from_json(meta["bpe"].dump());
        if (meta.contains("metadata") && meta["metadata"].is_object()) {
            const json& md = meta["metadata"];
            m.meta.epoch = md.value("epoch", 0);
            m.meta.validation_loss = md.value("validation_loss", 0.0);
            m.meta.seed = md.value("seed", std::uint64_t{0});
        }
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + path + "' header: " + e.what());
    } catch (const DataError& e) {
        throw FormatError("checkpoint '" + path + "' header: " + e.what());
    }

    if (m.vocabs.type_counts.size() != static_cast<std::size_t>(m.vocabs.types.size()))
        throw IntegrityError("checkpoint '" + path +
                             "': type_counts does not align with the type vocabulary");

    const auto expected = expected_tensors(m.config, m.vocabs);

    std::unordered_map<std::string, Tensor<float>> loaded;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096)
            throw FormatError("checkpoint '" + path + "' declares an implausible tensor name");
        const std::string name = r.bytes(name_len);
        const std::uint32_t ndim = r.u32();
        if (ndim < 1 || ndim > 2)
            throw FormatError("checkpoint '" + path + "': tensor '" + name +
                              "' has unsupported rank " + std::to_string(ndim));
        std::vector<int> dims;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t x = r.u32();
            if (x == 0 || x > (1u << 28))
                throw FormatError("checkpoint '" + path + "': tensor '" + name +
                                  "' has an implausible dimension");
            dims.push_back(static_cast<int>(x));
            numel *= x;
        }
        if (numel > (1ull << 31))
            throw FormatError("checkpoint '" + path + "': tensor '" + name + "' is too large");
        Tensor<float> t = Tensor<float>::zeros(dims);
        r.f32_data(t.data);
        if (!loaded.emplace(name, std::move(t)).second)
            throw FormatError("checkpoint '" + path + "': duplicate tensor '" + name + "'");
    }

    for (const auto& [name, dims] : expected) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw IntegrityError("checkpoint '" + path + "' is missing tensor '" + name + "'");
        if (it->second.dims != dims) {
            std::string want = "[";
            for (std::size_t d = 0; d < dims.size(); ++d)
                want += (d ? "," : "") + std::to_string(dims[d]);
            want += "]";
            throw IntegrityError("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                                 it->second.shape_str() + ", expected " + want);
        }
        m.params.add(name, std::move(it->second));
        loaded.erase(it);
    }
    if (!loaded.empty())
        throw IntegrityError("checkpoint '" + path + "' contains unexpected tensor '" +
                             loaded.begin()->first + "'");
    return m;
}

// ---- inference helpers ------------------------------------------------------

namespace {

void softmax_rows(Tensor<float>& t) {
    const int rows = t.rows(), cols = t.cols();
    for (int r = 0; r < rows; ++r) {
        float mx = t.at(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, t.at(r, c));
        float sum = 0.0f;
        for (int c = 0; c < cols; ++c) {
            const float e = std::exp(t.at(r, c) - mx);
            t.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < cols; ++c) t.at(r, c) /= sum;
    }
}

}  // namespace

Tensor<float> predict_probs(const Model& m, const Tfg& g, const std::vector<int>& nodes) {
    for (int n : nodes) {
        if (n < 0 || n >= static_cast<int>(g.nodes.size()))
            throw DataError("prediction node " + std::to_string(n) + " is out of range");
    }
    const GraphBatch b = make_batch({&g}, m.config, m.vocabs);
    Tape<float> t(false);
    TapeParams<float> P(t, m.params, false);
    const int logits = forward_logits(t, P, m.config, b, nodes);
    Tensor<float> out = t.value(logits);
    softmax_rows(out);
    return out;
}

Tensor<float> label_logits(const Model& m, const GraphBatch& b) {
    if (b.label_nodes.empty()) return Tensor<float>::zeros({0, m.vocabs.types.size()});
    Tape<float> t(false);
    TapeParams<float> P(t, m.params, false);
    const int logits = forward_logits(t, P, m.config, b, b.label_nodes);
    return t.value(logits);
}

}  // namespace typeflow
