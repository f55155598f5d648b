#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "typeflow/rng.hpp"
#include "typeflow/tape.hpp"

namespace typeflow {

// ---- parameter initialization ---------------------------------------------
// Matrices: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)). Biases: zero.
// Embeddings: normal(0,1)/sqrt(width). All draws consume the shared RNG in
// tensor-creation order, so a seed pins every initial value.

template <typename T>
Tensor<T> init_matrix(Rng& rng, std::vector<int> dims, int fan_in) {
    Tensor<T> t = Tensor<T>::zeros(std::move(dims));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& x : t.data) x = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

template <typename T>
Tensor<T> init_embedding(Rng& rng, int rows, int cols) {
    Tensor<T> t = Tensor<T>::zeros({rows, cols});
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (T& x : t.data) x = static_cast<T>(rng.normal() * scale);
    return t;
}

// ---- parameter binding -----------------------------------------------------

// Lazily binds parameter-store tensors as tape leaves, one leaf per tensor.
template <typename T>
class TapeParams {
  public:
    TapeParams(Tape<T>& tape, const ParamStore<T>& store, bool trainable = true)
        : tape_(tape), store_(store), trainable_(trainable) {}

    int operator[](const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        const int id = tape_.leaf(&store_.at(name), trainable_);
        ids_.emplace(name, id);
        bound_.emplace_back(name, id);
        return id;
    }

    // Tensor-name -> gradient for every bound leaf the backward pass reached.
    std::unordered_map<std::string, Tensor<T>> collect_grads() const {
        std::unordered_map<std::string, Tensor<T>> out;
        for (const auto& [name, id] : bound_) {
            if (tape_.has_grad(id)) out.emplace(name, tape_.grad(id));
        }
        return out;
    }

  private:
    Tape<T>& tape_;
    const ParamStore<T>& store_;
    bool trainable_;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::pair<std::string, int>> bound_;
};

// ---- composite layers ------------------------------------------------------

// y = x W^T + b with W stored [out, in] and b [out].
template <typename T>
int linear(Tape<T>& t, int x, int w, int b) {
    return t.add_rowvec(t.matmul_nt(x, w), b);
}

struct GruParamIds {
    int Wz, Uz, bz, Wr, Ur, br, Wc, Uc, bc;
};

inline std::vector<std::string> gru_param_names(const std::string& prefix) {
    return {prefix + ".Wz", prefix + ".Uz", prefix + ".bz",
            prefix + ".Wr", prefix + ".Ur", prefix + ".br",
            prefix + ".Wc", prefix + ".Uc", prefix + ".bc"};
}

template <typename T>
void create_gru(ParamStore<T>& store, Rng& rng, const std::string& prefix,
                int in_dim, int hidden) {
    store.add(prefix + ".Wz", init_matrix<T>(rng, {hidden, in_dim}, in_dim));
    store.add(prefix + ".Uz", init_matrix<T>(rng, {hidden, hidden}, hidden));
    store.add(prefix + ".bz", Tensor<T>::zeros({hidden}));
    store.add(prefix + ".Wr", init_matrix<T>(rng, {hidden, in_dim}, in_dim));
    store.add(prefix + ".Ur", init_matrix<T>(rng, {hidden, hidden}, hidden));
    store.add(prefix + ".br", Tensor<T>::zeros({hidden}));
    store.add(prefix + ".Wc", init_matrix<T>(rng, {hidden, in_dim}, in_dim));
    store.add(prefix + ".Uc", init_matrix<T>(rng, {hidden, hidden}, hidden));
    store.add(prefix + ".bc", Tensor<T>::zeros({hidden}));
}

template <typename T>
GruParamIds bind_gru(TapeParams<T>& P, const std::string& prefix) {
    return {P[prefix + ".Wz"], P[prefix + ".Uz"], P[prefix + ".bz"],
            P[prefix + ".Wr"], P[prefix + ".Ur"], P[prefix + ".br"],
            P[prefix + ".Wc"], P[prefix + ".Uc"], P[prefix + ".bc"]};
}

// One GRU step over a batch of rows; x [n,in], h [n,hidden] -> [n,hidden].
// Update gate z, reset gate r; the reset is applied to the state before the
// candidate transform.
template <typename T>
int gru_step(Tape<T>& t, const GruParamIds& p, int x, int h) {
    const int z = t.sigmoid(t.add(linear(t, x, p.Wz, p.bz), t.matmul_nt(h, p.Uz)));
    const int r = t.sigmoid(t.add(linear(t, x, p.Wr, p.br), t.matmul_nt(h, p.Ur)));
    const int hc = t.tanh_op(t.add(linear(t, x, p.Wc, p.bc), t.matmul_nt(t.mul(r, h), p.Uc)));
    return t.add(t.mul(t.one_minus(z), h), t.mul(z, hc));
}

// Bidirectional GRU over the rows of X [len, in]. `outputs` gives the
// per-position concatenation [len, 2*hidden]; `final_state` gives
// [1, 2*hidden] (last forward state | last backward state).
template <typename T>
int bi_gru_outputs(Tape<T>& t, const GruParamIds& fwd, const GruParamIds& bwd,
                   int X, int hidden) {
    const int len = t.value(X).rows();
    if (len == 0) throw ShapeError("bi_gru over an empty sequence");
    std::vector<int> fs(static_cast<std::size_t>(len)), bs(static_cast<std::size_t>(len));
    int h = t.constant(Tensor<T>::zeros({1, hidden}));
    for (int i = 0; i < len; ++i) {
        h = gru_step(t, fwd, t.gather_rows(X, {i}), h);
        fs[static_cast<std::size_t>(i)] = h;
    }
    h = t.constant(Tensor<T>::zeros({1, hidden}));
    for (int i = len - 1; i >= 0; --i) {
        h = gru_step(t, bwd, t.gather_rows(X, {i}), h);
        bs[static_cast<std::size_t>(i)] = h;
    }
    std::vector<int> rows(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
        rows[static_cast<std::size_t>(i)] =
            t.concat_cols(fs[static_cast<std::size_t>(i)], bs[static_cast<std::size_t>(i)]);
    return len == 1 ? rows[0] : t.concat_rows(rows);
}

template <typename T>
int bi_gru_final(Tape<T>& t, const GruParamIds& fwd, const GruParamIds& bwd,
                 int X, int hidden) {
    const int len = t.value(X).rows();
    if (len == 0) throw ShapeError("bi_gru over an empty sequence");
    int hf = t.constant(Tensor<T>::zeros({1, hidden}));
    for (int i = 0; i < len; ++i) hf = gru_step(t, fwd, t.gather_rows(X, {i}), hf);
    int hb = t.constant(Tensor<T>::zeros({1, hidden}));
    for (int i = len - 1; i >= 0; --i) hb = gru_step(t, bwd, t.gather_rows(X, {i}), hb);
    return t.concat_cols(hf, hb);
}

// ---- optimizer -------------------------------------------------------------

// AdamW with decoupled weight decay: parameters are first scaled by
// (1 - lr*weight_decay), then the bias-corrected Adam step is applied.
// Tensors absent from `grads` are left untouched.
template <typename T>
class AdamW {
  public:
    struct Options {
        T lr = static_cast<T>(1e-3);
        T beta1 = static_cast<T>(0.9);
        T beta2 = static_cast<T>(0.999);
        T eps = static_cast<T>(1e-8);
        T weight_decay = static_cast<T>(0.01);
    };

    explicit AdamW(Options o = {}) : o_(o) {}
    const Options& options() const { return o_; }

    void step(ParamStore<T>& params,
              const std::unordered_map<std::string, Tensor<T>>& grads) {
        ++t_;
        const T c1 = T(1) - std::pow(o_.beta1, static_cast<T>(t_));
        const T c2 = T(1) - std::pow(o_.beta2, static_cast<T>(t_));
        for (const std::string& name : params.order()) {
            auto git = grads.find(name);
            if (git == grads.end()) continue;
            Tensor<T>& p = params.at(name);
            const Tensor<T>& g = git->second;
            if (!p.same_shape(g))
                throw ShapeError("gradient shape mismatch for '" + name + "'");
            Tensor<T>& m = moment(m_, name, p);
            Tensor<T>& v = moment(v_, name, p);
            const T decay = T(1) - o_.lr * o_.weight_decay;
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                p.data[i] *= decay;
                m.data[i] = o_.beta1 * m.data[i] + (T(1) - o_.beta1) * g.data[i];
                v.data[i] = o_.beta2 * v.data[i] + (T(1) - o_.beta2) * g.data[i] * g.data[i];
                const T mhat = m.data[i] / c1;
                const T vhat = v.data[i] / c2;
                p.data[i] -= o_.lr * mhat / (std::sqrt(vhat) + o_.eps);
            }
        }
    }

  private:
    Tensor<T>& moment(std::unordered_map<std::string, Tensor<T>>& mm,
                      const std::string& name, const Tensor<T>& like) {
        auto it = mm.find(name);
        if (it == mm.end()) it = mm.emplace(name, Tensor<T>::zeros(like.dims)).first;
        return it->second;
    }

    Options o_;
    long long t_ = 0;
    std::unordered_map<std::string, Tensor<T>> m_;
    std::unordered_map<std::string, Tensor<T>> v_;
};

// ---- gradient checking -----------------------------------------------------

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
    std::string worst;  // "tensor[flat_index]" of the worst coordinate
};

// Compares backward-pass gradients against central finite differences on
// `total_samples` parameter coordinates (every tensor gets at least one, the
// rest drawn uniformly). build_loss must deterministically rebuild the same
// scalar loss from the current parameter values. The error denominator is
// floored at 1e-6, so coordinates whose gradients sit below that scale are
// compared absolutely; otherwise finite-difference cancellation noise would
// dominate the ratio on saturated gates.
template <typename T>
GradCheckResult grad_check(
    ParamStore<T>& params,
    const std::function<int(Tape<T>&, TapeParams<T>&)>& build_loss,
    int total_samples, T eps, Rng& rng) {
    std::unordered_map<std::string, Tensor<T>> analytic;
    {
        Tape<T> tape(true);
        TapeParams<T> P(tape, params);
        const int loss = build_loss(tape, P);
        tape.backward(loss);
        analytic = P.collect_grads();
    }
    auto eval = [&]() -> double {
        Tape<T> tape(false);
        TapeParams<T> P(tape, params);
        const int loss = build_loss(tape, P);
        return static_cast<double>(tape.value(loss).data[0]);
    };

    std::vector<std::pair<std::string, std::size_t>> coords;
    for (const std::string& name : params.order()) {
        const std::size_t n = params.at(name).numel();
        if (n == 0) continue;
        coords.emplace_back(name, static_cast<std::size_t>(rng.below(n)));
    }
    while (static_cast<int>(coords.size()) < total_samples) {
        const std::string& name =
            params.order()[static_cast<std::size_t>(rng.below(params.order().size()))];
        const std::size_t n = params.at(name).numel();
        if (n == 0) continue;
        coords.emplace_back(name, static_cast<std::size_t>(rng.below(n)));
    }

    GradCheckResult res;
    for (const auto& [name, flat] : coords) {
        Tensor<T>& p = params.at(name);
        const T old = p.data[flat];
        p.data[flat] = old + eps;
        const double fp = eval();
        p.data[flat] = old - eps;
        const double fm = eval();
        p.data[flat] = old;
        const double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
        double ana = 0.0;
        auto it = analytic.find(name);
        if (it != analytic.end()) ana = static_cast<double>(it->second.data[flat]);
        const double rel =
            std::abs(ana - numeric) / std::max(1e-6, std::abs(ana) + std::abs(numeric));
        ++res.checked;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst = name + "[" + std::to_string(flat) + "]";
        }
    }
    return res;
}

}  // namespace typeflow
