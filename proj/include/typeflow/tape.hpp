#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "typeflow/tensor.hpp"

namespace typeflow {

// Reverse-mode autodiff over rank-1/2 tensors. Values are computed eagerly;
// each op records a closure that routes the output gradient to its inputs.
// Leaves can point at externally owned tensors (parameter stores) so no
// parameter copies are made per batch. With gradients disabled the tape only
// evaluates forward and backward() is an error.
template <typename T>
class Tape {
  public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<EMat>;
    using CMap = Eigen::Map<const EMat>;

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t size() const { return nodes_.size(); }

    // ---- node creation -------------------------------------------------

    int leaf(const Tensor<T>* external, bool needs_grad) {
        Node n;
        n.external = external;
        n.needs_grad = grad_enabled_ && needs_grad;
        nodes_.push_back(std::move(n));
        return last();
    }

    int constant(Tensor<T> owned) {
        Node n;
        n.owned = std::move(owned);
        nodes_.push_back(std::move(n));
        return last();
    }

    const Tensor<T>& value(int id) const {
        const Node& n = node(id);
        return n.external ? *n.external : n.owned;
    }

    const Tensor<T>& grad(int id) const {
        const Node& n = node(id);
        if (n.grad.numel() == 0) throw InternalError("gradient was never reached");
        return n.grad;
    }
    bool has_grad(int id) const { return node(id).grad.numel() != 0; }

    void backward(int id) {
        if (!grad_enabled_) throw InternalError("backward() on a gradient-disabled tape");
        const Tensor<T>& v = value(id);
        if (v.numel() != 1) throw ShapeError("backward() needs a scalar, got " + v.shape_str());
        ensure_grad(id).data[0] = T(1);
        for (int i = id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back && n.grad.numel() != 0) {
                last_hint_ = i;
                n.back(*this);
            }
        }
    }

    // ---- primitive ops -------------------------------------------------

    // [m,k] x [k,n] -> [m,n]
    int matmul(int a, int b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (va.cols() != vb.rows())
            throw ShapeError("matmul " + va.shape_str() + " x " + vb.shape_str());
        Tensor<T> out = Tensor<T>::zeros({va.rows(), vb.cols()});
        emap(out).noalias() = cmap(va) * cmap(vb);
        return record(std::move(out), {a, b}, [a, b](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) t.emap(t.ensure_grad(a)).noalias() += t.cmap(g) * t.cmap(t.value(b)).transpose();
            if (t.wants(b)) t.emap(t.ensure_grad(b)).noalias() += t.cmap(t.value(a)).transpose() * t.cmap(g);
        });
    }

    // [m,k] x [n,k]^T -> [m,n]
    int matmul_nt(int a, int b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (va.cols() != vb.cols())
            throw ShapeError("matmul_nt " + va.shape_str() + " x " + vb.shape_str());
        Tensor<T> out = Tensor<T>::zeros({va.rows(), vb.rows()});
        emap(out).noalias() = cmap(va) * cmap(vb).transpose();
        return record(std::move(out), {a, b}, [a, b](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) t.emap(t.ensure_grad(a)).noalias() += t.cmap(g) * t.cmap(t.value(b));
            if (t.wants(b)) t.emap(t.ensure_grad(b)).noalias() += t.cmap(g).transpose() * t.cmap(t.value(a));
        });
    }

    int add(int a, int b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (!va.same_shape(vb))
            throw ShapeError("add " + va.shape_str() + " + " + vb.shape_str());
        Tensor<T> out = va;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
        return record(std::move(out), {a, b}, [a, b](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) t.accum(a, g);
            if (t.wants(b)) t.accum(b, g);
        });
    }

    // [m,n] + broadcast [1,n]
    int add_rowvec(int a, int v) {
        const Tensor<T>&va = value(a), &vv = value(v);
        if (vv.rows() != 1 || vv.cols() != va.cols())
            throw ShapeError("add_rowvec " + va.shape_str() + " + " + vv.shape_str());
        Tensor<T> out = va;
        for (int r = 0; r < out.rows(); ++r)
            for (int c = 0; c < out.cols(); ++c) out.at(r, c) += vv.data[static_cast<std::size_t>(c)];
        return record(std::move(out), {a, v}, [a, v](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) t.accum(a, g);
            if (t.wants(v)) {
                Tensor<T>& gv = t.ensure_grad(v);
                for (int r = 0; r < g.rows(); ++r)
                    for (int c = 0; c < g.cols(); ++c) gv.data[static_cast<std::size_t>(c)] += g.at(r, c);
            }
        });
    }

    int mul(int a, int b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (!va.same_shape(vb))
            throw ShapeError("mul " + va.shape_str() + " * " + vb.shape_str());
        Tensor<T> out = va;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
        return record(std::move(out), {a, b}, [a, b](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) {
                Tensor<T>& ga = t.ensure_grad(a);
                const Tensor<T>& vb2 = t.value(b);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * vb2.data[i];
            }
            if (t.wants(b)) {
                Tensor<T>& gb = t.ensure_grad(b);
                const Tensor<T>& va2 = t.value(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * va2.data[i];
            }
        });
    }

    int one_minus(int a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = T(1) - x;
        return record(std::move(out), {a}, [a](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) {
                Tensor<T>& ga = t.ensure_grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] -= g.data[i];
            }
        });
    }

    // row i of m scaled by s[i]; s is [m,1] or rank-1 [m]
    int scale_rows(int m, int s) {
        const Tensor<T>&vm = value(m), &vs = value(s);
        if (static_cast<int>(vs.numel()) != vm.rows())
            throw ShapeError("scale_rows " + vm.shape_str() + " by " + vs.shape_str());
        Tensor<T> out = vm;
        for (int r = 0; r < out.rows(); ++r) {
            const T f = vs.data[static_cast<std::size_t>(r)];
            for (int c = 0; c < out.cols(); ++c) out.at(r, c) *= f;
        }
        return record(std::move(out), {m, s}, [m, s](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            const Tensor<T>&vm2 = t.value(m), &vs2 = t.value(s);
            if (t.wants(m)) {
                Tensor<T>& gm = t.ensure_grad(m);
                for (int r = 0; r < g.rows(); ++r) {
                    const T f = vs2.data[static_cast<std::size_t>(r)];
                    for (int c = 0; c < g.cols(); ++c) gm.at(r, c) += g.at(r, c) * f;
                }
            }
            if (t.wants(s)) {
                Tensor<T>& gs = t.ensure_grad(s);
                for (int r = 0; r < g.rows(); ++r) {
                    T dot = T(0);
                    for (int c = 0; c < g.cols(); ++c) dot += g.at(r, c) * vm2.at(r, c);
                    gs.data[static_cast<std::size_t>(r)] += dot;
                }
            }
        });
    }

    int leaky_relu(int a, T slope) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = x > T(0) ? x : slope * x;
        return record(std::move(out), {a}, [a, slope](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            const Tensor<T>& va = t.value(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * (va.data[i] > T(0) ? T(1) : slope);
        });
    }

    int relu(int a) { return leaky_relu(a, T(0)); }

    int sigmoid(int a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = T(1) / (T(1) + std::exp(-x));
        const int id = record(std::move(out), {a}, [a](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            const Tensor<T>& y = t.value(t.last_hint_);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
        });
        return id;
    }

    int tanh_op(int a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = std::tanh(x);
        return record(std::move(out), {a}, [a](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            const Tensor<T>& y = t.value(t.last_hint_);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * (T(1) - y.data[i] * y.data[i]);
        });
    }

    int concat_cols(int a, int b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        if (va.rows() != vb.rows())
            throw ShapeError("concat_cols " + va.shape_str() + " | " + vb.shape_str());
        Tensor<T> out = Tensor<T>::zeros({va.rows(), va.cols() + vb.cols()});
        for (int r = 0; r < va.rows(); ++r) {
            for (int c = 0; c < va.cols(); ++c) out.at(r, c) = va.at(r, c);
            for (int c = 0; c < vb.cols(); ++c) out.at(r, va.cols() + c) = vb.at(r, c);
        }
        const int na = va.cols();
        return record(std::move(out), {a, b}, [a, b, na](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(a)) {
                Tensor<T>& ga = t.ensure_grad(a);
                for (int r = 0; r < ga.rows(); ++r)
                    for (int c = 0; c < ga.cols(); ++c) ga.at(r, c) += g.at(r, c);
            }
            if (t.wants(b)) {
                Tensor<T>& gb = t.ensure_grad(b);
                for (int r = 0; r < gb.rows(); ++r)
                    for (int c = 0; c < gb.cols(); ++c) gb.at(r, c) += g.at(r, na + c);
            }
        });
    }

    int concat_rows(const std::vector<int>& ids) {
        if (ids.empty()) throw ShapeError("concat_rows of nothing");
        int total = 0;
        const int c = value(ids[0]).cols();
        for (int id : ids) {
            if (value(id).cols() != c) throw ShapeError("concat_rows column mismatch");
            total += value(id).rows();
        }
        Tensor<T> out = Tensor<T>::zeros({total, c});
        int r0 = 0;
        for (int id : ids) {
            const Tensor<T>& v = value(id);
            std::copy(v.data.begin(), v.data.end(),
                      out.data.begin() + static_cast<std::ptrdiff_t>(r0) * c);
            r0 += v.rows();
        }
        return record(std::move(out), ids, [ids](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            int r = 0;
            for (int id : ids) {
                const int rows = t.value(id).rows(), cols = t.value(id).cols();
                if (t.wants(id)) {
                    Tensor<T>& gi = t.ensure_grad(id);
                    for (int i = 0; i < rows; ++i)
                        for (int ccol = 0; ccol < cols; ++ccol) gi.at(i, ccol) += g.at(r + i, ccol);
                }
                r += rows;
            }
        });
    }

    int gather_rows(int a, std::vector<int> idx) {
        const Tensor<T>& va = value(a);
        Tensor<T> out = Tensor<T>::zeros({static_cast<int>(idx.size()), va.cols()});
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] >= va.rows()) throw ShapeError("gather_rows index out of range");
            for (int c = 0; c < va.cols(); ++c) out.at(static_cast<int>(i), c) = va.at(idx[i], c);
        }
        return record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (int c = 0; c < g.cols(); ++c) ga.at(idx[i], c) += g.at(static_cast<int>(i), c);
        });
    }

    // out = base with row idx[i] replaced by row i of rows; indices unique.
    int overwrite_rows(int base, int rows, std::vector<int> idx) {
        const Tensor<T>&vb = value(base), &vr = value(rows);
        if (vb.cols() != vr.cols() || static_cast<int>(idx.size()) != vr.rows())
            throw ShapeError("overwrite_rows " + vb.shape_str() + " <- " + vr.shape_str());
        Tensor<T> out = vb;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] >= vb.rows()) throw ShapeError("overwrite_rows index out of range");
            for (int c = 0; c < vb.cols(); ++c) out.at(idx[i], c) = vr.at(static_cast<int>(i), c);
        }
        return record(std::move(out), {base, rows}, [base, rows, idx = std::move(idx)](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (t.wants(rows)) {
                Tensor<T>& gr = t.ensure_grad(rows);
                for (std::size_t i = 0; i < idx.size(); ++i)
                    for (int c = 0; c < g.cols(); ++c) gr.at(static_cast<int>(i), c) += g.at(idx[i], c);
            }
            if (t.wants(base)) {
                Tensor<T> masked = g;
                for (std::size_t i = 0; i < idx.size(); ++i)
                    for (int c = 0; c < g.cols(); ++c) masked.at(idx[i], c) = T(0);
                t.accum(base, masked);
            }
        });
    }

    int segment_sum(int a, std::vector<int> seg, int n_seg) {
        const Tensor<T>& va = value(a);
        check_segments(va, seg, n_seg);
        Tensor<T> out = Tensor<T>::zeros({n_seg, va.cols()});
        for (std::size_t e = 0; e < seg.size(); ++e)
            for (int c = 0; c < va.cols(); ++c) out.at(seg[e], c) += va.at(static_cast<int>(e), c);
        return record(std::move(out), {a}, [a, seg = std::move(seg)](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            for (std::size_t e = 0; e < seg.size(); ++e)
                for (int c = 0; c < g.cols(); ++c) ga.at(static_cast<int>(e), c) += g.at(seg[e], c);
        });
    }

    int segment_mean(int a, std::vector<int> seg, int n_seg) {
        const Tensor<T>& va = value(a);
        check_segments(va, seg, n_seg);
        std::vector<int> count(static_cast<std::size_t>(n_seg), 0);
        for (int s : seg) ++count[static_cast<std::size_t>(s)];
        Tensor<T> out = Tensor<T>::zeros({n_seg, va.cols()});
        for (std::size_t e = 0; e < seg.size(); ++e)
            for (int c = 0; c < va.cols(); ++c) out.at(seg[e], c) += va.at(static_cast<int>(e), c);
        for (int s = 0; s < n_seg; ++s) {
            if (count[static_cast<std::size_t>(s)] == 0) continue;
            const T inv = T(1) / static_cast<T>(count[static_cast<std::size_t>(s)]);
            for (int c = 0; c < out.cols(); ++c) out.at(s, c) *= inv;
        }
        return record(std::move(out), {a},
                      [a, seg = std::move(seg), count = std::move(count)](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            for (std::size_t e = 0; e < seg.size(); ++e) {
                const T inv = T(1) / static_cast<T>(count[static_cast<std::size_t>(seg[e])]);
                for (int c = 0; c < g.cols(); ++c)
                    ga.at(static_cast<int>(e), c) += g.at(seg[e], c) * inv;
            }
        });
    }

    // softmax of a column of scores within each segment; scores [E,1] or [E].
    // Stabilized by subtracting the per-segment max of the (detached) values,
    // which leaves the result and the exact gradient unchanged.
    int segment_softmax(int s, std::vector<int> seg, int n_seg) {
        const Tensor<T>& vs = value(s);
        if (vs.cols() != 1 && vs.dims.size() == 2)
            throw ShapeError("segment_softmax needs a score column, got " + vs.shape_str());
        if (static_cast<int>(seg.size()) != static_cast<int>(vs.numel()))
            throw ShapeError("segment_softmax: scores/segments length mismatch");
        for (int sg : seg)
            if (sg < 0 || sg >= n_seg) throw ShapeError("segment id out of range");
        std::vector<T> mx(static_cast<std::size_t>(n_seg), -std::numeric_limits<T>::infinity());
        for (std::size_t e = 0; e < seg.size(); ++e)
            mx[static_cast<std::size_t>(seg[e])] = std::max(mx[static_cast<std::size_t>(seg[e])], vs.data[e]);
        std::vector<T> denom(static_cast<std::size_t>(n_seg), T(0));
        Tensor<T> out = vs;
        for (std::size_t e = 0; e < seg.size(); ++e) {
            out.data[e] = std::exp(vs.data[e] - mx[static_cast<std::size_t>(seg[e])]);
            denom[static_cast<std::size_t>(seg[e])] += out.data[e];
        }
        for (std::size_t e = 0; e < seg.size(); ++e) out.data[e] /= denom[static_cast<std::size_t>(seg[e])];
        return record(std::move(out), {s}, [s, seg = std::move(seg), n_seg](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(s)) return;
            const Tensor<T>& alpha = t.value(t.last_hint_);
            std::vector<T> inner(static_cast<std::size_t>(n_seg), T(0));
            for (std::size_t e = 0; e < seg.size(); ++e)
                inner[static_cast<std::size_t>(seg[e])] += g.data[e] * alpha.data[e];
            Tensor<T>& gs = t.ensure_grad(s);
            for (std::size_t e = 0; e < seg.size(); ++e)
                gs.data[e] += alpha.data[e] * (g.data[e] - inner[static_cast<std::size_t>(seg[e])]);
        });
    }

    // mean over rows of -log softmax(logits)[label]; returns [1,1].
    int cross_entropy_mean(int logits, std::vector<int> labels) {
        const Tensor<T>& vl = value(logits);
        if (static_cast<int>(labels.size()) != vl.rows())
            throw ShapeError("cross_entropy_mean: labels/rows mismatch");
        if (vl.rows() == 0) throw ShapeError("cross_entropy_mean over zero rows");
        for (int lab : labels)
            if (lab < 0 || lab >= vl.cols()) throw ShapeError("label id out of range");
        T loss = T(0);
        for (int r = 0; r < vl.rows(); ++r) {
            T mx = vl.at(r, 0);
            for (int c = 1; c < vl.cols(); ++c) mx = std::max(mx, vl.at(r, c));
            T lse = T(0);
            for (int c = 0; c < vl.cols(); ++c) lse += std::exp(vl.at(r, c) - mx);
            lse = mx + std::log(lse);
            loss += lse - vl.at(r, static_cast<int>(labels[static_cast<std::size_t>(r)]));
        }
        Tensor<T> out = Tensor<T>::zeros({1, 1});
        out.data[0] = loss / static_cast<T>(vl.rows());
        return record(std::move(out), {logits}, [logits, labels = std::move(labels)](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(logits)) return;
            const Tensor<T>& vl2 = t.value(logits);
            Tensor<T>& gl = t.ensure_grad(logits);
            const T scale = g.data[0] / static_cast<T>(vl2.rows());
            for (int r = 0; r < vl2.rows(); ++r) {
                T mx = vl2.at(r, 0);
                for (int c = 1; c < vl2.cols(); ++c) mx = std::max(mx, vl2.at(r, c));
                T denom = T(0);
                for (int c = 0; c < vl2.cols(); ++c) denom += std::exp(vl2.at(r, c) - mx);
                for (int c = 0; c < vl2.cols(); ++c) {
                    const T p = std::exp(vl2.at(r, c) - mx) / denom;
                    const T onehot = (c == labels[static_cast<std::size_t>(r)]) ? T(1) : T(0);
                    gl.at(r, c) += scale * (p - onehot);
                }
            }
        });
    }

    int sum_all(int a) {
        const Tensor<T>& va = value(a);
        Tensor<T> out = Tensor<T>::zeros({1, 1});
        for (T x : va.data) out.data[0] += x;
        return record(std::move(out), {a}, [a](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            for (T& x : ga.data) x += g.data[0];
        });
    }

    int mean_all(int a) {
        const Tensor<T>& va = value(a);
        if (va.numel() == 0) throw ShapeError("mean_all over an empty tensor");
        Tensor<T> out = Tensor<T>::zeros({1, 1});
        for (T x : va.data) out.data[0] += x;
        out.data[0] /= static_cast<T>(va.numel());
        return record(std::move(out), {a}, [a](Tape& t) {
            const Tensor<T>& g = t.grad_of(t.last_hint_);
            if (!t.wants(a)) return;
            Tensor<T>& ga = t.ensure_grad(a);
            const T s = g.data[0] / static_cast<T>(ga.numel());
            for (T& x : ga.data) x += s;
        });
    }

  private:
    struct Node {
        Tensor<T> owned;
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        bool needs_grad = false;
        std::function<void(Tape&)> back;
    };

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
    // Set before invoking a node's backward closure so the closure can find
    // its own output value/gradient without capturing its id.
    int last_hint_ = -1;

    int last() const { return static_cast<int>(nodes_.size()) - 1; }

    Node& node(int id) {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw InternalError("tape node id out of range");
        return nodes_[static_cast<std::size_t>(id)];
    }
    const Node& node(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw InternalError("tape node id out of range");
        return nodes_[static_cast<std::size_t>(id)];
    }

    bool wants(int id) const { return node(id).needs_grad; }

    Tensor<T>& ensure_grad(int id) {
        Node& n = node(id);
        if (n.grad.numel() == 0) {
            const Tensor<T>& v = value(id);
            n.grad = Tensor<T>::zeros(v.dims);
        }
        return n.grad;
    }

    const Tensor<T>& grad_of(int id) { return node(id).grad; }

    void accum(int id, const Tensor<T>& contribution) {
        Tensor<T>& g = ensure_grad(id);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += contribution.data[i];
    }

    int record(Tensor<T> out, const std::vector<int>& parents,
               std::function<void(Tape&)> back) {
        Node n;
        n.owned = std::move(out);
        if (grad_enabled_) {
            for (int p : parents) {
                if (node(p).needs_grad) {
                    n.needs_grad = true;
                    break;
                }
            }
            if (n.needs_grad) n.back = std::move(back);
        }
        nodes_.push_back(std::move(n));
        return last();
    }

    static void check_segments(const Tensor<T>& a, const std::vector<int>& seg, int n_seg) {
        if (static_cast<int>(seg.size()) != a.rows())
            throw ShapeError("segment op: one segment id per row required");
        for (int s : seg)
            if (s < 0 || s >= n_seg) throw ShapeError("segment id out of range");
    }

    Map emap(Tensor<T>& t) { return Map(t.data.data(), t.rows(), t.cols()); }
    CMap cmap(const Tensor<T>& t) { return CMap(t.data.data(), t.rows(), t.cols()); }
};

}  // namespace typeflow
