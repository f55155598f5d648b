#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "typeflow/nn.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/tape.hpp"
#include "typeflow/tensor.hpp"

using namespace typeflow;

namespace {

Tensor<double> make(std::vector<int> dims, std::vector<double> vals) {
    Tensor<double> t = Tensor<double>::zeros(std::move(dims));
    REQUIRE(t.data.size() == vals.size());
    t.data = std::move(vals);
    return t;
}

// Central finite differences on every coordinate of `x` against the backward
// pass of the scalar expression `build` constructs from the leaf.
void check_against_fd(Tensor<double>& x,
                      const std::function<int(Tape<double>&, int)>& build,
                      double eps = 1e-6, double tol = 1e-6) {
    auto eval = [&]() {
        Tape<double> t;
        const int loss = build(t, t.leaf(&x, false));
        return t.value(loss).data[0];
    };
    Tape<double> t;
    const int leaf = t.leaf(&x, true);
    const int loss = build(t, leaf);
    REQUIRE(t.value(loss).numel() == 1);
    t.backward(loss);
    REQUIRE(t.has_grad(leaf));
    const Tensor<double> g = t.grad(leaf);

    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + eps;
        const double fp = eval();
        x.data[i] = keep - eps;
        const double fm = eval();
        x.data[i] = keep;
        const double fd = (fp - fm) / (2.0 * eps);
        CAPTURE(i);
        CHECK(std::abs(fd - g.data[i]) <=
              tol * std::max(1.0, std::max(std::abs(fd), std::abs(g.data[i]))));
    }
}

}  // namespace

TEST_CASE("forward values match hand-computed results") {
    Tape<double> t;
    Tensor<double> a = make({2, 2}, {1, 2, 3, 4});
    Tensor<double> b = make({2, 2}, {5, 6, 7, 8});
    const int ia = t.leaf(&a, false);
    const int ib = t.leaf(&b, false);

    // a * b^T: row0 = (1*5+2*6, 1*7+2*8), row1 = (3*5+4*6, 3*7+4*8)
    const Tensor<double>& mm = t.value(t.matmul_nt(ia, ib));
    CHECK(mm.at(0, 0) == doctest::Approx(17));
    CHECK(mm.at(0, 1) == doctest::Approx(23));
    CHECK(mm.at(1, 0) == doctest::Approx(39));
    CHECK(mm.at(1, 1) == doctest::Approx(53));

    // plain matmul for contrast: a * b
    const Tensor<double>& pm = t.value(t.matmul(ia, ib));
    CHECK(pm.at(0, 0) == doctest::Approx(19));
    CHECK(pm.at(1, 1) == doctest::Approx(50));

    Tensor<double> v = make({2}, {10, 20});
    const Tensor<double>& av = t.value(t.add_rowvec(ia, t.leaf(&v, false)));
    CHECK(av.at(0, 0) == doctest::Approx(11));
    CHECK(av.at(1, 1) == doctest::Approx(24));

    const Tensor<double>& om = t.value(t.one_minus(ia));
    CHECK(om.at(0, 0) == doctest::Approx(0));
    CHECK(om.at(1, 1) == doctest::Approx(-3));

    Tensor<double> neg = make({1, 3}, {-2, 0, 3});
    const int ineg = t.leaf(&neg, false);
    const Tensor<double>& lr = t.value(t.leaky_relu(ineg, 0.2));
    CHECK(lr.at(0, 0) == doctest::Approx(-0.4));
    CHECK(lr.at(0, 1) == doctest::Approx(0));
    CHECK(lr.at(0, 2) == doctest::Approx(3));
    const Tensor<double>& re = t.value(t.relu(ineg));
    CHECK(re.at(0, 0) == doctest::Approx(0));
    CHECK(re.at(0, 2) == doctest::Approx(3));

    const Tensor<double>& sg = t.value(t.sigmoid(ineg));
    CHECK(sg.at(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
    CHECK(sg.at(0, 1) == doctest::Approx(0.5));
    const Tensor<double>& th = t.value(t.tanh_op(ineg));
    CHECK(th.at(0, 2) == doctest::Approx(std::tanh(3.0)));

    // gather, overwrite, concat
    const Tensor<double>& gr = t.value(t.gather_rows(ia, {1, 0, 1}));
    CHECK(gr.rows() == 3);
    CHECK(gr.at(0, 0) == doctest::Approx(3));
    CHECK(gr.at(1, 1) == doctest::Approx(2));

    Tensor<double> rows = make({1, 2}, {9, 9});
    const Tensor<double>& ow = t.value(t.overwrite_rows(ia, t.leaf(&rows, false), {1}));
    CHECK(ow.at(0, 0) == doctest::Approx(1));
    CHECK(ow.at(1, 0) == doctest::Approx(9));

    const Tensor<double>& cc = t.value(t.concat_cols(ia, ib));
    CHECK(cc.cols() == 4);
    CHECK(cc.at(0, 2) == doctest::Approx(5));
    const Tensor<double>& cr = t.value(t.concat_rows({ia, ib}));
    CHECK(cr.rows() == 4);
    CHECK(cr.at(2, 0) == doctest::Approx(5));

    Tensor<double> scale = make({2, 1}, {2, -1});
    const Tensor<double>& sr = t.value(t.scale_rows(ia, t.leaf(&scale, false)));
    CHECK(sr.at(0, 1) == doctest::Approx(4));
    CHECK(sr.at(1, 0) == doctest::Approx(-3));
}

TEST_CASE("segment reductions and softmax") {
    Tape<double> t;
    Tensor<double> x = make({3, 2}, {1, 2, 3, 4, 5, 6});
    const int ix = t.leaf(&x, false);

    const Tensor<double>& ss = t.value(t.segment_sum(ix, {0, 0, 2}, 3));
    CHECK(ss.rows() == 3);
    CHECK(ss.at(0, 0) == doctest::Approx(4));
    CHECK(ss.at(0, 1) == doctest::Approx(6));
    CHECK(ss.at(1, 0) == doctest::Approx(0));  // empty segment stays zero
    CHECK(ss.at(2, 1) == doctest::Approx(6));

    const Tensor<double>& sm = t.value(t.segment_mean(ix, {0, 0, 2}, 3));
    CHECK(sm.at(0, 0) == doctest::Approx(2));
    CHECK(sm.at(1, 1) == doctest::Approx(0));
    CHECK(sm.at(2, 0) == doctest::Approx(5));

    // softmax within {row0,row1}, then a singleton segment.
    Tensor<double> s = make({3, 1}, {1.0, 2.0, 0.3});
    const Tensor<double>& sf = t.value(t.segment_softmax(t.leaf(&s, false), {0, 0, 1}, 2));
    const double e1 = std::exp(1.0 - 2.0), e2 = std::exp(0.0);
    CHECK(sf.at(0, 0) == doctest::Approx(e1 / (e1 + e2)));
    CHECK(sf.at(1, 0) == doctest::Approx(e2 / (e1 + e2)));
    CHECK(sf.at(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("cross entropy matches the log-softmax formula") {
    Tape<double> t;
    Tensor<double> logits = make({2, 3}, {1, 2, 3, 0.5, 0, -0.5});
    const int il = t.leaf(&logits, false);
    const int loss = t.cross_entropy_mean(il, {2, 0});

    auto nll = [](std::vector<double> row, int label) {
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double z = 0;
        for (double v : row) z += std::exp(v - mx);
        return -(row[size_t(label)] - mx - std::log(z));
    };
    const double expected = 0.5 * (nll({1, 2, 3}, 2) + nll({0.5, 0, -0.5}, 0));
    CHECK(t.value(loss).data[0] == doctest::Approx(expected));
}

TEST_CASE("backward pass agrees with finite differences") {
    Rng rng(7);

    SUBCASE("matmul_nt, add_rowvec, leaky_relu") {
        Tensor<double> x = init_matrix<double>(rng, {3, 4}, 4);
        Tensor<double> w = init_matrix<double>(rng, {2, 4}, 4);
        Tensor<double> b = make({2}, {0.1, -0.2});
        check_against_fd(x, [&](Tape<double>& t, int leaf) {
            return t.mean_all(t.leaky_relu(
                t.add_rowvec(t.matmul_nt(leaf, t.leaf(&w, false)), t.leaf(&b, false)), 0.2));
        });
        check_against_fd(w, [&](Tape<double>& t, int leaf) {
            return t.mean_all(t.leaky_relu(
                t.add_rowvec(t.matmul_nt(t.leaf(&x, false), leaf), t.leaf(&b, false)), 0.2));
        });
    }

    SUBCASE("mul, one_minus, sigmoid, tanh, plain matmul") {
        Tensor<double> x = init_matrix<double>(rng, {2, 3}, 3);
        Tensor<double> y = init_matrix<double>(rng, {2, 3}, 3);
        Tensor<double> m = init_matrix<double>(rng, {3, 2}, 3);
        check_against_fd(x, [&](Tape<double>& t, int leaf) {
            const int prod = t.mul(t.sigmoid(leaf), t.one_minus(t.tanh_op(t.leaf(&y, false))));
            return t.sum_all(t.matmul(prod, t.leaf(&m, false)));
        });
    }

    SUBCASE("gather, overwrite, concat, scale") {
        Tensor<double> x = init_matrix<double>(rng, {3, 2}, 2);
        Tensor<double> r = init_matrix<double>(rng, {2, 2}, 2);
        Tensor<double> s = make({3, 1}, {0.5, -1.5, 2.0});
        check_against_fd(x, [&](Tape<double>& t, int leaf) {
            const int ow = t.overwrite_rows(leaf, t.leaf(&r, false), {2, 0});
            const int g = t.gather_rows(ow, {0, 2, 1});
            const int sc = t.scale_rows(g, t.leaf(&s, false));
            return t.mean_all(t.concat_cols(sc, g));
        });
        check_against_fd(r, [&](Tape<double>& t, int leaf) {
            const int ow = t.overwrite_rows(t.leaf(&x, false), leaf, {2, 0});
            return t.mean_all(t.concat_rows({ow, ow}));
        });
    }

    SUBCASE("segment softmax attention pattern") {
        Tensor<double> scores = make({4, 1}, {0.3, -0.8, 1.2, 0.05});
        Tensor<double> msgs = init_matrix<double>(rng, {4, 3}, 3);
        const std::vector<int> seg{0, 0, 1, 1};
        check_against_fd(scores, [&](Tape<double>& t, int leaf) {
            const int alpha = t.segment_softmax(leaf, seg, 2);
            const int agg = t.segment_sum(t.scale_rows(t.leaf(&msgs, false), alpha), seg, 2);
            return t.sum_all(agg);
        });
        check_against_fd(msgs, [&](Tape<double>& t, int leaf) {
            const int alpha = t.segment_softmax(t.leaf(&scores, false), seg, 2);
            return t.sum_all(t.segment_sum(t.scale_rows(leaf, alpha), seg, 2));
        });
    }

    SUBCASE("segment mean and cross entropy") {
        Tensor<double> x = init_matrix<double>(rng, {4, 3}, 3);
        check_against_fd(x, [&](Tape<double>& t, int leaf) {
            const int agg = t.segment_mean(leaf, {0, 1, 1, 1}, 2);
            return t.cross_entropy_mean(agg, {2, 0});
        });
    }

    SUBCASE("gru step wrt input and state") {
        ParamStore<double> store;
        Rng init_rng(11);
        create_gru(store, init_rng, "g", 3, 2);
        Tensor<double> x = init_matrix<double>(rng, {2, 3}, 3);
        Tensor<double> h = init_matrix<double>(rng, {2, 2}, 2);
        auto run = [&](Tape<double>& t, int xid, int hid) {
            TapeParams<double> P(t, store, false);
            return t.sum_all(gru_step(t, bind_gru(P, "g"), xid, hid));
        };
        check_against_fd(x, [&](Tape<double>& t, int leaf) {
            return run(t, leaf, t.leaf(&h, false));
        });
        check_against_fd(h, [&](Tape<double>& t, int leaf) {
            return run(t, t.leaf(&x, false), leaf);
        });
    }
}

TEST_CASE("gru step matches a scalar hand computation") {
    ParamStore<double> store;
    store.add("g.Wz", make({1, 1}, {0.2}));
    store.add("g.Uz", make({1, 1}, {0.4}));
    store.add("g.bz", make({1}, {0.1}));
    store.add("g.Wr", make({1, 1}, {-0.3}));
    store.add("g.Ur", make({1, 1}, {0.5}));
    store.add("g.br", make({1}, {0.0}));
    store.add("g.Wc", make({1, 1}, {0.7}));
    store.add("g.Uc", make({1, 1}, {-0.2}));
    store.add("g.bc", make({1}, {0.05}));

    Tensor<double> x = make({1, 1}, {0.5});
    Tensor<double> h = make({1, 1}, {0.3});
    Tape<double> t;
    TapeParams<double> P(t, store, false);
    const int out = gru_step(t, bind_gru(P, "g"), t.leaf(&x, false), t.leaf(&h, false));

    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double z = sigmoid(0.5 * 0.2 + 0.3 * 0.4 + 0.1);
    const double r = sigmoid(0.5 * -0.3 + 0.3 * 0.5 + 0.0);
    const double hc = std::tanh(0.5 * 0.7 + (r * 0.3) * -0.2 + 0.05);
    const double expect = (1.0 - z) * 0.3 + z * hc;
    CHECK(t.value(out).data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bidirectional gru shapes and the single-row case") {
    ParamStore<double> store;
    Rng rng(3);
    create_gru(store, rng, "f", 2, 3);
    create_gru(store, rng, "b", 2, 3);
    Tensor<double> X = init_matrix<double>(rng, {4, 2}, 2);

    Tape<double> t;
    TapeParams<double> P(t, store, false);
    const int outs = bi_gru_outputs(t, bind_gru(P, "f"), bind_gru(P, "b"), t.leaf(&X, false), 3);
    CHECK(t.value(outs).rows() == 4);
    CHECK(t.value(outs).cols() == 6);
    const int fin = bi_gru_final(t, bind_gru(P, "f"), bind_gru(P, "b"), t.leaf(&X, false), 3);
    CHECK(t.value(fin).rows() == 1);
    CHECK(t.value(fin).cols() == 6);
    // The last forward state is the final output's left half.
    const Tensor<double>& O = t.value(outs);
    const Tensor<double>& F = t.value(fin);
    for (int c = 0; c < 3; ++c) CHECK(O.at(3, c) == doctest::Approx(F.at(0, c)));
    // ... and the first row's right half is the full backward pass state.
    for (int c = 3; c < 6; ++c) CHECK(O.at(0, c) == doctest::Approx(F.at(0, c)));

    Tensor<double> one = init_matrix<double>(rng, {1, 2}, 2);
    Tape<double> t2;
    TapeParams<double> P2(t2, store, false);
    const int o1 = bi_gru_outputs(t2, bind_gru(P2, "f"), bind_gru(P2, "b"), t2.leaf(&one, false), 3);
    CHECK(t2.value(o1).rows() == 1);
    CHECK(t2.value(o1).cols() == 6);
}

TEST_CASE("optimizer step matches the hand-computed update") {
    ParamStore<double> params;
    params.add("w", make({1, 2}, {1.0, -2.0}));
    params.add("frozen", make({1}, {5.0}));

    AdamW<double>::Options opt;
    opt.lr = 0.1;
    AdamW<double> adam(opt);

    std::unordered_map<std::string, Tensor<double>> grads;
    grads.emplace("w", make({1, 2}, {0.5, -0.25}));
    adam.step(params, grads);

    // decay: w *= 1 - 0.1*0.01 = 0.999
    // m = 0.1*g_hat... worked per coordinate:
    //   m=0.05, v=2.5e-4, c1=0.1, c2=1e-3, mhat=0.5, vhat=0.25
    //   w0 = 0.999 - 0.1*0.5/(0.5+1e-8)
    const double w0 = 0.999 - 0.1 * 0.5 / (0.5 + 1e-8);
    // coordinate 1: m=-0.025, v=6.25e-5, mhat=-0.25, vhat=0.0625
    const double w1 = -2.0 * 0.999 - 0.1 * (-0.25) / (0.25 + 1e-8);
    CHECK(params.at("w").data[0] == doctest::Approx(w0).epsilon(1e-12));
    CHECK(params.at("w").data[1] == doctest::Approx(w1).epsilon(1e-12));
    // no gradient -> untouched, not even decayed
    CHECK(params.at("frozen").data[0] == doctest::Approx(5.0));

    // second step uses t=2 bias corrections and accumulated moments
    adam.step(params, grads);
    const double m2 = 0.9 * 0.05 + 0.1 * 0.5;
    const double v2 = 0.999 * 2.5e-4 + 0.001 * 0.25;
    const double c1 = 1.0 - std::pow(0.9, 2.0), c2 = 1.0 - std::pow(0.999, 2.0);
    const double w0b = w0 * 0.999 - 0.1 * (m2 / c1) / (std::sqrt(v2 / c2) + 1e-8);
    CHECK(params.at("w").data[0] == doctest::Approx(w0b).epsilon(1e-12));
}

TEST_CASE("random stream is deterministic and fork-stable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    CHECK(Rng::derive(1, 2) == Rng::derive(1, 2));
    CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
    CHECK(Rng::derive(2, 2) != Rng::derive(1, 2));

    Rng c(9);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7};
    std::vector<int> w = v;
    Rng d(9);
    c.shuffle(v);
    d.shuffle(w);
    CHECK(v == w);
}

TEST_CASE("initializers are deterministic and respect their bounds") {
    Rng r1(5), r2(5);
    const Tensor<double> a = init_matrix<double>(r1, {4, 6}, 6);
    const Tensor<double> b = init_matrix<double>(r2, {4, 6}, 6);
    CHECK(a.data == b.data);
    const double bound = 1.0 / std::sqrt(6.0);
    for (double x : a.data) {
        CHECK(x >= -bound);
        CHECK(x <= bound);
    }
    const Tensor<double> e = init_embedding<double>(r1, 10, 16);
    CHECK(e.rows() == 10);
    CHECK(e.cols() == 16);
    Rng r3(5);
    init_matrix<double>(r3, {4, 6}, 6);
    const Tensor<double> e2 = init_embedding<double>(r3, 10, 16);
    CHECK(e2.data == e.data);
}

TEST_CASE("tape rejects shape mismatches") {
    Tape<double> t;
    Tensor<double> a = make({2, 2}, {1, 2, 3, 4});
    Tensor<double> v3 = make({3}, {1, 2, 3});
    const int ia = t.leaf(&a, false);
    CHECK_THROWS_AS(t.add(ia, t.leaf(&v3, false)), ShapeError);
    CHECK_THROWS_AS(t.matmul_nt(ia, t.leaf(&v3, false)), ShapeError);
    CHECK_THROWS_AS(t.segment_sum(ia, {0}, 1), ShapeError);
    CHECK_THROWS_AS(t.gather_rows(ia, {5}), ShapeError);
}
