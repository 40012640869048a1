#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "pdl/gradcheck.hpp"
#include "pdl/loss.hpp"
#include "pdl/model.hpp"
#include "pdl/rng.hpp"

using namespace pdl;
using testing::TempDir;
using testing::thrown_kind;

namespace {

// Scalar-loop forward pass plus weighted CE, independent of the Eigen kernels.
double naive_objective(const ModelParams& p, const Contexts& ctx, const std::vector<TokenId>& y,
                       const std::vector<double>& w, Reduction r) {
    const std::size_t V = p.vocab_size();
    const int n = p.context_size, d = p.embed_dim;
    double total = 0;
    std::size_t counted = 0;
    for (Eigen::Index b = 0; b < ctx.rows(); ++b) {
        std::vector<double> z(V);
        for (std::size_t v = 0; v < V; ++v) {
            double s = p.bias(v);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < d; ++k) s += p.embedding(ctx(b, j), k) * p.projection(j * d + k, v);
            z[v] = s;
        }
        if (y[b] == kPad) continue;
        double m = z[0];
        for (double x : z) m = std::max(m, x);
        double s = 0;
        for (double x : z) s += std::exp(x - m);
        total += -w[y[b]] * ((z[y[b]] - m) - std::log(s));
        ++counted;
    }
    return r == Reduction::TokenMean ? (counted ? total / counted : 0.0) : total;
}

Contexts random_contexts(Rng& rng, Eigen::Index rows, int n, std::size_t V) {
    Contexts c(rows, n);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<TokenId>(rng.below(V));
    return c;
}

ModelParams random_params(Rng& rng, std::size_t V, int n, int d) {
    ModelParams p = zero_params(V, n, d);
    for (auto* m : {&p.embedding, &p.projection})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = rng.uniform(-0.5, 0.5);
    return p;
}

double max_rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("init_params") {
    ModelParams a = init_params(30, 2, 5, 9);
    ModelParams b = init_params(30, 2, 5, 9);
    CHECK(a == b);
    CHECK(a.bias.isZero(0.0));
    CHECK(a.embedding.cwiseAbs().maxCoeff() <= 0.05);
    CHECK(a.projection.cwiseAbs().maxCoeff() <= 0.05);
    CHECK(a.embedding.rows() == 30);
    CHECK(a.projection.rows() == 10);
    CHECK(a.projection.cols() == 30);
    CHECK_FALSE(init_params(30, 2, 5, 10) == a);
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("make_examples pads with BOS") {
    EncodedCorpus c{{{1, 5, 6, 2}, {1, 2}}, 7};
    ExampleSet ex = make_examples(c, 2);
    REQUIRE(ex.size() == 4);
    CHECK(ex.targets == std::vector<TokenId>{5, 6, 2, 2});
    CHECK(ex.previous == std::vector<TokenId>{1, 5, 6, 1});
    Contexts want(4, 2);
    want << 1, 1, 1, 5, 5, 6, 1, 1;
    CHECK(ex.contexts == want);

    std::vector<std::size_t> pick{2, 0};
    ExampleSet sel = ex.select(pick);
    CHECK(sel.targets == std::vector<TokenId>{2, 5});
    CHECK(sel.contexts.row(0) == want.row(2));
    CHECK(ex.slice(1, 3).targets == std::vector<TokenId>{6, 2});
    CHECK(thrown_kind([&] { make_examples(c, 0); }) == ErrorKind::Config);
}

TEST_CASE("forward") {
    Rng rng(41);
    SUBCASE("zero weights give the bias") {
        ModelParams p = zero_params(6, 3, 2);
        for (int i = 0; i < 6; ++i) p.bias(i) = i * 0.5 - 1;
        Matrix z = forward(p, random_contexts(rng, 4, 3, 6));
        for (Eigen::Index r = 0; r < z.rows(); ++r) CHECK(z.row(r) == p.bias.transpose());
    }
    SUBCASE("rows are independent") {
        ModelParams p = random_params(rng, 9, 2, 3);
        Contexts ctx = random_contexts(rng, 7, 2, 9);
        Matrix all = forward(p, ctx);
        for (Eigen::Index r = 0; r < ctx.rows(); ++r) {
            Contexts one = ctx.row(r);
            CHECK(forward(p, one).isApprox(all.row(r), 1e-15));
        }
        CHECK(forward(p, ctx) == all);
    }
    SUBCASE("bad inputs") {
        ModelParams p = zero_params(5, 2, 2);
        Contexts wide(1, 3);
        wide << 1, 1, 1;
        CHECK(thrown_kind([&] { forward(p, wide); }) == ErrorKind::Data);
        Contexts oob(1, 2);
        oob << 1, 5;
        CHECK(thrown_kind([&] { forward(p, oob); }) == ErrorKind::Data);
    }
}

TEST_CASE("backward") {
    Rng rng(42);
    ModelParams p = random_params(rng, 12, 2, 4);
    Contexts ctx = random_contexts(rng, 3, 2, 12);
    SUBCASE("zero upstream") {
        ModelGrads g = backward(p, ctx, Matrix::Zero(3, 12));
        CHECK(g.embedding.isZero(0.0));
        CHECK(g.projection.isZero(0.0));
        CHECK(g.bias.isZero(0.0));
    }
    SUBCASE("bias gradient is the column sum") {
        Matrix up = Matrix::Random(3, 12);
        ModelGrads g = backward(p, ctx, up);
        CHECK(g.bias.isApprox(up.colwise().sum().transpose(), 1e-15));
    }
}

TEST_CASE("full-parameter gradient matches naive central differences") {
    Rng rng(43);
    const double h = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        ModelParams p = random_params(rng, 12, 2, 4);
        Contexts ctx = random_contexts(rng, 3, 2, 12);
        std::vector<TokenId> y{static_cast<TokenId>(1 + rng.below(11)), static_cast<TokenId>(1 + rng.below(11)),
                               static_cast<TokenId>(1 + rng.below(11))};
        WeightTable w = random_weight_table(rng, 12);
        const Reduction red = trial % 2 ? Reduction::Sum : Reduction::TokenMean;

        LossResult loss = pdl_loss(forward(p, ctx), y, w, red);
        ModelGrads g = backward(p, ctx, loss.grad);

        double worst = 0;
        auto probe = [&](Matrix& m, const Matrix& gm) {
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                const double keep = m.data()[i];
                m.data()[i] = keep + h;
                const double up = naive_objective(p, ctx, y, w.weights, red);
                m.data()[i] = keep - h;
                const double down = naive_objective(p, ctx, y, w.weights, red);
                m.data()[i] = keep;
                worst = std::max(worst, max_rel(gm.data()[i], (up - down) / (2 * h)));
            }
        };
        probe(p.embedding, g.embedding);
        probe(p.projection, g.projection);
        for (Eigen::Index i = 0; i < p.bias.size(); ++i) {
            const double keep = p.bias(i);
            p.bias(i) = keep + h;
            const double up = naive_objective(p, ctx, y, w.weights, red);
            p.bias(i) = keep - h;
            const double down = naive_objective(p, ctx, y, w.weights, red);
            p.bias(i) = keep;
            worst = std::max(worst, max_rel(g.bias(i), (up - down) / (2 * h)));
        }
        CHECK(worst < 1e-5);
        CHECK(model_grad_check(p, ctx, y, w, red, h) < 1e-5);
    }
}

TEST_CASE("sgd_step") {
    Rng rng(44);
    ModelParams p = random_params(rng, 8, 2, 3);
    ModelGrads g = random_params(rng, 8, 2, 3);
    SUBCASE("zero learning rate") {
        ModelParams q = p;
        sgd_step(q, g, 0.0);
        CHECK(q == p);
    }
    SUBCASE("plain update") {
        ModelParams q = p;
        sgd_step(q, g, 0.25);
        CHECK(q.embedding == p.embedding - 0.25 * g.embedding);
        CHECK(q.bias == p.bias - 0.25 * g.bias);
    }
    SUBCASE("rejects bad inputs without touching params") {
        ModelParams q = p;
        CHECK(thrown_kind([&] { sgd_step(q, g, -0.1); }) == ErrorKind::Config);
        ModelGrads bad = g;
        bad.projection(0, 0) = NAN;
        CHECK(thrown_kind([&] { sgd_step(q, bad, 0.1); }) == ErrorKind::Numeric);
        CHECK(q == p);
    }
}

TEST_CASE("single-example descent") {
    Rng rng(45);
    int decreased = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ModelParams p = random_params(rng, 12, 2, 4);
        Contexts ctx = random_contexts(rng, 1, 2, 12);
        std::vector<TokenId> y{static_cast<TokenId>(1 + rng.below(11))};
        WeightTable w = random_weight_table(rng, 12);
        LossResult before = pdl_loss(forward(p, ctx), y, w, Reduction::TokenMean);
        sgd_step(p, backward(p, ctx, before.grad), 1e-3);
        decreased += pdl_loss(forward(p, ctx), y, w, Reduction::TokenMean).value < before.value;
    }
    CHECK(decreased == 20);
}

TEST_CASE("repeated steps are bit-identical") {
    auto run = [] {
        Rng rng(46);
        ModelParams p = init_params(10, 2, 3, 4);
        for (int k = 0; k < 25; ++k) {
            Contexts ctx = random_contexts(rng, 5, 2, 10);
            std::vector<TokenId> y(5);
            for (auto& t : y) t = static_cast<TokenId>(1 + rng.below(9));
            sgd_step(p, backward(p, ctx, ce_loss(forward(p, ctx), y, Reduction::TokenMean).grad), 0.3);
        }
        return p;
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint round trip is exact") {
    TempDir dir("model");
    Rng rng(47);
    ModelParams p = random_params(rng, 11, 3, 2);
    p.bias(3) = 1e-300;
    p.embedding(0, 0) = -0.1;
    save_checkpoint(p, dir / "m.ckpt", {{"tool", "x"}});
    CHECK(load_checkpoint(dir / "m.ckpt") == p);

    std::string text = testing::read_text(dir / "m.ckpt");
    testing::write_text(dir / "cut.ckpt", text.substr(0, text.size() / 2));
    CHECK(thrown_kind([&] { load_checkpoint(dir / "cut.ckpt"); }) == ErrorKind::Parse);
}
