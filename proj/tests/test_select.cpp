#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "s5/model.hpp"

using namespace s5;

namespace {

Tensor random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0) {
    std::vector<double> v(static_cast<size_t>(checked_size(dims)));
    for (double& x : v) {
        x = rng.normal() * scale;
    }
    return Tensor::from_data(std::move(dims), std::move(v));
}

} // namespace

TEST_CASE("momentum_update: m=1 freezes, m=0 copies, m=0.99 blends") {
    Rng rng(1, 1);
    DecoderBlockParams main_block = init_decoder_block(4, 4, 2, 0.2, rng);

    MomentumS4 shadow = make_shadow(main_block, 1.0);
    Tensor before = shadow.s4.b_in.detached();
    main_block.s4.b_in = random_tensor({4, 4}, rng);
    momentum_update(shadow, main_block);
    for (int64_t i = 0; i < before.size(); ++i) {
        CHECK(shadow.s4.b_in[i] == before[i]);
    }

    shadow.momentum = 0.0;
    momentum_update(shadow, main_block);
    for (int64_t i = 0; i < before.size(); ++i) {
        CHECK(shadow.s4.b_in[i] == main_block.s4.b_in[i]);
    }

    MomentumS4 blend = make_shadow(main_block, 0.99);
    blend.s4.b_in = Tensor::zeros({4, 4});
    DecoderBlockParams ones = main_block;
    ones.s4.b_in = Tensor::full({4, 4}, 1.0);
    momentum_update(blend, ones);
    for (int64_t i = 0; i < blend.s4.b_in.size(); ++i) {
        CHECK(blend.s4.b_in[i] == doctest::Approx(0.01).epsilon(1e-12));
    }

    DecoderBlockParams mismatched = init_decoder_block(6, 4, 2, 0.2, rng);
    CHECK_THROWS_AS(momentum_update(blend, mismatched), CheckpointError);
}

TEST_CASE("mask_probs: uniform at zero weights, hand softmax, sums to one") {
    Rng rng(2, 2);
    MaskGenerator mg;
    mg.score = init_linear(4, 1, rng);
    mg.score.w = Tensor::zeros({4, 1});
    mg.score.b = Tensor::zeros({1});
    Tensor x = random_tensor({6, 4}, rng);
    Tensor p = mask_probs(mg, x);
    for (int i = 0; i < 6; ++i) {
        CHECK(p[i] == doctest::Approx(1.0 / 6).epsilon(1e-12));
    }

    // Two tokens scoring {0, ln 3} -> probabilities {0.25, 0.75}.
    MaskGenerator unit;
    unit.score.w = Tensor::from_data({1, 1}, {1.0});
    unit.score.b = Tensor::zeros({1});
    Tensor scores = Tensor::from_data({2, 1}, {0.0, std::log(3.0)});
    Tensor p2 = mask_probs(unit, scores);
    CHECK(p2[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p2[1] == doctest::Approx(0.75).epsilon(1e-12));

    mg.score = init_linear(4, 1, rng);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor xr = random_tensor({9, 4}, rng, 3.0);
        Tensor pr = mask_probs(mg, xr);
        double total = 0.0;
        for (int i = 0; i < 9; ++i) total += pr[i];
        CHECK(std::fabs(total - 1.0) < 1e-12);
    }

    CHECK_THROWS_AS(mask_probs(mg, random_tensor({5, 3}, rng)), ShapeError);
}

TEST_CASE("gumbel_topk: exhaustive K, cardinality, sorted indices, range errors") {
    Rng rng(3, 3);
    Tensor p = softmax(random_tensor({10}, rng));
    SelectionResult all = gumbel_topk(p, 10, rng);
    CHECK(all.indices.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(all.indices[static_cast<size_t>(i)] == i);
    }

    for (int k = 1; k <= 10; ++k) {
        SelectionResult sel = gumbel_topk(p, k, rng);
        CHECK(static_cast<int>(sel.indices.size()) == k);
        for (size_t i = 1; i < sel.indices.size(); ++i) {
            CHECK(sel.indices[i] > sel.indices[i - 1]); // strictly increasing
        }
        for (int row = 0; row < k; ++row) {
            CHECK(sel.onehots.at2(row, sel.indices[static_cast<size_t>(row)]) == 1.0);
        }
    }

    CHECK_THROWS_AS(gumbel_topk(p, 0, rng), ArgError);
    CHECK_THROWS_AS(gumbel_topk(p, 11, rng), ArgError);
    CHECK_THROWS_AS(gumbel_topk(Tensor::from_data({2}, {0.9, 0.3}), 1, rng), ArgError);
}

TEST_CASE("gumbel_topk: uniform symmetry at K = ST/2") {
    const int st = 8, k = 4, draws = 100000;
    Tensor p = Tensor::full({st}, 1.0 / st);
    Rng rng(12345, 0);
    std::vector<int> counts(st, 0);
    for (int d = 0; d < draws; ++d) {
        SelectionResult sel = gumbel_topk(p, k, rng);
        for (int idx : sel.indices) {
            counts[static_cast<size_t>(idx)]++;
        }
    }
    for (int i = 0; i < st; ++i) {
        const double freq = static_cast<double>(counts[static_cast<size_t>(i)]) / draws;
        CHECK(std::fabs(freq - 0.5) < 0.01);
    }
}

TEST_CASE("gumbel_topk: K=1 selection frequencies equal p (Gumbel-max)") {
    Tensor p = Tensor::from_data({4}, {0.1, 0.2, 0.3, 0.4});
    const int draws = 200000;
    Rng rng(987654321, 7);
    std::vector<int> counts(4, 0);
    for (int d = 0; d < draws; ++d) {
        SelectionResult sel = gumbel_topk(p, 1, rng);
        counts[static_cast<size_t>(sel.indices[0])]++;
    }
    for (int i = 0; i < 4; ++i) {
        const double freq = static_cast<double>(counts[static_cast<size_t>(i)]) / draws;
        CHECK(std::fabs(freq - p[i]) < 0.005);
    }
}

TEST_CASE("st_gradient: matches finite differences of the relaxed softmax") {
    Rng rng(5, 5);
    const int st = 6;
    const double rho = 0.7;
    std::vector<double> perturbed(st);
    for (double& v : perturbed) {
        v = rng.normal();
    }
    std::vector<double> upstream(st);
    for (double& v : upstream) {
        v = rng.normal();
    }
    // Analytic VJP onto the perturbation (g held fixed).
    std::vector<double> analytic = st_gradient(perturbed, rho, upstream);
    const double h = 1e-6;
    for (int i = 0; i < st; ++i) {
        std::vector<double> hi = perturbed, lo = perturbed;
        hi[static_cast<size_t>(i)] += h;
        lo[static_cast<size_t>(i)] -= h;
        std::vector<double> rp = st_relaxed(hi, rho);
        std::vector<double> rm = st_relaxed(lo, rho);
        double numeric = 0.0;
        for (int j = 0; j < st; ++j) {
            numeric += upstream[static_cast<size_t>(j)] *
                       (rp[static_cast<size_t>(j)] - rm[static_cast<size_t>(j)]) / (2 * h);
        }
        const double err = std::fabs(analytic[static_cast<size_t>(i)] - numeric) /
                           std::max(1.0, std::fabs(analytic[static_cast<size_t>(i)]));
        CHECK(err < 1e-5);
    }
}

TEST_CASE("st_relaxed: temperature limit approaches the hard one-hot") {
    std::vector<double> perturbed = {0.3, 1.7, -0.4, 0.9};
    std::vector<double> r = st_relaxed(perturbed, 1e-3);
    CHECK(r[1] > 1.0 - 1e-9);
}

TEST_CASE("select_tokens: ordered gather, identity, bit-identical forward") {
    Rng rng(6, 6);
    Tensor x = random_tensor({4, 3}, rng);
    SelectionResult sel;
    sel.indices = {1, 3};
    std::vector<double> onehots(2 * 4, 0.0);
    onehots[0 * 4 + 1] = 1.0;
    onehots[1 * 4 + 3] = 1.0;
    sel.onehots = Tensor::from_data({2, 4}, std::move(onehots));
    sel.probs = Tensor::full({4}, 0.25);
    sel.perturbed = Tensor::zeros({4});

    Tensor rows = select_tokens(x, sel);
    CHECK(rows.dim(0) == 2);
    for (int j = 0; j < 3; ++j) {
        CHECK(rows.at2(0, j) == x.at2(1, j)); // exact bit equality
        CHECK(rows.at2(1, j) == x.at2(3, j));
    }

    SelectionResult all;
    all.indices = {0, 1, 2, 3};
    all.onehots = Tensor::eye(4);
    all.probs = Tensor::full({4}, 0.25);
    all.perturbed = Tensor::zeros({4});
    Tensor same = select_tokens(x, all);
    CHECK(same.values() == x.values());

    SelectionResult bad = sel;
    bad.indices = {1, 9};
    CHECK_THROWS_AS(select_tokens(x, bad), UsageError);
}

TEST_CASE("select_tokens_st: straight-through keeps hard values, grads flow to MG") {
    Rng rng(7, 7);
    const int st = 8, d = 4;
    MaskGenerator mg;
    mg.score = init_linear(d, 1, rng);
    mg.gumbel_temp = 1.0;
    Tensor features = random_tensor({st, d}, rng);
    Tensor tokens = random_tensor({st, d}, rng);
    Tensor target = random_tensor({4, d}, rng);

    Tape tape;
    TapeScope scope(tape);
    mg.score.w = tape.watch(mg.score.w);
    mg.score.b = tape.watch(mg.score.b);
    Tensor tokens_w = tape.watch(tokens);

    Tensor probs = mask_probs(mg, features);
    Rng grng(8, 8);
    SelectionResult sel = gumbel_topk(probs.detached(), 4, grng);
    Tensor logp = log(probs);
    Tensor kept = select_tokens_st(tokens_w, logp, sel, mg.gumbel_temp);

    // Forward values equal the hard gather exactly.
    for (int row = 0; row < 4; ++row) {
        for (int j = 0; j < d; ++j) {
            CHECK(kept.at2(row, j) == tokens.at2(sel.indices[static_cast<size_t>(row)], j));
        }
    }

    Tensor loss = sum(mul(sub(kept, target), sub(kept, target)));
    tape.backward(loss);
    CHECK(tape.has_nonzero_grad(mg.score.w)); // Eq.-7 path is alive
    Tensor tok_grad = tape.grad(tokens_w);
    for (int row = 0; row < st; ++row) {
        const bool selected =
            std::find(sel.indices.begin(), sel.indices.end(), row) != sel.indices.end();
        double norm = 0.0;
        for (int j = 0; j < d; ++j) {
            norm += std::fabs(tok_grad.at2(row, j));
        }
        if (selected) {
            CHECK(norm > 0.0);
        } else {
            CHECK(norm == 0.0); // hard path: unselected rows get nothing
        }
    }
}

TEST_CASE("s5_block_forward: eta=0 equals the plain decoder block on all tokens") {
    Rng rng(9, 9);
    DecoderBlockParams block = init_decoder_block(6, 4, 2, 0.0, rng);
    MomentumS4 shadow = make_shadow(block, 0.01);
    MaskGenerator mg;
    mg.score = init_linear(6, 1, rng);

    TokenGrid grid;
    grid.s = 4;
    grid.t = 3;
    grid.tokens = random_tensor({12, 6}, rng);

    S5BlockOptions opts;
    opts.eta = 0.0;
    opts.selector = SelectorKind::linear_s4;
    Rng g1(1, 1), d1(2, 2);
    S5BlockStats stats;
    Tensor out = s5_block_forward(block, shadow, mg, grid, opts, g1, d1, &stats);
    CHECK(stats.kept_tokens == 12);

    Rng d2(2, 2);
    Tensor plain = decoder_block(block, grid.tokens, false, d2);
    CHECK(out.dims() == plain.dims());
    for (int64_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] == plain[i]); // identical selection -> identical values
    }

    S5BlockOptions bad = opts;
    bad.eta = 1.0;
    Rng g3(3, 3), d3(3, 3);
    CHECK_THROWS_AS(s5_block_forward(block, shadow, mg, grid, bad, g3, d3, nullptr),
                    ArgError);
}

TEST_CASE("s5_block_forward: eta=0.5 consumes exactly ST/2 tokens") {
    Rng rng(10, 10);
    DecoderBlockParams block = init_decoder_block(4, 4, 2, 0.0, rng);
    MomentumS4 shadow = make_shadow(block, 0.01);
    MaskGenerator mg;
    mg.score = init_linear(4, 1, rng);

    TokenGrid grid;
    grid.s = 16;
    grid.t = 16; // ST = 256
    grid.tokens = random_tensor({256, 4}, rng);

    S5BlockOptions opts;
    opts.eta = 0.5;
    Rng g(4, 4), d(5, 5);
    S5BlockStats stats;
    s5_block_forward(block, shadow, mg, grid, opts, g, d, &stats);
    CHECK(stats.kept_tokens == 128);
    CHECK(kept_token_count(256, 0.5) == 128);
    CHECK(kept_token_count(10, 0.99) == 1); // never drops below one token
}

TEST_CASE("shadow model never reaches the gradient buffers") {
    Rng rng(11, 11);
    DecoderBlockParams block = init_decoder_block(4, 4, 2, 0.0, rng);
    MomentumS4 shadow = make_shadow(block, 0.01);
    MaskGenerator mg;
    mg.score = init_linear(4, 1, rng);
    TokenGrid grid;
    grid.s = 4;
    grid.t = 4;
    grid.tokens = random_tensor({16, 4}, rng);

    Tape tape;
    TapeScope scope(tape);
    block.visit("block.", [&tape](const std::string&, Tensor& t, bool) { t = tape.watch(t); });
    mg.visit("mg.", [&tape](const std::string&, Tensor& t, bool) { t = tape.watch(t); });
    const size_t nodes_before_shadow = tape.node_count();
    Tensor feats = shadow_features(shadow, grid.tokens);
    CHECK(tape.node_count() == nodes_before_shadow); // shadow never records

    S5BlockOptions opts;
    opts.eta = 0.5;
    opts.train = false;
    Rng g(6, 6), d(7, 7);
    Tensor out = s5_block_forward(block, shadow, mg, grid, opts, g, d, nullptr);
    tape.backward(sum(out));

    shadow.visit("shadow.", [&tape](const std::string&, Tensor& t, bool) {
        CHECK_FALSE(t.on_tape());
        CHECK_FALSE(tape.has_nonzero_grad(t));
    });
    CHECK(tape.has_nonzero_grad(mg.score.w));
    (void)feats;
}

TEST_CASE("deterministic top-K is invariant to positive logit scaling") {
    Rng rng(12, 12);
    Tensor scores = random_tensor({16}, rng);
    Tensor p1 = softmax(scores);
    Tensor p2 = softmax(scale(scores, 3.5));
    Rng g1(1, 1), g2(1, 1);
    SelectionResult a = gumbel_topk(p1, 5, g1, 1e-10, true);
    SelectionResult b = gumbel_topk(p2, 5, g2, 1e-10, true);
    CHECK(a.indices == b.indices);
}
