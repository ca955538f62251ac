#include <doctest.h>

#include <cmath>
#include <random>

#include "srfm/grad_check.hpp"
#include "srfm/model.hpp"

using namespace srfm;

namespace {

ModelConfig fusion_cfg(GatingStrategy strategy) {
    ModelConfig c;
    c.D = 4;
    c.H = 3;
    c.K = 2;
    c.vocab_size = 16;
    c.user_vocab = 8;
    c.query_vocab = 8;
    c.item_vocab = 8;
    c.sparse_vocab = 8;
    c.gating_strategy = strategy;
    return c;
}

// aspects fed in as raw parameter vectors, bypassing the towers
TowerAspectNodes aspect_nodes(Graph& g, const Tensor& id, const Tensor& lm, const Tensor& sp) {
    return {g.param("a.id", id), g.param("a.lm", lm), g.param("a.sp", sp)};
}

void set_domain_row(ParameterStore& s, int k, const std::vector<double>& row) {
    Tensor& ed = s.value("emb.domain");
    for (int j = 0; j < ed.shape[1]; ++j) ed.at(k - 1, j) = row[j];
}

}  // namespace

TEST_CASE("mean strategy returns exactly one third each") {
    ModelConfig cfg = fusion_cfg(GatingStrategy::kMean);
    ParameterStore store = init_params(cfg, 1);
    Graph g;
    ModelGraph m(g, store, cfg);
    TowerAspectNodes a = aspect_nodes(g, Tensor::vec({1, 0, 0}), Tensor::vec({0, 1, 0}),
                                      Tensor::vec({0, 0, 1}));
    NodeId w = m.gating_weights(a, true, 1);
    for (int i = 0; i < 3; ++i) CHECK(g.value(w).at(i) == 1.0 / 3);
}

TEST_CASE("cls gating with orthogonal aspects is uniform") {
    ModelConfig cfg = fusion_cfg(GatingStrategy::kCls);
    ParameterStore store = init_params(cfg, 1);
    store.value("emb.cls_q") = Tensor::vec({1, 0, 0});
    Graph g;
    ModelGraph m(g, store, cfg);
    // all aspects orthogonal to E_CLS -> equal logits -> uniform weights
    TowerAspectNodes a = aspect_nodes(g, Tensor::vec({0, 1, 0}), Tensor::vec({0, 0, 1}),
                                      Tensor::vec({0, 2, 2}));
    NodeId w = m.gating_weights(a, true, 1);
    for (int i = 0; i < 3; ++i) CHECK(g.value(w).at(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("domain gating matches analytic softmax of the logits") {
    ModelConfig cfg = fusion_cfg(GatingStrategy::kDomain);
    ParameterStore store = init_params(cfg, 1);
    set_domain_row(store, 1, {1, 0, 0});
    Graph g;
    ModelGraph m(g, store, cfg);
    // logits <E_D1, e_a> = [0, 0, ln 3]
    TowerAspectNodes a = aspect_nodes(g, Tensor::vec({0, 5, 0}), Tensor::vec({0, 0, 7}),
                                      Tensor::vec({std::log(3.0), 0, 0}));
    NodeId w = m.gating_weights(a, true, 1);
    CHECK(g.value(w).at(0) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(g.value(w).at(1) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(g.value(w).at(2) == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("out-of-range domain id is rejected") {
    ModelConfig cfg = fusion_cfg(GatingStrategy::kDomain);
    ParameterStore store = init_params(cfg, 1);
    Graph g;
    ModelGraph m(g, store, cfg);
    TowerAspectNodes a = aspect_nodes(g, Tensor::vec({1, 0, 0}), Tensor::vec({0, 1, 0}),
                                      Tensor::vec({0, 0, 1}));
    CHECK_THROWS_AS(m.gating_weights(a, true, 0), std::invalid_argument);
    CHECK_THROWS_AS(m.gating_weights(a, true, cfg.K + 1), std::invalid_argument);
}

TEST_CASE("fuse is a convex combination") {
    ModelConfig cfg = fusion_cfg(GatingStrategy::kMean);
    ParameterStore store = init_params(cfg, 1);
    Graph g;
    ModelGraph m(g, store, cfg);

    SUBCASE("selector weight picks one aspect exactly") {
        TowerAspectNodes a = aspect_nodes(g, Tensor::vec({1.5, -2, 3}), Tensor::vec({9, 9, 9}),
                                          Tensor::vec({-1, -1, -1}));
        NodeId out = m.fuse(a, g.constant(Tensor::vec({1, 0, 0})));
        CHECK(g.value(out).data == std::vector<double>{1.5, -2, 3});
    }
    SUBCASE("identical aspects are a fixed point") {
        Tensor v = Tensor::vec({0.4, -0.2, 7});
        TowerAspectNodes a = aspect_nodes(g, v, v, v);
        NodeId out = m.fuse(a, g.constant(Tensor::vec({0.1, 0.55, 0.35})));
        for (int i = 0; i < 3; ++i)
            CHECK(g.value(out).at(i) == doctest::Approx(v.at(i)).epsilon(1e-14));
    }
    SUBCASE("weighted sum over unit axes reads off the weights") {
        TowerAspectNodes a = aspect_nodes(g, Tensor::vec({1, 0, 0}), Tensor::vec({0, 1, 0}),
                                          Tensor::vec({0, 0, 1}));
        NodeId out = m.fuse(a, g.constant(Tensor::vec({0.2, 0.3, 0.5})));
        CHECK(g.value(out).at(0) == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(g.value(out).at(1) == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(g.value(out).at(2) == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("weights are probability vectors for every strategy on random inputs") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (GatingStrategy strategy :
         {GatingStrategy::kMean, GatingStrategy::kCls, GatingStrategy::kDomain}) {
        ModelConfig cfg = fusion_cfg(strategy);
        ParameterStore store = init_params(cfg, 17);
        for (int trial = 0; trial < 50; ++trial) {
            Graph g;
            ModelGraph m(g, store, cfg);
            auto rv = [&] {
                Tensor t = Tensor::zeros({cfg.H});
                for (double& x : t.data) x = nd(rng);
                return t;
            };
            TowerAspectNodes a = aspect_nodes(g, rv(), rv(), rv());
            NodeId w = m.gating_weights(a, trial % 2 == 0, 1 + trial % cfg.K);
            double sum = 0.0;
            for (int i = 0; i < 3; ++i) {
                CHECK(g.value(w).at(i) >= 0.0);
                sum += g.value(w).at(i);
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("gating logits are shift invariant") {
    // adding a constant c to all three logits leaves softmax unchanged
    ModelConfig cfg = fusion_cfg(GatingStrategy::kDomain);
    ParameterStore store = init_params(cfg, 3);
    set_domain_row(store, 1, {1, 0, 0});
    Graph g;
    ModelGraph m(g, store, cfg);
    double c = 11.25;
    TowerAspectNodes a = aspect_nodes(g, Tensor::vec({0.3, 1, 2}), Tensor::vec({-0.6, 3, 4}),
                                      Tensor::vec({1.9, 5, 6}));
    Graph g2;
    ModelGraph m2(g2, store, cfg);
    TowerAspectNodes shifted = {g2.param("a.id", Tensor::vec({0.3 + c, 1, 2})),
                                g2.param("a.lm", Tensor::vec({-0.6 + c, 3, 4})),
                                g2.param("a.sp", Tensor::vec({1.9 + c, 5, 6}))};
    NodeId w = m.gating_weights(a, true, 1);
    NodeId w2 = m2.gating_weights(shifted, true, 1);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(g.value(w).at(i) - g2.value(w2).at(i)) < 1e-12);
}

TEST_CASE("fuse output stays in the coordinatewise convex hull") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd(0.0, 1.5);
    ModelConfig cfg = fusion_cfg(GatingStrategy::kCls);
    ParameterStore store = init_params(cfg, 29);
    for (int trial = 0; trial < 30; ++trial) {
        Graph g;
        ModelGraph m(g, store, cfg);
        Tensor id = Tensor::zeros({cfg.H}), lm = Tensor::zeros({cfg.H}), sp = Tensor::zeros({cfg.H});
        for (Tensor* t : {&id, &lm, &sp})
            for (double& x : t->data) x = nd(rng);
        TowerAspectNodes a = aspect_nodes(g, id, lm, sp);
        NodeId out = m.fuse(a, m.gating_weights(a, true, 1));
        for (int i = 0; i < cfg.H; ++i) {
            double lo = std::min({id.at(i), lm.at(i), sp.at(i)});
            double hi = std::max({id.at(i), lm.at(i), sp.at(i)});
            CHECK(g.value(out).at(i) >= lo - 1e-12);
            CHECK(g.value(out).at(i) <= hi + 1e-12);
        }
    }
}

TEST_CASE("gating and fuse pass grad_check including E_CLS and E_D") {
    for (GatingStrategy strategy : {GatingStrategy::kCls, GatingStrategy::kDomain}) {
        ModelConfig cfg = fusion_cfg(strategy);
        ParameterStore store = init_params(cfg, 31);
        // aspects as trainable inputs too
        std::mt19937_64 rng(37);
        for (const char* n : {"a.id", "a.lm", "a.sp"}) {
            Tensor t = Tensor::zeros({cfg.H});
            t.fill_gaussian(rng, 1.0);
            store.add(n, t, Level::L2plus);
        }
        auto build = [&cfg](Graph& g, const ParameterStore& s) {
            ModelGraph m(g, s, cfg);
            TowerAspectNodes a = {g.param("a.id", s.value("a.id")),
                                  g.param("a.lm", s.value("a.lm")),
                                  g.param("a.sp", s.value("a.sp"))};
            NodeId fused = m.fuse(a, m.gating_weights(a, true, 1));
            return g.sum(g.mul(fused, fused));
        };
        CAPTURE(to_string(strategy));
        CHECK(grad_check(build, store, 1e-5) < 1e-4);
    }
}
