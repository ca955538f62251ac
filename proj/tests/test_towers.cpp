#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "srfm/grad_check.hpp"
#include "srfm/model.hpp"
#include "srfm/text_encoder.hpp"

using namespace srfm;

static ModelConfig tiny_cfg() {
    ModelConfig c;
    c.D = 4;
    c.H = 6;
    c.K = 2;
    c.vocab_size = 32;
    c.user_vocab = 16;
    c.query_vocab = 16;
    c.item_vocab = 16;
    c.sparse_vocab = 16;
    c.expert_count = 2;
    c.trunk_width = 8;
    c.head_hidden1 = 8;
    c.head_hidden2 = 4;
    c.L_q_max = 4;
    c.L_i_max = 5;
    return c;
}

static InteractionRecord search_record() {
    InteractionRecord r;
    r.domain_id = 1;
    r.domain_kind = DomainKind::kSearch;
    r.user_id = 3;
    r.query_text = "rent bike";
    r.item_id = 7;
    r.item_title = "city bike rental station";
    BehaviorEvent e;
    e.item_id = 2;
    e.behavior_type = DomainKind::kSearch;
    e.attr_ids = {1, 4};
    r.history = {e};
    r.query_sparse_ids = {2};
    r.item_sparse_ids = {5, 9};
    r.y_ctr = 1;
    r.y_sim = 1;
    return r;
}

static void zero_all(ParameterStore& s) {
    for (auto& [name, p] : s)
        for (double& v : p.value.data) v = 0.0;
}

TEST_CASE("zero parameters give zero behavior, user and tower encodings") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 1);
    zero_all(store);
    Graph g;
    ModelGraph m(g, store, cfg);
    InteractionRecord r = search_record();

    NodeId b = m.encode_behavior(r.history[0]);
    for (double v : g.value(b).data) CHECK(v == 0.0);

    InteractionRecord empty_hist = r;
    empty_hist.history.clear();
    NodeId u = m.encode_user(empty_hist);
    for (double v : g.value(u).data) CHECK(v == 0.0);

    TowerAspectNodes q = m.encode_query(r);
    for (NodeId a : {q.e_id, q.e_lm, q.e_s})
        for (double v : g.value(a).data) CHECK(v == 0.0);
    TowerAspectNodes i = m.encode_item(r);
    for (NodeId a : {i.e_id, i.e_lm, i.e_s})
        for (double v : g.value(a).data) CHECK(v == 0.0);
}

TEST_CASE("identical inputs encode identically; behavior type changes the output") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    Graph g;
    ModelGraph m(g, store, cfg);
    BehaviorEvent e;
    e.item_id = 2;
    e.behavior_type = DomainKind::kSearch;
    e.attr_ids = {1};
    std::vector<double> first = g.value(m.encode_behavior(e)).data;
    std::vector<double> second = g.value(m.encode_behavior(e)).data;
    CHECK(first == second);

    BehaviorEvent e2 = e;
    e2.behavior_type = DomainKind::kRec;
    std::vector<double> other_type = g.value(m.encode_behavior(e2)).data;
    CHECK(first != other_type);
}

TEST_CASE("user encoding is invariant to history order") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r = search_record();
    for (long long id : {4, 9, 11}) {
        BehaviorEvent e;
        e.item_id = id;
        e.behavior_type = id % 2 ? DomainKind::kSearch : DomainKind::kRec;
        e.attr_ids = {id % 5};
        r.history.push_back(e);
    }
    Graph g;
    ModelGraph m(g, store, cfg);
    auto base = g.value(m.encode_user(r)).data;
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(r.history.begin(), r.history.end(), rng);
        auto v = g.value(m.encode_user(r)).data;
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(v[i] == doctest::Approx(base[i]).epsilon(1e-12));
    }
}

TEST_CASE("single-event history equals the event's own encoding through the user FC") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r = search_record();  // one history event
    Graph g;
    ModelGraph m(g, store, cfg);
    // mean of one element: doubling the event must not change anything
    InteractionRecord doubled = r;
    doubled.history.push_back(r.history[0]);
    auto a = g.value(m.encode_user(r)).data;
    auto b = g.value(m.encode_user(doubled)).data;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("tokenization is shared between query and item paths") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    Graph g;
    ModelGraph m(g, store, cfg);
    CHECK(m.tokenize_and_truncate("rent bike", cfg.L_q_max) ==
          m.tokenize_and_truncate("rent bike", cfg.L_i_max));
    CHECK(m.tokenize_and_truncate("", cfg.L_q_max) == std::vector<int>{kEmptyRow});
    auto capped = m.tokenize_and_truncate("a b c d e f g h i", cfg.L_q_max);
    CHECK(static_cast<int>(capped.size()) == cfg.L_q_max);
}

TEST_CASE("shared text path gives identical E_lm for identical text") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r = search_record();
    r.query_text = "a b";
    r.item_title = "a b";
    Graph g;
    ModelGraph m(g, store, cfg);
    TowerAspectNodes q = m.encode_query(r);
    TowerAspectNodes i = m.encode_item(r);
    CHECK(g.value(q.e_lm).data == g.value(i.e_lm).data);
}

TEST_CASE("W_lm mutation moves both towers' text aspects") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r = search_record();
    auto run = [&] {
        Graph g;
        ModelGraph m(g, store, cfg);
        std::vector<double> q = g.value(m.encode_query(r).e_lm).data;
        std::vector<double> i = g.value(m.encode_item(r).e_lm).data;
        return std::pair{q, i};
    };
    auto [q0, i0] = run();
    store.value("enc.Wlm").at(0) += 0.5;
    auto [q1, i1] = run();
    CHECK(q0 != q1);
    CHECK(i0 != i1);
}

TEST_CASE("duplicate sparse id equals single listing") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    Graph g;
    ModelGraph m(g, store, cfg);
    auto once = g.value(m.encode_sparse({3}, true)).data;
    auto twice = g.value(m.encode_sparse({3, 3}, true)).data;
    CHECK(once == twice);
}

TEST_CASE("recommendation records ignore residual query fields entirely") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r1 = search_record();
    r1.domain_kind = DomainKind::kRec;
    r1.query_text.reset();
    r1.y_sim.reset();
    InteractionRecord r2 = r1;
    r2.query_sparse_ids = {1, 2, 3};  // residual junk the model must ignore

    Graph g;
    ModelGraph m(g, store, cfg);
    TowerAspectNodes a1 = m.encode_query(r1);
    TowerAspectNodes a2 = m.encode_query(r2);
    CHECK(g.value(a1.e_id).data == g.value(a2.e_id).data);
    CHECK(g.value(a1.e_lm).data == g.value(a2.e_lm).data);
    CHECK(g.value(a1.e_s).data == g.value(a2.e_s).data);
}

TEST_CASE("cold item keeps a live text aspect while the ID aspect is the OOV projection") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord cold = search_record();
    cold.item_id = 999999;  // far outside item_vocab
    Graph g;
    ModelGraph m(g, store, cfg);
    TowerAspectNodes a = m.encode_item(cold);
    // OOV projection: W_id_i applied to the reserved OOV row
    NodeId expect = g.matmul(g.param("enc.Wid_i", store.value("enc.Wid_i")),
                             g.mean_rows(g.lookup(g.param("emb.item_id", store.value("emb.item_id")),
                                                  {kOovRow})));
    CHECK(g.value(a.e_id).data == g.value(expect).data);
    bool text_nonzero = false;
    for (double v : g.value(a.e_lm).data) text_nonzero |= v != 0.0;
    CHECK(text_nonzero);
}

TEST_CASE("frozen table plugin trains W_lm but never its own table") {
    ModelConfig cfg = tiny_cfg();
    Tensor table = Tensor::zeros({cfg.vocab_size, cfg.D});
    std::mt19937_64 rng(9);
    table.fill_gaussian(rng, 0.5);
    save_frozen_table("/tmp/srfm_frozen.emb", table);
    cfg.text_encoder = PluginKind::kFrozenTable;
    cfg.plugin_table_path = "/tmp/srfm_frozen.emb";
    ParameterStore store = init_params(cfg, 5);
    CHECK(store.at("plugin.table").frozen);

    InteractionRecord r = search_record();
    Graph g;
    ModelGraph m(g, store, cfg);
    NodeId loss = g.sum(g.mul(m.encode_query(r).e_lm, m.encode_query(r).e_lm));
    g.backward(loss);
    auto grads = g.param_grads();
    CHECK(grads.count("plugin.table") == 0);  // frozen: exactly zero gradient
    bool wlm_nonzero = false;
    for (double v : grads.at("enc.Wlm").data) wlm_nonzero |= v != 0.0;
    CHECK(wlm_nonzero);
}

TEST_CASE("frozen table roundtrips through its file format") {
    Tensor table = Tensor::zeros({8, 3});
    std::mt19937_64 rng(2);
    table.fill_gaussian(rng, 1.0);
    save_frozen_table("/tmp/srfm_rt.emb", table);
    Tensor back = load_frozen_table("/tmp/srfm_rt.emb", 8, 3);
    CHECK(back.data == table.data);
    CHECK_THROWS(load_frozen_table("/tmp/srfm_rt.emb", 9, 3));
}

TEST_CASE("tower encoders pass grad_check") {
    ModelConfig cfg = tiny_cfg();
    ParameterStore store = init_params(cfg, 5);
    InteractionRecord r = search_record();
    auto build = [&](Graph& g, const ParameterStore& s) {
        ModelGraph m(g, s, cfg);
        NodeId u = m.encode_user(r);
        TowerAspectNodes q = m.encode_query(r);
        TowerAspectNodes i = m.encode_item(r);
        NodeId all = g.concat({u, q.e_id, q.e_lm, q.e_s, i.e_id, i.e_lm, i.e_s});
        return g.sum(g.mul(all, all));
    };
    CHECK(grad_check(build, store, 1e-5) < 1e-4);
}
