#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srfm/batch.hpp"
#include "srfm/config.hpp"
#include "srfm/divergence.hpp"
#include "srfm/graph.hpp"
#include "srfm/model_params.hpp"
#include "srfm/record.hpp"
#include "srfm/tokenizer.hpp"

namespace srfm {

struct TowerAspectNodes {
    NodeId e_id;  // projected ID representation
    NodeId e_lm;  // text representation via the plugin
    NodeId e_s;   // sparse-feature representation
};

struct RecordNodes {
    NodeId ctr_logit;
    NodeId sim_logit;  // -1 for records without a query path
    NodeId x_hat;
    NodeId e_query;
    NodeId e_item;
};

struct LossBreakdown {
    NodeId total = -1;
    double l_ctr = 0.0;
    double l_sim = 0.0;
    double l_reg = 0.0;
    int ctr_count = 0;
    int sim_count = 0;
};

// Builds the S&R foundation model's computation graph for one batch. All
// methods are pure given the parameter snapshot; one instance per Graph.
class ModelGraph {
public:
    ModelGraph(Graph& g, const ParameterStore& store, const ModelConfig& cfg)
        : g_(g), store_(store), cfg_(cfg) {}

    // ---- towers -----------------------------------------------------------

    // x_s = FC(e_ID ⊕ e_type ⊕ e_attr), attr embeddings mean-pooled first.
    NodeId encode_behavior(const BehaviorEvent& e) {
        NodeId e_id = row_vec("emb.item_id", id_to_row(e.item_id, cfg_.item_vocab));
        NodeId e_type = row_vec("emb.behavior_type",
                                e.behavior_type == DomainKind::kSearch ? 0 : 1);
        NodeId e_attr = pooled_rows("emb.attr", rows_for(e.attr_ids, cfg_.sparse_vocab));
        return linear("enc.behavior", g_.concat({e_id, e_type, e_attr}));
    }

    // E(U) = FC(project(e_u_ID) ⊕ mean of behavior encodings); order-invariant
    // in the history because of the mean.
    NodeId encode_user(const InteractionRecord& rec) {
        NodeId id_part = g_.matmul(p("enc.user_id_proj"),
                                   row_vec("emb.user_id", id_to_row(rec.user_id, cfg_.user_vocab)));
        NodeId hist;
        if (rec.history.empty()) {
            hist = p("user.empty_history");
        } else {
            std::vector<BehaviorEvent> recent = rec.history;
            if (static_cast<int>(recent.size()) > cfg_.behavior_max)
                recent.erase(recent.begin(), recent.end() - cfg_.behavior_max);
            std::vector<NodeId> enc;
            for (const BehaviorEvent& e : recent) enc.push_back(encode_behavior(e));
            hist = g_.mean_of(enc);
        }
        return linear("enc.user", g_.concat({id_part, hist}));
    }

    // Shared token table; empty text collapses to the reserved EMPTY row.
    std::vector<int> tokenize_and_truncate(const std::string& text, int cap) const {
        std::vector<int> ids = tokenize(text, cfg_.vocab_size);
        if (static_cast<int>(ids.size()) > cap) ids.resize(cap);
        if (ids.empty()) ids.push_back(kEmptyRow);
        return ids;
    }

    // E_lm = W_lm · MEAN(plugin(e_token)); W_lm is shared between towers.
    NodeId encode_text(const std::vector<int>& token_ids) {
        NodeId phi;
        switch (cfg_.text_encoder) {
            case PluginKind::kMeanPool:
                phi = g_.lookup(p("emb.token"), token_ids);
                break;
            case PluginKind::kToyTransformer: {
                NodeId x = g_.lookup(p("emb.token"), token_ids);
                for (int l = 0; l < cfg_.plugin_layers; ++l) {
                    std::string pre = "enc.plugin.l" + std::to_string(l);
                    NodeId h = g_.matmul(g_.relu(g_.matmul(x, p(pre + ".W1"))), p(pre + ".W2"));
                    x = g_.add(x, h);
                }
                phi = x;
                break;
            }
            case PluginKind::kFrozenTable:
                phi = g_.lookup(p("plugin.table"), token_ids);
                break;
        }
        return g_.matmul(p("enc.Wlm"), g_.mean_rows(phi));
    }

    // Mean-pooled sparse embeddings through a two-layer MLP; empty id lists
    // fall back to the reserved row.
    NodeId encode_sparse(const std::vector<long long>& ids, bool query_side) {
        const char* table = query_side ? "emb.query_sparse" : "emb.item_sparse";
        const char* mlp = query_side ? "enc.sparse_q" : "enc.sparse_i";
        NodeId pooled = pooled_rows(table, rows_for(ids, cfg_.sparse_vocab));
        NodeId h = g_.relu(linear(std::string(mlp) + ".l1", pooled));
        return linear(std::string(mlp) + ".l2", h);
    }

    // Recommendation records use the learned ∅ defaults for all three query
    // aspects; any residual query fields are ignored.
    TowerAspectNodes encode_query(const InteractionRecord& rec) {
        TowerAspectNodes a;
        if (rec.domain_kind == DomainKind::kRec) {
            a.e_id = g_.matmul(p("enc.Wid_q"), row_vec("emb.query_id", kEmptyRow));
            a.e_lm = encode_text({kEmptyRow});
            a.e_s = encode_sparse({}, /*query_side=*/true);
            return a;
        }
        const std::string& q = rec.query_text.value();
        a.e_id = g_.matmul(p("enc.Wid_q"),
                           row_vec("emb.query_id", query_id_row(q, cfg_.query_vocab)));
        a.e_lm = encode_text(tokenize_and_truncate(q, cfg_.L_q_max));
        a.e_s = encode_sparse(rec.query_sparse_ids, /*query_side=*/true);
        return a;
    }

    TowerAspectNodes encode_item(const InteractionRecord& rec) {
        TowerAspectNodes a;
        a.e_id = g_.matmul(p("enc.Wid_i"),
                           row_vec("emb.item_id", id_to_row(rec.item_id, cfg_.item_vocab)));
        a.e_lm = encode_text(tokenize_and_truncate(rec.item_title, cfg_.L_i_max));
        a.e_s = encode_sparse(rec.item_sparse_ids, /*query_side=*/false);
        return a;
    }

    // ---- aspect gating fusion ---------------------------------------------

    // Probability 3-vector over {ID, TEXT, SPARSE}.
    NodeId gating_weights(const TowerAspectNodes& a, bool query_side, int domain_id) {
        switch (cfg_.gating_strategy) {
            case GatingStrategy::kMean:
                return g_.constant(Tensor::vec({1.0 / 3, 1.0 / 3, 1.0 / 3}));
            case GatingStrategy::kCls: {
                NodeId cls = p(query_side ? "emb.cls_q" : "emb.cls_i");
                return g_.softmax(
                    g_.concat({g_.dot(cls, a.e_id), g_.dot(cls, a.e_lm), g_.dot(cls, a.e_s)}));
            }
            case GatingStrategy::kDomain: {
                NodeId ed = domain_vec(domain_id);
                return g_.softmax(
                    g_.concat({g_.dot(ed, a.e_id), g_.dot(ed, a.e_lm), g_.dot(ed, a.e_s)}));
            }
        }
        throw std::logic_error("unreachable");
    }

    // E = w_ID·e_id + w_TEXT·e_lm + w_SPARSE·e_s
    NodeId fuse(const TowerAspectNodes& a, NodeId w) {
        NodeId out = g_.mul(component(w, 0), a.e_id);
        out = g_.add(out, g_.mul(component(w, 1), a.e_lm));
        return g_.add(out, g_.mul(component(w, 2), a.e_s));
    }

    NodeId fused_tower(const TowerAspectNodes& a, bool query_side, int domain_id) {
        return fuse(a, gating_weights(a, query_side, domain_id));
    }

    // ---- domain-adaptive multi-task ---------------------------------------

    // x̂ = W_k (x ⊕ E_{D_k}); only the k-th adapt parameters are touched.
    NodeId domain_adapt(NodeId x, int domain_id) {
        std::string wk = "adapt.W." + std::to_string(domain_id);
        if (!store_.has(wk))
            throw std::invalid_argument("no adapt matrix for domain " + std::to_string(domain_id));
        return g_.matmul(p(wk), g_.concat({x, domain_vec(domain_id)}));
    }

    struct TrunkNodes {
        NodeId ctr;
        NodeId sim;
    };

    TrunkNodes mtl_forward(NodeId x_hat) {
        TrunkNodes t;
        switch (cfg_.mtl_kind) {
            case MtlKind::kMlp:
                t.ctr = g_.relu(linear("trunk.ctr.l2", g_.relu(linear("trunk.ctr.l1", x_hat))));
                t.sim = g_.relu(linear("trunk.sim.l2", g_.relu(linear("trunk.sim.l1", x_hat))));
                break;
            case MtlKind::kSharedBottom: {
                NodeId sb =
                    g_.relu(linear("trunk.shared.l2", g_.relu(linear("trunk.shared.l1", x_hat))));
                t.ctr = g_.relu(linear("trunk.ctr", sb));
                t.sim = g_.relu(linear("trunk.sim", sb));
                break;
            }
            case MtlKind::kMmoe: {
                std::vector<NodeId> experts;
                for (int e = 0; e < cfg_.expert_count; ++e)
                    experts.push_back(g_.relu(linear("trunk.expert" + std::to_string(e), x_hat)));
                t.ctr = gate_mix("trunk.gate.ctr", x_hat, experts);
                t.sim = gate_mix("trunk.gate.sim", x_hat, experts);
                break;
            }
        }
        return t;
    }

    NodeId head(const std::string& prefix, NodeId in) {
        NodeId h = g_.relu(linear(prefix + ".l1", in));
        h = g_.relu(linear(prefix + ".l2", h));
        return linear(prefix + ".l3", h);
    }

    // Full per-record forward: towers, gating, adapt, trunk, heads.
    RecordNodes forward_record(const InteractionRecord& rec) {
        int k = rec.domain_id;
        if (k < 1 || k > domain_count(store_))
            throw std::invalid_argument("domain id " + std::to_string(k) + " out of range");
        RecordNodes out;
        NodeId eu = encode_user(rec);
        out.e_query = fused_tower(encode_query(rec), /*query_side=*/true, k);
        out.e_item = fused_tower(encode_item(rec), /*query_side=*/false, k);
        out.x_hat = domain_adapt(g_.concat({eu, out.e_query, out.e_item}), k);
        TrunkNodes trunk = mtl_forward(out.x_hat);
        out.ctr_logit = head("head.ctr", trunk.ctr);
        // relevance consumes query and item representations only
        out.sim_logit = head("head.sim", g_.concat({out.e_query, out.e_item}));
        return out;
    }

    double ctr_score(const InteractionRecord& rec) {
        return g_.value(g_.sigmoid(forward_record(rec).ctr_logit)).at(0);
    }

    // Sum over co-present unordered domain pairs of the chosen divergence.
    NodeId domain_reg(const std::map<int, std::vector<NodeId>>& adapted_by_domain) {
        if (cfg_.divergence == DivergenceKind::kNone || adapted_by_domain.size() < 2)
            return g_.constant(Tensor::scalar(0.0));
        std::vector<int> domains;
        for (const auto& [k, v] : adapted_by_domain)
            if (!v.empty()) domains.push_back(k);
        NodeId acc = g_.constant(Tensor::scalar(0.0));
        for (std::size_t i = 0; i < domains.size(); ++i)
            for (std::size_t j = i + 1; j < domains.size(); ++j) {
                const auto& P = adapted_by_domain.at(domains[i]);
                const auto& Q = adapted_by_domain.at(domains[j]);
                NodeId d = cfg_.divergence == DivergenceKind::kJs
                               ? js_divergence(g_, P, Q)
                               : mmd(g_, P, Q, cfg_.mmd_sigma);
                acc = g_.add(acc, d);
            }
        return acc;
    }

    // L = L_ctr + L_sim + λ_reg · L_reg with masked means per task.
    LossBreakdown total_loss(const std::vector<InteractionRecord>& dataset,
                             const DomainBatch& batch) {
        std::vector<NodeId> ctr_terms, sim_terms;
        std::map<int, std::vector<NodeId>> adapted;
        for (int idx : batch.indices) {
            const InteractionRecord& rec = dataset[idx];
            RecordNodes rn = forward_record(rec);
            adapted[rec.domain_id].push_back(rn.x_hat);
            if (rec.y_ctr) {
                NodeId y = g_.constant(Tensor::scalar(static_cast<double>(*rec.y_ctr)));
                ctr_terms.push_back(g_.bce(rn.ctr_logit, y));
            }
            if (rec.y_sim && rec.domain_kind != DomainKind::kRec) {
                NodeId y = g_.constant(Tensor::scalar(static_cast<double>(*rec.y_sim)));
                sim_terms.push_back(g_.bce(rn.sim_logit, y));
            }
        }
        if (ctr_terms.empty() && sim_terms.empty())
            throw std::invalid_argument("batch carries no labeled records");

        LossBreakdown out;
        NodeId zero = g_.constant(Tensor::scalar(0.0));
        NodeId l_ctr = ctr_terms.empty() ? zero : g_.mean_of(ctr_terms);
        NodeId l_sim = sim_terms.empty() ? zero : g_.mean_of(sim_terms);
        NodeId l_reg = domain_reg(adapted);
        out.total = g_.add(g_.add(l_ctr, l_sim), g_.scale(l_reg, cfg_.lambda_reg));
        out.l_ctr = g_.scalar_value(l_ctr);
        out.l_sim = g_.scalar_value(l_sim);
        out.l_reg = g_.scalar_value(l_reg);
        out.ctr_count = static_cast<int>(ctr_terms.size());
        out.sim_count = static_cast<int>(sim_terms.size());
        return out;
    }

private:
    Graph& g_;
    const ParameterStore& store_;
    const ModelConfig& cfg_;

    NodeId p(const std::string& name) {
        const ParamTensor& pt = store_.at(name);
        return g_.param(name, pt.value, pt.frozen);
    }

    NodeId linear(const std::string& prefix, NodeId in) {
        return g_.add(g_.matmul(p(prefix + ".W"), in), p(prefix + ".b"));
    }

    NodeId row_vec(const std::string& table, int row) {
        return g_.mean_rows(g_.lookup(p(table), {row}));
    }

    NodeId pooled_rows(const std::string& table, std::vector<int> rows) {
        return g_.mean_rows(g_.lookup(p(table), std::move(rows)));
    }

    static std::vector<int> rows_for(const std::vector<long long>& ids, int vocab) {
        if (ids.empty()) return {kEmptyRow};
        std::vector<int> rows;
        for (long long id : ids) rows.push_back(id_to_row(id, vocab));
        return rows;
    }

    // E_{D_k}; the cold domain's row lives in its own tensor.
    NodeId domain_vec(int domain_id) {
        const Tensor& base = store_.value("emb.domain");
        if (domain_id >= 1 && domain_id <= base.shape[0])
            return row_vec("emb.domain", domain_id - 1);
        if (store_.has("emb.domain_cold") && domain_id == base.shape[0] + 1)
            return row_vec("emb.domain_cold", 0);
        throw std::invalid_argument("domain id " + std::to_string(domain_id) + " out of range");
    }

    // scalar extraction by basis dot; stays inside the op catalog
    NodeId component(NodeId v, int idx) {
        Tensor basis = Tensor::zeros(g_.value(v).shape);
        basis.at(idx) = 1.0;
        return g_.dot(v, g_.constant(basis));
    }

    NodeId gate_mix(const std::string& gate, NodeId x_hat, const std::vector<NodeId>& experts) {
        NodeId w = g_.softmax(linear(gate, x_hat));
        NodeId out = g_.mul(component(w, 0), experts[0]);
        for (std::size_t e = 1; e < experts.size(); ++e)
            out = g_.add(out, g_.mul(component(w, static_cast<int>(e)), experts[e]));
        return out;
    }
};

}  // namespace srfm
