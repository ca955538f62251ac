#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "srfm/batch.hpp"
#include "srfm/checkpoint.hpp"
#include "srfm/metrics.hpp"
#include "srfm/model.hpp"
#include "srfm/optimizer.hpp"
#include "srfm/synth.hpp"

namespace srfm {

// Train pool plus per-domain held-out splits as written by write_dataset.
struct SplitData {
    std::vector<InteractionRecord> train;
    std::map<int, std::vector<InteractionRecord>> eval;
    std::map<int, std::vector<InteractionRecord>> test;
};

inline SplitData load_splits(const std::string& dir, const std::vector<int>& domains) {
    SplitData out;
    for (int k : domains) {
        std::string base = dir + "/domain_" + std::to_string(k) + ".";
        for (const InteractionRecord& r : read_records(base + "train.jsonl"))
            out.train.push_back(r);
        out.eval[k] = read_records(base + "eval.jsonl");
        out.test[k] = read_records(base + "test.jsonl");
    }
    return out;
}

struct TrainOutcome {
    Checkpoint best;
    std::vector<MetricRow> metrics;
    bool aborted = false;  // non-finite loss; `best` is the last good state
};

namespace train_detail {

inline std::uint64_t epoch_seed(std::uint64_t base, int epoch) {
    return base ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1));
}

inline void log_eval(std::vector<MetricRow>& rows, const EvalReport& rep, int step) {
    for (const auto& [k, metrics] : rep.domain_metrics) {
        if (auto it = metrics.find("ctr_auc"); it != metrics.end())
            rows.push_back({k, "ctr", "auc", it->second, step});
        if (auto it = metrics.find("sim_auc"); it != metrics.end())
            rows.push_back({k, "sim", "auc", it->second, step});
    }
    if (rep.alignment) rows.push_back({0, "align", "mean_js", *rep.alignment, step});
}

// Shared epoch loop for pretraining and finetuning: mixed-domain batches,
// per-epoch metric rows, best checkpoint by mean per-domain eval CTR AUC,
// abort on the first non-finite loss keeping the last good state.
inline TrainOutcome run_training(ParameterStore store, const ModelConfig& cfg,
                                 const OptimizerConfig& opt, const TrainConfig& tc,
                                 const std::vector<InteractionRecord>& train,
                                 const std::map<int, std::vector<InteractionRecord>>& eval_split) {
    if (train.empty()) throw std::invalid_argument("training split is empty");
    TrainOutcome out;
    out.best.cfg = cfg;
    out.best.store = store;
    out.best.seed = tc.seed;
    AdamState st;
    st.cfg = opt;
    double best_auc = -1.0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        double sum_ctr = 0.0, sum_sim = 0.0, sum_reg = 0.0, sum_total = 0.0;
        int n_batches = 0;
        for (const DomainBatch& batch :
             make_batches(train, tc.batch_size, epoch_seed(tc.seed, epoch))) {
            try {
                Graph g;
                ModelGraph m(g, store, cfg);
                LossBreakdown lb = m.total_loss(train, batch);
                double total = g.scalar_value(lb.total);
                if (!std::isfinite(total)) throw std::runtime_error("non-finite loss");
                g.backward(lb.total);
                adam_step(store, g.param_grads(), st);
                sum_ctr += lb.l_ctr;
                sum_sim += lb.l_sim;
                sum_reg += lb.l_reg;
                sum_total += total;
                ++n_batches;
            } catch (const std::runtime_error&) {
                // divergence: keep the last good checkpoint and stop
                out.aborted = true;
                return out;
            }
        }
        int step = epoch + 1;
        out.metrics.push_back({0, "ctr", "loss", sum_ctr / n_batches, step});
        out.metrics.push_back({0, "sim", "loss", sum_sim / n_batches, step});
        out.metrics.push_back({0, "reg", "loss", sum_reg / n_batches, step});
        out.metrics.push_back({0, "total", "loss", sum_total / n_batches, step});
        EvalReport rep = evaluate(store, cfg, eval_split);
        log_eval(out.metrics, rep, step);
        if (rep.mean_ctr_auc && *rep.mean_ctr_auc > best_auc) {
            best_auc = *rep.mean_ctr_auc;
            out.best.store = store;
            out.best.step = static_cast<long long>(st.step);
        }
    }
    return out;
}

}  // namespace train_detail

// Joint multi-domain pretraining from a fresh initialization.
inline TrainOutcome pretrain(const ModelConfig& cfg, const OptimizerConfig& opt,
                             const TrainConfig& tc, const std::vector<InteractionRecord>& train,
                             const std::map<int, std::vector<InteractionRecord>>& eval_split) {
    return train_detail::run_training(init_params(cfg, tc.seed), cfg, opt, tc, train, eval_split);
}

// Cold-start finetune: restore every pretrained tensor, append a freshly
// initialized domain embedding row and adapt matrix for the new domain, apply
// the freeze split, then train on the cold-domain data only.
inline TrainOutcome finetune(const Checkpoint& pre, FreezeSplit split, const OptimizerConfig& opt,
                             const TrainConfig& tc,
                             const std::vector<InteractionRecord>& cold_train,
                             const std::map<int, std::vector<InteractionRecord>>& cold_eval) {
    if (cold_train.empty()) throw std::invalid_argument("cold-domain training split is empty");
    int base_domains = pre.store.value("emb.domain").shape[0];
    int new_domain = base_domains + 1;
    for (const InteractionRecord& r : cold_train) {
        if (r.domain_id >= 1 && r.domain_id <= base_domains)
            throw std::invalid_argument("cold domain id " + std::to_string(r.domain_id) +
                                        " collides with a pretraining domain");
        if (r.domain_id != new_domain)
            throw std::invalid_argument("cold records must all use domain id " +
                                        std::to_string(new_domain));
    }
    ParameterStore store = pre.store;
    add_cold_domain(store, pre.cfg, new_domain, tc.seed);
    apply_freeze_split(store, split);
    return train_detail::run_training(std::move(store), pre.cfg, opt, tc, cold_train, cold_eval);
}

// One row per record: the domain id followed by the H coordinates of the
// adapted vector, full double precision, space separated.
inline void export_embeddings(const ParameterStore& store, const ModelConfig& cfg,
                              const std::vector<InteractionRecord>& records,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open embedding export path: " + path);
    out.precision(17);
    for (const InteractionRecord& rec : records) {
        Graph g;
        ModelGraph m(g, store, cfg);
        RecordNodes rn = m.forward_record(rec);
        out << rec.domain_id;
        for (double v : g.value(rn.x_hat).data) out << ' ' << v;
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failure on embedding export: " + path);
}

}  // namespace srfm
