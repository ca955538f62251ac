#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "srfm/divergence.hpp"
#include "srfm/model.hpp"

namespace srfm {

// Rank-sum AUC: the probability that a uniformly random positive outranks a
// uniformly random negative, ties counting one half. Single-class input has
// no defined value and is reported as absent.
inline std::optional<double> auc(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores and labels differ in length");
    std::size_t n = scores.size();
    long long pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
        pos += y;
    }
    long long neg = static_cast<long long>(n) - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over tied groups, 1-based
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    double p = static_cast<double>(pos);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

// One line of the line-delimited JSON metric log.
struct MetricRow {
    int domain = 0;  // 0 = aggregate
    std::string task;
    std::string metric;
    double value = 0.0;
    int step = 0;
};

inline nlohmann::json to_json(const MetricRow& r) {
    return nlohmann::json{{"domain", r.domain},
                          {"task", r.task},
                          {"metric", r.metric},
                          {"value", r.value},
                          {"step", r.step}};
}

inline void write_metrics(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
    for (const MetricRow& r : rows) out << to_json(r).dump() << "\n";
}

// Per-domain, per-task evaluation plus the cross-domain alignment scalar.
struct EvalReport {
    // domain -> metric name ("ctr_auc", "sim_auc") -> value; absent when the
    // partition is empty or single-class
    std::map<int, std::map<std::string, double>> domain_metrics;
    double l_ctr = 0.0;
    double l_sim = 0.0;
    int ctr_count = 0;
    int sim_count = 0;
    // mean pairwise JS of the adapted vectors across domains; absent with <2
    // domains present
    std::optional<double> alignment;
    // selection criterion: mean of the per-domain CTR AUCs that exist
    std::optional<double> mean_ctr_auc;
};

namespace eval_detail {

inline double bce_value(double logit, double y) {
    // softplus(logit) - y*logit, stable on both tails
    double sp = logit > 0.0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
    return sp - y * logit;
}

inline std::vector<double> softmax_value(const std::vector<double>& x) {
    double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp(x[i] - mx);
    for (double& v : out) v /= sum;
    return out;
}

}  // namespace eval_detail

// Read-only scoring pass over a dataset; one forward graph per record.
inline EvalReport evaluate(const ParameterStore& store, const ModelConfig& cfg,
                           const std::map<int, std::vector<InteractionRecord>>& by_domain) {
    EvalReport rep;
    std::map<int, std::vector<double>> pbar;  // domain -> running softmax mean of x_hat
    std::map<int, int> pbar_n;
    for (const auto& [k, records] : by_domain) {
        std::vector<double> ctr_scores, sim_scores;
        std::vector<int> ctr_labels, sim_labels;
        for (const InteractionRecord& rec : records) {
            Graph g;
            ModelGraph m(g, store, cfg);
            RecordNodes rn = m.forward_record(rec);
            double ctr_logit = g.scalar_value(rn.ctr_logit);
            std::vector<double> p_hat = eval_detail::softmax_value(g.value(rn.x_hat).data);
            auto& acc = pbar[k];
            if (acc.empty()) acc.assign(p_hat.size(), 0.0);
            for (std::size_t i = 0; i < p_hat.size(); ++i) acc[i] += p_hat[i];
            ++pbar_n[k];
            if (rec.y_ctr) {
                ctr_scores.push_back(1.0 / (1.0 + std::exp(-ctr_logit)));
                ctr_labels.push_back(*rec.y_ctr);
                rep.l_ctr += eval_detail::bce_value(ctr_logit, *rec.y_ctr);
                ++rep.ctr_count;
            }
            if (rec.y_sim && rec.domain_kind != DomainKind::kRec) {
                double sim_logit = g.scalar_value(rn.sim_logit);
                sim_scores.push_back(1.0 / (1.0 + std::exp(-sim_logit)));
                sim_labels.push_back(*rec.y_sim);
                rep.l_sim += eval_detail::bce_value(sim_logit, *rec.y_sim);
                ++rep.sim_count;
            }
        }
        if (auto a = auc(ctr_scores, ctr_labels)) rep.domain_metrics[k]["ctr_auc"] = *a;
        if (auto a = auc(sim_scores, sim_labels)) rep.domain_metrics[k]["sim_auc"] = *a;
    }
    if (rep.ctr_count > 0) rep.l_ctr /= rep.ctr_count;
    if (rep.sim_count > 0) rep.l_sim /= rep.sim_count;

    std::vector<int> domains;
    for (auto& [k, acc] : pbar) {
        for (double& v : acc) v /= pbar_n[k];
        domains.push_back(k);
    }
    if (domains.size() >= 2) {
        double sum = 0.0;
        int pairs = 0;
        for (std::size_t a = 0; a < domains.size(); ++a)
            for (std::size_t b = a + 1; b < domains.size(); ++b) {
                sum += js_divergence_value(pbar[domains[a]], pbar[domains[b]]);
                ++pairs;
            }
        rep.alignment = sum / pairs;
    }
    double auc_sum = 0.0;
    int auc_n = 0;
    for (const auto& [k, metrics] : rep.domain_metrics)
        if (auto it = metrics.find("ctr_auc"); it != metrics.end()) {
            auc_sum += it->second;
            ++auc_n;
        }
    if (auc_n > 0) rep.mean_ctr_auc = auc_sum / auc_n;
    return rep;
}

inline EvalReport evaluate(const ParameterStore& store, const ModelConfig& cfg,
                           const std::vector<InteractionRecord>& records) {
    std::map<int, std::vector<InteractionRecord>> by_domain;
    for (const InteractionRecord& r : records) by_domain[r.domain_id].push_back(r);
    return evaluate(store, cfg, by_domain);
}

}  // namespace srfm
