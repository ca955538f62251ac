#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "srfm/graph.hpp"

namespace srfm {

// Jensen-Shannon divergence between two batches of adapted vectors. Each
// domain's density estimate is the batch mean of the per-sample softmax over
// the H coordinates, so the result is differentiable through both batches,
// nonnegative, symmetric and bounded by ln 2.
inline NodeId js_divergence(Graph& g, const std::vector<NodeId>& batch_p,
                            const std::vector<NodeId>& batch_q) {
    if (batch_p.empty() || batch_q.empty())
        throw std::invalid_argument("js_divergence: empty batch");
    std::vector<NodeId> sp, sq;
    for (NodeId x : batch_p) sp.push_back(g.softmax(x));
    for (NodeId x : batch_q) sq.push_back(g.softmax(x));
    NodeId p = g.mean_of(sp);
    NodeId q = g.mean_of(sq);
    NodeId m = g.scale(g.add(p, q), 0.5);
    NodeId log_m = g.log(m);
    NodeId kl_pm = g.sum(g.mul(p, g.sub(g.log(p), log_m)));
    NodeId kl_qm = g.sum(g.mul(q, g.sub(g.log(q), log_m)));
    return g.scale(g.add(kl_pm, kl_qm), 0.5);
}

// Plain-value JS between two explicit probability vectors; the estimator
// above reduces to this once the batch means are formed.
inline double js_divergence_value(const std::vector<double>& p, const std::vector<double>& q) {
    double kl_pm = 0.0, kl_qm = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_pm += p[i] * (std::log(p[i]) - std::log(m));
        if (q[i] > 0.0) kl_qm += q[i] * (std::log(q[i]) - std::log(m));
    }
    return 0.5 * kl_pm + 0.5 * kl_qm;
}

// Median pairwise Euclidean distance of the pooled batch; the kernel
// bandwidth default. Returns 1 when every point coincides.
inline double median_pairwise_distance(const Graph& g, std::vector<NodeId> pooled) {
    std::vector<double> dists;
    for (std::size_t a = 0; a < pooled.size(); ++a)
        for (std::size_t b = a + 1; b < pooled.size(); ++b) {
            const Tensor& va = g.value(pooled[a]);
            const Tensor& vb = g.value(pooled[b]);
            double d2 = 0.0;
            for (int i = 0; i < va.size(); ++i) {
                double d = va.at(i) - vb.at(i);
                d2 += d * d;
            }
            dists.push_back(std::sqrt(d2));
        }
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

// Biased V-statistic MMD estimator with an RBF kernel. sigma <= 0 selects
// the median heuristic over the pooled batch; either way the bandwidth is a
// constant with no gradient through it.
inline NodeId mmd(Graph& g, const std::vector<NodeId>& batch_p,
                  const std::vector<NodeId>& batch_q, double sigma = 0.0) {
    if (batch_p.empty() || batch_q.empty()) throw std::invalid_argument("mmd: empty batch");
    if (sigma <= 0.0) {
        std::vector<NodeId> pooled = batch_p;
        pooled.insert(pooled.end(), batch_q.begin(), batch_q.end());
        sigma = median_pairwise_distance(g, pooled);
    }
    double inv = -1.0 / (2.0 * sigma * sigma);
    auto kernel = [&](NodeId a, NodeId b) {
        NodeId diff = g.sub(a, b);
        return g.exp(g.scale(g.sum(g.mul(diff, diff)), inv));
    };
    auto mean_kernel = [&](const std::vector<NodeId>& A, const std::vector<NodeId>& B) {
        std::vector<NodeId> terms;
        for (NodeId a : A)
            for (NodeId b : B) terms.push_back(kernel(a, b));
        // canonical summation order, so mmd(P,Q) == mmd(Q,P) bitwise
        std::stable_sort(terms.begin(), terms.end(), [&](NodeId x, NodeId y) {
            return g.scalar_value(x) < g.scalar_value(y);
        });
        return g.mean_of(terms);
    };
    NodeId pp = mean_kernel(batch_p, batch_p);
    NodeId qq = mean_kernel(batch_q, batch_q);
    NodeId pq = mean_kernel(batch_p, batch_q);
    return g.add(g.add(pp, qq), g.scale(pq, -2.0));
}

}  // namespace srfm
