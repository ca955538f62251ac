#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "srfm/graph.hpp"
#include "srfm/params.hpp"

namespace srfm {

// Builds a scalar loss from the current store contents. Called repeatedly
// with perturbed parameters, so it must not keep state across calls.
using LossBuilder = std::function<NodeId(Graph&, const ParameterStore&)>;

// relative error as used everywhere: |a - n| / max(1, |a|)
inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

inline double max_rel_error(const std::map<std::string, Tensor>& analytic,
                            const std::map<std::string, Tensor>& numeric) {
    double worst = 0.0;
    for (const auto& [name, a] : analytic) {
        const Tensor& n = numeric.at(name);
        for (int i = 0; i < a.size(); ++i)
            worst = std::max(worst, rel_error(a.at(i), n.at(i)));
    }
    return worst;
}

inline double eval_loss(const LossBuilder& build, const ParameterStore& store) {
    Graph g;
    NodeId loss = build(g, store);
    if (!g.value(loss).is_scalar())
        throw GraphError(loss, "grad_check requires a scalar loss");
    return g.scalar_value(loss);
}

// Central-difference gradient of the loss w.r.t. every trainable coordinate.
inline std::map<std::string, Tensor> numeric_grads(const LossBuilder& build,
                                                   ParameterStore& store, double eps) {
    std::map<std::string, Tensor> out;
    for (auto& [name, p] : store) {
        if (p.frozen) continue;
        Tensor g = Tensor::zeros(p.value.shape);
        for (int i = 0; i < p.value.size(); ++i) {
            double orig = p.value.at(i);
            p.value.at(i) = orig + eps;
            double up = eval_loss(build, store);
            p.value.at(i) = orig - eps;
            double down = eval_loss(build, store);
            p.value.at(i) = orig;
            g.at(i) = (up - down) / (2.0 * eps);
        }
        out[name] = std::move(g);
    }
    return out;
}

inline std::map<std::string, Tensor> analytic_grads(const LossBuilder& build,
                                                    const ParameterStore& store) {
    Graph g;
    NodeId loss = build(g, store);
    if (!g.value(loss).is_scalar())
        throw GraphError(loss, "grad_check requires a scalar loss");
    g.backward(loss);
    std::map<std::string, Tensor> grads = g.param_grads();
    // Trainable tensors the builder never touched still count, with zero grad.
    for (const auto& [name, p] : store)
        if (!p.frozen && !grads.count(name)) grads[name] = Tensor::zeros(p.value.shape);
    return grads;
}

// Max over all trainable coordinates of the relative error between the tape
// gradient and the central difference.
inline double grad_check(const LossBuilder& build, ParameterStore& store, double eps = 1e-5) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
    for (const auto& [name, p] : store)
        if (!p.value.all_finite())
            throw std::invalid_argument("grad_check: non-finite parameter " + name);
    return max_rel_error(analytic_grads(build, store), numeric_grads(build, store, eps));
}

}  // namespace srfm
