#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "srfm/config.hpp"
#include "srfm/params.hpp"

namespace srfm {

// Per-tensor first/second moment accumulators plus the shared step counter.
// Moments are keyed by parameter name and created lazily with matching shape.
struct AdamState {
    OptimizerConfig cfg;
    long long step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// One bias-corrected Adam update. The whole step is rejected (no tensor is
// touched, the counter does not advance) if any gradient is non-finite, and
// frozen tensors are never written.
inline void adam_step(ParameterStore& store, const std::map<std::string, Tensor>& grads,
                      AdamState& st) {
    for (const auto& [name, g] : grads) {
        if (!g.all_finite())
            throw std::runtime_error("adam_step: non-finite gradient for tensor " + name);
        const ParamTensor& p = store.at(name);
        if (g.shape != p.value.shape)
            throw std::invalid_argument("adam_step: gradient shape mismatch for tensor " + name);
    }
    ++st.step;
    double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
    for (const auto& [name, g] : grads) {
        ParamTensor& p = store.at(name);
        if (p.frozen) continue;
        Tensor& m = st.m.try_emplace(name, Tensor::zeros(p.value.shape)).first->second;
        Tensor& v = st.v.try_emplace(name, Tensor::zeros(p.value.shape)).first->second;
        for (int i = 0; i < g.size(); ++i) {
            m.at(i) = st.cfg.beta1 * m.at(i) + (1.0 - st.cfg.beta1) * g.at(i);
            v.at(i) = st.cfg.beta2 * v.at(i) + (1.0 - st.cfg.beta2) * g.at(i) * g.at(i);
            double m_hat = m.at(i) / bc1;
            double v_hat = v.at(i) / bc2;
            p.value.at(i) -= st.cfg.lr * m_hat / (std::sqrt(v_hat) + st.cfg.eps);
        }
    }
}

}  // namespace srfm
