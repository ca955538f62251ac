#pragma once

#include <random>
#include <string>

#include "srfm/config.hpp"
#include "srfm/params.hpp"
#include "srfm/text_encoder.hpp"
#include "srfm/tokenizer.hpp"

namespace srfm {

enum class FreezeSplit { kFreezeL0, kFreezeL0L1, kFreezeNone };

inline FreezeSplit freeze_split_from_string(const std::string& s) {
    if (s == "freeze_L0") return FreezeSplit::kFreezeL0;
    if (s == "freeze_L0_L1") return FreezeSplit::kFreezeL0L1;
    if (s == "freeze_none") return FreezeSplit::kFreezeNone;
    throw ConfigError("unknown freeze split: " + s);
}
inline const char* to_string(FreezeSplit s) {
    switch (s) {
        case FreezeSplit::kFreezeL0: return "freeze_L0";
        case FreezeSplit::kFreezeL0L1: return "freeze_L0_L1";
        default: return "freeze_none";
    }
}

// The frozen text-encoder table never trains, whatever the split says.
inline bool always_frozen(const std::string& name) { return name == "plugin.table"; }

inline void apply_freeze_split(ParameterStore& store, FreezeSplit split) {
    for (auto& [name, p] : store) {
        bool freeze = false;
        switch (split) {
            case FreezeSplit::kFreezeL0: freeze = p.level == Level::L0; break;
            case FreezeSplit::kFreezeL0L1:
                freeze = p.level == Level::L0 || p.level == Level::L1;
                break;
            case FreezeSplit::kFreezeNone: freeze = false; break;
        }
        p.frozen = freeze || always_frozen(name);
    }
}

namespace init_detail {

inline std::mt19937_64 rng_for(std::uint64_t seed, const std::string& name) {
    return std::mt19937_64(seed ^ fnv1a64(name));
}

// One tensor per call; each tensor gets its own name-keyed stream so the
// initialization is independent of store insertion order.
inline void add_gaussian(ParameterStore& s, std::uint64_t seed, const std::string& name,
                         std::vector<int> shape, double stddev, Level level) {
    Tensor t = Tensor::zeros(std::move(shape));
    auto rng = rng_for(seed, name);
    t.fill_gaussian(rng, stddev);
    s.add(name, std::move(t), level);
}

inline void add_zeros(ParameterStore& s, const std::string& name, std::vector<int> shape,
                      Level level) {
    s.add(name, Tensor::zeros(std::move(shape)), level);
}

// Biases get a small nonzero init so no relu pre-activation can sit exactly
// on the kink (a dead l1 block would otherwise feed b == 0 straight into l2).
inline void add_linear(ParameterStore& s, std::uint64_t seed, const std::string& prefix,
                       int out, int in, Level level) {
    add_gaussian(s, seed, prefix + ".W", {out, in}, 1.0 / std::sqrt(static_cast<double>(in)),
                 level);
    add_gaussian(s, seed, prefix + ".b", {out}, 0.01, level);
}

}  // namespace init_detail

// Builds the full parameter set for a K-domain model. Deterministic in
// (config, seed).
inline ParameterStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    using namespace init_detail;
    cfg.validate();
    ParameterStore s;
    const int D = cfg.D, H = cfg.H;
    const double emb_std = 0.1;
    const double gate_std = 1.0 / std::sqrt(static_cast<double>(H));

    // L0: embedding tables
    add_gaussian(s, seed, "emb.user_id", {cfg.user_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.query_id", {cfg.query_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.item_id", {cfg.item_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.token", {cfg.vocab_size, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.query_sparse", {cfg.sparse_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.item_sparse", {cfg.sparse_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.attr", {cfg.sparse_vocab, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.behavior_type", {2, D}, emb_std, Level::L0);
    add_gaussian(s, seed, "emb.cls_q", {H}, gate_std, Level::L0);
    add_gaussian(s, seed, "emb.cls_i", {H}, gate_std, Level::L0);
    add_gaussian(s, seed, "emb.domain", {cfg.K, H}, gate_std, Level::L0);
    add_gaussian(s, seed, "user.empty_history", {H}, emb_std, Level::L0);

    // L1: encoding layers
    add_linear(s, seed, "enc.behavior", H, 3 * D, Level::L1);
    add_gaussian(s, seed, "enc.user_id_proj", {H, D}, 1.0 / std::sqrt((double)D), Level::L1);
    add_linear(s, seed, "enc.user", H, 2 * H, Level::L1);
    add_gaussian(s, seed, "enc.Wlm", {H, D}, 1.0 / std::sqrt((double)D), Level::L1);
    add_gaussian(s, seed, "enc.Wid_q", {H, D}, 1.0 / std::sqrt((double)D), Level::L1);
    add_gaussian(s, seed, "enc.Wid_i", {H, D}, 1.0 / std::sqrt((double)D), Level::L1);
    for (const char* tower : {"enc.sparse_q", "enc.sparse_i"}) {
        add_linear(s, seed, std::string(tower) + ".l1", H, D, Level::L1);
        add_linear(s, seed, std::string(tower) + ".l2", H, H, Level::L1);
    }
    if (cfg.text_encoder == PluginKind::kToyTransformer) {
        double std_d = 1.0 / std::sqrt(static_cast<double>(D));
        for (int l = 0; l < cfg.plugin_layers; ++l) {
            std::string p = "enc.plugin.l" + std::to_string(l);
            add_gaussian(s, seed, p + ".W1", {D, D}, std_d, Level::L1);
            add_gaussian(s, seed, p + ".W2", {D, D}, std_d, Level::L1);
        }
    } else if (cfg.text_encoder == PluginKind::kFrozenTable) {
        Tensor table = load_frozen_table(cfg.plugin_table_path, cfg.vocab_size, D);
        s.add("plugin.table", std::move(table), Level::L1, /*frozen=*/true);
    }

    // L2plus: domain-adaptive maps, trunk, heads
    double std_4h = 1.0 / std::sqrt(4.0 * H);
    for (int k = 1; k <= cfg.K; ++k)
        add_gaussian(s, seed, "adapt.W." + std::to_string(k), {H, 4 * H}, std_4h, Level::L2plus);

    const int T = cfg.trunk_width;
    switch (cfg.mtl_kind) {
        case MtlKind::kMlp:
            for (const char* task : {"trunk.ctr", "trunk.sim"}) {
                add_linear(s, seed, std::string(task) + ".l1", T, H, Level::L2plus);
                add_linear(s, seed, std::string(task) + ".l2", T, T, Level::L2plus);
            }
            break;
        case MtlKind::kSharedBottom:
            add_linear(s, seed, "trunk.shared.l1", T, H, Level::L2plus);
            add_linear(s, seed, "trunk.shared.l2", T, T, Level::L2plus);
            add_linear(s, seed, "trunk.ctr", T, T, Level::L2plus);
            add_linear(s, seed, "trunk.sim", T, T, Level::L2plus);
            break;
        case MtlKind::kMmoe:
            for (int e = 0; e < cfg.expert_count; ++e)
                add_linear(s, seed, "trunk.expert" + std::to_string(e), T, H, Level::L2plus);
            add_linear(s, seed, "trunk.gate.ctr", cfg.expert_count, H, Level::L2plus);
            add_linear(s, seed, "trunk.gate.sim", cfg.expert_count, H, Level::L2plus);
            break;
    }

    add_linear(s, seed, "head.ctr.l1", cfg.head_hidden1, T, Level::L2plus);
    add_linear(s, seed, "head.ctr.l2", cfg.head_hidden2, cfg.head_hidden1, Level::L2plus);
    add_linear(s, seed, "head.ctr.l3", 1, cfg.head_hidden2, Level::L2plus);
    add_linear(s, seed, "head.sim.l1", cfg.head_hidden1, 2 * H, Level::L2plus);
    add_linear(s, seed, "head.sim.l2", cfg.head_hidden2, cfg.head_hidden1, Level::L2plus);
    add_linear(s, seed, "head.sim.l3", 1, cfg.head_hidden2, Level::L2plus);
    return s;
}

// Finetune entry: a fresh domain embedding row and adapt matrix for domain
// K+1. Both live at L2plus so no freeze split ever pins them; the pretrained
// emb.domain table itself stays untouched.
inline void add_cold_domain(ParameterStore& s, const ModelConfig& cfg, int new_domain,
                            std::uint64_t seed) {
    using namespace init_detail;
    const Tensor& ed = s.value("emb.domain");
    if (new_domain != ed.shape[0] + 1)
        throw std::invalid_argument("cold domain id must extend the existing domain range");
    add_gaussian(s, seed, "emb.domain_cold", {1, cfg.H},
                 1.0 / std::sqrt(static_cast<double>(cfg.H)), Level::L2plus);
    add_gaussian(s, seed, "adapt.W." + std::to_string(new_domain), {cfg.H, 4 * cfg.H},
                 1.0 / std::sqrt(4.0 * cfg.H), Level::L2plus);
}

// Domains covered by a store: the pretrained table plus an optional cold row.
inline int domain_count(const ParameterStore& s) {
    int base = s.value("emb.domain").shape[0];
    return base + (s.has("emb.domain_cold") ? 1 : 0);
}

}  // namespace srfm
