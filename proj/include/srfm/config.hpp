#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace srfm {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class GatingStrategy { kMean, kCls, kDomain };
enum class DivergenceKind { kJs, kMmd, kNone };
enum class MtlKind { kMlp, kSharedBottom, kMmoe };
enum class PluginKind { kMeanPool, kToyTransformer, kFrozenTable };

inline GatingStrategy gating_from_string(const std::string& s) {
    if (s == "mean") return GatingStrategy::kMean;
    if (s == "cls") return GatingStrategy::kCls;
    if (s == "domain") return GatingStrategy::kDomain;
    throw ConfigError("unknown gating_strategy: " + s);
}
inline const char* to_string(GatingStrategy g) {
    switch (g) {
        case GatingStrategy::kMean: return "mean";
        case GatingStrategy::kCls: return "cls";
        default: return "domain";
    }
}

inline DivergenceKind divergence_from_string(const std::string& s) {
    if (s == "js") return DivergenceKind::kJs;
    if (s == "mmd") return DivergenceKind::kMmd;
    if (s == "none") return DivergenceKind::kNone;
    throw ConfigError("unknown divergence: " + s);
}
inline const char* to_string(DivergenceKind d) {
    switch (d) {
        case DivergenceKind::kJs: return "js";
        case DivergenceKind::kMmd: return "mmd";
        default: return "none";
    }
}

inline MtlKind mtl_from_string(const std::string& s) {
    if (s == "mlp") return MtlKind::kMlp;
    if (s == "shared_bottom") return MtlKind::kSharedBottom;
    if (s == "mmoe") return MtlKind::kMmoe;
    throw ConfigError("unknown mtl_kind: " + s);
}
inline const char* to_string(MtlKind m) {
    switch (m) {
        case MtlKind::kMlp: return "mlp";
        case MtlKind::kSharedBottom: return "shared_bottom";
        default: return "mmoe";
    }
}

inline PluginKind plugin_from_string(const std::string& s) {
    if (s == "mean_pool") return PluginKind::kMeanPool;
    if (s == "toy_transformer") return PluginKind::kToyTransformer;
    if (s == "frozen_table") return PluginKind::kFrozenTable;
    throw ConfigError("unknown text_encoder: " + s);
}
inline const char* to_string(PluginKind p) {
    switch (p) {
        case PluginKind::kMeanPool: return "mean_pool";
        case PluginKind::kToyTransformer: return "toy_transformer";
        default: return "frozen_table";
    }
}

// All model dimensions and hyperparameters in one place.
struct ModelConfig {
    int D = 8;               // token / ID embedding width
    int H = 16;              // hidden representation width
    int K = 3;               // domain count
    static constexpr int kAspectCount = 3;
    int L_q_max = 8;
    int L_i_max = 12;
    int behavior_max = 16;
    int vocab_size = 512;    // token hash space (rows 0,1 reserved)
    int user_vocab = 512;
    int query_vocab = 512;
    int item_vocab = 512;
    int sparse_vocab = 128;
    int expert_count = 4;
    int trunk_width = 64;
    int head_hidden1 = 64;
    int head_hidden2 = 32;
    GatingStrategy gating_strategy = GatingStrategy::kDomain;
    DivergenceKind divergence = DivergenceKind::kJs;
    double lambda_reg = 1.0;
    MtlKind mtl_kind = MtlKind::kMmoe;
    PluginKind text_encoder = PluginKind::kMeanPool;
    int plugin_layers = 1;           // toy_transformer only
    std::string plugin_table_path;   // frozen_table only
    double mmd_sigma = 0.0;          // 0 = per-batch median heuristic

    void validate() const {
        if (D < 1 || H < 1 || K < 1) throw ConfigError("D, H, K must be >= 1");
        if (L_q_max < 1 || L_i_max < 1) throw ConfigError("token truncation lengths must be >= 1");
        if (vocab_size < 3) throw ConfigError("vocab_size must leave room past reserved rows");
        if (expert_count < 1) throw ConfigError("expert_count must be >= 1");
        if (text_encoder == PluginKind::kToyTransformer && plugin_layers < 1)
            throw ConfigError("plugin_layers must be >= 1");
    }
};

// Synthetic multi-domain log generator settings.
struct SynthConfig {
    int K = 3;
    int users_per_domain = 200;
    int items_per_domain = 100;
    double shared_item_fraction = 0.3;
    int vocab_size = 512;
    double shift_strength = 1.0;
    double base_ctr = 0.3;
    int sessions = 1000;
    int records_per_session = 6;
    std::uint64_t seed = 1;
    bool conditional_shift = false;    // per-domain bias on the label sigmoid
    int cold_domain = 0;               // 1-based; 0 = none
    int n_cold = 1000;                 // train records kept for the cold domain
    std::vector<double> title_noise;   // per-domain [0,1]; empty = all 0
    std::vector<double> sparse_noise;  // per-domain [0,1]; empty = all 0

    void validate() const {
        if (K < 1) throw ConfigError("synth.K must be >= 1");
        if (shared_item_fraction < 0.0 || shared_item_fraction > 1.0)
            throw ConfigError("shared_item_fraction must be in [0,1]");
        if (base_ctr <= 0.0 || base_ctr >= 1.0) throw ConfigError("base_ctr must be in (0,1)");
        if (!title_noise.empty() && static_cast<int>(title_noise.size()) != K)
            throw ConfigError("title_noise must list one value per domain");
        for (double t : title_noise)
            if (t < 0.0 || t > 1.0) throw ConfigError("title_noise entries must be in [0,1]");
        if (!sparse_noise.empty() && static_cast<int>(sparse_noise.size()) != K)
            throw ConfigError("sparse_noise must list one value per domain");
        for (double t : sparse_noise)
            if (t < 0.0 || t > 1.0) throw ConfigError("sparse_noise entries must be in [0,1]");
        if (cold_domain < 0 || cold_domain > K) throw ConfigError("cold_domain out of range");
    }
};

struct OptimizerConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int epochs = 5;
    int batch_size = 64;
    std::uint64_t seed = 1;
};

// One JSON document per experiment; everything a run needs.
struct RunConfig {
    ModelConfig model;
    SynthConfig synth;
    OptimizerConfig optimizer;
    TrainConfig train;
    std::string data_dir = "data";
    std::string checkpoint_path = "model.ckpt";
    std::string output_path;
    std::string finetune_split = "freeze_L0_L1";  // freeze_L0 | freeze_L0_L1 | freeze_none
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_enum(const json& j, const char* key, GatingStrategy& out) {
    if (j.contains(key)) out = gating_from_string(j.at(key).get<std::string>());
}
inline void read_enum(const json& j, const char* key, DivergenceKind& out) {
    if (j.contains(key)) out = divergence_from_string(j.at(key).get<std::string>());
}
inline void read_enum(const json& j, const char* key, MtlKind& out) {
    if (j.contains(key)) out = mtl_from_string(j.at(key).get<std::string>());
}
inline void read_enum(const json& j, const char* key, PluginKind& out) {
    if (j.contains(key)) out = plugin_from_string(j.at(key).get<std::string>());
}

}  // namespace detail

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    detail::reject_unknown(
        j,
        {"D", "H", "K", "L_q_max", "L_i_max", "behavior_max", "vocab_size", "user_vocab",
         "query_vocab", "item_vocab", "sparse_vocab", "expert_count", "trunk_width",
         "head_hidden1", "head_hidden2", "gating_strategy", "divergence", "lambda_reg",
         "mtl_kind", "text_encoder", "plugin_layers", "plugin_table_path", "mmd_sigma"},
        "model");
    detail::read(j, "D", c.D);
    detail::read(j, "H", c.H);
    detail::read(j, "K", c.K);
    detail::read(j, "L_q_max", c.L_q_max);
    detail::read(j, "L_i_max", c.L_i_max);
    detail::read(j, "behavior_max", c.behavior_max);
    detail::read(j, "vocab_size", c.vocab_size);
    detail::read(j, "user_vocab", c.user_vocab);
    detail::read(j, "query_vocab", c.query_vocab);
    detail::read(j, "item_vocab", c.item_vocab);
    detail::read(j, "sparse_vocab", c.sparse_vocab);
    detail::read(j, "expert_count", c.expert_count);
    detail::read(j, "trunk_width", c.trunk_width);
    detail::read(j, "head_hidden1", c.head_hidden1);
    detail::read(j, "head_hidden2", c.head_hidden2);
    detail::read_enum(j, "gating_strategy", c.gating_strategy);
    detail::read_enum(j, "divergence", c.divergence);
    detail::read(j, "lambda_reg", c.lambda_reg);
    detail::read_enum(j, "mtl_kind", c.mtl_kind);
    detail::read_enum(j, "text_encoder", c.text_encoder);
    detail::read(j, "plugin_layers", c.plugin_layers);
    detail::read(j, "plugin_table_path", c.plugin_table_path);
    detail::read(j, "mmd_sigma", c.mmd_sigma);
    c.validate();
    return c;
}

inline json to_json(const ModelConfig& c) {
    return json{{"D", c.D},
                {"H", c.H},
                {"K", c.K},
                {"L_q_max", c.L_q_max},
                {"L_i_max", c.L_i_max},
                {"behavior_max", c.behavior_max},
                {"vocab_size", c.vocab_size},
                {"user_vocab", c.user_vocab},
                {"query_vocab", c.query_vocab},
                {"item_vocab", c.item_vocab},
                {"sparse_vocab", c.sparse_vocab},
                {"expert_count", c.expert_count},
                {"trunk_width", c.trunk_width},
                {"head_hidden1", c.head_hidden1},
                {"head_hidden2", c.head_hidden2},
                {"gating_strategy", to_string(c.gating_strategy)},
                {"divergence", to_string(c.divergence)},
                {"lambda_reg", c.lambda_reg},
                {"mtl_kind", to_string(c.mtl_kind)},
                {"text_encoder", to_string(c.text_encoder)},
                {"plugin_layers", c.plugin_layers},
                {"plugin_table_path", c.plugin_table_path},
                {"mmd_sigma", c.mmd_sigma}};
}

inline SynthConfig synth_config_from_json(const json& j) {
    SynthConfig c;
    detail::reject_unknown(j,
                           {"K", "users_per_domain", "items_per_domain", "shared_item_fraction",
                            "vocab_size", "shift_strength", "base_ctr", "sessions",
                            "records_per_session", "seed", "conditional_shift", "cold_domain",
                            "n_cold", "title_noise", "sparse_noise"},
                           "synth");
    detail::read(j, "K", c.K);
    detail::read(j, "users_per_domain", c.users_per_domain);
    detail::read(j, "items_per_domain", c.items_per_domain);
    detail::read(j, "shared_item_fraction", c.shared_item_fraction);
    detail::read(j, "vocab_size", c.vocab_size);
    detail::read(j, "shift_strength", c.shift_strength);
    detail::read(j, "base_ctr", c.base_ctr);
    detail::read(j, "sessions", c.sessions);
    detail::read(j, "records_per_session", c.records_per_session);
    detail::read(j, "seed", c.seed);
    detail::read(j, "conditional_shift", c.conditional_shift);
    detail::read(j, "cold_domain", c.cold_domain);
    detail::read(j, "n_cold", c.n_cold);
    detail::read(j, "title_noise", c.title_noise);
    detail::read(j, "sparse_noise", c.sparse_noise);
    c.validate();
    return c;
}

inline json to_json(const SynthConfig& c) {
    return json{{"K", c.K},
                {"users_per_domain", c.users_per_domain},
                {"items_per_domain", c.items_per_domain},
                {"shared_item_fraction", c.shared_item_fraction},
                {"vocab_size", c.vocab_size},
                {"shift_strength", c.shift_strength},
                {"base_ctr", c.base_ctr},
                {"sessions", c.sessions},
                {"records_per_session", c.records_per_session},
                {"seed", c.seed},
                {"conditional_shift", c.conditional_shift},
                {"cold_domain", c.cold_domain},
                {"n_cold", c.n_cold},
                {"title_noise", c.title_noise},
                {"sparse_noise", c.sparse_noise}};
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    detail::reject_unknown(j,
                           {"model", "synth", "optimizer", "train", "data_dir",
                            "checkpoint_path", "output_path", "finetune_split"},
                           "config root");
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        detail::reject_unknown(o, {"lr", "beta1", "beta2", "eps"}, "optimizer");
        detail::read(o, "lr", c.optimizer.lr);
        detail::read(o, "beta1", c.optimizer.beta1);
        detail::read(o, "beta2", c.optimizer.beta2);
        detail::read(o, "eps", c.optimizer.eps);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        detail::reject_unknown(t, {"epochs", "batch_size", "seed"}, "train");
        detail::read(t, "epochs", c.train.epochs);
        detail::read(t, "batch_size", c.train.batch_size);
        detail::read(t, "seed", c.train.seed);
        if (c.train.batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    }
    detail::read(j, "data_dir", c.data_dir);
    detail::read(j, "checkpoint_path", c.checkpoint_path);
    detail::read(j, "output_path", c.output_path);
    detail::read(j, "finetune_split", c.finetune_split);
    if (c.finetune_split != "freeze_L0" && c.finetune_split != "freeze_L0_L1" &&
        c.finetune_split != "freeze_none")
        throw ConfigError("finetune_split must be freeze_L0 | freeze_L0_L1 | freeze_none");
    return c;
}

inline json to_json(const RunConfig& c) {
    return json{{"model", to_json(c.model)},
                {"synth", to_json(c.synth)},
                {"optimizer",
                 {{"lr", c.optimizer.lr},
                  {"beta1", c.optimizer.beta1},
                  {"beta2", c.optimizer.beta2},
                  {"eps", c.optimizer.eps}}},
                {"train",
                 {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"seed", c.train.seed}}},
                {"data_dir", c.data_dir},
                {"checkpoint_path", c.checkpoint_path},
                {"output_path", c.output_path},
                {"finetune_split", c.finetune_split}};
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace srfm
